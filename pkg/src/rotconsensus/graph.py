"""Graphs, generalized Laplacians and stress matrices.

Vertices are 0-indexed everywhere inside the package; :meth:`Graph.from_one_based`
and :meth:`Graph.to_one_based` convert at the configuration boundary.
"""
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import spectral
from .exceptions import ContractError, DimensionError, GraphError, StressSynthesisError


@dataclass(frozen=True)
class Graph:
    """Undirected connected weighted graph.

    ``edges`` holds ``(i, j, weight)`` triples with ``i < j``.  Plain
    ``(i, j)`` pairs get unit weight.
    """

    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"graph needs at least one vertex, got n={self.n}")
        normalized = []
        seen = set()
        for edge in self.edges:
            if len(edge) == 2:
                i, j = edge
                w = 1.0
            elif len(edge) == 3:
                i, j, w = edge
            else:
                raise GraphError(f"edge must be (i, j) or (i, j, w), got {edge!r}")
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise GraphError(f"self loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i}, {j}) outside vertex range 0..{self.n - 1}")
            if not np.isfinite(w):
                raise GraphError(f"edge ({i}, {j}) has non-finite weight")
            i, j = min(i, j), max(i, j)
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            normalized.append((i, j, w))
        object.__setattr__(self, "edges", tuple(normalized))
        if not self.is_connected():
            raise GraphError("graph is not connected")

    @classmethod
    def from_one_based(cls, n, edges):
        return cls(n, tuple((e[0] - 1, e[1] - 1, *e[2:]) for e in edges))

    def to_one_based(self):
        return [[i + 1, j + 1, w] for i, j, w in self.edges]

    def is_connected(self):
        if self.n == 1:
            return True
        if not self.edges:
            return False
        rows, cols = zip(*[(i, j) for i, j, _ in self.edges])
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))
        count, _ = connected_components(adj, directed=False)
        return count == 1

    def pairs(self):
        return [(i, j) for i, j, _ in self.edges]

    def neighbors(self, i):
        out = []
        for a, b, _ in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def adjacency_pattern(self):
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j, _ in self.edges:
            A[i, j] = A[j, i] = True
        return A

    def with_weights(self, weights):
        return Graph(self.n, tuple((i, j, w) for (i, j, _), w in zip(self.edges, weights)))


@dataclass(frozen=True)
class Configuration:
    """Target positions, one row per agent."""

    positions: np.ndarray

    def __post_init__(self):
        P = np.array(self.positions, dtype=float)
        if P.ndim != 2 or P.shape[1] not in (2, 3):
            raise DimensionError(f"positions must be n x d with d in (2, 3), got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ContractError("positions must be finite")
        P.setflags(write=False)
        object.__setattr__(self, "positions", P)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]

    def stacked(self):
        """Stacked state ``[z_1^T, ..., z_n^T]^T``."""
        return self.positions.ravel().copy()

    @classmethod
    def from_stacked(cls, z, d):
        return cls(np.asarray(z, dtype=float).reshape(-1, d))

    def affine_rank(self):
        """Rank of ``[1, P]``; equals ``d + 1`` when the points affinely span R^d."""
        return int(np.linalg.matrix_rank(np.column_stack([np.ones(self.n), self.positions])))


def build_laplacian(g):
    """Generalized Laplacian of a weighted graph.

    The diagonal is the negated off-diagonal row sum, so zero row sums hold
    by construction regardless of the sign of the weights.
    """
    L = np.zeros((g.n, g.n))
    for i, j, w in g.edges:
        L[i, j] = L[j, i] = -w
    L[np.diag_indices(g.n)] = -L.sum(axis=1)
    return L


def _edge_stress(n, edges, weights):
    S = np.zeros((n, n))
    for (i, j), w in zip(edges, weights):
        S[i, j] -= w
        S[j, i] -= w
        S[i, i] += w
        S[j, j] += w
    return S


def equilibrium_constraints(g, config):
    """Matrix ``A`` with ``A w = 0`` iff the edge weights ``w`` are an equilibrium stress.

    Row block ``i`` encodes ``sum_j w_ij (p_i - p_j) = 0``.
    """
    P = config.positions
    d = config.d
    A = np.zeros((g.n * d, len(g.edges)))
    for e, (i, j, _) in enumerate(g.edges):
        diff = P[i] - P[j]
        A[i * d:(i + 1) * d, e] += diff
        A[j * d:(j + 1) * d, e] -= diff
    return A


def _nullspace(A, rtol=1e-10):
    _, s, vt = np.linalg.svd(A)
    cutoff = rtol * max(1.0, s[0] if s.size else 0.0)
    r = int(np.count_nonzero(s > cutoff))
    return vt[r:].T


def _max_min_eigenvalue(mats, rng, restarts, iters):
    """Maximise ``lambda_min(sum_k c_k M_k)`` over the unit ball.

    The objective is concave, so projected ascent on a log-sum-exp soft-min
    with increasing sharpness converges; restarts guard against the
    plateaus of the nonsmooth limit.
    """
    k = len(mats)
    r = mats[0].shape[0]
    stack = np.array(mats)
    betas = np.geomspace(4.0 * np.sqrt(r), 4e3 * np.sqrt(r), 8)

    def lam_min(c):
        return np.linalg.eigvalsh(np.tensordot(c, stack, axes=1))[0]

    best_c, best_val = None, -np.inf
    for _ in range(restarts):
        c = rng.standard_normal(k)
        c /= np.linalg.norm(c)
        for beta in betas:
            step = 1.0 / beta
            for _ in range(iters):
                mu, V = np.linalg.eigh(np.tensordot(c, stack, axes=1))
                p = np.exp(-beta * (mu - mu[0]))
                p /= p.sum()
                # d mu_i / d c_k = v_i^T M_k v_i
                grad = np.einsum("i,kab,ai,bi->k", p, stack, V, V)
                c = c + step * grad
                norm = np.linalg.norm(c)
                if norm > 1.0:
                    c /= norm
        val = lam_min(c)
        if val > best_val:
            best_c, best_val = c, val
    return best_c, best_val


def compute_stress_matrix(g, config, seed=0, restarts=8, iters=60, tol=1e-9):
    """Synthesize a PSD stress matrix of rank ``n - d - 1`` for ``(g, config)``.

    The equilibrium weight vectors form the nullspace of
    :func:`equilibrium_constraints`.  Within that space we look for the
    combination maximising the smallest eigenvalue of the stress restricted
    to the orthogonal complement of ``span{1, x, y(, z)}``; a positive
    optimum certifies the rank condition.  The returned stress is scaled so
    its largest edge weight in magnitude is one.

    Edge weights stored on ``g`` are ignored; only its pattern is used.
    """
    n, d = config.n, config.d
    if n != g.n:
        raise DimensionError(f"configuration has {n} points, graph has {g.n} vertices")
    required = n - d - 1
    if required < 1:
        raise ContractError(f"stress synthesis needs n >= d + 2, got n={n}, d={d}")
    if config.affine_rank() != d + 1:
        raise ContractError("configuration does not affinely span R^d")

    basis = _nullspace(equilibrium_constraints(g, config))
    if basis.shape[1] == 0:
        raise StressSynthesisError(
            "graph admits no nonzero equilibrium stress for this configuration",
            achieved_rank=0,
            required_rank=required,
        )

    Q, _ = np.linalg.qr(np.column_stack([np.ones(n), config.positions]), mode="complete")
    complement = Q[:, d + 1:]
    pairs = g.pairs()
    restricted = [
        complement.T @ _edge_stress(n, pairs, w) @ complement for w in basis.T
    ]
    # Frobenius-orthonormal basis keeps the ascent well conditioned
    flat = np.array([M.ravel() for M in restricted]).T
    u, s, vt = np.linalg.svd(flat, full_matrices=False)
    keep = s > 1e-12 * s[0]
    mats = [col.reshape(required, required) for col in u[:, keep].T]
    to_weights = basis @ (vt[keep].T / s[keep])

    rng = np.random.default_rng(seed)
    c, value = _max_min_eigenvalue(mats, rng, restarts, iters)
    weights = to_weights @ c
    S = _edge_stress(n, pairs, weights)
    scale = np.abs(weights).max()
    eigs = np.linalg.eigvalsh(S)
    positive = int(np.count_nonzero(eigs > tol * max(1.0, eigs[-1])))
    if value <= tol * max(1.0, eigs[-1]) or positive != required:
        raise StressSynthesisError(
            f"no PSD stress of rank {required} found (best min eigenvalue {value:.3e}, "
            f"{positive} positive eigenvalues)",
            achieved_rank=positive,
            required_rank=required,
        )
    S = S / scale
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class ValidationReport:
    symmetry_residual: float
    row_sum_residual: float
    min_eigenvalue: float
    rank: int
    pattern_ok: bool
    expected_rank: int = None
    tol: float = 1e-8

    @property
    def symmetric(self):
        return self.symmetry_residual <= self.tol

    @property
    def zero_row_sums(self):
        return self.row_sum_residual <= self.tol

    @property
    def psd(self):
        return self.min_eigenvalue >= -self.tol

    @property
    def rank_ok(self):
        return self.expected_rank is None or self.rank == self.expected_rank

    @property
    def passed(self):
        return self.symmetric and self.zero_row_sums and self.psd and self.pattern_ok and self.rank_ok

    def failures(self):
        names = ["symmetric", "zero_row_sums", "psd", "pattern_ok", "rank_ok"]
        return [name for name in names if not getattr(self, name)]


def validate_laplacian(L, g, expected_rank=None, tol=1e-8):
    """Check the structural properties of a (generalized) Laplacian against ``g``."""
    L = np.asarray(L, dtype=float)
    if L.shape != (g.n, g.n):
        raise DimensionError(f"expected {g.n}x{g.n} matrix, got {L.shape}")
    scale = max(1.0, np.abs(L).max())
    w = np.linalg.eigvalsh(0.5 * (L + L.T))
    off = ~np.eye(g.n, dtype=bool)
    stray = np.abs(L[off & ~g.adjacency_pattern()])
    return ValidationReport(
        symmetry_residual=float(np.abs(L - L.T).max()),
        row_sum_residual=float(np.linalg.norm(L @ np.ones(g.n))),
        min_eigenvalue=float(w[0]),
        rank=int(np.count_nonzero(w > spectral.DEFAULT_TOL * max(1.0, w[-1]))),
        pattern_ok=bool(stray.size == 0 or stray.max() <= tol * scale),
        expected_rank=expected_rank,
        tol=tol,
    )
