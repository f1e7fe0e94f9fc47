"""Stability of consensus systems with rotated local frames.

The system is ``z' = -H L~ z`` with ``L~ = L (x) I_d`` and ``H`` block
diagonal orthogonal.  Its nonzero spectrum coincides with that of
``-U1~^T H U1~ Lambda~``, and a positive definite symmetric part of
``U1~^T H U1~`` places all of it in the open left half-plane.  Every
report carries both this gamma certificate and the raw spectrum so that
the two can be compared.
"""
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .ambiguity import AgentAmbiguity, assemble_global, block_eigenvalues, wrap_angle
from .exceptions import ContractError, DimensionError

log = logging.getLogger(__name__)

DEFAULT_TOL = spectral.DEFAULT_TOL


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"

    def __str__(self):
        return self.value


def _classify(margin, tol):
    """Positive margin means stable."""
    if margin > tol:
        return Verdict.STABLE
    if margin < -tol:
        return Verdict.UNSTABLE
    return Verdict.MARGINAL


def _ambiguity_matrix(amb):
    return np.asarray(getattr(amb, "matrix", amb), dtype=float)


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict
    min_eig_gamma: float
    spectrum: np.ndarray = field(repr=False)
    max_real_nonzero: float
    zero_multiplicity: int
    expected_zero_multiplicity: int
    spectral_verdict: Verdict
    tolerance: float

    @property
    def consistent(self):
        """False when gamma and spectrum give opposite signs outside the band."""
        decided = {Verdict.STABLE, Verdict.UNSTABLE}
        if self.verdict in decided and self.spectral_verdict in decided:
            return self.verdict == self.spectral_verdict
        return True

    def to_dict(self):
        return {
            "verdict": str(self.verdict),
            "spectral_verdict": str(self.spectral_verdict),
            "consistent": self.consistent,
            "min_eig_gamma": self.min_eig_gamma,
            "max_real_nonzero": self.max_real_nonzero,
            "zero_multiplicity": self.zero_multiplicity,
            "expected_zero_multiplicity": self.expected_zero_multiplicity,
            "tolerance": self.tolerance,
            "spectrum": [[float(v.real), float(v.imag)] for v in self.spectrum],
        }


def _lifted_range(L, d, tol):
    split = spectral.split_range_nullspace(L, tol)
    if split.rank == 0:
        raise ContractError("L has an empty range; nothing to stabilise")
    U1, lam, _ = split.lift(d)
    return split, U1, lam


def _dims(L, H):
    n = L.shape[0]
    if H.shape[0] != H.shape[1] or n == 0 or H.shape[0] % n:
        raise DimensionError(f"ambiguity of shape {H.shape} does not fit L of size {n}")
    return n, H.shape[0] // n


def reduced_matrix(L, amb, tol=DEFAULT_TOL):
    """``U1~^T H U1~`` for the lifted range basis of ``L``."""
    L = np.asarray(L, dtype=float)
    H = _ambiguity_matrix(amb)
    _, d = _dims(L, H)
    _, U1, _ = _lifted_range(L, d, tol)
    return U1.T @ H @ U1


def reduced_spectrum(L, amb, tol=DEFAULT_TOL):
    """Spectrum of ``-U1~^T H U1~ Lambda~``: the nonzero part of ``sigma(-H L~)``."""
    L = np.asarray(L, dtype=float)
    H = _ambiguity_matrix(amb)
    _, d = _dims(L, H)
    _, U1, lam = _lifted_range(L, d, tol)
    return spectral.general_eig(-(U1.T @ H @ U1) * lam)


def system_matrix(L, amb):
    """``-H (L (x) I_d)``."""
    L = np.asarray(L, dtype=float)
    H = _ambiguity_matrix(amb)
    _, d = _dims(L, H)
    return -H @ spectral.kron(L, np.eye(d))


def min_eig_gamma(L, amb, tol=DEFAULT_TOL):
    M = reduced_matrix(L, amb, tol)
    return float(np.linalg.eigvalsh(spectral.gamma(M))[0])


def stability_check(L, amb, tol=DEFAULT_TOL):
    """Gamma certificate plus full spectrum of ``-H L~``.

    ``amb`` is an :class:`~rotconsensus.ambiguity.AmbiguitySet` or a raw
    ``nd x nd`` matrix.
    """
    L = np.asarray(L, dtype=float)
    H = _ambiguity_matrix(amb)
    n, d = _dims(L, H)
    split, U1, _ = _lifted_range(L, d, tol)
    M = U1.T @ H @ U1
    gmin = float(np.linalg.eigvalsh(spectral.gamma(M))[0])

    A = -H @ spectral.kron(L, np.eye(d))
    spectrum = spectral.general_eig(A)
    n_zero = (n - split.rank) * d
    by_modulus = np.argsort(np.abs(spectrum), kind="stable")
    nonzero = spectrum[by_modulus[n_zero:]]
    max_real = float(nonzero.real.max())
    zero_tol = tol * max(1.0, float(split.Lambda[0]))
    zero_count = int(np.count_nonzero(np.abs(spectrum) <= zero_tol))

    return StabilityReport(
        verdict=_classify(gmin, tol),
        min_eig_gamma=gmin,
        spectrum=spectrum,
        max_real_nonzero=max_real,
        zero_multiplicity=zero_count,
        expected_zero_multiplicity=n_zero,
        spectral_verdict=_classify(-max_real, tol),
        tolerance=tol,
    )


def sufficient_check(amb, tol=DEFAULT_TOL):
    """``(gamma(H) > 0, lambda_min(gamma(H)))``; a positive answer implies stability."""
    ok, lo = spectral.is_positive_definite(spectral.gamma(_ambiguity_matrix(amb)), tol)
    return ok, lo


def homogeneous_margin(theta, proper=True, d=2, tol=DEFAULT_TOL):
    """Closed-form verdict for one shared ambiguity ``H`` on every agent.

    Proper rotations are stable exactly for ``|theta| < pi/2``; ``|theta| = pi/2``
    (within ``tol``) is reported as marginal.  Improper rotations are never
    stable.
    """
    if d not in (2, 3):
        raise DimensionError(f"unsupported dimension {d}")
    if not proper:
        return Verdict.UNSTABLE
    gap = np.pi / 2 - abs(wrap_angle(theta))
    return _classify(gap, tol)


def predicted_rotated_spectrum(L, theta, d=2, proper=True):
    """Eigenvalues of ``-(L (x) H)`` from those of ``-L`` and ``H`` separately."""
    w, _ = spectral.symmetric_eig(L)
    mu = block_eigenvalues(wrap_angle(theta), proper, d)
    return np.outer(-w, mu).ravel()


def check_rotation_lemma(L, theta, d=2, proper=True):
    """Distance between computed and predicted ``sigma(-(I (x) H)(L (x) I))``.

    Returns the largest matched distance under an optimal assignment.
    """
    L = np.asarray(L, dtype=float)
    amb = assemble_global([AgentAmbiguity(theta, proper, d)] * L.shape[0])
    computed = spectral.general_eig(system_matrix(L, amb))
    return spectral.match_spectra(computed, predicted_rotated_spectrum(L, theta, d, proper))


@dataclass
class SweepGrid:
    """Minimum eigenvalue of ``gamma(U1~^T H U1~)`` over a grid of angles.

    For 2-D grids ``values[a, b]`` belongs to ``axes[0][a]`` (first free
    agent) and ``axes[1][b]`` (second free agent).
    """

    axes: list
    values: np.ndarray
    fixed_agents: dict = field(default_factory=dict)
    free_agents: tuple = ()
    proper: bool = True

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(a.size for a in self.axes):
            raise DimensionError(
                f"values shape {self.values.shape} does not match axes "
                f"{tuple(a.size for a in self.axes)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ContractError("sweep produced non-finite values")

    def stable_mask(self, tol=DEFAULT_TOL):
        return self.values > tol


def sweep_homogeneous(L, d, proper, thetas, tol=DEFAULT_TOL):
    L = np.asarray(L, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ContractError("thetas must be nonempty")
    _, U1, _ = _lifted_range(L, d, tol)
    n = L.shape[0]
    values = np.empty(thetas.size)
    for k, theta in enumerate(thetas):
        H = assemble_global([AgentAmbiguity(theta, proper, d)] * n).matrix
        values[k] = np.linalg.eigvalsh(spectral.gamma(U1.T @ H @ U1))[0]
    return SweepGrid(axes=[thetas], values=values, proper=proper)


def sweep_heterogeneous(L, d, free_agents, thetas1, thetas2, fixed, proper=True, tol=DEFAULT_TOL):
    """Chart the gamma certificate over the angles of two free agents.

    ``fixed`` maps every other agent index to its
    :class:`~rotconsensus.ambiguity.AgentAmbiguity`; the free agents get
    proper (or, with ``proper=False``, improper) rotations.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    a, b = (int(i) for i in free_agents)
    if a == b:
        raise ContractError("free agents must be distinct")
    for i in (a, b, *fixed):
        if not 0 <= i < n:
            raise IndexError(f"agent index {i} out of range 0..{n - 1}")
    if set(fixed) & {a, b}:
        raise ContractError("free agents cannot also be fixed")
    missing = set(range(n)) - set(fixed) - {a, b}
    if missing:
        raise ContractError(f"agents {sorted(missing)} neither fixed nor free")

    thetas1 = np.asarray(thetas1, dtype=float)
    thetas2 = np.asarray(thetas2, dtype=float)
    _, U1, _ = _lifted_range(L, d, tol)
    # gamma(U1^T H U1) = U1^T gamma(H) U1 and gamma(H) is block diagonal
    G = spectral.gamma(assemble_global([fixed.get(i, AgentAmbiguity(0.0, True, d)) for i in range(n)]).matrix)
    sa, sb = slice(a * d, (a + 1) * d), slice(b * d, (b + 1) * d)
    Ua, Ub = U1[sa], U1[sb]
    base = U1.T @ G @ U1 - Ua.T @ G[sa, sa] @ Ua - Ub.T @ G[sb, sb] @ Ub
    blocks1 = [spectral.gamma(AgentAmbiguity(t, proper, d).matrix) for t in thetas1]
    blocks2 = [spectral.gamma(AgentAmbiguity(t, proper, d).matrix) for t in thetas2]
    part1 = [Ua.T @ B @ Ua for B in blocks1]
    part2 = [Ub.T @ B @ Ub for B in blocks2]
    values = np.empty((thetas1.size, thetas2.size))
    for p, A1 in enumerate(part1):
        stack = base + A1 + np.array(part2)
        values[p] = np.linalg.eigvalsh(stack)[:, 0]
    return SweepGrid(
        axes=[thetas1, thetas2],
        values=values,
        fixed_agents=dict(fixed),
        free_agents=(a, b),
        proper=proper,
    )


@dataclass
class MixedEvidence:
    trials: int
    stable_count: int
    spectrally_stable_count: int
    max_min_eig_gamma: float
    max_real_nonzero_min: float
    counterexamples: list

    def to_dict(self):
        return {
            "trials": self.trials,
            "stable_count": self.stable_count,
            "spectrally_stable_count": self.spectrally_stable_count,
            "max_min_eig_gamma": self.max_min_eig_gamma,
            "max_real_nonzero_min": self.max_real_nonzero_min,
            "counterexamples": self.counterexamples,
        }


def mixed_rotation_evidence(L, d, improper_agent, trials, seed=0, improper_theta=0.0, tol=DEFAULT_TOL):
    """Search for a stable system with one improper block.

    Every other agent draws a proper angle uniformly from ``(-pi, pi]``.
    ``stable_count`` tallies gamma-stable draws and
    ``spectrally_stable_count`` spectrally stable ones; each offending draw is
    logged and kept in ``counterexamples``.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if not 0 <= improper_agent < n:
        raise IndexError(f"agent index {improper_agent} out of range")
    rng = np.random.default_rng(seed)
    stable = spectral_stable = 0
    best_gamma = -np.inf
    best_real = np.inf
    counterexamples = []
    for _ in range(trials):
        thetas = rng.uniform(-np.pi, np.pi, n)
        agents = [AgentAmbiguity(t, True, d) for t in thetas]
        agents[improper_agent] = AgentAmbiguity(improper_theta, False, d)
        report = stability_check(L, assemble_global(agents), tol)
        best_gamma = max(best_gamma, report.min_eig_gamma)
        best_real = min(best_real, report.max_real_nonzero)
        hit = False
        if report.verdict is Verdict.STABLE:
            stable += 1
            hit = True
        if report.spectral_verdict is Verdict.STABLE:
            spectral_stable += 1
            hit = True
        if hit:
            entry = {
                "thetas": [a.theta for a in agents],
                "proper": [a.proper for a in agents],
                "min_eig_gamma": report.min_eig_gamma,
                "max_real_nonzero": report.max_real_nonzero,
            }
            log.warning("stable draw with improper agent %d: %s", improper_agent, entry)
            counterexamples.append(entry)
    return MixedEvidence(
        trials=trials,
        stable_count=stable,
        spectrally_stable_count=spectral_stable,
        max_min_eig_gamma=float(best_gamma),
        max_real_nonzero_min=float(best_real),
        counterexamples=counterexamples,
    )
