"""Per-agent rotational ambiguities and the global block-diagonal matrix.

A local ambiguity is ``H_i = R(theta_i) T_i`` where ``R`` rotates about the
z-axis (in 3-D) and ``T_i`` is either the identity (proper rotation,
``det = +1``) or flips the last axis (improper rotation, ``det = -1``).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .exceptions import ContractError, DimensionError

SUPPORTED_DIMS = (2, 3)


def wrap_angle(theta):
    """Map an angle in radians onto ``(-pi, pi]``."""
    wrapped = float(np.mod(theta + np.pi, 2.0 * np.pi) - np.pi)
    if wrapped <= -np.pi:
        wrapped += 2.0 * np.pi
    return wrapped


def _check_dim(d):
    if d not in SUPPORTED_DIMS:
        raise DimensionError(f"unsupported dimension {d}; expected 2 or 3")


def rotation(theta, d=2):
    """Proper rotation by ``theta``; in 3-D the axis is z."""
    _check_dim(d)
    c, s = np.cos(theta), np.sin(theta)
    R = np.eye(d)
    R[:2, :2] = [[c, -s], [s, c]]
    return R


def reflection(d=2):
    """The ``T`` factor of an improper rotation: ``diag(1, ..., 1, -1)``."""
    _check_dim(d)
    T = np.eye(d)
    T[-1, -1] = -1.0
    return T


def improper_rotation(theta, d=2):
    return rotation(theta, d) @ reflection(d)


def block_eigenvalues(theta, proper, d):
    """Closed-form spectrum of a single ambiguity block.

    Proper: ``{e^{i theta}, e^{-i theta}}`` plus ``1`` in 3-D.
    Improper: ``{1, -1}`` in 2-D (a reflection), ``{-1, e^{+-i theta}}`` in 3-D.
    """
    _check_dim(d)
    pair = [np.exp(1j * theta), np.exp(-1j * theta)]
    if proper:
        return np.array(pair + [1.0] * (d == 3), dtype=complex)
    if d == 2:
        return np.array([1.0, -1.0], dtype=complex)
    return np.array(pair + [-1.0], dtype=complex)


@dataclass(frozen=True)
class AgentAmbiguity:
    theta: float = 0.0
    proper: bool = True
    d: int = 2

    def __post_init__(self):
        _check_dim(self.d)
        if not np.isfinite(self.theta):
            raise ContractError(f"theta must be finite, got {self.theta}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "proper", bool(self.proper))

    @property
    def matrix(self):
        if self.proper:
            return rotation(self.theta, self.d)
        return improper_rotation(self.theta, self.d)

    def eigenvalues(self):
        return block_eigenvalues(self.theta, self.proper, self.d)


@dataclass(frozen=True)
class AmbiguitySet:
    agents: tuple
    matrix: np.ndarray = field(repr=False, compare=False)

    @property
    def n(self):
        return len(self.agents)

    @property
    def d(self):
        return self.agents[0].d

    def block(self, i):
        d = self.d
        return self.matrix[i * d:(i + 1) * d, i * d:(i + 1) * d]

    def replace(self, updates):
        """New set with agents at the given indices swapped out."""
        agents = list(self.agents)
        for i, agent in updates.items():
            agents[i] = agent
        return assemble_global(agents)


def assemble_global(agents):
    """Assemble ``bdiag(H_1, ..., H_N)`` from per-agent descriptors."""
    agents = tuple(agents)
    if not agents:
        raise ContractError("ambiguity set must contain at least one agent")
    dims = {a.d for a in agents}
    if len(dims) != 1:
        raise DimensionError(f"mixed agent dimensions {sorted(dims)}")
    H = block_diag(*[a.matrix for a in agents])
    H.setflags(write=False)
    return AmbiguitySet(agents=agents, matrix=H)


def homogeneous(n, theta=0.0, proper=True, d=2):
    return assemble_global([AgentAmbiguity(theta, proper, d)] * n)


def unambiguous(n, d=2):
    return homogeneous(n, 0.0, True, d)
