"""Time-domain simulation of pinned consensus systems.

Leaders hold their state constant, so their block-rows of ``-H L~`` are
zeroed.  Followers integrate the remaining linear dynamics either exactly
(one matrix exponential per step size) or with classical RK4.
"""
import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from . import spectral
from .exceptions import ContractError, DegenerateSystemError, DimensionError, FitError
from .stability import system_matrix

DIVERGENCE_NORM = 1e12


class Method(str, enum.Enum):
    EXACT_EXP = "ExactExp"
    RK4 = "RK4"

    def __str__(self):
        return self.value


class Classification(str, enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    UNDETERMINED = "Undetermined"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class PinnedSystem:
    system_matrix: np.ndarray
    leaders: frozenset
    d: int

    @property
    def n(self):
        return self.system_matrix.shape[0] // self.d

    def leader_indices(self):
        """Indices of leader coordinates inside the stacked state."""
        return np.array(
            [i * self.d + k for i in sorted(self.leaders) for k in range(self.d)], dtype=int
        )

    def follower_indices(self):
        mask = np.ones(self.system_matrix.shape[0], dtype=bool)
        mask[self.leader_indices()] = False
        return np.flatnonzero(mask)

    def spectrum(self):
        return spectral.general_eig(self.system_matrix)

    def follower_spectrum(self):
        """Spectrum of the follower block, i.e. without the leaders' zero modes."""
        f = self.follower_indices()
        return spectral.general_eig(self.system_matrix[np.ix_(f, f)])

    def spectral_abscissa(self):
        return float(self.follower_spectrum().real.max())


def pin_leaders(L, amb, leaders):
    """Zero the leader rows of ``-H L~``; ``leaders`` are 0-based agent indices."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    leaders = frozenset(int(i) for i in leaders)
    if not leaders:
        raise ContractError("at least one leader is required")
    bad = [i for i in leaders if not 0 <= i < n]
    if bad:
        raise IndexError(f"leader indices {bad} out of range 0..{n - 1}")
    if len(leaders) == n:
        raise DegenerateSystemError("every agent is a leader; nothing left to simulate")
    A = system_matrix(L, amb)
    d = A.shape[0] // n
    for i in leaders:
        A[i * d:(i + 1) * d, :] = 0.0
    A.setflags(write=False)
    return PinnedSystem(system_matrix=A, leaders=leaders, d=d)


@dataclass(frozen=True)
class SimulationTrace:
    times: np.ndarray
    states: np.ndarray
    errors: np.ndarray = None
    decay_rate: float = None
    classification: Classification = None
    truncated: bool = False
    method: Method = Method.EXACT_EXP
    dt: float = None

    def __len__(self):
        return self.times.size


def _rk4_step(A, z, dt):
    k1 = A @ z
    k2 = A @ (z + 0.5 * dt * k1)
    k3 = A @ (z + 0.5 * dt * k2)
    k4 = A @ (z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(sys, z0, dt, t_end, method=Method.EXACT_EXP):
    """Integrate the pinned system on the uniform grid ``0, dt, ..., t_end``.

    Leader coordinates are reset to their initial values after every step.
    If the state becomes non-finite or its norm exceeds ``1e12`` the trace
    stops there and is marked as truncated.
    """
    method = Method(method)
    A = sys.system_matrix
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (A.shape[0],):
        raise DimensionError(f"initial state must have length {A.shape[0]}, got {z0.shape}")
    if not dt > 0 or not t_end >= dt:
        raise ContractError(f"need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}")

    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    states = np.empty((steps + 1, z0.size))
    states[0] = z0
    lead = sys.leader_indices()
    held = z0[lead].copy()

    if method is Method.EXACT_EXP:
        phi = expm(dt * A)
        advance = lambda z: phi @ z  # noqa: E731
    else:
        advance = lambda z: _rk4_step(A, z, dt)  # noqa: E731

    z = z0.copy()
    last = steps
    for k in range(1, steps + 1):
        z = advance(z)
        z[lead] = held
        if not np.all(np.isfinite(z)):
            last = k - 1
            break
        states[k] = z
        if np.linalg.norm(z) > DIVERGENCE_NORM:
            last = k
            break
    truncated = last < steps
    return SimulationTrace(
        times=times[:last + 1],
        states=states[:last + 1],
        truncated=truncated,
        method=method,
        dt=float(dt),
    )


# absolute slack, relative to max(1, delta(0)), for round-off once the error hits the floor
MONOTONE_SLACK = 1e-12


def _nonincreasing(values, slack):
    return bool(np.all(np.diff(values) <= slack))


def error_trace(trace, z_e):
    """Attach ``delta(t) = ||z(t) - z_e||`` and a convergence classification.

    Converged: ``delta(t_end) < 1e-6 * max(1, delta(0))`` and ``delta`` is
    nonincreasing (up to round-off) over the final tenth of the trace.  Diverged:
    ``delta(t_end) > 10 delta(0)``, or the integrator gave up.
    """
    z_e = np.asarray(z_e, dtype=float)
    if z_e.shape != trace.states.shape[1:]:
        raise DimensionError(
            f"equilibrium length {z_e.size} does not match state length {trace.states.shape[1]}"
        )
    errors = np.linalg.norm(trace.states - z_e, axis=1)
    first, final = errors[0], errors[-1]
    tail = errors[-max(2, int(np.ceil(0.1 * errors.size))):]
    if trace.truncated or not np.isfinite(final) or final > 10.0 * first:
        label = Classification.DIVERGED
    elif final < 1e-6 * max(1.0, first) and _nonincreasing(tail, MONOTONE_SLACK * max(1.0, first)):
        label = Classification.CONVERGED
    else:
        label = Classification.UNDETERMINED
    out = replace(trace, errors=errors, classification=label)
    if label is Classification.CONVERGED and np.all(errors[_fit_window(errors.size)] > 0):
        out = replace(out, decay_rate=fit_decay_rate(out).rate)
    return out


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    intercept: float = field(default=0.0)


def _fit_window(size):
    lo = int(np.floor(0.2 * size))
    hi = int(np.ceil(0.8 * size))
    return slice(lo, max(hi, lo + 2))


def fit_decay_rate(trace):
    """Least-squares slope of ``log delta(t)`` over the middle 60% of the trace.

    Returns the decay rate (positive for a decaying error) together with the
    coefficient of determination of the log-linear fit.
    """
    if trace.errors is None:
        raise FitError("trace has no error column; call error_trace first")
    window = _fit_window(trace.errors.size)
    t = trace.times[window]
    delta = trace.errors[window]
    if t.size < 2:
        raise FitError("trace too short for a decay fit")
    if np.any(delta <= 0) or not np.all(np.isfinite(delta)):
        raise FitError("delta must be positive and finite on the fit window")
    y = np.log(delta)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(rate=float(-slope), r_squared=r2, intercept=float(intercept))


def random_initial_state(z_e, leaders, d, seed, low=-5.0, high=5.0):
    """Leaders sit at their equilibrium; followers are uniform in ``[low, high]^d``."""
    rng = np.random.default_rng(seed)
    z0 = np.asarray(z_e, dtype=float).copy()
    n = z0.size // d
    for i in range(n):
        if i not in leaders:
            z0[i * d:(i + 1) * d] = rng.uniform(low, high, d)
    return z0
