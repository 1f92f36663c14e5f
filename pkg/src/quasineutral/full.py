"""Full coinfection system over the 1 + N + N^2 host compartments.

States are packed as ``[S, I_1..I_N, I_11, I_12, ..., I_NN]`` (row-major
``I_ij``, first index = first-acquired strain) for integration, and exposed
as :class:`FullState` / :class:`Trajectory` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeStateError, ValidationError
from .model import NeutralEquilibrium, NeutralParameters, StrainParameters
from .solver import SolverConfig, integrate

# negative excursions down to this multiple of atol are clamped, deeper ones abort
NEGATIVE_SLACK = 10.0


@dataclass(frozen=True, eq=False)
class FullState:
    s: float
    i_single: np.ndarray
    i_double: np.ndarray

    def __post_init__(self):
        i_single = np.array(self.i_single, dtype=float)
        i_double = np.array(self.i_double, dtype=float)
        n = i_single.shape[0]
        if i_single.ndim != 1 or i_double.shape != (n, n):
            raise ValidationError(
                f"inconsistent state shapes: i_single {i_single.shape}, i_double {i_double.shape}"
            )
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "i_single", i_single)
        object.__setattr__(self, "i_double", i_double)

    @property
    def n(self) -> int:
        return self.i_single.shape[0]

    @property
    def mass(self) -> float:
        return self.s + self.i_single.sum() + self.i_double.sum()

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.s], self.i_single, self.i_double.ravel()))

    @classmethod
    def from_vector(cls, y, n: int) -> "FullState":
        y = np.asarray(y, dtype=float)
        if y.shape != (1 + n + n * n,):
            raise ValidationError(f"state vector for n={n} must have {1 + n + n * n} entries, got {y.shape}")
        return cls(y[0], y[1 : n + 1], y[n + 1 :].reshape(n, n))

    def check(self, tol: float = 1e-9) -> None:
        y = self.to_vector()
        if np.any(y < -tol):
            raise ValidationError(f"state has negative compartments (min {y.min()!r})")
        if self.mass > 1 + tol:
            raise ValidationError(f"state total mass {self.mass!r} exceeds 1")

    def permuted(self, perm) -> "FullState":
        p = np.asarray(perm)
        return FullState(self.s, self.i_single[p], self.i_double[np.ix_(p, p)])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled full-system solution; ``y`` rows are packed state vectors."""

    times: np.ndarray
    y: np.ndarray
    n: int

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    @property
    def s(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def i_single(self) -> np.ndarray:
        return self.y[:, 1 : self.n + 1]

    @property
    def i_double(self) -> np.ndarray:
        return self.y[:, self.n + 1 :].reshape(-1, self.n, self.n)

    @property
    def mass(self) -> np.ndarray:
        return self.y.sum(axis=1)

    def state(self, k: int) -> FullState:
        return FullState.from_vector(self.y[k], self.n)

    @property
    def final(self) -> FullState:
        return self.state(-1)


def _unpack(y, n):
    return y[0], y[1 : n + 1], y[n + 1 :].reshape(n, n)


def _foi(i_single, i_double, p):
    return i_single + (p * i_double).sum(axis=1) + ((1.0 - p) * i_double).sum(axis=0)


def force_of_infection(state: FullState, sp: StrainParameters) -> np.ndarray:
    """J_i: fraction of hosts transmitting strain i (multiply by beta_i for the force)."""
    return _foi(state.i_single, state.i_double, sp.p_ij_i)


def make_rhs(sp: StrainParameters, params: NeutralParameters):
    """Packed-vector right-hand side for the integrator."""
    n = sp.n
    r = params.r
    beta_i, gamma_i, gamma_ij = sp.beta_i, sp.gamma_i, sp.gamma_ij
    p, k_ij = sp.p_ij_i, sp.k_ij
    single_out = r + gamma_i
    double_out = r + gamma_ij

    def rhs(t, y):
        s, i1, i2 = _unpack(y, n)
        force = beta_i * _foi(i1, i2, p)
        dy = np.empty_like(y)
        dy[0] = r * (1.0 - s) + gamma_i @ i1 + (gamma_ij * i2).sum() - s * force.sum()
        dy[1 : n + 1] = force * s - single_out * i1 - i1 * (k_ij @ force)
        dy[n + 1 :] = (k_ij * np.outer(i1, force) - double_out * i2).ravel()
        return dy

    return rhs


def full_rhs(state: FullState, sp: StrainParameters, params: NeutralParameters) -> FullState:
    """Time derivative of every compartment, returned in state layout."""
    dy = make_rhs(sp, params)(0.0, state.to_vector())
    return FullState.from_vector(dy, state.n)


def neutral_scalar_observables(state: FullState) -> tuple[float, float, float]:
    """(T, I, D): total infected, singly and doubly colonized fractions."""
    i = float(state.i_single.sum())
    d = float(state.i_double.sum())
    return i + d, i, d


def slow_manifold_state(eq: NeutralEquilibrium, z) -> FullState:
    """S*, I* z_i, (k I* T*/S*) z_i z_j: the point of the slow manifold at frequencies z."""
    z = np.asarray(z, dtype=float)
    return FullState(eq.s_star, eq.i_star * z, eq.double_coefficient * np.outer(z, z))


def mass_law(mass0: float, r: float, t) -> np.ndarray:
    """Total mass 1 - (1 - mass0) exp(-r t) implied by the summed equations."""
    return 1.0 - (1.0 - mass0) * np.exp(-r * np.asarray(t, dtype=float))


def integrate_full(
    state0: FullState,
    sp: StrainParameters,
    params: NeutralParameters,
    t_end: float,
    cfg: SolverConfig = SolverConfig(),
    samples=None,
    t_start: float = 0.0,
) -> Trajectory:
    """Integrate the full system from ``t_start`` to ``t_end``.

    ``samples`` is either a count of equally spaced output times (including
    both ends, default 201) or an explicit increasing array of times.
    """
    if not t_end > t_start:
        raise ValidationError(f"t_end must exceed the start time, got t_end={t_end!r}")
    if state0.n != sp.n:
        raise ValidationError(f"state has {state0.n} strains but parameters have {sp.n}")
    if samples is None or np.isscalar(samples):
        count = 201 if samples is None else int(samples)
        if count < 2:
            raise ValidationError("need at least 2 samples")
        times = np.linspace(t_start, t_end, count)
    else:
        times = np.asarray(samples, dtype=float)
        if times[0] < t_start or times[-1] > t_end * (1 + 1e-12):
            raise ValidationError("sample times must lie within [t_start, t_end]")

    bound = NEGATIVE_SLACK * cfg.atol

    def guard(t, y):
        lo = y.min()
        if lo < -bound:
            idx = int(np.argmin(y))
            raise NegativeStateError(t, idx, float(lo), bound)
        return None

    times, ys, _ = integrate(make_rhs(sp, params), t_start, state0.to_vector(), times, cfg, on_step=guard)
    lo = ys.min()
    if lo < -bound:
        k, idx = np.unravel_index(np.argmin(ys), ys.shape)
        raise NegativeStateError(float(times[k]), int(idx), float(lo), bound)
    np.maximum(ys, 0.0, out=ys)
    return Trajectory(times, ys, sp.n)
