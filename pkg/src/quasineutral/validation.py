"""Quantitative checks of the slow-manifold reduction against the full system."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .full import FullState, Trajectory, force_of_infection, integrate_full, make_rhs, slow_manifold_state
from .model import (
    NeutralEquilibrium,
    NeutralParameters,
    StrainParameters,
    TraitPerturbations,
    neutral_equilibrium,
    realize_traits,
)
from .slow import ReplicatorTrajectory, check_simplex, integrate_replicator, invasion_fitness
from .solver import SolverConfig

# fast transients are given this many e-folding times of the slowest fast rate before matching
BURN_IN_FOLDS = 10.0


def fast_rate(eq: NeutralEquilibrium) -> float:
    """Slowest decay rate among the fast transients.

    The single-infection fast variable relaxes at xi, the aggregate infected
    mass at beta*T*, and the coinfection compartments at m = r + gamma.
    """
    p = eq.params
    return min(eq.xi, p.beta * eq.t_star, p.m)
# tight defaults so that solver error stays well below the O(eps) signal
COMPARE_CONFIG = SolverConfig(rtol=1e-10, atol=1e-12)


@dataclass(frozen=True, eq=False)
class SlowProjection:
    """Slow/fast coordinates of a full state.

    ``z_raw`` and ``v`` come from the exact 2x2 change of variables, ``z`` is
    ``z_raw`` renormalized onto the simplex. ``x_dev``, ``y_dev`` are the
    scaled deviations (S* - S)/eps and (I - I*)/eps (NaN at eps = 0);
    ``l_diag`` holds 1/2 sum_j (u_ij I_ij + u_ji I_ji) when deviations are given.
    """

    z_raw: np.ndarray
    z: np.ndarray
    v: np.ndarray
    x_dev: float
    y_dev: float
    l_diag: np.ndarray | None = None


def project_slow(
    state: FullState,
    sp: StrainParameters,
    eq: NeutralEquilibrium,
    pert: TraitPerturbations | None = None,
) -> SlowProjection:
    j = force_of_infection(state, sp)
    i = state.i_single
    v = (eq.t_star * i - eq.i_star * j) / eq.det_p
    z_raw = (-eq.d_star * i + 2 * eq.t_star * j) / eq.det_p
    total = z_raw.sum()
    z = np.maximum(z_raw, 0.0) / total if total > 0 else np.full(i.size, np.nan)
    eps = sp.epsilon
    if eps > 0:
        x_dev = (eq.s_star - state.s) / eps
        y_dev = (i.sum() - eq.i_star) / eps
    else:
        x_dev = y_dev = float("nan")
    l_diag = None
    if pert is not None:
        w = pert.u * state.i_double
        l_diag = 0.5 * (w.sum(axis=1) + w.sum(axis=0))
    return SlowProjection(z_raw, z, v, float(x_dev), float(y_dev), l_diag)


def manifold_error(full: Trajectory, z: np.ndarray, eq: NeutralEquilibrium) -> np.ndarray:
    """Per-sample |S - S*| + sum|I_i - I* z_i| + sum|I_ij - D* z_i z_j|.

    ``z`` holds one frequency row per sample, or a single row used throughout.
    """
    z = np.broadcast_to(np.asarray(z, dtype=float), full.i_single.shape)
    term_s = np.abs(full.s - eq.s_star)
    term_i = np.abs(full.i_single - eq.i_star * z).sum(axis=1)
    zz = z[:, :, None] * z[:, None, :]
    term_d = np.abs(full.i_double - eq.double_coefficient * zz).sum(axis=(1, 2))
    return term_s + term_i + term_d


def _locate(grid, values, label):
    idx = np.searchsorted(grid, values)
    idx = np.clip(idx, 0, grid.size - 1)
    lo = np.clip(idx - 1, 0, grid.size - 1)
    idx = np.where(np.abs(grid[lo] - values) < np.abs(grid[idx] - values), lo, idx)
    scale = np.maximum(np.abs(values), 1.0)
    if np.any(np.abs(grid[idx] - values) > 1e-9 * scale):
        bad = values[np.argmax(np.abs(grid[idx] - values))]
        raise ValidationError(f"{label} does not cover the requested point {bad!r}")
    return idx


def reduction_error_series(
    full: Trajectory,
    reduced: ReplicatorTrajectory,
    eq: NeutralEquilibrium,
    epsilon: float,
    tau_grid,
) -> np.ndarray:
    """Error norm at each tau of ``tau_grid``, comparing full(t = tau/eps) with reduced(tau)."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0 to map slow time to full time, got {epsilon!r}")
    tau_grid = np.asarray(tau_grid, dtype=float)
    kf = _locate(full.times, tau_grid / epsilon, "full trajectory")
    kr = _locate(reduced.taus, tau_grid, "reduced trajectory")
    sub = Trajectory(full.times[kf], full.y[kf], full.n)
    return manifold_error(sub, reduced.z[kr], eq)


def reduction_error(full, reduced, eq, epsilon, tau_grid) -> float:
    """Maximum of the manifold error norm over ``tau_grid``."""
    return float(reduction_error_series(full, reduced, eq, epsilon, tau_grid).max())


@dataclass(frozen=True, eq=False)
class Comparison:
    """Paired full / reduced runs on a common slow-time grid."""

    epsilon: float
    taus: np.ndarray
    full: Trajectory
    reduced: ReplicatorTrajectory
    errors: np.ndarray
    z0: np.ndarray
    tau0: float
    t_burn: float

    @property
    def times(self) -> np.ndarray:
        return self.taus / self.epsilon

    @property
    def max_error(self) -> float:
        return float(self.errors.max())


def compare_reduction(
    params: NeutralParameters,
    pert: TraitPerturbations,
    epsilon: float,
    state0: FullState,
    tau_end: float,
    samples: int = 101,
    cfg: SolverConfig = COMPARE_CONFIG,
) -> Comparison:
    """Run both systems from matched initial data and evaluate the error norm.

    The full system is integrated through a burn-in of 10 / fast_rate; its projected,
    renormalized frequencies at that time seed the replicator, which starts
    at tau0 = eps * t_burn. Both are sampled on ``samples`` points of
    [tau0, tau_end].
    """
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0 for a comparison, got {epsilon!r}")
    eq = neutral_equilibrium(params, pert.mask)
    sp = realize_traits(params, pert, epsilon)
    tau0 = epsilon * BURN_IN_FOLDS / fast_rate(eq)
    if not tau_end > tau0:
        raise ValidationError(f"tau_end={tau_end!r} must exceed the burn-in slow time {tau0!r}")
    taus = np.linspace(tau0, tau_end, int(samples))
    times = taus / epsilon
    t_burn = float(times[0])
    full = integrate_full(state0, sp, params, times[-1], cfg, samples=times)
    proj = project_slow(full.state(0), sp, eq)
    z0 = check_simplex(proj.z)
    lam = invasion_fitness(pert, eq)
    reduced = integrate_replicator(z0, lam, eq.theta_total, tau_end, cfg, samples=taus, tau_start=tau0)
    errors = manifold_error(full, reduced.z, eq)
    return Comparison(float(epsilon), taus, full, reduced, errors, z0, tau0, t_burn)


@dataclass(frozen=True, eq=False)
class ScalingReport:
    epsilons: np.ndarray
    errors: np.ndarray
    fitted_slope: float
    intercept: float
    residuals: np.ndarray
    degenerate: bool
    notes: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "epsilons": [float(e) for e in self.epsilons],
            "errors": [float(e) for e in self.errors],
            "fitted_slope": None if np.isnan(self.fitted_slope) else float(self.fitted_slope),
            "intercept": None if np.isnan(self.intercept) else float(self.intercept),
            "residuals": [float(r) for r in self.residuals],
            "degenerate": bool(self.degenerate),
            "notes": list(self.notes),
        }


def _scaling_point(args):
    params, pert, eps, state0, tau_end, samples, cfg = args
    return compare_reduction(params, pert, eps, state0, tau_end, samples, cfg).max_error


def fit_loglog_slope(x, y):
    """Least-squares slope and intercept of log(y) against log(x), plus residuals."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept), ly - (slope * lx + intercept)


def epsilon_scaling_study(
    params: NeutralParameters,
    pert: TraitPerturbations,
    state0: FullState,
    epsilons,
    tau_end: float,
    samples: int = 101,
    cfg: SolverConfig = COMPARE_CONFIG,
    threads: int = 1,
) -> ScalingReport:
    """Reduction error for each epsilon and the log-log slope of error against epsilon."""
    eps = np.sort(np.asarray(epsilons, dtype=float))[::-1]
    if eps.size < 3:
        raise ValidationError("a scaling study needs at least 3 epsilons")
    if np.any(eps <= 0) or np.unique(eps).size != eps.size:
        raise ValidationError("epsilons must be distinct and > 0")
    if eps[0] / eps[-1] < 4:
        raise ValidationError(f"epsilons span only {eps[0] / eps[-1]:.3g}x, need at least 4x")
    for e in eps:
        realize_traits(params, pert, e)

    jobs = [(params, pert, float(e), state0, tau_end, samples, cfg) for e in eps]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            errors = np.array(list(pool.map(_scaling_point, jobs)))
    else:
        errors = np.array([_scaling_point(j) for j in jobs])

    notes = []
    floor = 100 * cfg.tolerance
    degenerate = False
    if not pert.mask:
        degenerate = True
        notes.append("no active traits: the reduction is exact up to solver error")
    if np.any(errors <= floor):
        degenerate = True
        notes.append(f"errors reach the solver noise floor ({floor:.3g})")
    if degenerate:
        nan = float("nan")
        return ScalingReport(eps, errors, nan, nan, np.full(eps.size, np.nan), True, tuple(notes))
    slope, intercept, resid = fit_loglog_slope(eps, errors)
    return ScalingReport(eps, errors, slope, intercept, resid, False, tuple(notes))


def resident_equilibrium(
    sp: StrainParameters,
    params: NeutralParameters,
    resident: int,
    cfg: SolverConfig = SolverConfig(rtol=1e-11, atol=1e-14),
    tol: float | None = None,
    max_time: float = 1e4,
) -> FullState:
    """Endemic equilibrium with only ``resident`` present, found by forward integration.

    Stops once every derivative is below ``tol`` (default 100 * rtol, the
    level at which integration noise takes over).
    """
    if tol is None:
        tol = 100 * cfg.rtol
    eq = neutral_equilibrium(params)
    n = sp.n
    i1 = np.zeros(n)
    i2 = np.zeros((n, n))
    i1[resident] = eq.i_star
    i2[resident, resident] = eq.d_star
    state = FullState(eq.s_star, i1, i2)
    rhs = make_rhs(sp, params)
    t, chunk = 0.0, 50.0 / max(eq.xi, params.r, 1e-3)
    while np.abs(rhs(0.0, state.to_vector())).max() > tol:
        if t >= max_time:
            raise NumericalError(f"resident equilibrium not reached by t={t!r}")
        state = integrate_full(state, sp, params, chunk, cfg, samples=2).final
        t += chunk
    return state


def invasion_growth_rate(
    params: NeutralParameters,
    pert: TraitPerturbations,
    epsilon: float,
    invader: int = 0,
    resident: int = 1,
    initial_fraction: float = 1e-4,
    fit_window=(10.0, 40.0),
    cfg: SolverConfig = SolverConfig(rtol=1e-11, atol=1e-14),
) -> float:
    """Measured exponential growth rate of a rare invader in the full system.

    The invader enters the resident-only equilibrium at ``initial_fraction``
    of the infected mass (taken from S), and the slope of
    log(I_inv + sum_j I_inv,j) is fitted over ``fit_window``. To leading
    order this equals eps * Theta * lambda_inv^res.
    """
    if invader == resident:
        raise ValidationError("invader and resident must differ")
    sp = realize_traits(params, pert, epsilon)
    base = resident_equilibrium(sp, params, resident, cfg)
    y = base.to_vector().copy()
    dose = initial_fraction * (1.0 - base.s)
    y[1 + invader] = dose
    y[0] -= dose
    state0 = FullState.from_vector(y, sp.n)
    ts = np.linspace(fit_window[0], fit_window[1], 31)
    traj = integrate_full(state0, sp, params, ts[-1], cfg, samples=np.concatenate(([0.0], ts)))
    carried = traj.i_single[1:, invader] + traj.i_double[1:, invader, :].sum(axis=1)
    return float(np.polyfit(ts, np.log(carried), 1)[0])
