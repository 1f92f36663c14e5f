"""Slow-manifold dynamics: pairwise invasion fitness and the replicator system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .model import NeutralEquilibrium, TraitPerturbations
from .solver import SolverConfig, integrate

SIMPLEX_TOL = 1e-9
# pre-renormalization drift beyond this aborts the integration
MAX_DRIFT = 1e-6


@dataclass(frozen=True, eq=False)
class InvasionFitnessMatrix:
    """``lam[i, j]`` is the fitness of strain i invading a strain-j resident."""

    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.lam, dtype=dtype)


def check_simplex(z, tol: float = SIMPLEX_TOL) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValidationError("frequencies must be a non-empty vector")
    if np.any(z < -tol):
        raise ValidationError(f"frequencies must be >= 0, got min {z.min()!r}")
    if abs(z.sum() - 1.0) > tol:
        raise ValidationError(f"frequencies must sum to 1, got {z.sum()!r}")
    return z


def trait_contrasts(pert: TraitPerturbations, mu: float) -> np.ndarray:
    """The five pairwise asymmetry matrices, stacked as shape (5, N, N)."""
    b, nu, u, om, al = pert.b, pert.nu, pert.u, pert.omega, pert.alpha
    u_diag = np.diag(u)[None, :]
    a_diag = np.diag(al)[None, :]
    return np.stack(
        [
            b[:, None] - b[None, :],
            nu[None, :] - nu[:, None],
            -u - u.T + 2 * u_diag,
            om - om.T,
            mu * (al.T - al) + al.T - a_diag,
        ]
    )


def invasion_fitness(pert: TraitPerturbations, eq: NeutralEquilibrium) -> InvasionFitnessMatrix:
    if pert.mask != eq.mask:
        raise ValidationError(
            f"perturbation mask {sorted(pert.mask)} differs from equilibrium mask {sorted(eq.mask)}"
        )
    contrasts = trait_contrasts(pert, eq.mu)
    lam = np.zeros((pert.n, pert.n))
    for d in sorted(pert.mask):
        lam = lam + eq.theta_norm[d - 1] * contrasts[d - 1]
    return InvasionFitnessMatrix(lam)


def replicator_rhs(z, lam, theta_total: float) -> np.ndarray:
    """Theta * z_i * ((Lambda z)_i - z^T Lambda z)."""
    z = np.asarray(z, dtype=float)
    L = np.asarray(lam)
    payoff = L @ z
    return theta_total * z * (payoff - z @ payoff)


def per_trait_slow_rhs(z, pert: TraitPerturbations, eq: NeutralEquilibrium, d: int) -> np.ndarray:
    """Single-trait slow vector field written in its direct form (no Lambda).

    Weighted by the masked ``eq.theta_raw[d-1]``, so summing over the active
    traits reproduces the general slow system.
    """
    if d not in (1, 2, 3, 4, 5):
        raise ValidationError(f"trait index must be in 1..5, got {d!r}")
    z = np.asarray(z, dtype=float)
    weight = eq.theta_raw[d - 1]
    if d == 1:
        inner = pert.b - pert.b @ z
    elif d == 2:
        inner = -pert.nu + pert.nu @ z
    elif d == 3:
        sym = pert.u + pert.u.T
        inner = -(sym @ z) + z @ sym @ z
    elif d == 4:
        inner = (pert.omega - pert.omega.T) @ z
    else:
        al = pert.alpha
        ratio_t = eq.t_star / eq.d_star
        ratio_i = eq.i_star / eq.d_star
        inner = ratio_t * (al.T @ z) - ratio_i * (al @ z) - z @ al @ z
    return weight * z * inner


@dataclass(frozen=True, eq=False)
class ReplicatorTrajectory:
    taus: np.ndarray
    z: np.ndarray
    max_drift: float

    def __len__(self):
        return self.taus.size

    @property
    def final(self) -> np.ndarray:
        return self.z[-1]


def integrate_replicator(
    z0,
    lam,
    theta_total: float,
    tau_end: float,
    cfg: SolverConfig = SolverConfig(),
    samples=None,
    tau_start: float = 0.0,
) -> ReplicatorTrajectory:
    """Integrate the replicator system, renormalizing onto the simplex after every step."""
    z0 = check_simplex(z0)
    if not tau_end > tau_start:
        raise ValidationError(f"tau_end must exceed the start time, got {tau_end!r}")
    L = np.asarray(lam, dtype=float)
    if L.shape != (z0.size, z0.size):
        raise ValidationError(f"Lambda has shape {L.shape}, expected {(z0.size, z0.size)}")
    if samples is None or np.isscalar(samples):
        count = 201 if samples is None else int(samples)
        taus = np.linspace(tau_start, tau_end, count)
    else:
        taus = np.asarray(samples, dtype=float)

    drift = [0.0]

    def fun(t, z):
        payoff = L @ z
        return theta_total * z * (payoff - z @ payoff)

    def renormalize(t, z):
        total = z.sum()
        dev = abs(total - 1.0)
        drift[0] = max(drift[0], dev)
        if dev > MAX_DRIFT:
            raise NumericalError(f"simplex drift {dev!r} at tau={t!r} exceeds {MAX_DRIFT!r}")
        z = np.maximum(z, 0.0)
        return z / z.sum()

    taus, zs, _ = integrate(fun, tau_start, z0, taus, cfg, on_step=renormalize)
    np.maximum(zs, 0.0, out=zs)
    zs /= zs.sum(axis=1, keepdims=True)
    return ReplicatorTrajectory(taus, zs, drift[0])
