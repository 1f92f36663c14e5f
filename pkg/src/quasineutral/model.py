"""Parameter algebra for the quasi-neutral coinfection model.

Trait dimensions are numbered as throughout the package:

    1  transmission rate          beta_i   = beta * (1 + eps * b_i)
    2  single clearance rate      gamma_i  = gamma * (1 + eps * nu_i)
    3  co-colonization clearance  gamma_ij = gamma * (1 + eps * u_ij)
    4  transmission from mixed    p_ij^i   = 1/2 + eps * omega_ij^i
       co-colonization
    5  co-colonization factor     k_ij     = k + eps * alpha_ij

A trait outside the active mask realizes at its neutral value and carries a
zero weight in the slow dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ValidationError

TRAITS = (1, 2, 3, 4, 5)
TRAIT_NAMES = {
    1: "transmission",
    2: "single_clearance",
    3: "coinfection_clearance",
    4: "mixed_transmission",
    5: "cocolonization_vulnerability",
}


def as_mask(mask: Iterable[int] | None) -> frozenset[int]:
    if mask is None:
        return frozenset()
    out = frozenset(int(d) for d in mask)
    bad = sorted(out.difference(TRAITS))
    if bad:
        raise ValidationError(f"mask entries must be in 1..5, got {bad}")
    return out


@dataclass(frozen=True)
class NeutralParameters:
    """Strain-independent backbone rates."""

    beta: float
    gamma: float
    r: float
    k: float

    def __post_init__(self):
        for name in ("beta", "gamma", "k"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be > 0, got {value!r}")
        if not np.isfinite(self.r) or self.r < 0:
            raise ValidationError(f"r must be >= 0, got {self.r!r}")

    @property
    def m(self) -> float:
        return self.r + self.gamma

    @property
    def R0(self) -> float:
        return self.beta / self.m

    @classmethod
    def from_r0(cls, R0: float, gamma: float, r: float, k: float) -> "NeutralParameters":
        return cls(beta=R0 * (r + gamma), gamma=gamma, r=r, k=k)


def _vector(x, n, name):
    if x is None:
        return np.zeros(n)
    arr = np.array(x, dtype=float)
    if arr.shape != (n,):
        raise ValidationError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


def _matrix(x, n, name):
    if x is None:
        return np.zeros((n, n))
    arr = np.array(x, dtype=float)
    if arr.shape != (n, n):
        raise ValidationError(f"{name} must have shape ({n}, {n}), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class TraitPerturbations:
    """Deviation arrays and the active-trait mask.

    ``omega[i, j]`` holds omega_ij^i only; the complementary deviation
    omega_ij^j is -omega[i, j] so that realized probabilities sum to one.
    Missing arrays default to zero deviation.
    """

    n: int
    b: np.ndarray = None
    nu: np.ndarray = None
    u: np.ndarray = None
    omega: np.ndarray = None
    alpha: np.ndarray = None
    mask: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValidationError(f"strain count n must be >= 1, got {self.n!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "b", _vector(self.b, n, "b"))
        object.__setattr__(self, "nu", _vector(self.nu, n, "nu"))
        object.__setattr__(self, "u", _matrix(self.u, n, "u"))
        object.__setattr__(self, "omega", _matrix(self.omega, n, "omega"))
        object.__setattr__(self, "alpha", _matrix(self.alpha, n, "alpha"))
        object.__setattr__(self, "mask", as_mask(self.mask))
        for name in ("b", "nu", "u", "omega", "alpha"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            arr.setflags(write=False)

    def with_mask(self, mask) -> "TraitPerturbations":
        return TraitPerturbations(self.n, self.b, self.nu, self.u, self.omega, self.alpha, mask)

    def scaled(self, factor: float) -> "TraitPerturbations":
        return TraitPerturbations(
            self.n,
            factor * self.b,
            factor * self.nu,
            factor * self.u,
            factor * self.omega,
            factor * self.alpha,
            self.mask,
        )

    def permuted(self, perm) -> "TraitPerturbations":
        """Relabel strains: new strain ``a`` is old strain ``perm[a]``."""
        p = np.asarray(perm)
        ix = np.ix_(p, p)
        return TraitPerturbations(
            self.n, self.b[p], self.nu[p], self.u[ix], self.omega[ix], self.alpha[ix], self.mask
        )


@dataclass(frozen=True, eq=False)
class StrainParameters:
    """Realized strain-specific rates for a given epsilon."""

    beta_i: np.ndarray
    gamma_i: np.ndarray
    gamma_ij: np.ndarray
    p_ij_i: np.ndarray
    k_ij: np.ndarray
    epsilon: float

    @property
    def n(self) -> int:
        return self.beta_i.shape[0]

    @property
    def p_ij_j(self) -> np.ndarray:
        return 1.0 - self.p_ij_i


@dataclass(frozen=True, eq=False)
class NeutralEquilibrium:
    """Neutral-system equilibrium and the slow-time weights it induces.

    ``theta_raw`` holds the five trait weights already multiplied by the mask
    indicator; ``theta_total`` is their sum (1 for an empty mask) and
    ``theta_norm`` the normalized weights.
    """

    s_star: float
    t_star: float
    i_star: float
    d_star: float
    mu: float
    xi: float
    det_p: float
    theta_raw: np.ndarray
    theta_total: float
    theta_norm: np.ndarray
    mask: frozenset
    params: NeutralParameters

    @property
    def P(self) -> np.ndarray:
        return np.array([[2 * self.t_star, self.i_star], [self.d_star, self.t_star]])

    @property
    def P_inv(self) -> np.ndarray:
        return np.array([[self.t_star, -self.i_star], [-self.d_star, 2 * self.t_star]]) / self.det_p

    @property
    def double_coefficient(self) -> float:
        """k I* T* / S*, the slow-manifold prefactor of I_ij (equal to D*)."""
        return self.params.k * self.i_star * self.t_star / self.s_star


def trait_weights(params: NeutralParameters) -> np.ndarray:
    """Unmasked weights (Theta_1..Theta_5) of the five trait dimensions."""
    beta, gamma, k, m = params.beta, params.gamma, params.k, params.m
    s = 1.0 / params.R0
    t = 1.0 - s
    i = m * t / (m + beta * k * t)
    d = t - i
    det_p = 2 * t * t - i * d
    return np.array(
        [
            2 * beta * s * t * t,
            gamma * i * (i + t),
            gamma * t * d,
            2 * m * t * d,
            beta * t * i * d,
        ]
    ) / det_p


def neutral_equilibrium(params: NeutralParameters, mask=()) -> NeutralEquilibrium:
    R0 = params.R0
    if not R0 > 1:
        err = ValidationError(
            f"R0 = beta/(r+gamma) = {R0!r} <= 1: the neutral system tends to the "
            "disease-free state (1, 0) and has no endemic equilibrium"
        )
        err.R0 = R0
        raise err
    mask = as_mask(mask)
    beta, k, m = params.beta, params.k, params.m
    s = 1.0 / R0
    t = 1.0 - s
    i = m * t / (m + beta * k * t)
    d = t - i
    xi = m + beta * k * t - beta * k * i / 2
    det_p = 2 * t * t - i * d

    chi = np.array([1.0 if dd in mask else 0.0 for dd in TRAITS])
    theta_raw = chi * trait_weights(params)
    if mask:
        theta_total = float(theta_raw.sum())
        theta_norm = theta_raw / theta_total
    else:
        theta_total = 1.0
        theta_norm = np.zeros(5)
    theta_raw.setflags(write=False)
    theta_norm.setflags(write=False)
    return NeutralEquilibrium(
        s_star=s,
        t_star=t,
        i_star=i,
        d_star=d,
        mu=i / d,
        xi=xi,
        det_p=det_p,
        theta_raw=theta_raw,
        theta_total=theta_total,
        theta_norm=theta_norm,
        mask=mask,
        params=params,
    )


def _first_bad(arr, ok):
    idx = np.argwhere(~ok)[0]
    return tuple(int(x) for x in idx), float(arr[tuple(idx)])


def realize_traits(params: NeutralParameters, pert: TraitPerturbations, epsilon: float) -> StrainParameters:
    if not np.isfinite(epsilon) or epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon!r}")
    chi = {d: (epsilon if d in pert.mask else 0.0) for d in TRAITS}

    beta_i = params.beta * (1 + chi[1] * pert.b)
    gamma_i = params.gamma * (1 + chi[2] * pert.nu)
    gamma_ij = params.gamma * (1 + chi[3] * pert.u)
    p_ij_i = 0.5 + chi[4] * pert.omega
    k_ij = params.k + chi[5] * pert.alpha

    checks = (
        ("beta_i", beta_i, beta_i > 0, "> 0"),
        ("gamma_i", gamma_i, gamma_i > 0, "> 0"),
        ("gamma_ij", gamma_ij, gamma_ij > 0, "> 0"),
        ("p_ij_i", p_ij_i, (p_ij_i >= 0) & (p_ij_i <= 1), "in [0, 1]"),
        ("k_ij", k_ij, k_ij > 0, "> 0"),
    )
    for name, arr, ok, rule in checks:
        if not np.all(ok):
            where, value = _first_bad(arr, ok)
            label = ",".join(str(w + 1) for w in where)
            raise ValidationError(
                f"realized {name}[{label}] = {value!r} must be {rule} at epsilon={epsilon!r}"
            )
    return StrainParameters(beta_i, gamma_i, gamma_ij, p_ij_i, k_ij, float(epsilon))


def basic_reproduction_numbers(sp: StrainParameters, params: NeutralParameters) -> np.ndarray:
    return sp.beta_i / (params.r + sp.gamma_i)


def first_order_r0_score(params: NeutralParameters, pert: TraitPerturbations) -> np.ndarray:
    """Order-epsilon coefficient of R_{0,i}/R0 under the multiplicative
    parameterization: b_i - (gamma/m) nu_i for active traits 1 and 2."""
    score = np.zeros(pert.n)
    if 1 in pert.mask:
        score = score + pert.b
    if 2 in pert.mask:
        score = score - params.gamma / params.m * pert.nu
    return score
