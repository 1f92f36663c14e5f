"""Competitive outcome classification for the slow dynamics.

Strain indices returned by functions here are 0-based, like every array in
the package; reports written by the command line use 1-based labels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import NeutralEquilibrium, TraitPerturbations


class PairwiseOutcome(enum.Enum):
    COEXISTENCE = "Coexistence"
    EXCLUSION_OF_1 = "ExclusionOf1"
    EXCLUSION_OF_2 = "ExclusionOf2"
    BISTABILITY = "Bistability"

    @property
    def winner(self):
        """Surviving strain (1 or 2) for the exclusion rows, otherwise None.

        A positive lambda_1^2 means strain 1 grows when rare in a strain-2
        population, so the (+,-) row is strain 1 excluding strain 2.
        """
        return {PairwiseOutcome.EXCLUSION_OF_1: 1, PairwiseOutcome.EXCLUSION_OF_2: 2}.get(self)


_SIGN_TABLE = {
    (1, 1): PairwiseOutcome.COEXISTENCE,
    (1, -1): PairwiseOutcome.EXCLUSION_OF_1,
    (-1, 1): PairwiseOutcome.EXCLUSION_OF_2,
    (-1, -1): PairwiseOutcome.BISTABILITY,
}


def classify_pair(l12: float, l21: float) -> PairwiseOutcome:
    """Outcome of a two-strain contest from the sign pair (lambda_1^2, lambda_2^1)."""
    if not (np.isfinite(l12) and np.isfinite(l21)) or l12 == 0 or l21 == 0:
        raise ValidationError(
            f"pairwise outcome is undetermined on the boundary (l12={l12!r}, l21={l21!r})"
        )
    return _SIGN_TABLE[(int(np.sign(l12)), int(np.sign(l21)))]


def pairwise_outcome_matrix(lam) -> list[list]:
    """Table of classify_pair over all ordered pairs; None on the diagonal or at a zero."""
    L = np.asarray(lam)
    n = L.shape[0]
    table = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j and L[i, j] != 0 and L[j, i] != 0:
                table[i][j] = classify_pair(L[i, j], L[j, i])
    return table


def exclusion_scores(pert: TraitPerturbations, eq: NeutralEquilibrium) -> np.ndarray:
    """Theta_1 b_i - Theta_2 nu_i, the ranking that decides exclusion when only traits 1, 2 vary."""
    return eq.theta_raw[0] * pert.b - eq.theta_raw[1] * pert.nu


def predict_exclusion_winner(pert: TraitPerturbations, eq: NeutralEquilibrium) -> int:
    if not pert.mask <= {1, 2}:
        raise ValidationError(
            f"exclusion prediction needs the active traits within {{1, 2}}, got {sorted(pert.mask)}"
        )
    if pert.n == 1:
        return 0
    score = exclusion_scores(pert, eq)
    order = np.argsort(score)
    best, runner_up = order[-1], order[-2]
    if not score[best] > score[runner_up]:
        raise ValidationError(
            f"no strict maximizer: strains {int(best)} and {int(runner_up)} tie at score {score[best]!r}"
        )
    return int(best)


def symmetric_lyapunov(z, u) -> float:
    """z^T U_bar z with U_bar the symmetric part of u."""
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    return float(z @ (0.5 * (u + u.T)) @ z)


class LimitKind(enum.Enum):
    FIXED_POINT = "FixedPoint"
    CYCLE = "Cycle"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True, eq=False)
class OutcomeReport:
    persistent_set: tuple
    limit_kind: LimitKind
    final_frequencies: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "persistent_set": [i + 1 for i in self.persistent_set],
            "limit_kind": self.limit_kind.value,
            "final_frequencies": [float(x) for x in self.final_frequencies],
            "diagnostics": {k: _plain(v) for k, v in sorted(self.diagnostics.items())},
        }


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    return v


def _turns(x, scale):
    """Number of direction changes of a sampled series, ignoring wiggles below ``scale``."""
    dx = np.diff(x)
    dx = dx[np.abs(dx) > scale]
    if dx.size < 2:
        return 0
    return int(np.count_nonzero(np.diff(np.sign(dx))))


def detect_persistent_set(
    taus,
    zs,
    threshold: float = 1e-3,
    window: float | None = None,
    amp_tol: float = 1e-3,
) -> OutcomeReport:
    """Classify the long-run behaviour of a sampled replicator trajectory.

    Strains whose minimum frequency over the trailing ``window`` of slow time
    (default: last 20% of the span) exceeds ``threshold`` are persistent. The
    limit is a fixed point when every persistent strain varies by less than
    ``amp_tol`` over the window, a cycle when the variation is oscillatory
    with comparable amplitude in both halves of the window.
    """
    taus = np.asarray(taus, dtype=float)
    zs = np.asarray(zs, dtype=float)
    if zs.ndim != 2 or zs.shape[0] != taus.size:
        raise ValidationError(f"trajectory arrays disagree: taus {taus.shape}, z {zs.shape}")
    span = taus[-1] - taus[0]
    if window is None:
        window = 0.2 * span
    if not 0 < window <= span:
        raise ValidationError(f"window {window!r} must be positive and within the trajectory span {span!r}")
    sel = taus >= taus[-1] - window
    if np.count_nonzero(sel) < 3:
        raise ValidationError("window holds fewer than 3 samples")
    w = zs[sel]

    lows = w.min(axis=0)
    highs = w.max(axis=0)
    persistent = np.flatnonzero(lows > threshold)
    diagnostics = {"window": float(window), "threshold": float(threshold)}
    if persistent.size == 0:
        # heteroclinic-like cycling can dip every strain below the threshold
        persistent = np.flatnonzero(highs > threshold)
        diagnostics["fallback_on_max"] = True

    amp = (highs - lows)[persistent]
    max_amp = float(amp.max()) if amp.size else 0.0
    diagnostics["max_amplitude"] = max_amp
    half = w.shape[0] // 2
    first, second = w[:half, persistent], w[half:, persistent]
    amp_first = float((first.max(axis=0) - first.min(axis=0)).max()) if persistent.size else 0.0
    amp_second = float((second.max(axis=0) - second.min(axis=0)).max()) if persistent.size else 0.0
    diagnostics["amplitude_first_half"] = amp_first
    diagnostics["amplitude_second_half"] = amp_second
    turns = max((_turns(w[:, i], 1e-3 * amp_tol) for i in persistent), default=0)
    diagnostics["direction_changes"] = turns

    if max_amp < amp_tol:
        kind = LimitKind.FIXED_POINT
    elif turns >= 2 and amp_first > 0 and 0.5 <= amp_second / amp_first <= 2.0:
        kind = LimitKind.CYCLE
    else:
        kind = LimitKind.UNDETERMINED
    return OutcomeReport(tuple(int(i) for i in persistent), kind, zs[-1].copy(), diagnostics)
