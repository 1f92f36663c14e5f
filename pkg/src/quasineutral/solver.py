"""Adaptive Dormand-Prince 5(4) integrator with dense output.

The 5th-order solution is propagated and the embedded 4th-order one drives
step-size control. Output at requested times uses the standard quartic
continuous extension of the pair, so sampling never shortens the steps.

``on_step`` is called after every accepted step with ``(t, y)`` and may
return a corrected state (renormalization, clamping) or raise to abort.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import StepSizeUnderflow, ValidationError, NumericalError

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and embedded 4th order weights (7 stages, FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic dense-output polynomial coefficients
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ORDER = 4  # error estimator order


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_steps: int = 2_000_000
    first_step: Optional[float] = None
    max_step: float = np.inf

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValidationError(f"solver tolerances must be > 0, got rtol={self.rtol!r}, atol={self.atol!r}")
        if self.max_step <= 0:
            raise ValidationError("max_step must be > 0")

    @property
    def tolerance(self) -> float:
        return max(self.rtol, self.atol)

    def tightened(self, factor: float) -> "SolverConfig":
        return SolverConfig(self.rtol * factor, self.atol * factor, self.max_steps, self.first_step, self.max_step)

    def as_dict(self) -> dict:
        return {"rtol": self.rtol, "atol": self.atol, "max_steps": self.max_steps}


@dataclass
class IntegrationStats:
    nsteps: int = 0
    nrejected: int = 0
    nfev: int = 0


def _rms(x):
    return np.sqrt(np.mean(x * x))


def _initial_step(fun, t0, y0, f0, direction_span, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / (_ORDER + 1))
    return min(100 * h0, h1, direction_span)


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_eval,
    config: SolverConfig = SolverConfig(),
    on_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
):
    """Integrate ``y' = fun(t, y)`` from ``t0`` and sample at ``t_eval``.

    Returns ``(t_eval, Y, stats)`` with ``Y[k]`` the state at ``t_eval[k]``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size == 0:
        raise ValidationError("t_eval must be a non-empty 1-d sequence")
    if np.any(np.diff(t_eval) <= 0):
        raise ValidationError("t_eval must be strictly increasing")
    if t_eval[0] < t0:
        raise ValidationError(f"t_eval starts at {t_eval[0]!r}, before t0={t0!r}")
    t_end = float(t_eval[-1])

    y = np.array(y0, dtype=float)
    out = np.empty((t_eval.size, y.size))
    stats = IntegrationStats()
    k_out = 0
    while k_out < t_eval.size and t_eval[k_out] == t0:
        out[k_out] = y
        k_out += 1
    if k_out == t_eval.size:
        return t_eval, out, stats

    t = float(t0)
    f = fun(t, y)
    stats.nfev += 1
    rtol, atol = config.rtol, config.atol
    if config.first_step is not None:
        h = min(config.first_step, t_end - t)
    else:
        h = _initial_step(fun, t, y, f, t_end - t, rtol, atol)
        stats.nfev += 1
    h = min(h, config.max_step)

    K = np.empty((7, y.size))
    while k_out < t_eval.size:
        if stats.nsteps >= config.max_steps:
            raise NumericalError(f"maximum number of steps ({config.max_steps}) exceeded at t={t!r}")
        h_min = 10 * np.spacing(max(abs(t), 1.0))
        rejected = False
        while True:
            if h < h_min:
                raise StepSizeUnderflow(t, h)
            t_new = t + h
            if t_new >= t_end or t_end - t_new < h_min:
                t_new = t_end
                h = t_new - t
            K[0] = f
            for s in range(1, 6):
                dy = _A[s] @ K[:s]
                K[s] = fun(t + _C[s] * h, y + h * dy)
            y_new = y + h * (_B @ K[:6])
            f_new = fun(t_new, y_new)
            K[6] = f_new
            stats.nfev += 6

            scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
            err = _rms(h * (_E @ K) / scale)
            if err <= 1.0:
                if err == 0.0:
                    factor = _MAX_FACTOR
                else:
                    factor = min(_MAX_FACTOR, _SAFETY * err ** (-1 / (_ORDER + 1)))
                if rejected:
                    factor = min(1.0, factor)
                h_next = min(h * factor, config.max_step)
                break
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-1 / (_ORDER + 1)))
            rejected = True
            stats.nrejected += 1

        stats.nsteps += 1
        y_end = y_new
        if on_step is not None:
            fixed = on_step(t_new, y_new)
            if fixed is not None and fixed is not y_new:
                y_end = np.asarray(fixed, dtype=float)
                f_new = fun(t_new, y_end)
                stats.nfev += 1
        # dense output for samples within (t, t_new]
        if t_eval[k_out] <= t_new:
            Q = K.T @ _P
            while k_out < t_eval.size and t_eval[k_out] <= t_new:
                if t_eval[k_out] == t_new:
                    out[k_out] = y_end
                else:
                    x = (t_eval[k_out] - t) / h
                    out[k_out] = y + h * (Q @ np.array([x, x * x, x ** 3, x ** 4]))
                k_out += 1

        t, h = t_new, h_next
        y, f = y_end, f_new

    return t_eval, out, stats
