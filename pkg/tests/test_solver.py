import numpy as np
import pytest
from scipy.integrate import solve_ivp

from quasineutral.errors import NumericalError, StepSizeUnderflow, ValidationError
from quasineutral.solver import SolverConfig, integrate


def lotka_volterra(t, y):
    return np.array([y[0] * (1.5 - y[1]), y[1] * (y[0] - 3.0)])


def test_exponential_decay_exact():
    ts = np.linspace(0, 5, 11)
    _, ys, stats = integrate(lambda t, y: -2.0 * y, 0.0, [1.0, 3.0], ts, SolverConfig(1e-10, 1e-12))
    assert ys == pytest.approx(np.exp(-2 * ts)[:, None] * [1, 3], rel=1e-8)
    assert stats.nsteps > 0 and stats.nfev >= 6 * stats.nsteps


def test_matches_scipy_on_lotka_volterra():
    ts = np.linspace(0, 15, 301)
    _, ys, _ = integrate(lotka_volterra, 0.0, [2.0, 1.0], ts, SolverConfig(1e-11, 1e-13))
    ref = solve_ivp(lotka_volterra, (0, 15), [2.0, 1.0], method="DOP853", t_eval=ts, rtol=1e-13, atol=1e-14)
    assert np.abs(ys - ref.y.T).max() < 1e-8


def test_dense_output_independent_of_sampling():
    cfg = SolverConfig(1e-9, 1e-12)
    coarse = np.array([0.0, 7.3, 15.0])
    fine = np.linspace(0, 15, 1001)
    _, a, sa = integrate(lotka_volterra, 0.0, [2.0, 1.0], coarse, cfg)
    _, b, sb = integrate(lotka_volterra, 0.0, [2.0, 1.0], np.union1d(fine, coarse), cfg)
    # same step sequence, so samples agree to rounding
    assert sa.nsteps == sb.nsteps
    idx = np.searchsorted(np.union1d(fine, coarse), coarse)
    assert np.abs(a - b[idx]).max() < 1e-12


def test_dense_output_accuracy_between_steps():
    ts = np.linspace(0, 3, 997)
    _, ys, _ = integrate(lambda t, y: np.array([y[1], -y[0]]), 0.0, [0.0, 1.0], ts, SolverConfig(1e-9, 1e-12))
    assert np.abs(ys[:, 0] - np.sin(ts)).max() < 1e-8


def test_on_step_correction_is_used():
    seen = []

    def hook(t, y):
        seen.append(t)
        return y * 0 + 1.0

    ts = np.linspace(0, 2, 5)
    _, ys, _ = integrate(lambda t, y: -y, 0.0, [1.0], ts, SolverConfig(1e-8, 1e-10), on_step=hook)
    assert seen and seen[-1] == 2.0
    assert ys[-1, 0] == 1.0


def test_on_step_may_abort():
    def hook(t, y):
        if t > 1:
            raise NumericalError("stop")

    with pytest.raises(NumericalError, match="stop"):
        integrate(lambda t, y: -y, 0.0, [1.0], [0.0, 5.0], on_step=hook)


def test_blow_up_reports_failure_time():
    with pytest.raises(StepSizeUnderflow) as info:
        integrate(lambda t, y: y * y, 0.0, [1.0], [0.0, 2.0], SolverConfig(1e-8, 1e-10))
    assert info.value.t == pytest.approx(1.0, abs=1e-2)


def test_step_budget():
    with pytest.raises(NumericalError, match="maximum number of steps"):
        integrate(lotka_volterra, 0.0, [2.0, 1.0], [0.0, 100.0], SolverConfig(1e-10, 1e-12, max_steps=50))


def test_samples_at_start_time():
    _, ys, stats = integrate(lambda t, y: -y, 1.0, [4.0], [1.0])
    assert ys[0, 0] == 4.0 and stats.nsteps == 0


@pytest.mark.parametrize("t_eval", [[], [1.0, 0.5], [-1.0, 1.0], [[0.0, 1.0]]])
def test_bad_sample_times(t_eval):
    with pytest.raises(ValidationError):
        integrate(lambda t, y: -y, 0.0, [1.0], t_eval)


@pytest.mark.parametrize("kw", [dict(rtol=0), dict(atol=-1), dict(max_step=0)])
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        SolverConfig(**kw)


def test_config_tightened():
    cfg = SolverConfig(1e-8, 1e-10).tightened(1e-2)
    assert (cfg.rtol, cfg.atol) == pytest.approx((1e-10, 1e-12))
    assert cfg.tolerance == pytest.approx(1e-10)
