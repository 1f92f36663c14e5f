import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from quasineutral import slow
from quasineutral.errors import NumericalError, ValidationError
from quasineutral.model import NeutralParameters, TraitPerturbations, neutral_equilibrium
from quasineutral.outcomes import symmetric_lyapunov
from quasineutral.slow import (
    check_simplex,
    integrate_replicator,
    invasion_fitness,
    per_trait_slow_rhs,
    replicator_rhs,
    trait_contrasts,
)
from quasineutral.solver import SolverConfig

REF = NeutralParameters(4, 1, 1, 1.5)
seeds = st.integers(0, 2**32 - 1)
masks = st.sets(st.integers(1, 5))


def random_pert(rng, n, mask):
    return TraitPerturbations(
        n, rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(-1, 1, (n, n)),
        rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, n)), mask,
    )


def loop_fitness(pert, eq):
    """Entry-by-entry recomputation of the pairwise invasion fitness."""
    n = pert.n
    th = eq.theta_norm
    lam = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            lam[i, j] = (
                th[0] * (pert.b[i] - pert.b[j])
                + th[1] * (pert.nu[j] - pert.nu[i])
                + th[2] * (-pert.u[i, j] - pert.u[j, i] + 2 * pert.u[j, j])
                + th[3] * (pert.omega[i, j] - pert.omega[j, i])
                + th[4] * (eq.mu * (pert.alpha[j, i] - pert.alpha[i, j]) + pert.alpha[j, i] - pert.alpha[j, j])
            )
    return lam


def test_two_strain_example():
    pert = TraitPerturbations(2, b=[0.25, -0.2], mask={1})
    lam = np.asarray(invasion_fitness(pert, neutral_equilibrium(REF, {1})))
    assert lam[0, 1] == pytest.approx(0.45, abs=1e-15)
    assert lam[1, 0] == pytest.approx(-0.45, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 7), masks)
def test_fitness_matches_loop_oracle(seed, n, mask):
    rng = np.random.default_rng(seed)
    pert = random_pert(rng, n, mask)
    eq = neutral_equilibrium(REF, mask)
    lam = np.asarray(invasion_fitness(pert, eq))
    assert np.abs(lam - loop_fitness(pert, eq)).max() < 1e-14
    assert not np.any(np.diag(lam))
    if mask <= {1, 2, 4}:
        assert not np.any(lam + lam.T)


def test_alpha_only_fitness():
    rng = np.random.default_rng(5)
    al = rng.uniform(-1, 1, (4, 4))
    eq = neutral_equilibrium(REF, {5})
    lam = np.asarray(invasion_fitness(TraitPerturbations(4, alpha=al, mask={5}), eq))
    expected = eq.i_star / eq.d_star * (al.T - al) + al.T - np.diag(al)[None, :]
    assert np.abs(lam - expected).max() < 1e-14


def test_mask_mismatch_rejected():
    with pytest.raises(ValidationError):
        invasion_fitness(TraitPerturbations(2, mask={1}), neutral_equilibrium(REF, {1, 2}))


def test_contrasts_shape():
    assert trait_contrasts(TraitPerturbations(3), 0.5).shape == (5, 3, 3)


def test_simplex_check():
    assert check_simplex([0.5, 0.5]).sum() == 1
    for bad in ([0.6, 0.6], [1.1, -0.1], [], [[0.5, 0.5]]):
        with pytest.raises(ValidationError):
            check_simplex(bad)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 8), masks)
def test_replicator_rhs_structure(seed, n, mask):
    rng = np.random.default_rng(seed)
    pert = random_pert(rng, n, mask)
    eq = neutral_equilibrium(REF, mask)
    lam = invasion_fitness(pert, eq)
    z = rng.dirichlet(np.ones(n))
    assert abs(replicator_rhs(z, lam, eq.theta_total).sum()) < 1e-14
    for k in range(n):
        vertex = np.eye(n)[k]
        assert not np.any(replicator_rhs(vertex, lam, eq.theta_total))


def test_empty_mask_is_static():
    rng = np.random.default_rng(1)
    pert = random_pert(rng, 5, ())
    eq = neutral_equilibrium(REF)
    z = rng.dirichlet(np.ones(5))
    assert not np.any(replicator_rhs(z, invasion_fitness(pert, eq), eq.theta_total))


def test_antisymmetric_payoff_drops_mean_term():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(4, 4))
    lam = a - a.T
    z = rng.dirichlet(np.ones(4))
    assert replicator_rhs(z, lam, 2.0) == pytest.approx(2.0 * z * (lam @ z), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(1, 8), st.integers(1, 5))
def test_single_trait_form_matches_replicator(seed, n, d):
    rng = np.random.default_rng(seed)
    pert = random_pert(rng, n, {d})
    eq = neutral_equilibrium(REF, {d})
    z = rng.dirichlet(np.ones(n))
    direct = per_trait_slow_rhs(z, pert, eq, d)
    via_lambda = replicator_rhs(z, invasion_fitness(pert, eq), eq.theta_total)
    assert np.abs(direct - via_lambda).max() < 1e-12


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 6), masks)
def test_single_trait_forms_sum_to_general_system(seed, n, mask):
    rng = np.random.default_rng(seed)
    pert = random_pert(rng, n, mask)
    eq = neutral_equilibrium(REF, mask)
    z = rng.dirichlet(np.ones(n))
    total = sum((per_trait_slow_rhs(z, pert, eq, d) for d in mask), np.zeros(n))
    general = replicator_rhs(z, invasion_fitness(pert, eq), eq.theta_total) if mask else np.zeros(n)
    assert np.abs(total - general).max() < 1e-12


def test_single_trait_form_checks():
    eq = neutral_equilibrium(REF, {4})
    assert not np.any(per_trait_slow_rhs(np.full(3, 1 / 3), TraitPerturbations(3, mask={4}), eq, 4))
    with pytest.raises(ValidationError):
        per_trait_slow_rhs(np.full(3, 1 / 3), TraitPerturbations(3), eq, 6)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-5, 5))
def test_shift_in_b_leaves_fitness_unchanged(seed, c):
    rng = np.random.default_rng(seed)
    pert = random_pert(rng, 5, {1, 2, 3})
    eq = neutral_equilibrium(REF, {1, 2, 3})
    shifted = TraitPerturbations(5, pert.b + c, pert.nu + c, pert.u, pert.omega, pert.alpha, pert.mask)
    a = np.asarray(invasion_fitness(pert, eq))
    b = np.asarray(invasion_fitness(shifted, eq))
    assert np.abs(a - b).max() < 1e-12


def test_vertex_trajectory_is_constant():
    rng = np.random.default_rng(3)
    eq = neutral_equilibrium(REF, {1, 3})
    lam = invasion_fitness(random_pert(rng, 4, {1, 3}), eq)
    traj = integrate_replicator(np.eye(4)[2], lam, eq.theta_total, 100.0, samples=11)
    assert np.all(traj.z == np.eye(4)[2])


def test_best_transmitter_takes_over():
    b = np.array([0.25, -0.2, 0.1, 0.0, -0.1])
    eq = neutral_equilibrium(REF, {1})
    lam = invasion_fitness(TraitPerturbations(5, b=b, mask={1}), eq)
    traj = integrate_replicator(np.full(5, 0.2), lam, eq.theta_total, 500.0, SolverConfig(1e-11, 1e-13))
    assert traj.final[0] > 0.999
    assert np.diff(traj.z[:, 0]).min() > -1e-9


def test_simplex_maintained_and_drift_small():
    rng = np.random.default_rng(4)
    mask = {1, 2, 3, 4, 5}
    eq = neutral_equilibrium(REF, mask)
    lam = invasion_fitness(random_pert(rng, 8, mask), eq)
    traj = integrate_replicator(rng.dirichlet(np.ones(8)), lam, eq.theta_total, 1000.0, samples=501)
    assert np.abs(traj.z.sum(axis=1) - 1).max() <= 1e-9
    assert traj.z.min() >= 0
    assert traj.max_drift <= 1e-9


def test_excess_drift_aborts(monkeypatch):
    # per-step renormalization keeps honest drift near rounding level, so lower the limit
    monkeypatch.setattr(slow, "MAX_DRIFT", 1e-18)
    lam = np.array([[0.0, 30.0], [5.0, 0.0]])
    with pytest.raises(NumericalError, match="drift"):
        integrate_replicator([0.01, 0.99], lam, 1.0, 10.0, SolverConfig(rtol=0.1, atol=0.1))


def test_symmetric_payoff_lyapunov_monotone():
    rng = np.random.default_rng(6)
    s = rng.uniform(0, 2, (6, 6))
    u = (s + s.T) / 2 + 0.1 * rng.uniform(-1, 1, (6, 6))
    eq = neutral_equilibrium(REF, {3})
    lam = invasion_fitness(TraitPerturbations(6, u=u, mask={3}), eq)
    traj = integrate_replicator(np.full(6, 1 / 6), lam, eq.theta_total, 500.0, samples=1001)
    values = np.array([symmetric_lyapunov(z, u) for z in traj.z])
    assert np.diff(values).max() <= 1e-9


def test_matches_scipy_oracle():
    rng = np.random.default_rng(7)
    mask = {1, 3, 4}
    eq = neutral_equilibrium(REF, mask)
    lam = np.asarray(invasion_fitness(random_pert(rng, 5, mask), eq))
    z0 = rng.dirichlet(np.ones(5))
    taus = np.linspace(0, 50, 26)
    ours = integrate_replicator(z0, lam, eq.theta_total, 50.0, SolverConfig(1e-11, 1e-13), samples=taus)
    ref = solve_ivp(lambda t, z: replicator_rhs(z, lam, eq.theta_total), (0, 50), z0,
                    method="DOP853", t_eval=taus, rtol=1e-13, atol=1e-15)
    assert np.abs(ours.z - ref.y.T).max() < 1e-9


def test_argument_checks():
    lam = np.zeros((2, 2))
    with pytest.raises(ValidationError):
        integrate_replicator([0.5, 0.5], lam, 1.0, 0.0)
    with pytest.raises(ValidationError):
        integrate_replicator([0.5, 0.5], np.zeros((3, 3)), 1.0, 1.0)
