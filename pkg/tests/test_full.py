import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from quasineutral.errors import NegativeStateError, ValidationError
from quasineutral.full import (
    FullState,
    force_of_infection,
    full_rhs,
    integrate_full,
    make_rhs,
    mass_law,
    neutral_scalar_observables,
    slow_manifold_state,
)
from quasineutral.model import NeutralParameters, TraitPerturbations, neutral_equilibrium, realize_traits
from quasineutral.solver import SolverConfig

REF = NeutralParameters(4, 1, 1, 1.5)


def random_setup(seed, n=3, eps=0.1, mask=(1, 2, 3, 4, 5), params=REF):
    rng = np.random.default_rng(seed)
    pert = TraitPerturbations(
        n, rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(-1, 1, (n, n)),
        rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, n)), mask,
    )
    sp = realize_traits(params, pert, eps)
    w = rng.uniform(0.1, 1, 1 + n + n * n)
    state = FullState.from_vector(w / w.sum(), n)
    return pert, sp, state


def loop_rhs(state, sp, params):
    """Compartment-by-compartment evaluation of the model equations."""
    n = state.n
    S, I, D = state.s, state.i_single, state.i_double
    J = np.zeros(n)
    for i in range(n):
        J[i] = I[i]
        for j in range(n):
            J[i] += sp.p_ij_i[i, j] * D[i, j] + (1 - sp.p_ij_i[j, i]) * D[j, i]
    F = sp.beta_i * J
    dS = params.r * (1 - S)
    for i in range(n):
        dS += sp.gamma_i[i] * I[i] - S * F[i]
        for j in range(n):
            dS += sp.gamma_ij[i, j] * D[i, j]
    dI = np.zeros(n)
    dD = np.zeros((n, n))
    for i in range(n):
        dI[i] = F[i] * S - (params.r + sp.gamma_i[i]) * I[i]
        for j in range(n):
            dI[i] -= I[i] * sp.k_ij[i, j] * F[j]
            dD[i, j] = sp.k_ij[i, j] * I[i] * F[j] - (params.r + sp.gamma_ij[i, j]) * D[i, j]
    return FullState(dS, dI, dD)


def test_state_roundtrip_and_validation():
    st_ = FullState(0.5, [0.1, 0.1], [[0.1, 0.05], [0.05, 0.1]])
    assert FullState.from_vector(st_.to_vector(), 2).to_vector().tolist() == st_.to_vector().tolist()
    assert st_.mass == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        FullState(0.5, [0.1, 0.1], [[0.1]])
    with pytest.raises(ValidationError):
        FullState.from_vector(np.zeros(6), 2)
    with pytest.raises(ValidationError):
        FullState(0.5, [-0.1, 0.1], np.zeros((2, 2))).check()
    with pytest.raises(ValidationError):
        FullState(0.9, [0.1, 0.1], np.zeros((2, 2))).check()


def test_force_of_infection_example():
    sp = realize_traits(REF, TraitPerturbations(2), 0.0)
    p = np.array([[0.5, 0.6], [0.5, 0.5]])
    sp = type(sp)(sp.beta_i, sp.gamma_i, sp.gamma_ij, p, sp.k_ij, 0.1)
    state = FullState(0.3, [0.3, 0.1], [[0.0, 0.1], [0.2, 0.0]])
    assert force_of_infection(state, sp)[0] == pytest.approx(0.46, abs=1e-15)


def test_force_without_coinfection():
    _, sp, state = random_setup(0)
    bare = FullState(state.s, state.i_single, np.zeros_like(state.i_double))
    assert force_of_infection(bare, sp) == pytest.approx(bare.i_single)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_neutral_force_sums_to_total(seed, n):
    _, _, state = random_setup(seed, n)
    sp = realize_traits(REF, TraitPerturbations(n), 0.0)
    T, _, _ = neutral_scalar_observables(state)
    assert force_of_infection(state, sp).sum() == pytest.approx(T, rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_rhs_matches_loop_oracle(seed, n):
    _, sp, state = random_setup(seed, n)
    fast = full_rhs(state, sp, REF).to_vector()
    slow = loop_rhs(state, sp, REF).to_vector()
    assert fast == pytest.approx(slow, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 1.0))
def test_total_mass_derivative(seed, mass):
    _, sp, state = random_setup(seed)
    state = FullState.from_vector(state.to_vector() * mass, state.n)
    d = full_rhs(state, sp, REF).to_vector().sum()
    assert d == pytest.approx(REF.r * (1 - mass), abs=1e-14)


def test_disease_free_is_stationary():
    _, sp, _ = random_setup(3)
    state = FullState(1.0, np.zeros(3), np.zeros((3, 3)))
    assert not np.any(full_rhs(state, sp, REF).to_vector())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_neutral_slow_manifold_is_stationary(seed):
    rng = np.random.default_rng(seed)
    z = rng.dirichlet(np.ones(4))
    eq = neutral_equilibrium(REF)
    sp = realize_traits(REF, TraitPerturbations(4), 0.0)
    state = slow_manifold_state(eq, z)
    d = full_rhs(state, sp, REF)
    T, _, _ = neutral_scalar_observables(d)
    assert abs(d.s) < 1e-10 and abs(T) < 1e-10
    assert np.abs(d.to_vector()).max() < 1e-14


def test_scalar_observables():
    assert neutral_scalar_observables(FullState(1, [0, 0], np.zeros((2, 2)))) == (0, 0, 0)
    state = FullState(0.6, [0.1, 0.1], np.full((2, 2), 0.05))
    assert neutral_scalar_observables(state) == pytest.approx((0.4, 0.2, 0.2))


def test_neutral_convergence_r0_two():
    params = NeutralParameters.from_r0(2.0, 1.0, 1.0, 1.5)
    eq = neutral_equilibrium(params)
    _, _, state = random_setup(7, n=4)
    sp = realize_traits(params, TraitPerturbations(4), 0.0)
    traj = integrate_full(state, sp, params, 200.0, samples=3)
    T, I, D = neutral_scalar_observables(traj.final)
    assert abs(traj.final.s - eq.s_star) < 1e-6
    assert abs(T - eq.t_star) < 1e-6 and abs(I - eq.i_star) < 1e-6


def test_subcritical_infection_dies_out():
    params = NeutralParameters(1.5, 1.0, 1.0, 1.0)
    _, _, state = random_setup(8, n=2)
    sp = realize_traits(params, TraitPerturbations(2), 0.0)
    traj = integrate_full(state, sp, params, 300.0, samples=2)
    assert neutral_scalar_observables(traj.final)[0] < 1e-6


def test_mass_law_from_deficit():
    _, sp, state = random_setup(9)
    state = FullState.from_vector(0.9 * state.to_vector(), 3)
    cfg = SolverConfig()
    traj = integrate_full(state, sp, REF, 20.0, cfg, samples=101)
    expected = mass_law(0.9, REF.r, traj.times)
    assert expected[-1] == pytest.approx(1 - 0.1 * np.exp(-20))
    assert np.abs(traj.mass - expected).max() <= 10 * cfg.tolerance


def test_no_infection_stays_uninfected():
    _, sp, _ = random_setup(10)
    state = FullState(0.7, np.zeros(3), np.zeros((3, 3)))
    traj = integrate_full(state, sp, REF, 10.0, samples=11)
    assert not np.any(traj.i_single) and not np.any(traj.i_double)
    assert traj.s == pytest.approx(1 - 0.3 * np.exp(-traj.times), rel=1e-8)


def test_matches_scipy_oracle():
    _, sp, state = random_setup(11, n=3, eps=0.2)
    ts = np.linspace(0, 30, 61)
    traj = integrate_full(state, sp, REF, 30.0, SolverConfig(1e-11, 1e-13), samples=ts)
    ref = solve_ivp(make_rhs(sp, REF), (0, 30), state.to_vector(), method="DOP853", t_eval=ts, rtol=1e-13, atol=1e-15)
    assert np.abs(traj.y - ref.y.T).max() < 1e-9


def test_permutation_equivariance():
    pert, _, state = random_setup(12, n=4)
    perm = np.array([2, 0, 3, 1])
    cfg = SolverConfig(1e-10, 1e-12)
    a = integrate_full(state, realize_traits(REF, pert, 0.1), REF, 25.0, cfg, samples=6)
    b = integrate_full(state.permuted(perm), realize_traits(REF, pert.permuted(perm), 0.1), REF, 25.0, cfg, samples=6)
    for k in range(6):
        assert b.state(k).to_vector() == pytest.approx(a.state(k).permuted(perm).to_vector(), abs=1e-9)


def test_nonnegative_outputs():
    _, sp, state = random_setup(13, n=3, eps=0.3)
    traj = integrate_full(state, sp, REF, 50.0, samples=51)
    assert traj.y.min() >= 0


def test_deep_negative_state_aborts():
    _, sp, state = random_setup(14)
    y = state.to_vector()
    y[2] = -1e-4
    with pytest.raises(NegativeStateError) as info:
        integrate_full(FullState.from_vector(y, 3), sp, REF, 5.0)
    assert info.value.index == 2


def test_integration_argument_checks():
    _, sp, state = random_setup(15)
    with pytest.raises(ValidationError):
        integrate_full(state, sp, REF, 0.0)
    with pytest.raises(ValidationError):
        integrate_full(FullState(1, [0], [[0]]), sp, REF, 1.0)
    with pytest.raises(ValidationError):
        integrate_full(state, sp, REF, 1.0, samples=1)
    with pytest.raises(ValidationError):
        integrate_full(state, sp, REF, 1.0, samples=[0.0, 2.0])
