import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qeewitness.dephasing_model import PureDephasingModel, conditional_env_states
from qeewitness.operator_core import NumericalError, ValidationError, negativity, partial_trace_env, thermal_state
from qeewitness.oracle import ModelRecipe, generate_model, joint_state_at
from qeewitness.protocol import (
    MINUS,
    PLUS,
    PLUS_STATE,
    ZERO_STATE,
    averaged_coherence_closed,
    averaged_coherence_direct,
    comparative_coherence,
    default_time_grid,
    evolve_joint,
    measure_plus_minus,
    plain_coherence,
    plateau_reached,
    witness,
)

from helpers import rand_density, rand_herm, rand_model

seeds = st.integers(min_value=0, max_value=2**32 - 1)
TIMES = np.linspace(0, 10, 25)


def test_pointer_state_does_not_dephase():
    m, R0 = rand_model(np.random.default_rng(0), 4)
    s = evolve_joint(m, ZERO_STATE, R0, 2.0)
    assert np.all(s[4:, :] == 0) and np.all(s[:, 4:] == 0)
    assert np.allclose(s[:4, :4], conditional_env_states(m, R0, 2.0).R00, atol=1e-14)


def test_evolution_at_zero_time_is_identity():
    m, R0 = rand_model(np.random.default_rng(1), 4)
    s = evolve_joint(m, PLUS_STATE, R0, 0.0)
    assert np.allclose(s, np.kron(PLUS_STATE, R0), atol=1e-14)


def test_plus_state_blocks_are_half_conditional_states():
    m, R0 = rand_model(np.random.default_rng(2), 4)
    s = evolve_joint(m, PLUS_STATE, R0, 1.7)
    c = conditional_env_states(m, R0, 1.7)
    for (a, b), r in {(0, 0): c.R00, (0, 1): c.R01, (1, 0): c.R10, (1, 1): c.R11}.items():
        assert np.allclose(s[a * 4:(a + 1) * 4, b * 4:(b + 1) * 4], 0.5 * r, atol=1e-14)


def test_measurement_at_zero_delay():
    m, R0 = rand_model(np.random.default_rng(3), 4)
    b = measure_plus_minus(evolve_joint(m, PLUS_STATE, R0, 0.0), 4)
    assert b.p_plus == pytest.approx(1.0, abs=1e-14)
    assert b.p_minus == pytest.approx(0.0, abs=1e-14)
    assert b.R_minus is None


def test_measurement_with_equal_couplings_and_energies():
    rng = np.random.default_rng(4)
    H, V = rand_herm(rng, 4), rand_herm(rng, 4)
    m = PureDephasingModel(0.5, 0.5, H, V, V)
    b = measure_plus_minus(evolve_joint(m, PLUS_STATE, rand_density(rng, 4), 3.0), 4)
    assert b.p_plus == pytest.approx(1.0, abs=1e-13)


def test_measurement_with_equal_couplings_precesses_freely():
    rng = np.random.default_rng(5)
    H, V = rand_herm(rng, 4), rand_herm(rng, 4)
    m = PureDephasingModel(0.0, 0.8, H, V, V)
    tau = 1.1
    b = measure_plus_minus(evolve_joint(m, PLUS_STATE, rand_density(rng, 4), tau), 4)
    assert b.p_plus == pytest.approx(0.5 * (1 + np.cos(0.8 * tau / m.hbar)), abs=1e-13)


def test_measurement_matches_reduced_state():
    m, R0 = generate_model(ModelRecipe(seed=6, n_spins=2))
    s = evolve_joint(m, PLUS_STATE, R0, 2.0)
    rho = partial_trace_env(s, 4)
    b = measure_plus_minus(s, 4)
    assert b.p_plus == pytest.approx((PLUS.conj() @ rho @ PLUS).real, abs=1e-14)
    assert b.p_minus == pytest.approx((MINUS.conj() @ rho @ MINUS).real, abs=1e-14)
    assert b.p_plus + b.p_minus == pytest.approx(1.0, abs=1e-13)


def test_measurement_rejects_unnormalized_state():
    with pytest.raises(ValidationError, match="trace"):
        measure_plus_minus(np.eye(8), 4)


def test_averaged_coherence_edge_cases():
    m, R0 = rand_model(np.random.default_rng(7), 4)
    b0 = measure_plus_minus(evolve_joint(m, PLUS_STATE, R0, 0.0), 4)
    for t in (0.0, 0.7, 3.0):
        assert abs(averaged_coherence_direct(m, b0, t) - plain_coherence(m, R0, t)) < 1e-13
    assert averaged_coherence_closed(m, R0, 1.3, 0.0) == pytest.approx(0.5, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, tau=st.floats(0, 8), t=st.floats(0, 8))
def test_direct_and_closed_average_agree(seed, tau, t):
    m, R0 = rand_model(np.random.default_rng(seed), 4)
    b = measure_plus_minus(evolve_joint(m, PLUS_STATE, R0, tau), 4)
    assert abs(averaged_coherence_direct(m, b, t) - averaged_coherence_closed(m, R0, tau, t)) < 1e-10


def test_summing_branches_would_break_the_identity():
    # guards the outcome sign: adding the |-> branch instead of subtracting it differs
    m, R0 = generate_model(ModelRecipe(seed=8, n_spins=2))
    b = measure_plus_minus(evolve_joint(m, PLUS_STATE, R0, 1.0), 4)
    t = 2.0
    plus = b.p_plus * plain_coherence(m, b.R_plus, t)
    minus = b.p_minus * plain_coherence(m, b.R_minus, t)
    closed = averaged_coherence_closed(m, R0, 1.0, t)
    assert abs(plus + minus - closed) < 1e-12
    assert abs(plus - minus - closed) > 1e-3


def test_closed_average_with_commuting_propagators_equals_plain():
    rng = np.random.default_rng(9)
    z = np.zeros((4, 4))
    m = PureDephasingModel(0.0, 0.2, z, z, rand_herm(rng, 4, 2.0))
    R0 = rand_density(rng, 4)
    for tau in (0.5, 2.0):
        for t in (0.3, 1.9):
            assert abs(averaged_coherence_closed(m, R0, tau, t) - plain_coherence(m, R0, t)) < 1e-12


def test_comparative_coherence_cases():
    m, R0 = rand_model(np.random.default_rng(10), 4)
    for t in (0.0, 1.0):
        assert abs(comparative_coherence(m, R0, 0.0, t) - plain_coherence(m, R0, t)) < 1e-13
    c = conditional_env_states(m, R0, 1.5)
    t = 2.2
    expected = 0.5 * np.trace(m.w0(t) @ c.R00 @ m.w1(t).conj().T)
    assert abs(comparative_coherence(m, R0, 1.5, t) - expected) < 1e-13


def test_comparative_run_needs_no_preparation_in_simplified_setting():
    m, R0 = generate_model(ModelRecipe(seed=11, n_spins=2, asymmetric=True))
    for tau in (0.5, 2.0):
        for t in (0.0, 1.0, 4.0):
            assert abs(comparative_coherence(m, R0, tau, t) - plain_coherence(m, R0, t)) < 1e-12


def test_witness_zero_at_zero_delay():
    m, R0 = rand_model(np.random.default_rng(12), 4)
    assert witness(m, R0, 0.0, TIMES).max_abs < 1e-14


def test_witness_zero_for_equal_couplings():
    rng = np.random.default_rng(13)
    H, V = rand_herm(rng, 4), rand_herm(rng, 4)
    m = PureDephasingModel(0.0, 0.4, H, V, V)
    R0 = thermal_state(H, 1.0)
    for tau in (0.5, 1.0, 4.0):
        assert witness(m, R0, tau, TIMES).max_abs < 1e-13


@pytest.mark.parametrize("n_spins", [1, 2, 3])
def test_witness_fires_on_entangled_noncommuting_models(n_spins):
    m, R0 = generate_model(ModelRecipe(seed=14, n_spins=n_spins))
    tr = witness(m, R0, 1.0, TIMES)
    assert tr.certifies()
    assert negativity(joint_state_at(m, R0, 1.0), m.d_env) > 0


def test_simplified_witness_matches_full():
    m, R0 = generate_model(ModelRecipe(seed=15, n_spins=2, asymmetric=True))
    full = witness(m, R0, 1.0, TIMES)
    simp = witness(m, R0, 1.0, TIMES, simplified=True)
    assert np.max(np.abs(full.delta - simp.delta)) < 1e-10
    assert simp.simplified


def test_simplified_accepts_identity_coupling():
    rng = np.random.default_rng(16)
    H = rand_herm(rng, 4)
    m = PureDephasingModel(0.0, 0.0, H, 0.3 * np.eye(4), rand_herm(rng, 4))
    witness(m, thermal_state(H, 2.0), 1.0, TIMES, simplified=True)


def test_simplified_rejects_violated_preconditions():
    m, R0 = generate_model(ModelRecipe(seed=17, n_spins=2))
    with pytest.raises(ValidationError, match="V0"):
        witness(m, R0, 1.0, TIMES, simplified=True)
    ma, _ = generate_model(ModelRecipe(seed=17, n_spins=2, asymmetric=True))
    with pytest.raises(ValidationError, match="H_env, R0"):
        witness(ma, rand_density(np.random.default_rng(0), 4), 1.0, TIMES, simplified=True)


def test_witness_rejects_bad_times():
    m, R0 = rand_model(np.random.default_rng(18), 2)
    with pytest.raises(ValidationError):
        witness(m, R0, 1.0, [0.0, np.nan])


def test_witness_closed_form_cross_check_can_fail():
    class Strict:
        def __getattr__(self, name):
            return -1.0 if name == "closed_form_check" else getattr(__import__("qeewitness").TOL, name)

    m, R0 = generate_model(ModelRecipe(seed=19, n_spins=2))
    with pytest.raises(NumericalError, match="closed form"):
        witness(m, R0, 1.0, TIMES, tol=Strict())


def test_default_time_grid_shape():
    g = default_time_grid(10.0)
    assert g[0] == 0 and g[-1] == pytest.approx(10.0)
    assert len(g) == 200
    assert np.all(np.diff(g) > 0)


def test_plateau_detection():
    t = np.linspace(0, 50, 200)
    assert plateau_reached(1 + np.exp(-t))
    assert not plateau_reached(np.cos(t))
