import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qeewitness.operator_core import (
    BipartiteIndex,
    HermitianPropagator,
    ValidationError,
    commutator_norm,
    expm_hermitian_unitary,
    is_unitary,
    kron_state,
    negativity,
    partial_trace_env,
    partial_trace_qubit,
    partial_transpose_qubit,
    require_density,
    thermal_state,
)

from helpers import rand_density, rand_herm, rand_unitary

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def taylor_expm(a, terms=30):
    """Scaling and squaring with a plain Taylor series."""
    norm = np.linalg.norm(a, 1)
    s = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    b = a / 2 ** s
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def naive_partial_trace_env(sigma, d):
    out = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            for e in range(d):
                out[i, j] += sigma[i * d + e, j * d + e]
    return out


def naive_partial_transpose(sigma, d):
    out = np.zeros_like(sigma)
    for i in range(2):
        for j in range(2):
            for a in range(d):
                for b in range(d):
                    out[j * d + a, i * d + b] = sigma[i * d + a, j * d + b]
    return out


# --- expm ---------------------------------------------------------------------

def test_expm_zero_is_identity():
    assert np.allclose(expm_hermitian_unitary(np.zeros((4, 4)), 3.7), np.eye(4), atol=0)


def test_expm_diagonal_pi():
    u = expm_hermitian_unitary(np.diag([1.0, -1.0]), np.pi, hbar=1.0)
    assert np.allclose(u, -np.eye(2), atol=1e-15)


def test_expm_matches_taylor_oracle():
    rng = np.random.default_rng(11)
    h = rand_herm(rng, 6)
    u = expm_hermitian_unitary(h, 0.7)
    assert np.linalg.norm(u - taylor_expm(-1j * 0.7 * h)) < 1e-9


def test_expm_rejects_non_hermitian():
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ValidationError, match="not Hermitian.*1.000e\\+00"):
        expm_hermitian_unitary(a, 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, t=st.floats(-10, 10))
def test_expm_inverse_and_unitarity(seed, t):
    h = rand_herm(np.random.default_rng(seed), 5)
    prop = HermitianPropagator(h)
    u = prop(t)
    assert is_unitary(u, 1e-10)
    assert np.max(np.abs(u @ prop(-t) - np.eye(5))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds, t1=st.floats(-5, 5), t2=st.floats(-5, 5))
def test_expm_group_property(seed, t1, t2):
    prop = HermitianPropagator(rand_herm(np.random.default_rng(seed), 4))
    assert np.max(np.abs(prop(t1 + t2) - prop(t1) @ prop(t2))) < 1e-10


# --- partial traces -----------------------------------------------------------

def test_partial_trace_of_product():
    rng = np.random.default_rng(1)
    q, r = rand_density(rng, 2), rand_density(rng, 5)
    s = kron_state(q, r)
    assert np.allclose(partial_trace_env(s), q, atol=1e-14)
    assert np.allclose(partial_trace_qubit(s), r, atol=1e-14)


def test_partial_trace_bell_state():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace_env(np.outer(psi, psi)), np.eye(2) / 2)


def test_partial_trace_matches_loop_oracle():
    rng = np.random.default_rng(2)
    s = rand_density(rng, 8)
    assert np.allclose(partial_trace_env(s, 4), naive_partial_trace_env(s, 4), atol=1e-15)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValidationError):
        partial_trace_env(np.eye(6) / 6, d_env=4)
    with pytest.raises(ValidationError):
        partial_trace_qubit(np.eye(5) / 5)


@pytest.mark.parametrize("d", [1, 3, 8])
def test_partial_traces_preserve_trace(d):
    rng = np.random.default_rng(d)
    s = rand_density(rng, 2 * d)
    assert abs(np.trace(partial_trace_env(s)) - 1) < 1e-12
    assert abs(np.trace(partial_trace_qubit(s)) - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_local_env_unitary_leaves_qubit_state(seed):
    rng = np.random.default_rng(seed)
    s = rand_density(rng, 8)
    u = np.kron(np.eye(2), rand_unitary(rng, 4))
    assert np.max(np.abs(partial_trace_env(u @ s @ u.conj().T) - partial_trace_env(s))) < 1e-12


# --- negativity ---------------------------------------------------------------

def test_partial_transpose_matches_loop_oracle():
    s = rand_density(np.random.default_rng(3), 6)
    assert np.allclose(partial_transpose_qubit(s), naive_partial_transpose(s, 3), atol=0)


def test_negativity_bell_state():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert negativity(np.outer(psi, psi)) == pytest.approx(0.5, abs=1e-14)


def test_negativity_matches_eigenvalue_oracle():
    rng = np.random.default_rng(4)
    psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi /= np.linalg.norm(psi)
    s = 0.7 * np.outer(psi, psi.conj()) + 0.3 * rand_density(rng, 16)
    ev = np.linalg.eigvalsh(naive_partial_transpose(s, 8))
    expected = -ev[ev < 0].sum()
    assert expected > 0.01
    assert negativity(s, 8) == pytest.approx(expected, abs=1e-12)


def test_negativity_of_products_is_exactly_zero():
    rng = np.random.default_rng(5)
    for k in range(1000):
        d = (2, 3, 4, 8)[k % 4]
        rank = 1 + k % d
        s = kron_state(rand_density(rng, 2, rank=1 + k % 2), rand_density(rng, d, rank=rank))
        assert negativity(s, d) == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_negativity_local_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    psi /= np.linalg.norm(psi)
    s = 0.5 * np.outer(psi, psi.conj()) + 0.5 * rand_density(rng, 8)
    u = np.kron(rand_unitary(rng, 2), rand_unitary(rng, 4))
    assert abs(negativity(u @ s @ u.conj().T, 4) - negativity(s, 4)) < 1e-10


# --- commutators, states --------------------------------------------------------

def test_commutator_norm_cases():
    a = rand_herm(np.random.default_rng(6), 3)
    assert commutator_norm(a, a) == 0
    assert commutator_norm(np.diag([1, 2, 3]), np.diag([4, -1, 0.5])) == 0
    x = np.array([[0, 1], [1, 0]])
    z = np.diag([1, -1])
    assert commutator_norm(x, z) == pytest.approx(2 * np.sqrt(2), abs=1e-15)
    with pytest.raises(ValidationError):
        commutator_norm(np.eye(2), np.eye(3))


def test_require_density_rejects_bad_states():
    with pytest.raises(ValidationError, match="trace"):
        require_density(np.eye(2))
    with pytest.raises(ValidationError, match="eigenvalue"):
        require_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError, match="NaN"):
        require_density(np.array([[np.nan, 0], [0, 1]]))


def test_thermal_state_limits():
    h = rand_herm(np.random.default_rng(7), 4)
    assert np.allclose(thermal_state(h, 0.0), np.eye(4) / 4)
    ev, vecs = np.linalg.eigh(h)
    ground = np.outer(vecs[:, 0], vecs[:, 0].conj())
    assert np.allclose(thermal_state(h, np.inf), ground, atol=1e-12)
    rho = thermal_state(h, 0.8)
    assert commutator_norm(rho, h) < 1e-12
    assert abs(np.trace(rho) - 1) < 1e-14


def test_bipartite_index():
    idx = BipartiteIndex(3)
    assert idx.dim == 6
    with pytest.raises(ValidationError):
        BipartiteIndex(2, d_qubit=3)
