"""Entanglement detection by an intermediate qubit measurement.

Measured run: prepare ``|+> (x) R0``, evolve for ``tau``, measure the qubit
in the ``{|+>, |->}`` basis, evolve each outcome for a further ``t`` and
average the qubit coherence over the outcomes.

Comparative run: prepare ``|0> (x) R0``, evolve for ``tau``, rotate the qubit
to ``|+>``, evolve for ``t`` and read off the coherence.

The witness is the difference of the two coherences. A nonzero value at
any ``t`` certifies qubit-environment entanglement at ``tau``; zero is
inconclusive.

Coherence of a qubit state means the ``<0|rho|1>`` element. For the ``|->``
branch this element carries an intrinsic minus sign, which the outcome
average undoes by subtracting that branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import TOL
from .dephasing_model import (
    PureDephasingModel,
    _check_env_state,
    conditional_env_states,
    normalize_identity_shift,
)
from .operator_core import (
    BipartiteIndex,
    NumericalError,
    ValidationError,
    commutator_norm,
    partial_trace_env,
    require_density,
)

PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
PLUS_STATE = np.outer(PLUS, PLUS.conj())
MINUS_STATE = np.outer(MINUS, MINUS.conj())
ZERO_STATE = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


def evolve_joint(model: PureDephasingModel, qubit_state, R0, t: float) -> np.ndarray:
    """Evolve ``qubit_state (x) R0`` for time ``t``; returns the joint state.

    Works blockwise: block ``(q, q')`` is ``w_q c_{qq'} R0 w_{q'}^dagger``.
    """
    q = require_density(qubit_state, "qubit_state")
    if q.shape != (2, 2):
        raise ValidationError(f"qubit_state must be 2x2, got {q.shape}")
    R0 = _check_env_state(model, R0)
    return _evolve(model, q, R0, t)


def _evolve(model: PureDephasingModel, q: np.ndarray, R0: np.ndarray, t: float) -> np.ndarray:
    w = (model.w0(t), model.w1(t))
    d = model.d_env
    out = np.empty((2 * d, 2 * d), dtype=complex)
    wR = (w[0] @ R0, w[1] @ R0)
    for a in range(2):
        for b in range(2):
            out[a * d:(a + 1) * d, b * d:(b + 1) * d] = q[a, b] * (wR[a] @ w[b].conj().T)
    return out


@dataclass(frozen=True)
class MeasurementBranches:
    """Outcome probabilities and post-measurement environment states.

    A branch whose probability is below the cutoff has ``None`` as its state
    and contributes nothing to outcome averages.
    """

    p_plus: float
    p_minus: float
    R_plus: np.ndarray | None
    R_minus: np.ndarray | None
    tau: float = float("nan")


def measure_plus_minus(sigma_tau, d_env: int | None = None, tau: float = float("nan"),
                       cutoff: float = TOL.branch_probability) -> MeasurementBranches:
    """Projective qubit measurement in the ``{|+>, |->}`` basis."""
    sigma = np.asarray(sigma_tau, dtype=complex)
    idx = BipartiteIndex.for_joint(sigma, d_env)
    tr = np.trace(sigma)
    if abs(tr - 1.0) > TOL.trace:
        raise ValidationError(f"joint state is not normalized: trace = {tr:.15g}")
    b = idx.blocks(sigma)
    results = []
    for vec in (PLUS, MINUS):
        # <v| sigma |v> as an environment operator
        env = np.einsum("i,iajb,j->ab", vec.conj(), b, vec)
        p = float(np.trace(env).real)
        results.append((p, env / p if p >= cutoff else None))
    (pp, Rp), (pm, Rm) = results
    return MeasurementBranches(pp, pm, Rp, Rm, float(tau))


def coherence(sigma, d_env: int | None = None) -> complex:
    """``<0| Tr_E sigma |1>``."""
    return complex(partial_trace_env(sigma, d_env)[0, 1])


def averaged_coherence_direct(model: PureDephasingModel, branches: MeasurementBranches, t: float) -> complex:
    """Outcome-averaged coherence by evolving each measurement branch."""
    total = 0j
    for sign, p, R, proj in ((1, branches.p_plus, branches.R_plus, PLUS_STATE),
                             (-1, branches.p_minus, branches.R_minus, MINUS_STATE)):
        if R is None:
            continue
        sigma = _evolve(model, proj, R, t)
        total += sign * p * coherence(sigma, model.d_env)
    return total


def averaged_coherence_closed(model: PureDephasingModel, R0, tau: float, t: float) -> complex:
    """``1/4 Tr[w0(t) (R00(tau) + R11(tau)) w1(t)^dagger]``."""
    st = conditional_env_states(model, R0, tau)
    return 0.25 * complex(np.trace(model.w0(t) @ (st.R00 + st.R11) @ model.w1(t).conj().T))


def plain_coherence(model: PureDephasingModel, R0, t: float) -> complex:
    """Coherence of an undisturbed ``|+> (x) R0`` run after time ``t``."""
    return coherence(_evolve(model, PLUS_STATE, np.asarray(R0, dtype=complex), t), model.d_env)


def comparative_state(model: PureDephasingModel, R0, tau: float) -> np.ndarray:
    """Environment state after ``tau`` with the qubit held in ``|0>``."""
    sigma = evolve_joint(model, ZERO_STATE, R0, tau)
    d = model.d_env
    return sigma[:d, :d].copy()


def comparative_coherence(model: PureDephasingModel, R0, tau: float, t: float,
                          R00: np.ndarray | None = None) -> complex:
    """Coherence of the comparative run at ``tau + t``.

    ``R00`` may be supplied to skip re-evolving the ``|0>`` preparation.
    """
    if R00 is None:
        R00 = comparative_state(model, R0, tau)
    R00 = 0.5 * (R00 + R00.conj().T)
    return plain_coherence(model, R00, t)


@dataclass(frozen=True)
class WitnessTrace:
    tau: float
    times: np.ndarray
    rho_av: np.ndarray
    rho_ref: np.ndarray
    delta: np.ndarray
    branch: MeasurementBranches
    simplified: bool = False

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.delta))) if len(self.delta) else 0.0

    def certifies(self, threshold: float = TOL.witness_nonzero) -> bool:
        return self.max_abs > threshold


def default_time_grid(t_max: float = 10.0, n: int = 200, n_geometric: int = 60,
                      t_min: float = 1e-3) -> np.ndarray:
    """Zero, a geometric run from ``t_min`` up to 1 ps, then a linear run to ``t_max``."""
    if n <= n_geometric + 1:
        raise ValidationError("grid too short for its geometric part")
    geo = np.geomspace(t_min, min(1.0, t_max), n_geometric)
    lin = np.linspace(min(1.0, t_max), t_max, n - n_geometric)[1:]
    grid = np.concatenate([[0.0], geo, lin])
    return grid


def plateau_reached(values, rel: float = 1e-6, frac: float = 0.1) -> bool:
    """True when the trailing ``frac`` of a sampled curve varies by less than ``rel``."""
    v = np.abs(np.asarray(values))
    k = max(2, int(np.ceil(frac * len(v))))
    tail = v[-k:]
    scale = max(float(np.max(tail)), np.finfo(float).tiny)
    return float(np.max(tail) - np.min(tail)) / scale < rel


def _simplified_preconditions(model: PureDephasingModel, R0: np.ndarray, tol=TOL) -> PureDephasingModel:
    m = normalize_identity_shift(model)
    if np.max(np.abs(m.V0), initial=0.0) > tol.model_hermitian:
        raise ValidationError("simplified witness needs a neutral |0> state: V0 is not a multiple of the identity")
    cn = commutator_norm(m.H_env, R0)
    if cn > tol.commuting:
        raise ValidationError(f"simplified witness needs [H_env, R0] = 0, got norm {cn:.3e}")
    return m


def witness(model: PureDephasingModel, R0, tau: float, times, simplified: bool = False,
            tol=TOL) -> WitnessTrace:
    """Witness trace ``rho_av(tau + t) - rho_ref(tau + t)`` over ``times``.

    With ``simplified`` the comparative run is replaced by a plain ``|+>``
    run; this is only valid for ``V0 = c I`` and an environment state
    commuting with ``H_env``, which is checked.

    Every sample is cross-checked against
    ``1/4 Tr[w0(t) (R11(tau) - R00(tau)) w1(t)^dagger]``.
    """
    R0 = _check_env_state(model, R0)
    if simplified:
        _simplified_preconditions(model, R0, tol)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or not np.all(np.isfinite(times)):
        raise ValidationError("times must be a finite 1-d sequence")

    sigma_tau = evolve_joint(model, PLUS_STATE, R0, tau)
    branches = measure_plus_minus(sigma_tau, model.d_env, tau, tol.branch_probability)
    states = conditional_env_states(model, R0, tau)
    R00 = None if simplified else comparative_state(model, R0, tau)
    gap = states.R11 - states.R00

    rho_av = np.empty(len(times), dtype=complex)
    rho_ref = np.empty(len(times), dtype=complex)
    for k, t in enumerate(times):
        rho_av[k] = averaged_coherence_direct(model, branches, t)
        if simplified:
            rho_ref[k] = plain_coherence(model, R0, t)
        else:
            rho_ref[k] = comparative_coherence(model, R0, tau, t, R00=R00)
        closed = 0.25 * np.trace(model.w0(t) @ gap @ model.w1(t).conj().T)
        err = abs((rho_av[k] - rho_ref[k]) - closed)
        if err > tol.closed_form_check:
            raise NumericalError(
                f"witness at tau={tau}, t={t} disagrees with the closed form by {err:.3e}")
    delta = rho_av - rho_ref
    return WitnessTrace(float(tau), times, rho_av, rho_ref, delta, branches, simplified)
