"""Pure-dephasing qubit-environment Hamiltonians and their conditional dynamics.

The Hamiltonian is ``sum_i eps_i |i><i| + H_env + sum_i |i><i| (x) V_i``. With
the qubit in pointer state ``|i>`` the environment evolves under
``w_i(t) = exp(-i eps_i t / hbar) exp(-i (H_env + V_i) t / hbar)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR, TOL
from .operator_core import (
    HermitianPropagator,
    ValidationError,
    commutator_norm,
    require_density,
    require_hermitian,
)


@dataclass(frozen=True)
class PureDephasingModel:
    """Qubit energies ``eps0, eps1`` (meV) and environment operators (meV).

    The eigendecompositions of ``H_env + V_i`` are computed at construction,
    so instances are read-only and safe to share between threads.
    """

    eps0: float
    eps1: float
    H_env: np.ndarray
    V0: np.ndarray
    V1: np.ndarray
    hbar: float = HBAR
    _prop0: HermitianPropagator = field(init=False, repr=False, compare=False)
    _prop1: HermitianPropagator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mats = {}
        for name in ("H_env", "V0", "V1"):
            m = require_hermitian(getattr(self, name), TOL.model_hermitian, name)
            m.setflags(write=False)
            mats[name] = m
        shapes = {m.shape for m in mats.values()}
        if len(shapes) != 1:
            raise ValidationError(f"H_env, V0, V1 must share one shape, got {sorted(shapes)}")
        if not (np.isfinite(self.eps0) and np.isfinite(self.eps1)):
            raise ValidationError("qubit energies must be finite")
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")
        for name, m in mats.items():
            object.__setattr__(self, name, m)
        object.__setattr__(self, "eps0", float(self.eps0))
        object.__setattr__(self, "eps1", float(self.eps1))
        object.__setattr__(self, "_prop0", HermitianPropagator(mats["H_env"] + mats["V0"], self.hbar))
        object.__setattr__(self, "_prop1", HermitianPropagator(mats["H_env"] + mats["V1"], self.hbar))

    @property
    def d_env(self) -> int:
        return self.H_env.shape[0]

    def full_hamiltonian(self) -> np.ndarray:
        """The joint ``2 d_env`` Hamiltonian, qubit-major."""
        d = self.d_env
        eye = np.eye(d)
        h = np.zeros((2 * d, 2 * d), dtype=complex)
        h[:d, :d] = self.eps0 * eye + self.H_env + self.V0
        h[d:, d:] = self.eps1 * eye + self.H_env + self.V1
        return h

    def w0(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.eps0 * t / self.hbar) * self._prop0(t)

    def w1(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.eps1 * t / self.hbar) * self._prop1(t)


def normalize_identity_shift(model: PureDephasingModel, atol: float = 1e-12) -> PureDephasingModel:
    """Fold identity parts ``c I`` of ``V0`` and ``V1`` into the qubit energies.

    Accepts models written with ``V0 = I`` for a neutral pointer state and
    returns the equivalent model with ``V0 = 0``.
    """
    d = model.d_env
    out = {}
    eps = [model.eps0, model.eps1]
    for i, v in enumerate((model.V0, model.V1)):
        c = np.trace(v).real / d
        rest = v - c * np.eye(d)
        if np.max(np.abs(rest), initial=0.0) <= atol:
            eps[i] += c
            v = np.zeros_like(v)
        out[f"V{i}"] = v
    return PureDephasingModel(eps[0], eps[1], model.H_env, out["V0"], out["V1"], model.hbar)


@dataclass(frozen=True)
class ConditionalPropagator:
    w0: np.ndarray
    w1: np.ndarray
    time: float

    def joint(self) -> np.ndarray:
        """Block-diagonal joint propagator ``diag(w0, w1)``."""
        d = self.w0.shape[0]
        u = np.zeros((2 * d, 2 * d), dtype=complex)
        u[:d, :d] = self.w0
        u[d:, d:] = self.w1
        return u


@dataclass(frozen=True)
class ConditionalEnvStates:
    R00: np.ndarray
    R01: np.ndarray
    R10: np.ndarray
    R11: np.ndarray
    tau: float


def conditional_propagators(model: PureDephasingModel, t: float) -> ConditionalPropagator:
    return ConditionalPropagator(model.w0(t), model.w1(t), float(t))


def _check_env_state(model: PureDephasingModel, R0) -> np.ndarray:
    R0 = require_density(R0, "R0")
    if R0.shape != (model.d_env, model.d_env):
        raise ValidationError(f"R0 has shape {R0.shape}, model environment is {model.d_env}-dimensional")
    return R0


def conditional_env_states(model: PureDephasingModel, R0, tau: float) -> ConditionalEnvStates:
    """``R_ij(tau) = w_i(tau) R0 w_j(tau)^dagger`` for i, j in {0, 1}."""
    R0 = _check_env_state(model, R0)
    prop = conditional_propagators(model, tau)
    w0, w1 = prop.w0, prop.w1
    a0 = w0 @ R0
    a1 = w1 @ R0
    R00 = a0 @ w0.conj().T
    R11 = a1 @ w1.conj().T
    R01 = a0 @ w1.conj().T
    return ConditionalEnvStates(R00, R01, R01.conj().T, R11, float(tau))


@dataclass(frozen=True)
class SeparabilityVerdict:
    separable: bool
    distance: float
    tol: float

    @property
    def verdict(self) -> str:
        return "separable" if self.separable else "entangled"


def separability_check(model: PureDephasingModel, R0, tau: float, tol: float = TOL.separability) -> SeparabilityVerdict:
    """Separability of the state grown from ``|+> (x) R0`` after time ``tau``.

    The joint state is separable iff ``[w0^dagger w1, R0] = 0``, equivalently
    iff ``R00(tau) = R11(tau)``. The Frobenius distance is compared against
    ``tol * sqrt(d_env)``.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    states = conditional_env_states(model, R0, tau)
    dist = float(np.linalg.norm(states.R00 - states.R11))
    scaled = tol * np.sqrt(model.d_env)
    return SeparabilityVerdict(dist <= scaled, dist, scaled)


@dataclass(frozen=True)
class CommutingVerdict:
    commuting: bool
    norm: float

    @property
    def verdict(self) -> str:
        return "commuting" if self.commuting else "noncommuting"


def commuting_blind_spot_check(model: PureDephasingModel, tol: float = TOL.commuting) -> CommutingVerdict:
    """Flag models with ``[H_env + V0, H_env + V1] = 0``.

    For such models the conditional propagators commute at all times and the
    witness is identically zero whether or not entanglement is present.
    """
    norm = commutator_norm(model.H_env + model.V0, model.H_env + model.V1)
    return CommutingVerdict(norm <= tol, norm)
