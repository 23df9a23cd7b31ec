"""Dense complex-matrix kernel.

Joint qubit-environment operators use qubit-major ordering: the joint index
of qubit state ``q`` and environment state ``e`` is ``q * d_env + e``, so a
joint operator is a 2x2 grid of ``d_env x d_env`` blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import TOL


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical check failed (non-convergence, broken identity, ...)."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(f"{name}: expected a non-empty 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name}: contains NaN or Inf")
    return m


def hermitian_defect(a: np.ndarray) -> float:
    """Largest elementwise ``|A - A^dagger|``."""
    return float(np.max(np.abs(a - a.conj().T)))


def require_hermitian(a, tol: float = TOL.model_hermitian, name: str = "matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name}: not square, shape {m.shape}")
    defect = hermitian_defect(m)
    if defect > tol:
        raise ValidationError(f"{name}: not Hermitian, max |A - A^dagger| = {defect:.3e} > {tol:.1e}")
    return m


def require_density(a, name: str = "state", tol=TOL) -> np.ndarray:
    """Validate a density operator (Hermitian, unit trace, positive to slack)."""
    m = require_hermitian(a, tol.hermitian, name)
    tr = np.trace(m)
    if abs(tr - 1.0) > tol.trace:
        raise ValidationError(f"{name}: trace {tr:.15g} differs from 1 by more than {tol.trace:.1e}")
    lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    if lo < tol.positivity:
        raise ValidationError(f"{name}: smallest eigenvalue {lo:.3e} below {tol.positivity:.1e}")
    return m


def is_unitary(u: np.ndarray, tol: float = TOL.unitary) -> bool:
    eye = np.eye(u.shape[0])
    return bool(np.max(np.abs(u.conj().T @ u - eye)) <= tol)


@dataclass(frozen=True)
class BipartiteIndex:
    """Qubit-major tensor layout of a 2 x d_env joint space."""

    d_env: int
    d_qubit: int = 2

    def __post_init__(self):
        if self.d_qubit != 2:
            raise ValidationError("only a qubit (d_qubit = 2) is supported")
        if self.d_env < 1:
            raise ValidationError(f"d_env must be positive, got {self.d_env}")

    @property
    def dim(self) -> int:
        return self.d_qubit * self.d_env

    @classmethod
    def for_joint(cls, sigma: np.ndarray, d_env: int | None = None) -> "BipartiteIndex":
        n = sigma.shape[0]
        if d_env is None:
            if n % 2:
                raise ValidationError(f"joint dimension {n} is odd")
            d_env = n // 2
        idx = cls(d_env)
        if n != idx.dim or sigma.shape != (n, n):
            raise ValidationError(f"joint operator shape {sigma.shape} does not match 2 x {d_env}")
        return idx

    def blocks(self, sigma: np.ndarray) -> np.ndarray:
        """View ``sigma`` as ``[q, e, q', e']``."""
        d = self.d_env
        return sigma.reshape(2, d, 2, d)


class HermitianPropagator:
    """Eigendecomposition of a Hermitian H, reused for ``exp(-i H t / hbar)`` at many t."""

    __slots__ = ("evals", "evecs", "hbar")

    def __init__(self, h, hbar: float = 1.0, tol: float = TOL.model_hermitian):
        h = require_hermitian(h, tol, "Hamiltonian")
        evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
        self.evals = evals
        self.evecs = evecs
        self.hbar = float(hbar)
        self.evals.setflags(write=False)
        self.evecs.setflags(write=False)

    def __call__(self, t: float) -> np.ndarray:
        if not np.isfinite(t):
            raise ValidationError(f"time must be finite, got {t}")
        phases = np.exp(-1j * self.evals * (t / self.hbar))
        return (self.evecs * phases) @ self.evecs.conj().T


def expm_hermitian_unitary(h, t: float, hbar: float = 1.0) -> np.ndarray:
    """Return ``exp(-i H t / hbar)`` for Hermitian ``H`` via eigendecomposition."""
    return HermitianPropagator(h, hbar)(t)


def partial_trace_env(sigma, d_env: int | None = None) -> np.ndarray:
    """Trace out the environment; returns the 2x2 qubit state."""
    sigma = as_matrix(sigma, "sigma")
    idx = BipartiteIndex.for_joint(sigma, d_env)
    return np.einsum("iaja->ij", idx.blocks(sigma))


def partial_trace_qubit(sigma, d_env: int | None = None) -> np.ndarray:
    """Trace out the qubit; returns the d_env x d_env environment state."""
    sigma = as_matrix(sigma, "sigma")
    idx = BipartiteIndex.for_joint(sigma, d_env)
    b = idx.blocks(sigma)
    return b[0, :, 0, :] + b[1, :, 1, :]


def partial_transpose_qubit(sigma, d_env: int | None = None) -> np.ndarray:
    sigma = as_matrix(sigma, "sigma")
    idx = BipartiteIndex.for_joint(sigma, d_env)
    return idx.blocks(sigma).transpose(2, 1, 0, 3).reshape(idx.dim, idx.dim)


def negativity(sigma, d_env: int | None = None, tol=TOL) -> float:
    """Negativity ``(||sigma^T_Q||_1 - Tr sigma) / 2`` with the qubit partially transposed.

    Using ``Tr sigma`` in place of 1 removes the trace rounding of the input;
    results within ``tol.negativity_clamp`` of zero are returned as exactly 0.
    """
    sigma = as_matrix(sigma, "sigma")
    pt = partial_transpose_qubit(sigma, d_env)
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    value = 0.5 * (float(np.sum(np.abs(ev))) - float(np.trace(sigma).real))
    if value < tol.positivity:
        raise NumericalError(f"negativity {value:.3e} below {tol.positivity:.1e}; input is not a valid state")
    return 0.0 if value <= tol.negativity_clamp else value


def commutator_norm(a, b) -> float:
    """Frobenius norm of ``AB - BA``."""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValidationError(f"commutator needs equal square shapes, got {a.shape} and {b.shape}")
    return float(np.linalg.norm(a @ b - b @ a))


def kron_state(qubit, env) -> np.ndarray:
    """``qubit (x) env`` in qubit-major order."""
    return np.kron(as_matrix(qubit, "qubit"), as_matrix(env, "env"))


def thermal_state(h, beta: float) -> np.ndarray:
    """``exp(-beta H) / Z``; ``beta = inf`` gives the uniform mixture over the ground space."""
    h = require_hermitian(h, name="H")
    d = h.shape[0]
    if beta == 0:
        return np.eye(d, dtype=complex) / d
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    shifted = evals - evals[0]
    if np.isinf(beta):
        weights = (shifted <= 1e-12 * max(1.0, abs(evals[-1]))).astype(float)
    else:
        weights = np.exp(-beta * shifted)
    weights = weights / weights.sum()
    rho = (evecs * weights) @ evecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real
