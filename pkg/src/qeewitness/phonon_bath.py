"""Exciton coupled to bulk acoustic phonons (independent boson model).

The bath enters through the weighted density

    J(omega) = sum_k |f_k / (hbar omega_k)|^2 delta(omega - omega_k)

in its continuum limit. For deformation-potential coupling with a Gaussian
carrier density of widths ``l_perp`` (in plane) and ``l_z`` (growth axis),
linear dispersion ``omega = c k`` gives

    J(omega) = D^2 / (8 pi^2 rho hbar c^5) * omega * A(omega)
    A(omega) = int_{-1}^{1} du exp(-(omega^2 / 2 c^2) (l_perp^2 (1 - u^2) + l_z^2 u^2))

so J ~ omega at low frequency (super-Ohmic: the unweighted density
``(hbar omega)^2 J`` goes as omega^3). J is in ps for omega in rad/ps.

The carrier wave function is ``exp(-(x^2 + y^2) / (2 l_perp^2) - z^2 / (2 l_z^2))``
(unnormalized), so the form factor is ``exp(-(k_perp^2 l_perp^2 + k_z^2 l_z^2) / 4)``.
Global phases from the exciton energy are dropped everywhere: results
correspond to a shifted exciton energy of zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import dawsn, erf

from .constants import EV_SI, HBAR, HBAR_SI, K_B, TOL
from .dephasing_model import PureDephasingModel
from .operator_core import NumericalError, ValidationError, thermal_state
from .protocol import witness


class QuadratureError(NumericalError):
    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message}: estimate {estimate:.12g}, error bound {error_bound:.3e}")
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True)
class PhononBathParams:
    """Material and geometry parameters; defaults describe a small GaAs dot."""

    sigma_diff: float = 9.0  # eV, sigma_e - sigma_h
    mass_density: float = 5360.0  # kg / m^3
    sound_speed: float = 5100.0  # m / s
    l_perp: float = 5.0  # nm
    l_z: float = 1.0  # nm
    temperature: float = 0.0  # K

    def __post_init__(self):
        for name in ("sigma_diff", "mass_density", "sound_speed", "l_perp", "l_z"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v}")
        if not (np.isfinite(self.temperature) and self.temperature >= 0):
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")

    def with_temperature(self, temperature: float) -> "PhononBathParams":
        return PhononBathParams(self.sigma_diff, self.mass_density, self.sound_speed,
                                self.l_perp, self.l_z, temperature)


def bose_occupation(omega, temperature: float):
    """``1 / (exp(hbar omega / k_B T) - 1)``, zero at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValidationError("bose_occupation needs omega > 0")
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return np.zeros_like(omega)[()]
    x = HBAR * omega / (K_B * temperature)
    return (1.0 / np.expm1(x))[()]


def _thermal_factor(omega: np.ndarray, temperature: float) -> np.ndarray:
    # 2 n + 1 = coth(hbar omega / 2 k_B T)
    if temperature == 0:
        return np.ones_like(omega)
    x = HBAR * omega / (2.0 * K_B * temperature)
    return 1.0 / np.tanh(x)


@dataclass(frozen=True)
class SpectralKernel:
    prefactor: float  # ps^2
    l_perp: float  # nm
    l_z: float  # nm
    c: float  # nm / ps
    n_angular: int = 128
    omega_cutoff: float = field(init=False)
    _nodes: np.ndarray = field(init=False, repr=False, compare=False)
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "omega_cutoff", 20.0 * self.c / self.l_z)
        x, w = np.polynomial.legendre.leggauss(self.n_angular)
        # even integrand: integrate over u in [0, 1] and double
        object.__setattr__(self, "_nodes", 0.5 * (x + 1.0))
        object.__setattr__(self, "_weights", w)

    def angular(self, omega) -> np.ndarray:
        """``A(omega)`` by Gauss-Legendre quadrature over ``u = cos(theta)``."""
        omega = np.asarray(omega, dtype=float)
        s = (omega[..., None] / self.c) ** 2 / 2.0
        u2 = self._nodes ** 2
        expo = -s * (self.l_perp ** 2 * (1.0 - u2) + self.l_z ** 2 * u2)
        return np.exp(expo) @ self._weights

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return (self.prefactor * omega * self.angular(omega))[()]

    def standard_density(self, omega):
        """Unweighted density ``sum_k |f_k|^2 delta(omega - omega_k)`` in meV^2 ps."""
        omega = np.asarray(omega, dtype=float)
        return ((HBAR * omega) ** 2 * self(omega))[()]


def build_kernel(params: PhononBathParams, n_angular: int = 128) -> SpectralKernel:
    D = params.sigma_diff * EV_SI
    pref_si = D ** 2 / (8.0 * math.pi ** 2 * params.mass_density * HBAR_SI * params.sound_speed ** 5)
    # J_ps(w_ps) = 1e12 J_s(1e12 w_ps) and J_s is linear in omega up to A
    return SpectralKernel(pref_si * 1e24, params.l_perp, params.l_z, params.sound_speed * 1e-3, n_angular)


def angular_closed_form(omega, l_perp: float, l_z: float, c: float):
    """``A(omega)`` in closed form (test oracle for the angular quadrature).

    With ``a, b = (omega/c)^2 l_perp^2 / 2, (omega/c)^2 l_z^2 / 2`` the integrand is
    ``exp(-b) exp(-(a - b)(1 - u^2))``; ``a > b`` reduces to the Dawson function,
    ``a < b`` to the error function.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    a = (omega / c) ** 2 * l_perp ** 2 / 2.0
    b = (omega / c) ** 2 * l_z ** 2 / 2.0
    s = a - b
    out = 2.0 * np.exp(-a)
    pos = s > 1e-12
    neg = s < -1e-12
    rp = np.sqrt(s[pos])
    out[pos] = 2.0 * np.exp(-b[pos]) * dawsn(rp) / rp
    rn = np.sqrt(-s[neg])
    out[neg] = np.sqrt(np.pi) * np.exp(-a[neg]) * erf(rn) / rn
    return out


# --- quadrature -------------------------------------------------------------

def _panel_edges(omega_cut: float, t: float, n_base: int) -> np.ndarray:
    edges = np.linspace(0.0, omega_cut, n_base + 1)
    if t > 0:
        half_period = math.pi / t
        n_half = int(omega_cut / half_period)
        if n_half > 0:
            edges = np.union1d(edges, half_period * np.arange(1, n_half + 1))
    return edges


def _gauss_panels(f, edges: np.ndarray, order: int) -> tuple[float, float]:
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    vals = f(nodes.ravel()).reshape(nodes.shape)
    half = 0.5 * (b - a)
    return float(np.sum(half * (vals @ w)[:, None])), float(np.sum(half * (np.abs(vals) @ w)[:, None]))


def integrate(f, omega_cut: float, t: float = 0.0, rel: float = TOL.quadrature_rel,
              n_base: int = 64, order: int = 16, max_doublings: int = 8) -> float:
    """Composite Gauss-Legendre on ``[0, omega_cut]`` with half-period panel splitting.

    Panels are bisected until two successive estimates agree to ``rel``
    relative to ``int |f|``.
    """
    edges = _panel_edges(omega_cut, t, n_base)
    prev, scale = _gauss_panels(f, edges, order)
    for _ in range(max_doublings):
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
        cur, scale = _gauss_panels(f, edges, order)
        err = abs(cur - prev)
        if err <= rel * max(scale, np.finfo(float).tiny):
            return cur
        prev = cur
    raise QuadratureError(f"no convergence after {max_doublings} panel doublings", cur, err)


def phase_integral(kernel: SpectralKernel, t: float, **quad) -> float:
    """``int J(omega) sin(omega t) d omega``; zero in the ``t -> inf`` limit."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if t == 0 or np.isinf(t):
        return 0.0
    return integrate(lambda w: kernel(w) * np.sin(w * t), kernel.omega_cutoff, t, **quad)


def decoherence_integral(kernel: SpectralKernel, t: float, temperature: float, **quad) -> float:
    """``int J(omega) (1 - cos omega t) (2 n(omega, T) + 1) d omega``.

    ``t = inf`` returns the plateau value with the oscillating term averaged out.
    """
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if temperature < 0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    if t == 0:
        return 0.0
    if np.isinf(t):
        return integrate(lambda w: kernel(w) * _thermal_factor(w, temperature), kernel.omega_cutoff, **quad)
    return integrate(lambda w: kernel(w) * 2.0 * np.sin(0.5 * w * t) ** 2 * _thermal_factor(w, temperature),
                     kernel.omega_cutoff, t, **quad)


def _witness_from_integrals(phi_t: float, kappa_t: float, entangling_phase: float) -> complex:
    return 0.25 * np.exp(1j * phi_t) * np.exp(-kappa_t) * (np.exp(2j * entangling_phase) - 1.0)


def entangling_phase(kernel: SpectralKernel, tau: float, t: float, **quad) -> float:
    """``phi(t + tau) - phi(t) - phi(tau)``; tends to ``-phi(tau)`` for ``t -> inf``."""
    if np.isinf(t):
        return -phase_integral(kernel, tau, **quad)
    return (phase_integral(kernel, t + tau, **quad) - phase_integral(kernel, t, **quad)
            - phase_integral(kernel, tau, **quad))


def phonon_witness(params: PhononBathParams, tau: float, t: float, kernel: SpectralKernel | None = None) -> complex:
    """Witness ``1/4 e^{i phi(t)} e^{-kappa(t, T)} (e^{2 i Phi(tau, t)} - 1)`` at finite or infinite ``t``.

    ``Phi`` is :func:`entangling_phase`. For ``t -> inf`` the magnitude is
    ``1/2 e^{-kappa_inf(T)} |sin phi(tau)|``.
    """
    if tau < 0 or t < 0:
        raise ValidationError("tau and t must be >= 0")
    kernel = kernel or build_kernel(params)
    return complex(_witness_from_integrals(phase_integral(kernel, t),
                                           decoherence_integral(kernel, t, params.temperature),
                                           entangling_phase(kernel, tau, t)))


def phonon_witness_asymptotic(params: PhononBathParams, tau: float, t: float,
                              kernel: SpectralKernel | None = None) -> complex:
    """Large-``t`` form ``1/4 e^{i phi(t)} e^{-kappa(t, T)} (e^{2 i phi(tau)} - 1)``.

    Agrees with :func:`phonon_witness` in magnitude once ``phi(t)`` and
    ``phi(t + tau)`` have decayed; at short ``t`` it is not exact.
    """
    if tau < 0 or t < 0:
        raise ValidationError("tau and t must be >= 0")
    kernel = kernel or build_kernel(params)
    return complex(_witness_from_integrals(phase_integral(kernel, t),
                                           decoherence_integral(kernel, t, params.temperature),
                                           phase_integral(kernel, tau)))


def phonon_plain_coherence(params: PhononBathParams, t: float, kernel: SpectralKernel | None = None) -> complex:
    """Coherence of an undisturbed ``|+>`` run, ``1/2 e^{i phi(t)} e^{-kappa(t, T)}``."""
    if t < 0:
        raise ValidationError("t must be >= 0")
    kernel = kernel or build_kernel(params)
    return complex(0.5 * np.exp(1j * phase_integral(kernel, t))
                   * np.exp(-decoherence_integral(kernel, t, params.temperature)))


def phonon_averaged_coherence(params: PhononBathParams, tau: float, t: float,
                              kernel: SpectralKernel | None = None) -> complex:
    """Outcome-averaged coherence ``rho(t) (e^{2 i Phi(tau, t)} + 1) / 2``."""
    kernel = kernel or build_kernel(params)
    return phonon_plain_coherence(params, t, kernel) * 0.5 * (np.exp(2j * entangling_phase(kernel, tau, t)) + 1.0)


@dataclass(frozen=True)
class SweepResult:
    taus: np.ndarray
    temperatures: np.ndarray
    t: float
    phase: np.ndarray  # entangling phase per tau, (n_tau,)
    phi_t: float
    kappa_t: np.ndarray  # (n_T,)

    @property
    def delta(self) -> np.ndarray:
        """Complex witness, shape ``(n_T, n_tau)``."""
        return np.array([[_witness_from_integrals(self.phi_t, k, p) for p in self.phase]
                         for k in self.kappa_t])

    @property
    def rho_ref(self) -> np.ndarray:
        """Plain coherence per temperature, shape ``(n_T,)``."""
        return 0.5 * np.exp(1j * self.phi_t) * np.exp(-self.kappa_t)


def sweep_tau(params: PhononBathParams, taus, temperatures, t: float = np.inf,
              kernel: SpectralKernel | None = None, executor=None, rel: float = TOL.quadrature_rel) -> SweepResult:
    """Witness over a ``tau`` grid and several temperatures at fixed ``t``.

    The entangling phase does not depend on temperature and is computed
    once per tau; the decoherence exponent once per temperature.
    """
    kernel = kernel or build_kernel(params)
    taus = np.asarray(taus, dtype=float)
    temps = np.asarray(temperatures, dtype=float)
    mapper = executor.map if executor is not None else map
    phase = np.array(list(mapper(lambda tau: entangling_phase(kernel, tau, t, rel=rel), taus)))
    kappa = np.array(list(mapper(lambda T: decoherence_integral(kernel, t, T, rel=rel), temps)))
    return SweepResult(taus, temps, float(t), phase, phase_integral(kernel, t, rel=rel), kappa)


def decoherence_plateau_change(kernel: SpectralKernel, temperature: float,
                               t_start: float = 40.0, t_end: float = 50.0, n: int = 11) -> float:
    """Relative spread of ``kappa(t, T)`` over ``[t_start, t_end]``."""
    vals = np.array([decoherence_integral(kernel, t, temperature) for t in np.linspace(t_start, t_end, n)])
    return float((vals.max() - vals.min()) / max(abs(vals.max()), np.finfo(float).tiny))


# --- discretized bath ---------------------------------------------------------

@dataclass(frozen=True)
class DiscreteModes:
    omegas: np.ndarray  # rad / ps
    displacements: np.ndarray  # f_k / (hbar omega_k), dimensionless


def sample_modes(kernel: SpectralKernel, n_modes: int, coupling: float = 1.0, n_grid: int = 20001) -> DiscreteModes:
    """Split J into ``n_modes`` equal-weight bins; each bin becomes one mode at its mean frequency.

    ``coupling`` scales the displacements (``coupling = 0`` decouples the bath).
    """
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1")
    w = np.linspace(0.0, kernel.omega_cutoff, n_grid)
    j = kernel(w)
    seg = 0.5 * (j[1:] + j[:-1]) * np.diff(w)
    wseg = 0.5 * (j[1:] * w[1:] + j[:-1] * w[:-1]) * np.diff(w)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    bounds = np.searchsorted(cum, np.linspace(0.0, cum[-1], n_modes + 1)[1:-1])
    pieces = np.split(np.arange(len(seg)), bounds)
    weights = np.array([seg[p].sum() for p in pieces])
    omegas = np.array([wseg[p].sum() / seg[p].sum() for p in pieces])
    return DiscreteModes(omegas, coupling * np.sqrt(weights))


def discrete_closed_form(modes: DiscreteModes, temperature: float, tau: float, t: float,
                         asymptotic: bool = False) -> complex:
    """Closed-form witness with the mode integrals replaced by sums over ``modes``."""
    g2 = modes.displacements ** 2
    om = modes.omegas

    def phi(x):
        return float(np.sum(g2 * np.sin(om * x)))

    kappa = float(np.sum(g2 * 2.0 * np.sin(0.5 * om * t) ** 2 * _thermal_factor(om, temperature)))
    phase = phi(tau) if asymptotic else phi(t + tau) - phi(t) - phi(tau)
    return complex(_witness_from_integrals(phi(t), kappa, phase))


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def discrete_bath_model(modes: DiscreteModes, fock_cutoff: int, temperature: float):
    """Fock-truncated model ``H_env = sum hbar w b^dag b``, ``V1 = sum hbar w (g b + g b^dag)``, ``V0 = 0``.

    ``eps1`` cancels the polaron shift so the shifted exciton energy is zero.
    """
    n = fock_cutoff + 1
    m = len(modes.omegas)
    d = n ** m
    H = np.zeros((d, d), dtype=complex)
    V = np.zeros((d, d), dtype=complex)
    eye = np.eye(n)
    b = _ladder(n)
    for k, (om, g) in enumerate(zip(modes.omegas, modes.displacements)):
        def embed(op, k=k):
            out = np.ones((1, 1))
            for j in range(m):
                out = np.kron(out, op if j == k else eye)
            return out
        bk = embed(b)
        H += HBAR * om * (bk.conj().T @ bk)
        V += HBAR * om * g * (bk + bk.conj().T)
    shift = float(np.sum(HBAR * modes.omegas * modes.displacements ** 2))
    model = PureDephasingModel(0.0, shift, H, np.zeros_like(H), V)
    beta = np.inf if temperature == 0 else 1.0 / (K_B * temperature)
    return model, thermal_state(H, beta)


@dataclass(frozen=True)
class CrossCheck:
    generic: complex
    closed: complex
    gap: float
    asymptotic: complex = complex("nan")

    @property
    def asymptotic_gap(self) -> float:
        """Gap to the large-``t`` form; not expected to vanish for discrete modes."""
        return abs(self.generic - self.asymptotic)


def discretized_cross_check(params: PhononBathParams, n_modes: int, fock_cutoff: int, tau: float, t: float,
                            coupling: float = 1.0, kernel: SpectralKernel | None = None,
                            max_occupation: float = 0.2) -> CrossCheck:
    """Compare the closed-form witness on a few discrete modes with the generic protocol."""
    if (fock_cutoff + 1) ** n_modes > 1024:
        raise ValidationError(f"(fock_cutoff + 1)^n_modes = {(fock_cutoff + 1) ** n_modes} exceeds 1024")
    kernel = kernel or build_kernel(params)
    modes = sample_modes(kernel, n_modes, coupling)
    occ = bose_occupation(modes.omegas, params.temperature)
    if np.max(occ) >= max_occupation:
        raise ValidationError(f"thermal occupation {np.max(occ):.3f} >= {max_occupation}; Fock truncation invalid")
    model, R0 = discrete_bath_model(modes, fock_cutoff, params.temperature)
    trace = witness(model, R0, tau, [t], simplified=True)
    generic = complex(trace.delta[0])
    closed = discrete_closed_form(modes, params.temperature, tau, t)
    asym = discrete_closed_form(modes, params.temperature, tau, t, asymptotic=True)
    return CrossCheck(generic, closed, abs(generic - closed), asym)
