"""Seeded random models and brute-force entanglement checks for the witness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import TOL
from .dephasing_model import PureDephasingModel, conditional_env_states
from .operator_core import (
    NumericalError,
    ValidationError,
    commutator_norm,
    negativity,
    thermal_state,
)
from .protocol import (
    PLUS_STATE,
    averaged_coherence_closed,
    averaged_coherence_direct,
    evolve_joint,
    measure_plus_minus,
    witness,
)

MAX_SPINS = 8
MAX_BLIND_SPOT_SPINS = 6
MAX_CERTIFY_DIM = 64
INFINITE = "infinite"


class SoundnessViolation(AssertionError):
    """The witness fired on a separable state. Always an implementation bug."""


@dataclass(frozen=True)
class ModelRecipe:
    """Recipe for a random environment of ``n_spins`` spins (``d_env = 2**n_spins``).

    ``thermal_beta`` is in 1/meV; the string ``"infinite"`` selects infinite
    temperature (``R0 = I / d_env``), the same state as ``thermal_beta = 0``.
    """

    seed: int
    n_spins: int = 2
    coupling_scale: float = 1.0
    asymmetric: bool = False
    thermal_beta: float | str = 1.0

    @property
    def d_env(self) -> int:
        return 2 ** self.n_spins


def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    """Complex Gaussian matrix, symmetrized, rescaled to spectral radius ``scale``."""
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (a + a.conj().T)
    radius = np.max(np.abs(np.linalg.eigvalsh(h)))
    return h * (scale / radius) if radius > 0 else h


def random_density(rng: np.random.Generator, d: int, purity_scale: float = 3.0) -> np.ndarray:
    """Full-rank state ``exp(-K) / Z`` for a random Hermitian ``K`` of spectral radius ``purity_scale``."""
    return thermal_state(random_hermitian(rng, d, purity_scale), 1.0)


def generate_model(recipe: ModelRecipe) -> tuple[PureDephasingModel, np.ndarray]:
    if not 1 <= recipe.n_spins <= MAX_SPINS:
        raise ValidationError(f"n_spins must be in 1..{MAX_SPINS}, got {recipe.n_spins}")
    rng = np.random.default_rng(recipe.seed)
    d = recipe.d_env
    s = recipe.coupling_scale
    H_env = random_hermitian(rng, d, s)
    V1 = random_hermitian(rng, d, s)
    V0 = np.zeros((d, d), dtype=complex) if recipe.asymmetric else random_hermitian(rng, d, s)
    eps0, eps1 = 0.0, float(rng.uniform(-s, s))
    beta = recipe.thermal_beta
    if isinstance(beta, str):
        if beta != INFINITE:
            raise ValidationError(f"thermal_beta must be a number or {INFINITE!r}, got {beta!r}")
        beta = 0.0
    R0 = thermal_state(H_env, float(beta))
    return PureDephasingModel(eps0, eps1, H_env, V0, V1), R0


def joint_state_at(model: PureDephasingModel, R0, tau: float) -> np.ndarray:
    return evolve_joint(model, PLUS_STATE, R0, tau)


@dataclass(frozen=True)
class Certification:
    witness_max: float
    negativity: float
    verdict: str  # "sound" | "blindspot" | "separable"
    tau: float = float("nan")


def certify_witness(model: PureDephasingModel, R0, tau: float, times, tol=TOL) -> Certification:
    """Compare the witness against the negativity of the state at ``tau``.

    Raises :class:`SoundnessViolation` when the witness fires on a state with
    zero negativity.
    """
    if model.d_env > MAX_CERTIFY_DIM:
        raise ValidationError(f"d_env = {model.d_env} exceeds {MAX_CERTIFY_DIM} for negativity certification")
    trace = witness(model, R0, tau, times, tol=tol)
    neg = negativity(joint_state_at(model, R0, tau), model.d_env, tol)
    wmax = trace.max_abs
    if neg <= tol.negativity_zero:
        if wmax > tol.witness_nonzero:
            raise SoundnessViolation(
                f"witness {wmax:.3e} at tau={tau} on a state with negativity {neg:.3e}")
        verdict = "separable"
    elif wmax > tol.witness_nonzero:
        verdict = "sound"
    else:
        verdict = "blindspot"
    return Certification(wmax, neg, verdict, float(tau))


def build_blind_spot_model(n_spins: int, seed: int, coupling_scale: float = 2.0,
                           max_draws: int = 1000) -> tuple[PureDephasingModel, np.ndarray]:
    """Entangling model whose conditional propagators commute.

    ``H_env = V0 = 0`` and ``V1`` random, with a full-rank ``R0`` that does not
    commute with ``V1``.
    """
    if not 1 <= n_spins <= MAX_BLIND_SPOT_SPINS:
        raise ValidationError(f"n_spins must be in 1..{MAX_BLIND_SPOT_SPINS}, got {n_spins}")
    rng = np.random.default_rng(seed)
    d = 2 ** n_spins
    zero = np.zeros((d, d), dtype=complex)
    V1 = random_hermitian(rng, d, coupling_scale)
    for _ in range(max_draws):
        R0 = random_density(rng, d)
        if commutator_norm(V1, R0) > 0.1:
            return PureDephasingModel(0.0, 0.0, zero, zero, V1), R0
    raise NumericalError(f"no R0 with ||[V1, R0]|| > 0.1 in {max_draws} draws (seed {seed}, d_env {d})")


@dataclass(frozen=True)
class CriterionComparison:
    agree: bool
    neg: float
    dist: float


def separability_criterion_equivalence(model: PureDephasingModel, R0, tau: float,
                                       dist_tol: float = 1e-8, tol=TOL) -> CriterionComparison:
    """Check ``negativity = 0 <=> R00(tau) = R11(tau)`` on one instance."""
    if model.d_env > MAX_CERTIFY_DIM:
        raise ValidationError(f"d_env = {model.d_env} exceeds {MAX_CERTIFY_DIM}")
    st = conditional_env_states(model, R0, tau)
    dist = float(np.linalg.norm(st.R00 - st.R11))
    neg = negativity(joint_state_at(model, R0, tau), model.d_env, tol)
    return CriterionComparison((neg <= tol.negativity_zero) == (dist <= dist_tol), neg, dist)


# --- corpus ---------------------------------------------------------------

CORPUS_KINDS = ("generic", "asymmetric", "infinite_temperature", "symmetric", "diagonal")


def corpus_model(kind: str, seed: int, n_spins: int, coupling_scale: float = 1.0):
    """One member of the verification corpus.

    ``symmetric`` (``V0 = V1``) and ``diagonal`` (everything commuting) are
    separable at all times; ``infinite_temperature`` is separable because
    ``R0`` is proportional to the identity.
    """
    rng_beta = np.random.default_rng([seed, 7])
    beta = float(rng_beta.uniform(0.2, 3.0))
    if kind in ("generic", "asymmetric"):
        return generate_model(ModelRecipe(seed, n_spins, coupling_scale, kind == "asymmetric", beta))
    if kind == "infinite_temperature":
        return generate_model(ModelRecipe(seed, n_spins, coupling_scale, False, INFINITE))
    if kind == "symmetric":
        m, R0 = generate_model(ModelRecipe(seed, n_spins, coupling_scale, False, beta))
        return PureDephasingModel(m.eps0, m.eps1, m.H_env, m.V1, m.V1), R0
    if kind == "diagonal":
        m, _ = generate_model(ModelRecipe(seed, n_spins, coupling_scale, False, beta))
        diag = [np.diag(np.diag(x).real).astype(complex) for x in (m.H_env, m.V0, m.V1)]
        model = PureDephasingModel(m.eps0, m.eps1, *diag)
        return model, thermal_state(diag[0], beta)
    raise ValidationError(f"unknown corpus kind {kind!r}")


@dataclass
class CorpusReport:
    n_models: int = 0
    n_checks: int = 0
    counts: dict = field(default_factory=lambda: {"sound": 0, "blindspot": 0, "separable": 0})
    false_positives: int = 0
    max_direct_closed_gap: float = 0.0
    criterion_disagreements: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.false_positives == 0 and self.criterion_disagreements == 0 and not self.failures

    def as_dict(self) -> dict:
        return {
            "n_models": self.n_models,
            "n_checks": self.n_checks,
            "counts": dict(self.counts),
            "false_positives": self.false_positives,
            "criterion_disagreements": self.criterion_disagreements,
            "max_direct_closed_gap": self.max_direct_closed_gap,
            "failures": list(self.failures),
            "ok": self.ok,
        }


def corpus_plan(n_models: int, seed: int = 0, spins=(2, 3, 4)):
    """Deterministic list of ``(kind, seed, n_spins)`` for a corpus run."""
    plan = []
    for i in range(n_models):
        kind = CORPUS_KINDS[i % len(CORPUS_KINDS)]
        plan.append((kind, seed * 1_000_003 + i, spins[(i // len(CORPUS_KINDS)) % len(spins)]))
    return plan


def check_corpus_member(kind: str, seed: int, n_spins: int, taus, times, tol=TOL) -> dict:
    """Certify one corpus model at every ``tau``; no exceptions escape."""
    model, R0 = corpus_model(kind, seed, n_spins)
    out = {"kind": kind, "seed": seed, "n_spins": n_spins, "results": [], "gap": 0.0,
           "false_positive": False, "disagree": 0, "error": None}
    try:
        for tau in taus:
            try:
                cert = certify_witness(model, R0, tau, times, tol)
            except SoundnessViolation as exc:
                out["false_positive"] = True
                out["error"] = str(exc)
                continue
            out["results"].append(cert)
            if not separability_criterion_equivalence(model, R0, tau, tol=tol).agree:
                out["disagree"] += 1
            branches = measure_plus_minus(joint_state_at(model, R0, tau), model.d_env, tau)
            for t in times[:: max(1, len(times) // 5)]:
                g = abs(averaged_coherence_direct(model, branches, t)
                        - averaged_coherence_closed(model, R0, tau, t))
                out["gap"] = max(out["gap"], g)
    except (ValidationError, NumericalError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def run_corpus(n_models: int = 200, taus=(0.25, 1.0, 4.0), times=None, seed: int = 0,
               spins=(2, 3, 4), tol=TOL, executor=None) -> CorpusReport:
    """Certify the witness over a seeded corpus; per-model results are merged in plan order."""
    if times is None:
        times = np.linspace(0.0, 10.0, 50)
    plan = corpus_plan(n_models, seed, spins)

    def job(item):
        return check_corpus_member(*item, taus=taus, times=times, tol=tol)

    results = list(executor.map(job, plan)) if executor is not None else [job(p) for p in plan]
    report = CorpusReport()
    for res in results:
        report.n_models += 1
        report.n_checks += len(res["results"])
        for cert in res["results"]:
            report.counts[cert.verdict] += 1
        report.false_positives += int(res["false_positive"])
        report.criterion_disagreements += res["disagree"]
        report.max_direct_closed_gap = max(report.max_direct_closed_gap, res["gap"])
        if res["error"] is not None:
            report.failures.append(f"{res['kind']} seed={res['seed']} n_spins={res['n_spins']}: {res['error']}")
    return report
