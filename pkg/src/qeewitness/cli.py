"""Command line entry point.

Subcommands::

    sweep-tau   |witness(tau, t_max)| over a tau grid and temperatures
    trace       full witness trace over a t grid at one tau
    spin-demo   seeded random-model certification against negativity
    verify      soundness corpus; nonzero exit on any false positive

Exit codes: 0 success, 1 validation, 2 numerical failure, 3 soundness violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .constants import HBAR, TOL, Tolerances
from .dephasing_model import PureDephasingModel
from .operator_core import NumericalError, ValidationError, negativity, thermal_state
from .oracle import (
    INFINITE,
    MAX_CERTIFY_DIM,
    ModelRecipe,
    SoundnessViolation,
    certify_witness,
    generate_model,
    joint_state_at,
    run_corpus,
)
from .phonon_bath import (
    PhononBathParams,
    build_kernel,
    decoherence_integral,
    entangling_phase,
    phase_integral,
    sweep_tau,
)
from .protocol import default_time_grid, witness

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_SOUNDNESS = 0, 1, 2, 3

COLUMNS = ["tau_ps", "t_ps", "temperature_K", "re_rho_av", "im_rho_av", "re_rho_ref", "im_rho_ref",
           "re_delta", "im_delta", "abs_delta", "p_plus", "p_minus", "negativity"]

COMMANDS = ("sweep-tau", "trace", "spin-demo", "verify")


class ConfigError(ValidationError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config.schema.json").read_text())


def _matrix(pairs, name: str, d: int) -> np.ndarray:
    m = np.array(pairs, dtype=float)
    if m.shape != (d, d, 2):
        raise ConfigError(f"model.{name}: expected {d}x{d} [re, im] pairs, got shape {m.shape[:-1]}")
    return m[..., 0] + 1j * m[..., 1]


def _beta(value) -> float:
    return 0.0 if value == INFINITE else float(value)


def _check_grid(name: str, grid) -> list[float]:
    g = [float(x) for x in grid]
    if any(x < 0 for x in g) or any(b <= a for a, b in zip(g, g[1:])):
        raise ConfigError(f"{name}: grid must be nonnegative and strictly increasing")
    return g


@dataclass
class RunConfig:
    command: str
    mode: str
    tau_grid: list
    t_grid: list
    temperatures: list
    t_max: float
    simplified: bool
    tol: Tolerances
    output: str | None
    model: PureDephasingModel | None = None
    R0: np.ndarray | None = None
    recipe: ModelRecipe | None = None
    phonon: PhononBathParams | None = None
    corpus: dict = field(default_factory=dict)
    effective: dict = field(default_factory=dict)


_DEFAULT_MODE = {"sweep-tau": "phonon", "trace": "phonon", "spin-demo": "spin", "verify": "verify"}


def build_config(command: str, doc: dict | None = None, *, seed: int | None = None,
                 out: str | None = None, tolerances: dict | None = None) -> RunConfig:
    """Validate a config document and fill in per-command defaults."""
    doc = dict(doc or {})
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = ["/".join(str(p) for p in e.absolute_path) or "<root>" for e in errors]
        raise ConfigError("; ".join(f"{p}: {e.message}" for p, e in zip(msgs, errors)))

    mode = doc.get("mode", _DEFAULT_MODE[command])
    if command == "verify":
        mode = "verify"
    elif command == "spin-demo" and mode != "spin":
        raise ConfigError("spin-demo requires mode 'spin'")
    elif mode == "verify":
        raise ConfigError(f"mode 'verify' is only valid for the verify command, not {command}")

    tol = TOL.override(**doc.get("tolerances", {}))
    if tolerances:
        tol = tol.override(**tolerances)

    sources = [k for k in ("model", "recipe", "phonon") if k in doc]
    if len(sources) > 1:
        raise ConfigError(f"exactly one model source allowed, got {', '.join(sources)}")

    default_tau = {"sweep-tau": list(np.linspace(0.0, 10.0, 100)), "trace": [1.0],
                   "spin-demo": [0.25, 1.0, 4.0], "verify": [0.25, 1.0, 4.0]}[command]
    default_t = (list(default_time_grid()) if command == "trace" else list(np.linspace(0.0, 10.0, 50)))
    cfg = RunConfig(
        command=command,
        mode=mode,
        tau_grid=_check_grid("tau_grid", doc.get("tau_grid", default_tau)),
        t_grid=_check_grid("t_grid", doc.get("t_grid", default_t)),
        temperatures=[float(x) for x in doc.get("temperatures", [0.0, 34.0, 70.0] if mode == "phonon" else [0.0])],
        t_max=float(doc.get("t_max", "inf" if mode == "phonon" else 10.0)),
        simplified=bool(doc.get("simplified", False)),
        tol=tol,
        output=out or doc.get("output"),
    )
    if command == "trace" and len(cfg.tau_grid) != 1:
        raise ConfigError("tau_grid: trace takes exactly one tau")

    if mode == "phonon":
        if sources and sources != ["phonon"]:
            raise ConfigError(f"phonon mode cannot use model source {sources[0]!r}")
        p = doc.get("phonon", {})
        cfg.phonon = PhononBathParams(
            sigma_diff=p.get("sigma_diff_eV", 9.0), mass_density=p.get("mass_density_kg_m3", 5360.0),
            sound_speed=p.get("sound_speed_m_s", 5100.0), l_perp=p.get("l_perp_nm", 5.0), l_z=p.get("l_z_nm", 1.0))
        eff_model = {"phonon": {"sigma_diff_eV": cfg.phonon.sigma_diff,
                                "mass_density_kg_m3": cfg.phonon.mass_density,
                                "sound_speed_m_s": cfg.phonon.sound_speed,
                                "l_perp_nm": cfg.phonon.l_perp, "l_z_nm": cfg.phonon.l_z}}
    elif mode == "spin":
        if "phonon" in doc:
            raise ConfigError("spin mode cannot use a phonon source")
        if "model" in doc:
            m = doc["model"]
            d = m["d_env"]
            cfg.model = PureDephasingModel(m["eps0"], m["eps1"], _matrix(m["H_env"], "H_env", d),
                                           _matrix(m["V0"], "V0", d), _matrix(m["V1"], "V1", d))
            if "R0" in m and "thermal_beta" in m:
                raise ConfigError("model: give either R0 or thermal_beta, not both")
            if "R0" in m:
                cfg.R0 = _matrix(m["R0"], "R0", d)
            else:
                cfg.R0 = thermal_state(cfg.model.H_env, _beta(m.get("thermal_beta", INFINITE)))
            eff_model = {"model": m}
        else:
            r = dict(doc.get("recipe", {"seed": 0}))
            if seed is not None:
                r["seed"] = seed
            cfg.recipe = ModelRecipe(r["seed"], r.get("n_spins", 2), r.get("coupling_scale", 1.0),
                                     r.get("asymmetric", False), r.get("thermal_beta", 1.0))
            cfg.model, cfg.R0 = generate_model(cfg.recipe)
            eff_model = {"recipe": {"seed": cfg.recipe.seed, "n_spins": cfg.recipe.n_spins,
                                    "coupling_scale": cfg.recipe.coupling_scale,
                                    "asymmetric": cfg.recipe.asymmetric,
                                    "thermal_beta": cfg.recipe.thermal_beta}}
        if np.isinf(cfg.t_max):
            raise ConfigError("t_max: spin mode needs a finite t_max")
    else:
        if sources:
            raise ConfigError("verify uses the built-in corpus; remove the model source")
        c = doc.get("corpus", {})
        cfg.corpus = {"n_models": c.get("n_models", 200), "taus": _check_grid("corpus/taus", c.get("taus", cfg.tau_grid)),
                      "n_times": c.get("n_times", 50), "t_end": c.get("t_end", 10.0),
                      "spins": list(c.get("spins", [2, 3, 4])),
                      "seed": seed if seed is not None else c.get("seed", 0)}
        eff_model = {"corpus": cfg.corpus}

    cfg.effective = {"command": command, "mode": mode, "version": __version__, "hbar_meV_ps": HBAR,
                     "tau_grid": cfg.tau_grid, "t_grid": cfg.t_grid, "temperatures": cfg.temperatures,
                     "t_max": "inf" if np.isinf(cfg.t_max) else cfg.t_max, "simplified": cfg.simplified,
                     "tolerances": tol.as_dict(), **eff_model}
    return cfg


# --- output -------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _row(tau, t, temp, rho_av, rho_ref, delta, p_plus=None, p_minus=None, neg=None) -> list[str]:
    return [_fmt(tau), _fmt(t), _fmt(temp), _fmt(rho_av.real), _fmt(rho_av.imag), _fmt(rho_ref.real),
            _fmt(rho_ref.imag), _fmt(delta.real), _fmt(delta.imag), _fmt(abs(delta)),
            _fmt(p_plus), _fmt(p_minus), _fmt(neg)]


def render_csv(cfg: RunConfig, rows: list[list[str]]) -> str:
    buf = io.StringIO()
    for key in sorted(cfg.effective):
        buf.write(f"# {key} = {json.dumps(cfg.effective[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


@contextmanager
def atomic_output(path: str | None):
    """Yield a writer callback; the target appears only if the block succeeds."""
    if path is None:
        yield sys.stdout.write
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".partial-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh.write
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


# --- commands -----------------------------------------------------------------

def _negativity_or_none(cfg: RunConfig, tau: float):
    if cfg.model.d_env > MAX_CERTIFY_DIM:
        return None
    return negativity(joint_state_at(cfg.model, cfg.R0, tau), cfg.model.d_env, cfg.tol)


def _spin_rows(cfg: RunConfig, tau: float, times) -> list[list[str]]:
    tr = witness(cfg.model, cfg.R0, tau, times, simplified=cfg.simplified, tol=cfg.tol)
    neg = _negativity_or_none(cfg, tau)
    return [_row(tau, t, None, a, r, d, tr.branch.p_plus, tr.branch.p_minus, neg)
            for t, a, r, d in zip(tr.times, tr.rho_av, tr.rho_ref, tr.delta)]


def _flatten(chunks):
    return [row for chunk in chunks for row in chunk]


def cmd_sweep_tau(cfg: RunConfig, executor) -> list[list[str]]:
    mapper = executor.map if executor is not None else map
    if cfg.mode == "spin":
        return _flatten(mapper(lambda tau: _spin_rows(cfg, tau, [cfg.t_max]), cfg.tau_grid))
    kernel = build_kernel(cfg.phonon)
    res = sweep_tau(cfg.phonon, cfg.tau_grid, cfg.temperatures, cfg.t_max, kernel=kernel,
                    executor=executor, rel=cfg.tol.quadrature_rel)
    delta = res.delta
    rows = []
    for i, temp in enumerate(res.temperatures):
        rho_ref = complex(res.rho_ref[i])
        for j, tau in enumerate(res.taus):
            d = complex(delta[i, j])
            rows.append(_row(tau, cfg.t_max, temp, rho_ref + d, rho_ref, d))
    return rows


def cmd_trace(cfg: RunConfig, executor) -> list[list[str]]:
    tau = cfg.tau_grid[0]
    if cfg.mode == "spin":
        return _spin_rows(cfg, tau, cfg.t_grid)
    kernel = build_kernel(cfg.phonon)
    rel = cfg.tol.quadrature_rel
    mapper = executor.map if executor is not None else map
    phi = list(mapper(lambda t: phase_integral(kernel, t, rel=rel), cfg.t_grid))
    phase = list(mapper(lambda t: entangling_phase(kernel, tau, t, rel=rel), cfg.t_grid))
    rows = []
    for temp in cfg.temperatures:
        kappa = list(mapper(lambda t: decoherence_integral(kernel, t, temp, rel=rel), cfg.t_grid))
        for t, ph, ka, en in zip(cfg.t_grid, phi, kappa, phase):
            rho_ref = 0.5 * np.exp(1j * ph) * np.exp(-ka)
            d = 0.5 * rho_ref * (np.exp(2j * en) - 1.0)
            rows.append(_row(tau, t, temp, rho_ref + d, rho_ref, d))
    return rows


def cmd_spin_demo(cfg: RunConfig, executor, log=print) -> list[list[str]]:
    mapper = executor.map if executor is not None else map

    def one(tau):
        cert = certify_witness(cfg.model, cfg.R0, tau, cfg.t_grid, cfg.tol)
        return cert, _spin_rows(cfg, tau, cfg.t_grid)

    results = list(mapper(one, cfg.tau_grid))
    for cert, _ in results:
        log(f"tau={cert.tau:g} ps: witness_max={cert.witness_max:.3e} negativity={cert.negativity:.3e} "
            f"verdict={cert.verdict}", file=sys.stderr)
    return _flatten(rows for _, rows in results)


def cmd_verify(cfg: RunConfig, executor) -> dict:
    c = cfg.corpus
    times = np.linspace(0.0, c["t_end"], c["n_times"])
    report = run_corpus(c["n_models"], tuple(c["taus"]), times, c["seed"], tuple(c["spins"]), cfg.tol, executor)
    return report.as_dict()


def run(cfg: RunConfig, threads: int = 1) -> int:
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        if cfg.command == "verify":
            summary = cmd_verify(cfg, executor)
            summary["effective"] = cfg.effective
            text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
            with atomic_output(cfg.output) as write:
                write(text)
            print(f"verify: {summary['n_models']} models, {summary['n_checks']} checks, "
                  f"{summary['false_positives']} false positives, "
                  f"{summary['criterion_disagreements']} criterion disagreements, "
                  f"max direct/closed gap {summary['max_direct_closed_gap']:.3e}", file=sys.stderr)
            if summary["false_positives"] or summary["criterion_disagreements"]:
                return EXIT_SOUNDNESS
            if summary["failures"]:
                return EXIT_NUMERICAL
            return EXIT_OK
        handler = {"sweep-tau": cmd_sweep_tau, "trace": cmd_trace, "spin-demo": cmd_spin_demo}[cfg.command]
        with atomic_output(cfg.output) as write:
            write(render_csv(cfg, handler(cfg, executor)))
        return EXIT_OK
    finally:
        if executor is not None:
            executor.shutdown()


def _parse_tolerances(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tolerance expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--tolerance {name}: {value!r} is not a number") from None
    return out


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeewitness", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="override the recipe or corpus seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("--tolerance", action="append", metavar="NAME=VALUE", help="override a named tolerance")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        doc = None
        if args.config:
            with open(args.config) as fh:
                doc = json.load(fh)
        cfg = build_config(args.command, doc, seed=args.seed, out=args.out,
                           tolerances=_parse_tolerances(args.tolerance))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return run(cfg, args.threads)
    except SoundnessViolation as exc:
        print(f"soundness violation: {exc}", file=sys.stderr)
        return EXIT_SOUNDNESS
    except (ValidationError, KeyError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
