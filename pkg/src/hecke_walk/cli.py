"""Batch front end: ``python -m hecke_walk <subcommand> ...`` or ``--config run.json``.

Exit codes: 0 all checks passed, 1 I/O or parse error, 2 precondition
violation, 3 a check or tolerance failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .algebra import FieldContext
from .balls import BallMeasure, PreconditionError

SCHEMA_NAME = "hecke-walk-report"
SCHEMA_VERSION = 1

SUBCOMMANDS = ("check-absorbing", "construct", "completion", "simulate", "stationary",
               "entropy", "spectrum", "subsum", "decouple")

ALLOWED_INPUTS = {
    "check-absorbing": {"measure", "preset"},
    "construct": {"measure", "preset", "method", "kappa", "t_minus", "delta"},
    "completion": {"measure", "preset"},
    "simulate": {"measure", "preset", "what"},
    "stationary": {"measure", "preset"},
    "entropy": {"measure", "preset", "method", "nu"},
    "spectrum": {"beta", "h_sigma_o", "subset", "tail_from"},
    "subsum": {"beta", "op", "target"},
    "decouple": {"z1", "z2", "y", "m"},
}
ALLOWED_BUDGETS = {
    "check-absorbing": set(),
    "construct": set(),
    "completion": set(),
    "simulate": {"steps", "window", "patience", "eps", "max_steps"},
    "stationary": {"samples", "window", "patience", "eps", "max_steps", "max_deviation", "max_residual"},
    "entropy": {"level", "samples", "window", "n_max", "element_budget"},
    "spectrum": {"M", "terms"},
    "subsum": {"N", "truncation_level"},
    "decouple": {"m_range", "char_shift", "reps_per_m"},
}
CONFIG_KEYS = {"subcommand", "q", "mode", "inputs", "seed", "budgets", "exact", "output", "format"}


class ConfigError(ValueError):
    """The run configuration is malformed."""


class CheckFailed(Exception):
    """A verification or tolerance check did not pass; carries the report body."""

    def __init__(self, message: str, result: dict):
        super().__init__(message)
        self.result = result


@dataclass
class RunConfig:
    subcommand: str
    q: int = 2
    mode: str = "carry"
    inputs: dict = field(default_factory=dict)
    seed: int = 0
    budgets: dict = field(default_factory=dict)
    exact: bool = True
    output: str | None = None
    format: str = "json"

    def validate(self) -> RunConfig:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not isinstance(self.q, int) or isinstance(self.q, bool):
            raise ConfigError("q must be an integer")
        try:
            FieldContext(self.q, self.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        for name, given, allowed in (("inputs", self.inputs, ALLOWED_INPUTS),
                                     ("budgets", self.budgets, ALLOWED_BUDGETS)):
            if not isinstance(given, dict):
                raise ConfigError(f"{name} must be an object")
            extra = set(given) - allowed[self.subcommand]
            if extra:
                raise ConfigError(f"unknown {name} keys for {self.subcommand}: {sorted(extra)}")
        return self

    @property
    def ctx(self) -> FieldContext:
        return FieldContext(self.q, self.mode)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(data) - CONFIG_KEYS
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "subcommand" not in data:
            raise ConfigError("config needs a subcommand")
        return cls(**data).validate()

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls.from_dict(json.loads(text))


# -- serialization ----------------------------------------------------------

def to_text(x) -> str:
    """Exact rationals as ``num/den`` (integers bare)."""
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dumps(obj, indent: int = 0) -> str:
    """JSON with exact rationals as strings and floats at 17 significant digits."""
    pad = " " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, Fraction):
        return json.dumps(to_text(obj))
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        text = format(obj, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items())
        return "{\n" + body + "\n" + " " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in obj) + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_report(config: RunConfig, status: str, exit_code: int, result: dict) -> dict:
    return {
        "schema": SCHEMA_NAME,
        "schema_version": SCHEMA_VERSION,
        "subcommand": config.subcommand,
        "status": status,
        "exit_code": exit_code,
        "seed": config.seed,
        "config": asdict(config),
        "result": result,
    }


def emit(report: dict, config: RunConfig, artifacts: dict[str, str] | None = None) -> list[Path]:
    """Write the report (and side files such as measures or CSV tables) atomically."""
    artifacts = artifacts or {}
    if config.output is None:
        sys.stdout.write(dumps(report) + "\n")
        return []
    out = Path(config.output)
    written = []
    for name, text in sorted(artifacts.items()):
        atomic_write(out / name, text)
        written.append(out / name)
    atomic_write(out / "report.json", dumps(report) + "\n")
    written.append(out / "report.json")
    return written


def schema() -> dict:
    return json.loads((Path(__file__).with_name("report.schema.json")).read_text())


# -- input helpers -----------------------------------------------------------

def _measure(config: RunConfig):
    from .measures import SparseMeasure, e_bs, e_lamp

    preset = config.inputs.get("preset")
    path = config.inputs.get("measure")
    if (preset is None) == (path is None):
        raise ConfigError("give exactly one of inputs.measure and inputs.preset")
    if preset is not None:
        makers = {"e-lamp": e_lamp, "e-bs": e_bs}
        if preset not in makers:
            raise ConfigError(f"unknown preset {preset!r}")
        t = makers[preset](config.q)
        if t.ctx != config.ctx:
            raise ConfigError(f"preset {preset} lives in {t.ctx.mode} mode, config says {config.mode}")
        return t
    t = SparseMeasure.from_json(Path(path).read_text(), config.ctx)
    return t if config.exact else t.to_float()


def _xi_measure(config: RunConfig, key: str) -> dict:
    spec = config.inputs.get(key, "0")
    ctx = config.ctx
    if isinstance(spec, str):
        return {ctx.parse(spec): Fraction(1)}
    return {ctx.parse(x): Fraction(w) for x, w in spec.items()}


def _window(config: RunConfig, default=(-4, 8)) -> tuple[int, int]:
    w = config.budgets.get("window", list(default))
    if len(w) != 2 or w[0] >= w[1]:
        raise ConfigError(f"bad window {w}")
    return int(w[0]), int(w[1])


def _guard(config: RunConfig):
    from .walk import Guard

    b = config.budgets
    return Guard(patience=int(b.get("patience", 8)), eps=float(b.get("eps", 1e-9)),
                 max_steps=int(b.get("max_steps", 100_000)))


def _witness_text(witness):
    if witness is None:
        return None
    if isinstance(witness, dict):
        return {(k.encode() if hasattr(k, "encode") else ",".join(map(str, k)) if isinstance(k, tuple) else str(k)):
                (Fraction(v) if isinstance(v, (int, Fraction)) else v) for k, v in witness.items()}
    return str(witness)


# -- subcommands ---------------------------------------------------------------

def _check_absorbing(config):
    from .measures import is_absorbing

    ok, witness = is_absorbing(_measure(config))
    result = {"absorbing": ok, "witness": _witness_text(witness)}
    if not ok:
        raise CheckFailed("measure is not Lambda-absorbing", result)
    return result, {}


def _construct(config):
    from .measures import SparseMeasure, absorb_lift, affine_step_measure, commuting_average, is_absorbing

    method = config.inputs.get("method", "absorb-lift")
    if method == "affine-step":
        t = affine_step_measure(_xi_measure(config, "kappa"), _xi_measure(config, "t_minus"),
                                Fraction(config.inputs.get("delta", "3/4")))
    elif method in ("absorb-lift", "commuting-average"):
        src = _measure(config)
        t = absorb_lift(src) if method == "absorb-lift" else commuting_average(src)
        if not src.support() <= t.support():
            raise CheckFailed("support was not preserved", {"method": method})
    else:
        raise ConfigError(f"unknown construct method {method!r}")
    ok, _ = is_absorbing(t)
    result = {"method": method, "absorbing": ok, "support_size": len(t), "measure": json.loads(t.to_json())}
    if not ok:
        raise CheckFailed("constructed measure is not absorbing", result)
    return result, {"measure.json": t.to_json() + "\n"}


def _completion(config):
    from .algebra import coset_of
    from .measures import lambda_saturation, theta_of, z_drift

    t = _measure(config)
    theta = theta_of(t)
    sat = lambda_saturation(coset_of(g) for g in t.support())
    result = {
        "theta": json.loads(theta.to_json()),
        "drift": z_drift(t),
        "drift_matches": z_drift(t) == z_drift(theta),
        "support_is_saturation": set(theta.support()) == sat,
    }
    if not (result["drift_matches"] and result["support_is_saturation"]):
        raise CheckFailed("completion identities failed", result)
    return result, {"theta.json": theta.to_json() + "\n"}


def _simulate(config):
    from .walk import sample_boundary, sample_path

    t = _measure(config)
    what = config.inputs.get("what", "path")
    if what == "path":
        rec = sample_path(t, int(config.budgets.get("steps", 20)), config.seed)
        result = {"steps": [g.encode() for g in rec.steps],
                  "products": [z.encode() for z in rec.products],
                  "exponents": list(rec.exponents)}
    elif what == "boundary":
        key, diag = sample_boundary(t, _window(config), config.seed, _guard(config))
        result = {"ball_key": None if key is None else ",".join(map(str, key)),
                  "window": list(_window(config)), "diagnostics": diag.to_dict()}
    else:
        raise ConfigError(f"unknown simulate target {what!r}")
    return result, {}


def _stationary(config):
    from .walk import invariance_stats, stationarity_residual, stationary_run

    t = _measure(config)
    window = _window(config)
    nu, diag = stationary_run(t, int(config.budgets.get("samples", 10_000)), window, config.seed,
                              _guard(config))
    res = stationarity_residual(t, nu)
    result = {"window": list(window), "n_samples": nu.n_samples, "diagnostics": diag,
              "residual_tv": float(res.tv), "residual_escape_delta": float(res.escape_delta)}
    if window[0] <= 0 <= window[1]:
        inv = invariance_stats(nu)
        result.update(deviation=inv.deviation, max_deviation=inv.max_deviation, min_mass=inv.min_mass,
                      chi_square=inv.chi_square, dof=inv.dof, p_value=inv.p_value)
    artifacts = {"stationary.csv": nu.to_csv()}
    limits = {"max_deviation": "deviation", "max_residual": "residual_tv"}
    failed = [k for k, field_ in limits.items()
              if k in config.budgets and result.get(field_, 0) > float(config.budgets[k])]
    if failed:
        result["failed"] = failed
        raise CheckFailed(f"tolerances exceeded: {failed}", result)
    return result, artifacts


def _entropy(config):
    from .entropy import conv_power_entropy, extrapolated_rate, furstenberg_entropy
    from .walk import empirical_stationary

    t = _measure(config)
    method = config.inputs.get("method", "furstenberg")
    if method == "conv-power":
        res = conv_power_entropy(t, int(config.budgets.get("n_max", 10)),
                                 int(config.budgets.get("element_budget", 2_000_000)))
        result = {"rows": [list(r) for r in res.rows], "complete": res.complete}
        if len(res.rows) > 3:
            result["extrapolated_rate"] = extrapolated_rate(res)
        return result, {}
    if method != "furstenberg":
        raise ConfigError(f"unknown entropy method {method!r}")
    level = int(config.budgets.get("level", 4))
    if config.inputs.get("nu", "haar") == "haar":
        nu = BallMeasure.haar_o(t.ctx, level)
    else:
        nu = empirical_stationary(t, int(config.budgets.get("samples", 100_000)),
                                  _window(config, (-4, level)), config.seed)
    est = furstenberg_entropy(t, nu)
    return {"value": est.value, "refinement_error": est.refinement_error,
            "truncation_mass": est.truncation_mass,
            "exact": None if est.exact is None else str(est.exact)}, {}


def _beta(config):
    from .subsum import Beta

    text = config.inputs.get("beta")
    if text is None:
        raise ConfigError("inputs.beta is required")
    return Beta.parse(text)


def _spectrum(config):
    from .spectrum import plan_spectrum, spectrum_value

    beta = _beta(config)
    plan = plan_spectrum(beta, Fraction(config.inputs.get("h_sigma_o", "1")),
                         int(config.budgets.get("terms", 64)))
    checks = plan.check()
    M = int(config.budgets.get("M", 16))
    subset = [int(k) for k in config.inputs.get("subset", [])]
    val = spectrum_value(plan, subset, M, config.inputs.get("tail_from"))
    result = {
        "beta": beta.describe(),
        "h_sigma": plan.h_sigma, "eps": plan.eps, "N": plan.N,
        "p": list(plan.p[:M]), "q": list(plan.q_seq[:M + 1]), "alpha": list(plan.alpha[:M]),
        "checks": checks, "value": val.value, "cross_check": val.cross_check, "agrees": val.agrees,
    }
    if not (all(checks.values()) and val.agrees):
        raise CheckFailed("spectrum identities failed", result)
    return result, {}


def _subsum(config):
    from .subsum import subsum_classify, subsum_enumerate, subsum_member

    beta = _beta(config)
    op = config.inputs.get("op", "classify")
    N = int(config.budgets.get("N", 10))
    if op == "classify":
        rep = subsum_classify(beta, int(config.budgets.get("truncation_level", N)))
        return rep.to_dict(), {}
    if op == "enumerate":
        sums = subsum_enumerate(beta, N)
        rows = "sum_num,sum_den\n" + "".join(f"{s.numerator},{s.denominator}\n" for s in sums)
        return {"N": N, "count": len(sums), "B_N": beta.tail_sum(N),
                "sums": [to_text(s) for s in sums] if len(sums) <= 4096 else None}, {"sums.csv": rows}
    if op == "member":
        if "target" not in config.inputs:
            raise ConfigError("member needs inputs.target")
        res = subsum_member(beta, Fraction(config.inputs["target"]), N)
        return {"verdict": res.verdict, "tolerance": res.tolerance,
                "witness": None if res.witness is None else list(res.witness)}, {}
    raise ConfigError(f"unknown subsum op {op!r}")


def _decouple(config):
    from .characters import CharacterSpec, decouple_integral, verify_decoupled_grid

    ctx = config.ctx
    shift = int(config.budgets.get("char_shift", 1))
    spec = CharacterSpec(ctx, shift)
    z1 = ctx.parse(str(config.inputs.get("z1", "1")))
    z2 = ctx.parse(str(config.inputs.get("z2", "1")))
    if "y" in config.inputs or "m" in config.inputs:
        res = decouple_integral(spec, z1, z2, ctx.parse(str(config.inputs.get("y", "0"))),
                                int(config.inputs.get("m", 0)))
        approx = res.value.to_complex()
        return {"value": str(res.value), "value_float": [approx.real, approx.imag],
                "exact_zero": res.value.is_zero(), "case": res.case}, {}
    lo, hi = config.budgets.get("m_range", [-3, 3])
    rep = verify_decoupled_grid(spec, z1, z2, (int(lo), int(hi)), config.budgets.get("reps_per_m"))
    result = rep.to_dict()
    result["passed"] = rep.passed
    if not rep.passed:
        raise CheckFailed("some integrals are nonzero", result)
    return result, {}


HANDLERS = {
    "check-absorbing": _check_absorbing,
    "construct": _construct,
    "completion": _completion,
    "simulate": _simulate,
    "stationary": _stationary,
    "entropy": _entropy,
    "spectrum": _spectrum,
    "subsum": _subsum,
    "decouple": _decouple,
}


def run(config: RunConfig) -> int:
    """Execute one validated configuration and emit its report; returns the exit code."""
    artifacts: dict[str, str] = {}
    try:
        config.validate()
        result, artifacts = HANDLERS[config.subcommand](config)
        status, code = "ok", 0
    except CheckFailed as exc:
        status, code, result = "check-failed", 3, dict(exc.result, message=str(exc))
    except PreconditionError as exc:
        status, code, result = "precondition", 2, {"message": str(exc), "witness": _witness_text(exc.witness)}
    except (ConfigError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    report = build_report(config, status, code, result)
    if config.format == "csv" and config.output is None:
        for text in artifacts.values():
            sys.stdout.write(text)
        return code
    try:
        emit(report, config, artifacts)
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return code


# -- argument parsing ----------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hecke-walk", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON RunConfig; other flags are ignored")
    sub = p.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--q", type=int, default=2)
        s.add_argument("--mode", choices=("carry", "modular"), default="carry")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--output", help="directory for report.json and side files")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--float", dest="exact", action="store_false", help="float weights")
        s.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                       help="extra input or budget, e.g. --set samples=100000")
        if name in ("check-absorbing", "construct", "completion", "simulate", "stationary", "entropy"):
            s.add_argument("--measure")
            s.add_argument("--preset", choices=("e-lamp", "e-bs"))
        if name in ("spectrum", "subsum"):
            s.add_argument("--beta", required=True)
        if name == "subsum":
            s.add_argument("--op", choices=("classify", "enumerate", "member"), default="classify")
            s.add_argument("--target")
            s.add_argument("--N", type=int)
        if name == "decouple":
            s.add_argument("--z1", default="1")
            s.add_argument("--z2", default="1")
            s.add_argument("--m-range", nargs=2, type=int, metavar=("LO", "HI"))
            s.add_argument("--char-shift", type=int)
        if name == "construct":
            s.add_argument("--method", choices=("absorb-lift", "commuting-average", "affine-step"))
        if name in ("simulate", "stationary"):
            s.add_argument("--window", nargs=2, type=int, metavar=("LO", "M"))
        if name == "stationary":
            s.add_argument("--samples", type=int)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    name = args.subcommand
    inputs: dict = {}
    budgets: dict = {}
    for key in ("measure", "preset", "beta", "op", "target", "z1", "z2", "method"):
        val = getattr(args, key, None)
        if val is not None:
            inputs[key] = val
    for key, dest in (("N", "N"), ("m_range", "m_range"), ("char_shift", "char_shift"),
                      ("window", "window"), ("samples", "samples")):
        val = getattr(args, key, None)
        if val is not None:
            budgets[dest] = val
    for item in args.set:
        key, _, raw = item.partition("=")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        target = inputs if key in ALLOWED_INPUTS[name] else budgets
        target[key] = val
    return RunConfig(subcommand=name, q=args.q, mode=args.mode, inputs=inputs, seed=args.seed,
                     budgets=budgets, exact=args.exact, output=args.output, format=args.format)


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            config = RunConfig.from_json(Path(args.config).read_text())
        elif args.subcommand is None:
            parser.print_usage(sys.stderr)
            return 1
        else:
            config = config_from_args(args).validate()
    except (ConfigError, OSError, json.JSONDecodeError, TypeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return run(config)
