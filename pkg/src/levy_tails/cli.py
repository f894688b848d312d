"""Command-line front end.

Commands::

    levy-tails classify <law descriptor>
    levy-tails ratio --sigma S --b B --lambda L --law "<descriptor>" --u 2 4 6
    levy-tails verify thm1|thm2|thm3|thm4|pl|pl2|main <config-file>

Common options: --trials N --seed S --outdir D --tol T --workers W.

Law descriptors are a name followed by key=value pairs, e.g. ``half-normal``,
``exponential rate=2``, ``factorial v=1``, ``point value=1``, ``pm value=1``,
``discrete values=1,2,5 probs=0.5,0.3,0.2``, ``hazard h=power c=2 u0=0``.
Any descriptor accepts ``step=a`` to discretize the law on the lattice aZ.

Config files are INI documents with an ``[experiment]`` section (id, u or
n_range, trials, seed, tol, workers and experiment options) and a ``[model]``
section (sigma, b, lambda, law, discretization_step, prune_eps).
Exit codes: 0 consistent, 2 inconsistent, 3 low-confidence only, 1 error.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import math
import sys
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

from . import experiments as ex
from . import jump_laws as jl
from .convolution import DEFAULT_PRUNE_EPS
from .exact_engine import DEFAULT_STEP, DEFAULT_TOL, LevyModel
from .path_sim import ratio_curve
from .reporting import dumps, sha256_file, table_csv

EXPERIMENTS = ("thm1", "thm2", "thm3", "thm4", "pl", "pl2", "main")
EXIT_CODES = {ex.CONSISTENT: 0, ex.INCONSISTENT: 2, ex.LOW_CONFIDENCE: 3, ex.HYPOTHESIS_FAILS: 1}

EXPERIMENT_KEYS = {"id", "u", "n_range", "trials", "seed", "tol", "workers", "outdir", "denominator", "a", "eps", "v", "alpha"}
MODEL_KEYS = {"sigma", "b", "lambda", "law", "discretization_step", "prune_eps"}


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# law descriptors

_HAZARDS = {
    "constant": lambda p: jl.constant_hazard(p.get("rate", 1.0)),
    "linear": lambda p: jl.power_hazard(1.0),
    "power": lambda p: jl.power_hazard(p.get("c", 1.0)),
    "log-power": lambda p: jl.log_power_hazard(p.get("c", 1.0)),
    "half-normal": lambda p: jl.mills_hazard(),
}


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse_law(descriptor: str) -> jl.JumpLaw:
    """Build a jump law from ``name key=value ...``; raises ValueError."""
    parts = descriptor.split()
    if not parts:
        raise ValueError("empty law descriptor")
    name, kv = parts[0].lower(), {}
    for item in parts[1:]:
        if "=" not in item:
            raise ValueError(f"malformed law descriptor item {item!r} (expected key=value)")
        k, v = item.split("=", 1)
        kv[k.strip().lower()] = v.strip()
    step = kv.pop("step", None)

    def num(key, default=None):
        if key not in kv:
            if default is None:
                raise ValueError(f"law {name!r} needs {key}=")
            return default
        try:
            return float(kv.pop(key))
        except ValueError:
            raise ValueError(f"law {name!r}: {key} must be numeric") from None

    if name == "half-normal":
        law = jl.half_normal_law()
    elif name == "exponential":
        law = jl.exponential_law(num("rate", 1.0))
    elif name == "uniform":
        law = jl.uniform_law()
    elif name == "point":
        law = jl.point_law(num("value", 1.0))
    elif name in ("pm", "plus-minus"):
        law = jl.plus_minus_law(num("value", 1.0))
    elif name == "factorial":
        v = num("v", 1.0)
        if not v >= 1:
            raise ValueError("v ≥ 1 required")
        law = jl.factorial_law(v)
    elif name == "lattice-factorial":
        law = jl.lattice_factorial_law()
    elif name == "geometric":
        law = jl.geometric_law(num("p"))
    elif name == "discrete":
        if "values" not in kv or "probs" not in kv:
            raise ValueError("discrete law needs values= and probs=")
        try:
            values, probs = _floats(kv.pop("values")), _floats(kv.pop("probs"))
        except ValueError:
            raise ValueError("discrete law: values and probs must be numeric lists") from None
        if len(values) != len(probs):
            raise ValueError("discrete law: values and probs differ in length")
        law = jl.discrete_law(values, probs)
    elif name == "hazard":
        hname = kv.pop("h", "linear")
        if hname not in _HAZARDS:
            raise ValueError(f"unknown hazard {hname!r}; choose from {sorted(_HAZARDS)}")
        params = {k: num(k) for k in [k for k in ("rate", "c") if k in kv]}
        law = jl.hazard_law(_HAZARDS[hname](params), num("u0", 0.0))
    else:
        raise ValueError(f"unknown law {name!r}")
    if kv:
        raise ValueError(f"law {name!r}: unknown keys {sorted(kv)}")
    if step is not None:
        try:
            a = float(step)
        except ValueError:
            raise ValueError("step must be numeric") from None
        law = jl.discretize(law, a)
    return law


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    experiment: str
    sigma: float
    drift_b: float
    lam: float
    law: str
    u_grid: list = field(default_factory=list)
    n_range: list = field(default_factory=list)
    trials: int = 1_000_000
    seed: int = 0
    tol: float = DEFAULT_TOL
    workers: int = 1
    outdir: str = "out"
    discretization_step: float = DEFAULT_STEP
    prune_eps: float = DEFAULT_PRUNE_EPS
    options: dict = field(default_factory=dict)

    def model(self) -> LevyModel:
        return LevyModel(self.sigma, self.drift_b, self.lam, parse_law(self.law), self.discretization_step, self.prune_eps)


def _parse_n_range(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


_DEFAULT_GRIDS = {
    "thm1": [2.0, 3.0, 4.0, 5.0, 6.0],
    "thm2": [2.0, 3.0, 4.0, 5.0, 6.0],
    "pl2": [2.0, 4.0, 6.0, 8.0],
    "main": [0.5, 1.5, 2.5, 3.5],
    "pl": [2.0, 4.0, 6.0, 8.0, 10.0],
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run config; raises ConfigError listing every problem."""
    cp = configparser.ConfigParser(interpolation=None)
    errors: list[str] = []
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError([f"malformed config: {e}"]) from None
    for sec in cp.sections():
        if sec not in ("experiment", "model"):
            errors.append(f"unknown section [{sec}]")
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    mod = dict(cp["model"]) if cp.has_section("model") else {}
    if not cp.has_section("experiment"):
        errors.append("missing [experiment] section")
    for k in sorted(set(exp) - EXPERIMENT_KEYS):
        errors.append(f"unknown key {k!r} in [experiment]")
    for k in sorted(set(mod) - MODEL_KEYS):
        errors.append(f"unknown key {k!r} in [model]")

    def get(d, key, conv, default, what):
        if key not in d:
            return default
        try:
            return conv(d[key])
        except (ValueError, TypeError):
            errors.append(f"{what} {key!r} is not valid: {d[key]!r}")
            return default

    eid = exp.get("id", "").strip()
    if eid not in EXPERIMENTS:
        errors.append(f"unknown experiment id {eid!r}; choose from {', '.join(EXPERIMENTS)}")
    defaults = {"thm4": (1.0, 0.0, 1.0, "factorial v=1")}.get(eid, (None, None, None, None))
    sigma = get(mod, "sigma", float, defaults[0], "model")
    b = get(mod, "b", float, defaults[1] if defaults[1] is not None else 0.0, "model")
    lam = get(mod, "lambda", float, defaults[2], "model")
    law = mod.get("law", defaults[3])
    if eid != "pl" and sigma is None:
        errors.append("model sigma is required")
    if lam is None:
        errors.append("model lambda is required")
    if law is None:
        errors.append("model law is required")
    if sigma is not None and not (math.isfinite(sigma) and sigma >= 0):
        errors.append("sigma must be >= 0")
    if lam is not None and not (math.isfinite(lam) and lam > 0):
        errors.append("lambda must be positive")
    if law is not None:
        try:
            parse_law(law)
        except ValueError as e:
            errors.append(f"law descriptor {law!r}: {e}")
    u_grid = get(exp, "u", _floats, _DEFAULT_GRIDS.get(eid, []), "experiment")
    n_range = get(exp, "n_range", _parse_n_range, {"thm3": [4, 5, 6, 7], "thm4": list(range(2, 9))}.get(eid, []), "experiment")
    trials = get(exp, "trials", lambda s: int(float(s)), 1_000_000, "experiment")
    if not trials >= 1:
        errors.append("trials must be >= 1")
    seed = get(exp, "seed", int, 0, "experiment")
    tol = get(exp, "tol", float, DEFAULT_TOL, "experiment")
    if not tol > 0:
        errors.append("tol must be positive")
    workers = get(exp, "workers", int, 1, "experiment")
    if not workers >= 1:
        errors.append("workers must be >= 1")
    step = get(mod, "discretization_step", float, DEFAULT_STEP, "model")
    if not step > 0:
        errors.append("discretization_step must be positive")
    prune = get(mod, "prune_eps", float, DEFAULT_PRUNE_EPS, "model")
    if not 0 <= prune <= 1e-20:
        errors.append("prune_eps must lie in [0, 1e-20]")
    options = {}
    for key in ("a", "eps", "v"):
        if key in exp:
            options[key] = get(exp, key, float, None, "experiment")
    if "alpha" in exp:
        options["alpha"] = get(exp, "alpha", _floats, None, "experiment")
    if "denominator" in exp:
        if exp["denominator"] not in ("auto", "mc", "exact"):
            errors.append("denominator must be auto, mc or exact")
        options["denominator"] = exp["denominator"]
    if eid in ("thm3", "thm4") and not n_range:
        errors.append("n_range is required")
    if eid not in ("thm3", "thm4") and eid in EXPERIMENTS and not u_grid:
        errors.append("u grid is required")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        eid, sigma if sigma is not None else 0.0, b, lam, law, u_grid, n_range, trials, seed, tol, workers,
        exp.get("outdir", "out"), step, prune, options,
    )


# ---------------------------------------------------------------------------
# running


def run_experiment(cfg: RunConfig) -> ex.ExperimentReport:
    o = cfg.options
    if cfg.experiment == "thm4":
        v = o.get("v")
        if v is None:
            law = parse_law(cfg.law)
            v = law.params.get("v", 1.0) if isinstance(law, jl.DiscreteLaw) else 1.0
        model = LevyModel(cfg.sigma, cfg.drift_b, cfg.lam, jl.factorial_law(v), cfg.discretization_step, cfg.prune_eps)
        return ex.run_thm4(cfg.n_range, cfg.trials, v, cfg.seed, cfg.workers, tol=cfg.tol, model=model)
    if cfg.experiment == "pl":
        return ex.run_prop_pl(parse_law(cfg.law), cfg.lam, cfg.u_grid, o.get("a", 1.0), cfg.tol, cfg.discretization_step)
    model = cfg.model()
    common = dict(seed=cfg.seed, workers=cfg.workers, tol=cfg.tol)
    if cfg.experiment == "thm1":
        return ex.run_thm1(model, cfg.u_grid, cfg.trials, denominator_mode=o.get("denominator", "auto"), **common)
    if cfg.experiment == "thm2":
        return ex.run_thm2(model, cfg.u_grid, cfg.trials, denominator_mode=o.get("denominator", "auto"), **common)
    if cfg.experiment == "thm3":
        return ex.run_thm3(model, cfg.n_range, cfg.trials, eps=o.get("eps", 0.01), **common)
    if cfg.experiment == "pl2":
        alpha = o.get("alpha") or (0.25, 0.5, 1.0, 2.0, 4.0)
        return ex.run_prop_pl2(model, cfg.u_grid, cfg.trials, alpha_grid=alpha, **common)
    if cfg.experiment == "main":
        return ex.run_prop_main(model, cfg.u_grid, cfg.trials, **common)
    raise ValueError(f"unknown experiment {cfg.experiment!r}")


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_outputs(cfg: RunConfig, report: ex.ExperimentReport, started: str) -> dict:
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "table.csv": table_csv(report.experiment, report.rows),
        "report.json": dumps(report.as_dict()),
    }
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
    manifest = {
        "config": asdict(cfg),
        "artifact_version": artifact_version(),
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "status": report.status,
        "tolerances": {"tol": cfg.tol, "prune_eps": cfg.prune_eps, "discretization_step": cfg.discretization_step},
        "certificates": report.provenance.get("certificates", []),
        "digests": {name: sha256_file(out / name) for name in files},
    }
    (out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return manifest


def _print_report(report: ex.ExperimentReport) -> None:
    print(f"{report.experiment}: {report.status}")
    for r in report.rows:
        flag = " (low confidence)" if r.low_confidence else ""
        print(f"  u={r.u:<10g} ratio={r.ratio:.6g}  CI=[{r.ratio_lo:.6g}, {r.ratio_hi:.6g}]  {r.method}{flag}")
    for v in report.verdicts:
        mark = {True: "PASS", False: "FAIL", None: "info"}[v.passed]
        print(f"  [{mark}] {v.name}  {v.detail}")


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir")
    p.add_argument("--tol", type=float)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levy-tails", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    c = sub.add_parser("classify", help="classify the tail of a jump law")
    c.add_argument("law", nargs="+", help="law descriptor, e.g. 'exponential rate=2'")
    r = sub.add_parser("ratio", help="estimate P(sup X > u) / P(X(1) > u) on a grid")
    r.add_argument("--sigma", type=float, default=1.0)
    r.add_argument("--b", type=float, default=0.0)
    r.add_argument("--lambda", dest="lam", type=float, default=1.0)
    r.add_argument("--law", default="half-normal")
    r.add_argument("--u", type=float, nargs="+", required=True)
    r.add_argument("--denominator", choices=("auto", "mc", "exact"), default="auto")
    _add_common(r)
    v = sub.add_parser("verify", help="run a limit-result harness from a config file")
    v.add_argument("experiment", choices=EXPERIMENTS)
    v.add_argument("config")
    _add_common(v)
    return parser


def cmd_classify(args) -> int:
    law = parse_law(" ".join(args.law))
    tc = jl.classify_tail(law)
    print(f"law: {law.name}")
    for k in ("light1", "light2", "cond_pl", "heavy", "lattice_cond"):
        print(f"  {k} = {str(getattr(tc, k)).lower()}")
    if tc.inconclusive:
        print(f"  inconclusive: {', '.join(sorted(tc.inconclusive))}")
    for k, trace in tc.evidence.items():
        print(f"  evidence {k}: {trace}")
    return 0


def cmd_ratio(args) -> int:
    model = LevyModel(args.sigma, args.b, args.lam, parse_law(args.law))
    trials = args.trials or 1_000_000
    seed = args.seed or 0
    curve = ratio_curve(model, args.u, trials, seed, args.denominator, workers=args.workers or 1, tol=args.tol or DEFAULT_TOL)
    csv_text = table_csv("ratio", curve.rows)
    if args.outdir:
        out = Path(args.outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.csv").write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    return 3 if any(r.low_confidence for r in curve.rows) else 0


def cmd_verify(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: cannot read config {path}: {e}", file=sys.stderr)
        return 1
    if "[experiment]" in text and "id" not in text.split("[experiment]", 1)[1].split("[", 1)[0]:
        text = text.replace("[experiment]", f"[experiment]\nid = {args.experiment}", 1)
    try:
        cfg = parse_config(text)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 1
    if cfg.experiment != args.experiment:
        print(f"error: config is for {cfg.experiment!r}, not {args.experiment!r}", file=sys.stderr)
        return 1
    for key in ("trials", "seed", "outdir", "tol", "workers"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    report = run_experiment(cfg)
    try:
        write_outputs(cfg, report, started)
    except OSError as e:
        print(f"error: writing outputs to {cfg.outdir}: {e}", file=sys.stderr)
        return 1
    _print_report(report)
    return EXIT_CODES[report.status]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "classify":
            return cmd_classify(args)
        if args.command == "ratio":
            return cmd_ratio(args)
        return cmd_verify(args)
    except (ValueError, TypeError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
