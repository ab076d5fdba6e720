"""Command-line front end: ``semitrailer <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (JSON object keyed by option name,
dashes or underscores), ``--params``, ``--out``, ``--seed`` and ``--dt``.
Values given on the command line override the config file, which overrides
the built-in defaults. The effective configuration is echoed into the JSON
artifacts of each run.

Exit codes: 0 success, 1 domain error (JSON error document on stderr),
2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import ANALYSIS_RATE, Channel, MeasurementDataset, load_dataset, save_dataset
from .dynamics import simulate
from .errors import DatasetError, DomainError, IntegrationError, InvalidParameterError
from .identification import CostFunction, ParamSpace, PsoConfig, identify
from .maneuvers import VALIDATION_SECTIONS, ManeuverSpec, NoiseSpec, generate, preset, synthesize_dataset, with_rate
from .model import lateral_tire_force_static
from .params import INPUT_NAMES, default_params, load_params, save_params

DEFAULTS = {
    "common": {"params": None, "out": "out", "seed": 0},
    "simulate": {"dt": 1e-3, "maneuver": None, "maneuver_file": None, "dataset": None},
    "identify": {"dt": 1e-2, "dataset": None, "bounds": None, "restarts": 60, "iterations": 150,
                 "swarm": 50, "jobs": 1, "refine_iterations": 100, "rate": ANALYSIS_RATE},
    "validate": {"dt": 1e-2, "dataset": None, "section": None, "rate": ANALYSIS_RATE},
    "generate": {"dt": 1e-3, "maneuver": None, "maneuver_file": None, "rate": 100.0,
                 "synthesize": False, "noise": "realistic", "format": "wide"},
    "tire_curve": {"dt": None, "axle": "trailer", "fz": [20e3, 30e3, 40e3, 50e3], "alpha_max": 15.0,
                   "points": 301},
}


class UsageError(Exception):
    pass


def _positive(kind):
    def conv(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return conv


def _build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--params", help="vehicle parameter JSON (default: built-in truth set)")
    common.add_argument("--out", help="output directory (created if absent)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--dt", type=_positive(float), help="integration step [s]")

    parser = argparse.ArgumentParser(prog="semitrailer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], argument_default=S,
                       help="simulate a maneuver or the inputs of a dataset")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--maneuver", help="preset name")
    src.add_argument("--maneuver-file", help="maneuver spec JSON")
    src.add_argument("--dataset", help="dataset CSV whose input channels drive the model")

    p = sub.add_parser("identify", parents=[common], argument_default=S,
                       help="identify parameters from one or more datasets")
    p.add_argument("--dataset", nargs="+", help="dataset CSV file(s); costs are summed")
    p.add_argument("--bounds", help="bounds JSON {name: [lo, hi]}")
    p.add_argument("--restarts", type=_positive(int))
    p.add_argument("--iterations", type=_positive(int), help="PSO iterations per restart")
    p.add_argument("--swarm", type=_positive(int), help="PSO swarm size")
    p.add_argument("--jobs", type=_positive(int), help="worker processes")
    p.add_argument("--refine-iterations", type=int)
    p.add_argument("--rate", type=_positive(float), help="analysis grid rate [Hz]")

    p = sub.add_parser("validate", parents=[common], argument_default=S,
                       help="RMSE report of a parameter set against a dataset")
    p.add_argument("--dataset", help="dataset CSV")
    p.add_argument("--section", action="append", metavar="LABEL:START:END",
                   help="labeled time window (repeatable); default: sections I-IV if covered")
    p.add_argument("--rate", type=_positive(float), help="analysis grid rate [Hz]")

    p = sub.add_parser("generate", parents=[common], argument_default=S,
                       help="write maneuver inputs or a synthetic dataset")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--maneuver", help="preset name")
    src.add_argument("--maneuver-file", help="maneuver spec JSON")
    p.add_argument("--rate", type=_positive(float), help="sample rate [Hz]")
    p.add_argument("--synthesize", action="store_true", help="simulate and add measurement noise")
    p.add_argument("--noise", choices=("realistic", "none"))
    p.add_argument("--format", choices=("wide", "long"))

    p = sub.add_parser("tire-curve", parents=[common], argument_default=S,
                       help="tabulate steady-state lateral force against slip angle")
    p.add_argument("--axle", choices=("front", "rear", "trailer"))
    p.add_argument("--fz", type=_positive(float), nargs="+", help="vertical loads [N]")
    p.add_argument("--alpha-max", type=_positive(float), help="largest slip angle [deg]")
    p.add_argument("--points", type=_positive(int), help="grid size (made odd so that 0 is included)")
    return parser


def _effective_config(args: argparse.Namespace) -> dict:
    command = args.command.replace("-", "_")
    explicit = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    file_values = {}
    if "config" in vars(args):
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        file_values = {k.replace("-", "_"): v for k, v in doc.items()}
    allowed = {**DEFAULTS["common"], **DEFAULTS[command]}
    unknown = sorted(set(file_values) - set(allowed))
    if unknown:
        raise UsageError(f"unknown option(s) in config file: {', '.join(unknown)}")
    cfg = {**allowed, **file_values, **explicit}
    cfg["command"] = args.command
    return cfg


def _check_paths(cfg: dict, keys) -> None:
    for key in keys:
        value = cfg.get(key)
        for path in ([value] if isinstance(value, str) else value or []):
            if not Path(path).is_file():
                raise FileNotFoundError(f"{key.replace('_', '-')} file not found: {path}")


def _params(cfg):
    return load_params(cfg["params"]) if cfg["params"] else default_params()


def _maneuver(cfg, rate: float) -> ManeuverSpec:
    if cfg.get("maneuver_file"):
        return with_rate(ManeuverSpec.from_json(cfg["maneuver_file"]), rate).validate()
    if cfg.get("maneuver"):
        return preset(cfg["maneuver"], rate).validate()
    raise UsageError("give --maneuver or --maneuver-file")


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid_rate(dt: float) -> float:
    """Sample rate 1/dt, rounded when dt is the reciprocal of an integer."""
    rate = 1.0 / dt
    return float(round(rate)) if abs(rate - round(rate)) < 1e-9 * rate else rate


# -- subcommands ----------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path) -> None:
    _check_paths(cfg, ("params", "maneuver_file", "dataset"))
    params = _params(cfg)
    dt = float(cfg["dt"])
    if cfg.get("dataset"):
        inputs, _ = load_dataset(cfg["dataset"]).on_grid(_grid_rate(dt), outputs=False)
    else:
        inputs = generate(_maneuver(cfg, _grid_rate(dt)))
    result = simulate(None, inputs, params, dt)
    result.to_csv(out / "trajectory.csv")
    result.write_diagnostics(out / "diagnostics.json", {"config": cfg})


def cmd_identify(cfg: dict, out: Path) -> None:
    if not cfg.get("dataset"):
        raise UsageError("identify needs --dataset")
    datasets = [cfg["dataset"]] if isinstance(cfg["dataset"], str) else list(cfg["dataset"])
    cfg["dataset"] = datasets
    _check_paths(cfg, ("params", "bounds", "dataset"))
    fixed = _params(cfg)
    if cfg["bounds"]:
        with open(cfg["bounds"], encoding="utf-8") as fh:
            space = ParamSpace.from_bounds(json.load(fh))
    else:
        space = ParamSpace.default()
    data = [load_dataset(p, required=(*INPUT_NAMES,)) for p in datasets]
    config = PsoConfig(swarm_size=int(cfg["swarm"]), max_iterations=int(cfg["iterations"]), seed=int(cfg["seed"]))
    costfn = CostFunction(data, fixed, space, float(cfg["dt"]), float(cfg["rate"]))
    result = identify(data, fixed, space, config, restarts=int(cfg["restarts"]), dt=float(cfg["dt"]),
                      rate=float(cfg["rate"]), n_jobs=int(cfg["jobs"]),
                      refine_iterations=int(cfg["refine_iterations"]), costfn=costfn)
    # worker count and output location do not influence the result; keep them out of the artifact
    echo = {k: v for k, v in cfg.items() if k not in ("jobs", "out")}
    doc = result.to_dict()
    doc["run_config"] = echo
    _write_json(out / "identification.json", doc)
    save_params(result.best_params(fixed), out / "best_params.json")


def _parse_sections(specs) -> dict[str, tuple[float, float]]:
    sections = {}
    for spec in specs:
        try:
            label, a, b = spec.rsplit(":", 2)
            sections[label] = (float(a), float(b))
        except ValueError:
            raise UsageError(f"section must look like LABEL:START:END, got {spec!r}") from None
    return sections


def cmd_validate(cfg: dict, out: Path) -> None:
    from .validation import validate

    if not cfg.get("dataset"):
        raise UsageError("validate needs --dataset")
    _check_paths(cfg, ("params", "dataset"))
    params = _params(cfg)
    ds = load_dataset(cfg["dataset"])
    if cfg.get("section"):
        sections = _parse_sections(cfg["section"])
    else:
        t0, t1 = ds.span(INPUT_NAMES)
        covered = t0 <= 1e-9 and t1 >= max(b for _, b in VALIDATION_SECTIONS.values()) - 1e-9
        sections = dict(VALIDATION_SECTIONS) if covered else {}
    run = validate(ds, params, sections, dt=float(cfg["dt"]), rate=float(cfg["rate"]))
    run.report.config["run_config"] = cfg
    run.report.to_json(out / "report.json")
    run.write_plot_data(out / "plots")
    print(run.report.format_table())


def cmd_generate(cfg: dict, out: Path) -> None:
    _check_paths(cfg, ("params", "maneuver_file"))
    spec = _maneuver(cfg, float(cfg["rate"]))
    if cfg["synthesize"]:
        noise = NoiseSpec.realistic(int(cfg["seed"])) if cfg["noise"] == "realistic" else NoiseSpec(seed=int(cfg["seed"]))
        ds = synthesize_dataset(_params(cfg), spec, noise, float(cfg["dt"]))
        ds.metadata["config"] = cfg
        save_dataset(ds, out / "dataset.csv", cfg["format"])
    else:
        inputs = generate(spec)
        ds = MeasurementDataset({n: Channel(inputs.t, getattr(inputs, n)) for n in INPUT_NAMES},
                                {"source": "maneuver", "maneuver": spec.to_dict(), "config": cfg})
        save_dataset(ds, out / "maneuver.csv", cfg["format"])
    _write_json(out / "maneuver.json", spec.to_dict())


def cmd_tire_curve(cfg: dict, out: Path) -> None:
    _check_paths(cfg, ("params",))
    tire = _params(cfg).tire(cfg["axle"])
    n = int(cfg["points"])
    n += 1 - n % 2
    if n < 3:
        raise UsageError("points must be >= 3")
    half = np.linspace(0.0, math.radians(float(cfg["alpha_max"])), n // 2 + 1)
    alpha = np.concatenate([-half[:0:-1], half])
    fz = [float(v) for v in cfg["fz"]]
    table = np.column_stack([alpha] + [lateral_tire_force_static(tire, alpha, f) for f in fz])
    with open(out / "tire_curve.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["alpha", *(f"F_y@{f:g}" for f in fz)]) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    _write_json(out / "tire_curve.json", {"config": cfg, "tire": {
        "mu": tire.mu, "C": tire.C, "c1": tire.c1, "c2": tire.c2, "relaxation_length": tire.relaxation_length}})


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "validate": cmd_validate,
    "generate": cmd_generate,
    "tire-curve": cmd_tire_curve,
}

DOMAIN_ERRORS = (InvalidParameterError, DomainError, IntegrationError, DatasetError, ValueError,
                 OSError, RuntimeError)


def _fail(kind: str, message: str, code: int) -> int:
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("UsageError", str(exc), 2)
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    try:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("UsageError", str(exc), 2)
    except DOMAIN_ERRORS as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
