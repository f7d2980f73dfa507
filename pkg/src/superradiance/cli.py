"""Command-line front end: ``python -m superradiance MODE [flags]``.

Exit status is 0 on success, 2 for invalid input and 3 for numerical failure
(too few bound states, no phase boundary found, unsuccessful fit).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import diagram, qwell
from .meanfield import minimize_global
from .model import InvalidParameterError, ModelParams, trk_check

MODES = ("point", "scan2d", "scan3d", "trk", "well-solve", "well-fit", "dicke-oracle")

# Values used when neither the config file nor a flag sets a key.
DEFAULTS = {
    "f01": 0.0, "f02": 0.0, "f12": 0.0,
    "D": 1.0, "omega10": 1.0, "omega21": 1.0,
    "direct": False, "omega01": 0.0, "omega02": 0.0, "omega12": 0.0,
    "axis1": "f01", "axis2": "f12",
    "range": [0.0, 1.0], "range1": None, "range2": None,
    "steps": None,
    "out": None, "threads": None,
    "potential": None, "n_grid": 2000, "anharmonicity": None, "family": "two-well",
    "wavefunctions": True,
}


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superradiance",
                                description="Mean-field phase diagrams of three-level "
                                            "atoms in a cavity, and quantum-well design.")
    p.add_argument("mode_pos", nargs="?", choices=MODES, metavar="MODE",
                   help="one of: " + ", ".join(MODES))
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--config", help="flat JSON object with flag names as keys; flags win")
    for name in ("f01", "f02", "f12", "D", "omega10", "omega21", "omega01", "omega02",
                 "omega12", "anharmonicity"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--direct", action="store_const", const=True,
                   help="couple through --omega01/02/12 Rabi frequencies instead of strengths")
    p.add_argument("--axis1", choices=diagram.AXES)
    p.add_argument("--axis2", choices=diagram.AXES)
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"),
                   help="range of every scanned axis")
    p.add_argument("--range1", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--range2", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int)
    p.add_argument("--fixed-f12", dest="fixed_f12", type=float,
                   help="value of f12 held fixed in an (f01, f02) scan")
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--threads", type=int)
    p.add_argument("--potential", help="potential file for well-solve")
    p.add_argument("--n-grid", dest="n_grid", type=int)
    p.add_argument("--family", choices=("two-well", "single"))
    return p


MODE_DEFAULTS = {
    "dicke-oracle": {"D": 0.0, "omega01": 0.6},
}


def _read_config(path_str: str) -> dict:
    path = Path(path_str)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]  # a run summary
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(DEFAULTS) - {"mode", "fixed_f12"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then mode defaults, then the config file, then flags."""
    data = _read_config(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items()
             if k not in ("config", "mode_pos") and v is not None}
    if args.mode_pos is not None:
        if args.mode is not None and args.mode != args.mode_pos:
            raise UsageError("conflicting modes")
        flags["mode"] = args.mode_pos
    mode = flags.get("mode", data.get("mode"))
    if mode not in MODES:
        raise UsageError("exactly one mode is required: " + ", ".join(MODES))
    cfg = {**DEFAULTS, **MODE_DEFAULTS.get(mode, {}), **data, **flags}
    fixed = cfg.pop("fixed_f12", None)
    if fixed is not None:
        cfg["f12"] = fixed
    for key in ("range", "range1", "range2"):
        if cfg[key] is not None:
            cfg[key] = [float(v) for v in cfg[key]]
    return cfg


def _params(cfg: dict) -> ModelParams:
    if cfg["direct"]:
        return ModelParams.from_rabi(cfg["omega01"], cfg["omega02"], cfg["omega12"],
                                     D=cfg["D"], omega10=cfg["omega10"], omega21=cfg["omega21"])
    return ModelParams.from_strengths(cfg["f01"], cfg["f02"], cfg["f12"], D=cfg["D"],
                                      omega10=cfg["omega10"], omega21=cfg["omega21"])


def _prefix(cfg: dict) -> Path:
    prefix = Path(cfg["out"] or cfg["mode"])
    if prefix.parent != Path("."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


def _sibling(prefix: Path, suffix: str) -> Path:
    return prefix.with_name(prefix.name + suffix)


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        diagram.dump_summary(data, fh)


def _threads(cfg: dict) -> int:
    return cfg["threads"] if cfg["threads"] is not None else (os.cpu_count() or 1)


def run_point(cfg: dict) -> str:
    params = _params(cfg)
    state = minimize_global(params)
    if cfg["direct"]:
        trk = "n/a"
    else:
        trk = "feasible" if trk_check(cfg["f01"], cfg["f02"], cfg["f12"]).feasible else "infeasible"
    if cfg["out"]:
        _write_json(_sibling(_prefix(cfg), "_summary.json"), {
            "config": cfg, "phase": state.phase.value, "x": state.x, "y": state.y,
            "z": state.z, "energy": state.energy_per_atom,
            "populations": list(state.populations), "trk": trk})
    return (f"phase={state.phase.value} trk={trk} x={state.x:.9g} "
            f"energy={state.energy_per_atom:.9g}")


def run_trk(cfg: dict) -> str:
    report = trk_check(cfg["f01"], cfg["f02"], cfg["f12"])
    if cfg["out"]:
        _write_json(_sibling(_prefix(cfg), "_summary.json"), {
            "config": cfg, "feasible": report.feasible, "ground_sum": report.ground_sum,
            "excited_sum": report.excited_sum,
            "violated_constraints": list(report.violated_constraints)})
    return report.summary()


def _axis_range(cfg: dict, which: str) -> list[float]:
    return cfg[which] if cfg[which] is not None else cfg["range"]


def run_scan2d(cfg: dict) -> str:
    if cfg["direct"]:
        raise InvalidParameterError("scan2d works in oscillator-strength mode only")
    steps = cfg["steps"] or 201
    spec = diagram.ScanSpec(_params(cfg),
                            diagram.Axis(cfg["axis1"], *_axis_range(cfg, "range1"), steps=steps),
                            diagram.Axis(cfg["axis2"], *_axis_range(cfg, "range2"), steps=steps))
    threads = _threads(cfg)
    grid = diagram.scan_2d(spec, threads=threads)
    crossings = diagram.classify_order(grid)
    prefix = _prefix(cfg)
    with open(_sibling(prefix, ".csv"), "w") as fh:
        grid.write_csv(fh)
    with open(_sibling(prefix, "_boundary.csv"), "w") as fh:
        diagram.write_boundary_csv(crossings, fh)
    data = diagram.summary(grid, crossings, config=cfg)
    data["scan"] = spec.to_dict()
    _write_json(_sibling(prefix, "_summary.json"), data)
    tally = " ".join(f"{k}={v}" for k, v in data["boundary_orders"].items())
    return f"SR∩TRK={grid.sr_trk_count} cells; boundary {tally}"


def run_scan3d(cfg: dict) -> str:
    if cfg["direct"]:
        raise InvalidParameterError("scan3d works in oscillator-strength mode only")
    steps = cfg["steps"] or 41
    voxels = diagram.scan_3d(_params(cfg), steps, tuple(cfg["range"]), threads=_threads(cfg))
    prefix = _prefix(cfg)
    with open(_sibling(prefix, ".csv"), "w") as fh:
        voxels.write_csv(fh)
    probe = (cfg["f01"], cfg["f02"], cfg["f12"])
    _write_json(_sibling(prefix, "_summary.json"), {
        "config": cfg, "voxels_total": voxels.total, "voxels_trk_feasible": voxels.evaluated,
        "sr_trk_voxels": len(voxels), "probe": list(probe),
        "probe_nearest_voxel": list(voxels.nearest_voxel(*probe)),
        "probe_in_set": voxels.contains(*probe)})
    return f"SR∩TRK={len(voxels)} voxels of {voxels.evaluated} TRK-feasible"


def run_well_solve(cfg: dict) -> str:
    if not cfg["potential"]:
        raise UsageError("well-solve needs --potential FILE")
    path = Path(cfg["potential"])
    if not path.is_file():
        raise UsageError(f"potential file not found: {path}")
    pot = qwell.PotentialSpec.read(path)
    try:
        sol = qwell.solve_bound_states(pot, cfg["n_grid"])
    except qwell.InsufficientSpectrumError as exc:
        raise NumericalFailure(str(exc)) from exc
    prefix = _prefix(cfg)
    data = sol.to_dict()
    data["config"] = cfg
    _write_json(_sibling(prefix, "_summary.json"), data)
    if cfg["wavefunctions"]:
        with open(_sibling(prefix, "_wavefunctions.csv"), "w") as fh:
            sol.write_wavefunctions_csv(fh)
    f01, f02, f12 = sol.strengths
    return f"f01={f01:.6g} f02={f02:.6g} f12={f12:.6g} anharmonicity={sol.anharmonicity:.6g}"


def run_well_fit(cfg: dict) -> str:
    anh = cfg["anharmonicity"]
    if anh is None:
        anh = cfg["omega10"] / cfg["omega21"]
    targets = (cfg["f01"], cfg["f02"], cfg["f12"], anh)
    family = qwell.SingleWellFamily() if cfg["family"] == "single" else qwell.TwoWellFamily()
    fit = qwell.fit_potential(targets, family, n_grid=min(cfg["n_grid"], 1500))
    prefix = _prefix(cfg)
    _sibling(prefix, "_potential.txt").write_text(fit.potential.to_text())
    data = fit.to_dict()
    data["config"] = cfg
    _write_json(_sibling(prefix, "_summary.json"), data)
    line = f"residual={fit.residual:.3g} success={'yes' if fit.success else 'no'}"
    if not fit.success:
        raise NumericalFailure(line)
    return line


def run_dicke_oracle(cfg: dict) -> str:
    base = ModelParams.from_rabi(0.0, 0.0, 0.0, D=cfg["D"], omega10=cfg["omega10"],
                                 omega21=cfg["omega21"])
    lo, hi = cfg["range"]
    line = diagram.scan_rabi_line(base, "Omega01", lo, hi, cfg["steps"] or 101)
    if not line.crossings:
        raise NumericalFailure("no phase boundary found on the Omega01 line")
    pos, jump, order = line.crossings[0]
    probe = minimize_global(ModelParams.from_rabi(cfg["omega01"], 0.0, 0.0, D=cfg["D"],
                                                  omega10=cfg["omega10"], omega21=cfg["omega21"]))
    if cfg["out"]:
        _write_json(_sibling(_prefix(cfg), "_summary.json"), {
            "config": cfg,
            "crossings": [{"Omega01": p, "jump": j, "order": o.value}
                          for p, j, o in line.crossings],
            "probe": {"Omega01": cfg["omega01"], "abs_x": probe.abs_x,
                      "energy": probe.energy_per_atom}})
    return (f"boundary Omega01={pos:.6f} order={order.value} jump={jump:.3g}; "
            f"at Omega01={cfg['omega01']:g}: |x|={probe.abs_x:.6f} "
            f"energy={probe.energy_per_atom:.6f}")


RUNNERS = {
    "point": run_point, "trk": run_trk, "scan2d": run_scan2d, "scan3d": run_scan3d,
    "well-solve": run_well_solve, "well-fit": run_well_fit, "dicke-oracle": run_dicke_oracle,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        cfg = resolve_config(args)
        print(RUNNERS[cfg["mode"]](cfg))
    except (UsageError, InvalidParameterError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (NumericalFailure, diagram.BoundaryNotFound) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0

