"""``viakernel`` command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails (or a
trajectory blows up), 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .comparison import compare_controlled, compare_flows
from .config import SYSTEMS, ConfigError, ExperimentConfig, load_config
from .dynamics import (Report, check_general_quasimonotone, check_orthant_quasimonotone,
                       check_reduction)
from .flow import ControlPath, integrate
from .viability import (check_equality_condition, compute_kernel, kernel_inclusion,
                        symmetric_difference)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("viakernel")


def _out_dir(args) -> Path:
    out = Path(args.out or "viakernel_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    path.write_text(text.rstrip("\n") + "\n")
    print(text)


def _require(cfg: ExperimentConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"configuration lacks: {', '.join(missing)}")


def _path_from(spec: dict, m: int) -> ControlPath:
    if "values" in spec:
        values = np.asarray(spec["values"], dtype=float).reshape(-1, m)
        return ControlPath.from_values(values, float(spec["T"]))
    if "constant" in spec:
        return ControlPath.constant(spec["constant"], float(spec["T"]), int(spec.get("intervals", 1)))
    raise ConfigError("control path needs 'values' or 'constant' together with 'T'")


def _wolbachia_run_defaults(cfg: ExperimentConfig) -> dict:
    """Start at the wild equilibrium, alternate no release and maximal release."""
    from .wolbachia import WolbachiaParams, preset_case, wild_equilibrium

    spec = cfg.raw["system"]
    p = WolbachiaParams(**spec["params"]) if "params" in spec else preset_case(spec.get("preset", "default"))[0]
    x0 = wild_equilibrium(p).tolist()
    values = [[0.0], [p.u_sharp]] * 10
    return {"x0": x0, "y0": x0, "path": {"values": values, "T": 10.0}}


def _run_block(cfg: ExperimentConfig, key: str) -> dict:
    block = cfg.raw.get(key)
    if block is None and cfg.raw["system"]["name"] == "wolbachia":
        block = _wolbachia_run_defaults(cfg)
    if block is None:
        raise ConfigError(f"configuration lacks a '{key}' block")
    return block


# -- subcommands --------------------------------------------------------------

def cmd_check(cfg: ExperimentConfig, args) -> int:
    _require(cfg, "cone", "sampling")
    out = _out_dir(args)
    reports: list[Report] = []
    if cfg.cone.kind == "orthant":
        reports.append(check_orthant_quasimonotone(cfg.system, cfg.cone, cfg.sampling))
    else:
        reports.append(check_general_quasimonotone(cfg.system, cfg.cone, cfg.sampling))
    try:
        reports.append(check_reduction(cfg.system, cfg.cone, cfg.reduction, cfg.sampling))
    except ValueError as exc:
        reports.append(Report(f"K-reduction ({cfg.reduction.name})", checked=1, failed=1,
                              worst_margin=-np.inf, details=[str(exc)]))
        reports[-1].witness = {"error": str(exc)}
    if cfg.desirable is not None and cfg.desirable.structured:
        reports.append(check_equality_condition(cfg.desirable, cfg.cone, cfg.reduction,
                                                cfg.sampling, controls=cfg.controls))
    text = "\n".join(r.summary() for r in reports)
    _write_text(out / "check_report.txt", text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    block = _run_block(cfg, "simulate")
    out = _out_dir(args)
    path = _path_from(block["path"], cfg.system.m)
    T = block.get("T", cfg.T)
    try:
        tr = integrate(cfg.system, block["x0"], path, cfg.dt, T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tr.to_csv(out / "trajectory.csv")
    if tr.blew_up:
        print(f"trajectory blew up at t={tr.blow_up_time:.6g}; partial CSV written")
        return EXIT_FAIL
    print(f"integrated {len(tr.times) - 1} steps to t={tr.times[-1]:.6g}; "
          f"final state {np.array2string(tr.final, precision=6)}")
    return EXIT_OK


def cmd_kernel(cfg: ExperimentConfig, args) -> int:
    _require(cfg, "desirable", "grid", "controls")
    out = _out_dir(args)
    K = compute_kernel(cfg.system, cfg.desirable, cfg.grid, cfg.controls, cfg.dt, cfg.max_iter,
                       threads=args.threads)
    K.meta["seed"] = cfg.seed
    io.write_kernel(K, out / "kernel")
    io.write_slices(K, out, "kernel")
    io.write_plot_script(out, {"kernel": (K.spec.lower, K.spec.upper)})
    text = (f"kernel of {cfg.system.name}: {K.count}/{K.meta['initial_cells']} admissible cells kept "
            f"after {K.meta['iterations']} iterations (converged={K.meta['converged']})")
    _write_text(out / "kernel_report.txt", text)
    return EXIT_OK if K.meta["converged"] else EXIT_FAIL


def cmd_compare_flows(cfg: ExperimentConfig, args) -> int:
    _require(cfg, "cone")
    block = _run_block(cfg, "compare")
    out = _out_dir(args)
    path = _path_from(block["path"], cfg.system.m)
    T = block.get("T", cfg.T)
    x0, y0 = block["x0"], block.get("y0", block["x0"])
    try:
        if "against" in block:
            other = block["against"]
            if other.get("name") not in SYSTEMS or other["name"] == "wolbachia":
                raise ConfigError(f"unknown comparison system {other.get('name')!r}")
            sys_h = SYSTEMS[other["name"]](other.get("params", {}))
            rep = compare_flows(cfg.system, sys_h, cfg.cone, x0, y0, path, cfg.dt, T)
        else:
            rep = compare_controlled(cfg.system, cfg.cone, cfg.reduction, x0, y0, path, cfg.dt, T)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    rep.defects_to_csv(out / "defects.csv")
    _write_text(out / "comparison_report.txt", rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_compare_kernels(paths, args) -> int:
    A, B = (io.read_kernel(p) for p in paths)
    if not A.same_grid(B):
        raise ConfigError("kernels live on different grids")
    a_in_b, wit = kernel_inclusion(A, B)
    b_in_a, _ = kernel_inclusion(B, A)
    sd = symmetric_difference(A, B)
    lines = [
        f"A: {paths[0]} ({A.count} cells)",
        f"B: {paths[1]} ({B.count} cells)",
        f"A ⊆ B: {a_in_b}" + ("" if a_in_b else f" (first witnesses {wit[:5]})"),
        f"B ⊆ A: {b_in_a}",
        f"|A △ B| = {sd} ({100 * sd / max(1, A.count):.3f}% of A's member cells)",
    ]
    text = "\n".join(lines)
    if args.out:
        _write_text(_out_dir(args) / "kernel_comparison.txt", text)
    else:
        print(text)
    return EXIT_OK if a_in_b else EXIT_FAIL


def cmd_wolbachia(args) -> int:
    from .wolbachia import preset_case, compare_release_kernels

    try:
        p, thr, grid, data = preset_case(args.preset)
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown preset {args.preset!r}") from exc
    out = _out_dir(args)
    controls = data.get("controls")
    rep = compare_release_kernels(p, thr, grid, controls=controls, dt=data["dt"],
                           max_iter=data["max_iter"], threads=args.threads)
    windows = {}
    for label, K in (("full", rep.full), ("sharp", rep.sharp), ("reduced", rep.reduced)):
        K.meta["seed"] = args.seed
        io.write_kernel(K, out / f"kernel_{label}")
        io.write_slices(K, out, f"kernel_{label}")
        windows[f"kernel_{label}"] = (K.spec.lower, K.spec.upper)
    io.write_plot_script(out, windows)
    _write_text(out / "case_study_report.txt", rep.summary())
    ok = rep.full_in_reduced and rep.full_in_sharp and rep.symdiff_fraction <= 0.02
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None,
                        help="output directory (default ./viakernel_out; compare --kernels prints only)")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for kernel runs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="viakernel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("check", "sampled checks of the monotonicity hypotheses"),
                        ("simulate", "integrate one controlled trajectory"),
                        ("kernel", "compute a discrete viability kernel")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--config", required=True)
    p = sub.add_parser("compare", parents=[common], help="compare flows or two stored kernels")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config")
    group.add_argument("--kernels", nargs=2, metavar=("A", "B"))
    p = sub.add_parser("wolbachia", parents=[common], help="run the Wolbachia release case study")
    p.add_argument("--preset", default="default")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    if args.seed is None and args.command == "wolbachia":
        args.seed = 0
    try:
        if args.command == "wolbachia":
            return cmd_wolbachia(args)
        if args.command == "compare" and args.kernels:
            return cmd_compare_kernels(args.kernels, args)
        cfg = load_config(args.config, seed=args.seed)
        handler = {"check": cmd_check, "simulate": cmd_simulate, "kernel": cmd_kernel,
                   "compare": cmd_compare_flows}[args.command]
        return handler(cfg, args)
    except (ConfigError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"viakernel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
