"""Command-line interface: simulate, recover, sweep, report, reconstruct."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .harness import SweepConfig, preset_config
from .io import load_record, load_state, save_record, save_report, save_state
from .masks import generate_masks
from .recovery import TvParams, pinv_recover, tv_admm_recover
from .states import Grid2D, fidelity


def _parse_grid(text: str) -> Grid2D:
    try:
        nx, ny = text.lower().split("x")
        return Grid2D(int(nx), int(ny))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"grid must look like 12x16, got {text!r}") from exc


def _parse_fractions(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(","))


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--grid", type=_parse_grid, help="grid as WxH, e.g. 12x16")
    p.add_argument("--state", choices=["gaussian", "phase-mask"])
    p.add_argument("--waist", type=float, help="Gaussian waist in pixels")
    p.add_argument("--defocus", type=float, help="quadratic phase, rad/px^2")
    p.add_argument("--astig", type=float, help="astigmatic phase, rad/px^2")
    p.add_argument("--mask-pbm", type=Path, help="binary phase mask (PBM P1)")
    p.add_argument("--jump-deg", type=float, help="phase-mask jump in degrees")
    p.add_argument("--alpha-deg", type=float, help="coupling angle in degrees")
    p.add_argument("--model", choices=["analytic", "exact", "counts"])
    p.add_argument("--budget", type=float, help="photons per mask per analyzer")
    p.add_argument("--density", type=float, help="mask ones fraction")
    p.add_argument("--solver", choices=["tv", "pinv"])
    p.add_argument("--mu", type=float, help="TV data-fidelity weight")
    p.add_argument("--tol", type=float, help="TV outer stopping tolerance")
    p.add_argument("--max-outer", type=int, help="TV outer iteration cap")
    p.add_argument("--seed", type=int, help="master seed")


def _build_config(args: argparse.Namespace) -> SweepConfig:
    config = SweepConfig.from_file(args.config) if args.config else SweepConfig()
    if args.grid is not None:
        config = replace(config, grid=args.grid)
    state_kw = {}
    for attr, key in (("state", "kind"), ("waist", "waist"),
                      ("defocus", "defocus"), ("astig", "astig")):
        val = getattr(args, attr)
        if val is not None:
            state_kw[key] = val
    if args.mask_pbm is not None:
        state_kw["kind"] = "phase-mask"
        state_kw["mask_pbm"] = str(args.mask_pbm)
    if args.jump_deg is not None:
        state_kw["jump"] = math.radians(args.jump_deg)
    if state_kw:
        config = replace(config, state=replace(config.state, **state_kw))
    if args.alpha_deg is not None:
        config = replace(config, alpha=math.radians(args.alpha_deg))
    measure_kw = {attr: getattr(args, attr)
                  for attr in ("model", "budget", "density", "solver")
                  if getattr(args, attr) is not None}
    if measure_kw:
        config = replace(config, **measure_kw)
    tv_kw = {}
    if args.mu is not None:
        tv_kw["mu"] = args.mu
    if args.tol is not None:
        tv_kw["tol"] = args.tol
    if args.max_outer is not None:
        tv_kw["max_outer"] = args.max_outer
    if tv_kw:
        config = replace(config, tv=replace(config.tv, **tv_kw))
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if getattr(args, "fractions", None):
        config = replace(config, fractions=args.fractions)
    if getattr(args, "reps", None):
        config = replace(config, repetitions=args.reps)
    return config


def _cmd_simulate(args) -> int:
    config = _build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = harness.synthesize_state(config)
    m = harness.measurement_count(args.fraction, config.grid.n)
    seed = harness.derive_seed(config.master_seed, "simulate", args.fraction, 0)
    masks = generate_masks(m, config.grid, config.density, seed)
    record = harness.simulate_record(config, truth, masks, seed)
    save_state(out / "truth.state", truth)
    save_record(out / "record.cdm", record)
    print(f"wrote {out / 'record.cdm'} ({m} masks, model={config.model})")
    return 0


def _cmd_recover(args) -> int:
    record = load_record(args.record)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.solver == "pinv":
        recovered, report = pinv_recover(record)
    else:
        tv_kw = {}
        if args.mu is not None:
            tv_kw["mu"] = args.mu
        if args.tol is not None:
            tv_kw["tol"] = args.tol
        if args.max_outer is not None:
            tv_kw["max_outer"] = args.max_outer
        recovered, report = tv_admm_recover(record, TvParams(**tv_kw))
    save_state(out / "recovered.state", recovered)
    save_report(out / "solve_report.json", report)
    msg = (f"{report.solver}: {report.iterations} iterations, "
           f"residual {report.residual:.3e}, converged={report.converged}")
    if args.truth:
        truth = load_state(args.truth)
        msg += f", fidelity {fidelity(recovered, truth):.6f}"
    print(msg)
    return 0


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    curves = harness.run_sweep(config, args.out, jobs=args.jobs)
    for method in sorted(curves):
        curve = curves[method]
        tail = " ".join(f"{f:.2f}:{m:.3f}" for f, m in
                        zip(curve.fractions, curve.mean))
        print(f"{method}: {tail}")
    print(f"report written to {args.out}")
    return 0


def _cmd_report(args) -> int:
    curves = harness.emit_report(args.out)
    print(f"curves.csv / summary.json rebuilt in {args.out} "
          f"({sum(len(c.fractions) for c in curves.values())} rows)")
    return 0


def _cmd_reconstruct(args) -> int:
    if args.preset:
        config = preset_config(args.preset, args.out)
    else:
        config = _build_config(args)
    fraction = args.fraction if args.fraction is not None else 0.20
    metrics = harness.run_reconstruction(config, fraction, args.out)
    print(json.dumps(metrics, sort_keys=True, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdm",
        description="Compressive direct measurement: simulate mask-based weak "
                    "measurements of a 2-D wavefunction and reconstruct it.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a measurement record file")
    _add_config_flags(p_sim)
    p_sim.add_argument("--fraction", type=float, default=0.25,
                       help="measurement fraction M/N")
    p_sim.add_argument("--out", type=Path, required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_rec = sub.add_parser("recover", help="reconstruct from a record file")
    p_rec.add_argument("--record", type=Path, required=True)
    p_rec.add_argument("--solver", choices=["tv", "pinv"], default="tv")
    p_rec.add_argument("--mu", type=float)
    p_rec.add_argument("--tol", type=float)
    p_rec.add_argument("--max-outer", type=int)
    p_rec.add_argument("--truth", type=Path, help="truth state file (prints fidelity)")
    p_rec.add_argument("--out", type=Path, required=True)
    p_rec.set_defaults(func=_cmd_recover)

    p_swp = sub.add_parser("sweep", help="fidelity-vs-fraction sweep, both methods")
    _add_config_flags(p_swp)
    p_swp.add_argument("--fraction", dest="fractions", type=_parse_fractions,
                       help="comma-separated fraction list")
    p_swp.add_argument("--reps", type=int, help="repetitions per fraction")
    p_swp.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes")
    p_swp.add_argument("--out", type=Path, required=True)
    p_swp.set_defaults(func=_cmd_sweep)

    p_rep = sub.add_parser("report", help="rebuild CSV/JSON reports for a sweep")
    p_rep.add_argument("--out", type=Path, required=True,
                       help="sweep results directory")
    p_rep.set_defaults(func=_cmd_report)

    p_rcn = sub.add_parser("reconstruct",
                           help="single reconstruction with field dumps")
    _add_config_flags(p_rcn)
    p_rcn.add_argument("--preset", choices=sorted(harness.PRESETS))
    p_rcn.add_argument("--fraction", type=float, help="measurement fraction M/N")
    p_rcn.add_argument("--out", type=Path, required=True)
    p_rcn.set_defaults(func=_cmd_reconstruct)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
