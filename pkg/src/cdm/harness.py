"""Configuration-driven experiments: fidelity sweeps, single
reconstructions, and report emission.

Every run is fully determined by its config: per-run seeds are derived
by hashing the master seed with the run coordinates (method, fraction,
repetition), so any subset of a sweep can be reproduced in isolation
and repeated runs write byte-identical reports. Timing information is
deliberately kept out of the report files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baseline import RasterPlan, partial_raster_recover
from .bitmaps import letter_mask, read_pbm, write_pbm
from .io import save_record, save_report, save_state
from .masks import generate_masks
from .recovery import TvParams, pinv_recover, tv_admm_recover
from .simulate import simulate_analytic, simulate_counts, simulate_exact, speedup_estimate
from .states import (
    Grid2D,
    StateVector,
    fidelity,
    fix_global_phase,
    gaussian_state,
    phase_mask_state,
)

__all__ = [
    "StateSpec",
    "SweepConfig",
    "FidelityCurve",
    "derive_seed",
    "synthesize_state",
    "simulate_record",
    "run_sweep",
    "run_reconstruction",
    "emit_report",
    "phase_agreement",
    "PRESETS",
]

log = logging.getLogger(__name__)

METHOD_CDM = "cdm"
METHOD_RASTER = "partial-raster"

CSV_COLUMNS = ("method", "fraction", "m", "mean_fidelity", "std_fidelity",
               "n", "speedup")


def derive_seed(master: int, *coords) -> int:
    """64-bit seed from the master seed and run coordinates (hashed)."""
    parts = [str(int(master))]
    for c in coords:
        parts.append(repr(float(c)) if isinstance(c, float) else str(c))
    digest = hashlib.sha256(":".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def measurement_count(fraction: float, n: int) -> int:
    """Number of mask settings for a measurement fraction of an N-pixel state."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    return max(1, round(fraction * n))


@dataclass(frozen=True)
class StateSpec:
    """What to synthesize as the ground-truth state."""

    kind: str = "gaussian"            # "gaussian" | "phase-mask"
    waist: float = 4.0
    defocus: float = 0.05
    astig: float = 0.02
    mask_pbm: str | None = None       # phase-mask only
    jump: float = math.pi / 2

    def __post_init__(self):
        if self.kind not in ("gaussian", "phase-mask"):
            raise ValueError(f"unknown state kind {self.kind!r}")


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep or reconstruction needs, JSON round-trippable."""

    grid: Grid2D = Grid2D(12, 16)
    state: StateSpec = StateSpec()
    fractions: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(1, 17))
    repetitions: int = 100
    alpha: float = math.radians(20.0)
    model: str = "analytic"
    budget: float | None = None
    density: float = 0.5
    solver: str = "tv"                # "tv" | "pinv"
    tv: TvParams = field(default_factory=TvParams)
    master_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for f in self.fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError(f"fraction {f} outside (0, 1]")
        if self.solver not in ("tv", "pinv"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.model == "counts" and not (self.budget and self.budget > 0):
            raise ValueError("counts model needs a positive photon budget")

    def to_dict(self) -> dict:
        return {
            "grid": {"nx": self.grid.nx, "ny": self.grid.ny,
                     "pitch": self.grid.pitch},
            "state": asdict(self.state),
            "sweep": {"fractions": list(self.fractions),
                      "repetitions": self.repetitions},
            "measure": {"alpha_deg": math.degrees(self.alpha),
                        "model": self.model, "budget": self.budget,
                        "density": self.density},
            "solver": {"name": self.solver, **asdict(self.tv)},
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "SweepConfig":
        kw: dict = {}
        if "grid" in cfg:
            g = cfg["grid"]
            kw["grid"] = Grid2D(int(g["nx"]), int(g["ny"]),
                                float(g.get("pitch", 1.0)))
        if "state" in cfg:
            kw["state"] = StateSpec(**cfg["state"])
        sweep = cfg.get("sweep", {})
        if "fractions" in sweep:
            kw["fractions"] = tuple(float(f) for f in sweep["fractions"])
        if "repetitions" in sweep:
            kw["repetitions"] = int(sweep["repetitions"])
        measure = cfg.get("measure", {})
        if "alpha_deg" in measure:
            kw["alpha"] = math.radians(float(measure["alpha_deg"]))
        if "model" in measure:
            kw["model"] = str(measure["model"])
        if "budget" in measure and measure["budget"] is not None:
            kw["budget"] = float(measure["budget"])
        if "density" in measure:
            kw["density"] = float(measure["density"])
        solver = dict(cfg.get("solver", {}))
        if solver:
            kw["solver"] = str(solver.pop("name", "tv"))
            if solver:
                kw["tv"] = TvParams(**solver)
        if "master_seed" in cfg:
            kw["master_seed"] = int(cfg["master_seed"])
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class FidelityCurve:
    """Mean/std fidelity versus measurement fraction for one method."""

    method: str
    fractions: list[float]
    mean: list[float]
    std: list[float]
    count: list[int]
    failures: list[int]


def synthesize_state(config: SweepConfig) -> StateVector:
    spec = config.state
    if spec.kind == "gaussian":
        return gaussian_state(config.grid, spec.waist, spec.defocus, spec.astig)
    if spec.mask_pbm is None:
        raise ValueError("phase-mask state spec needs a mask_pbm path")
    mask = read_pbm(spec.mask_pbm)
    return phase_mask_state(config.grid, mask, spec.jump, spec.waist)


def simulate_record(config: SweepConfig, truth: StateVector, masks, seed: int):
    """Measurement record for the configured model (seed feeds counts only)."""
    if config.model == "analytic":
        return simulate_analytic(truth, masks, config.alpha)
    if config.model == "exact":
        return simulate_exact(truth, masks, config.alpha)
    return simulate_counts(truth, masks, config.alpha, config.budget, seed)[1]


def _recover(config: SweepConfig, record):
    if config.solver == "pinv":
        return pinv_recover(record)
    return tv_admm_recover(record, config.tv)


def _run_one(cfg_dict: dict, method: str, fraction: float, rep: int) -> dict:
    """One sweep cell; pure function of its arguments (for process pools)."""
    config = SweepConfig.from_dict(cfg_dict)
    truth = synthesize_state(config)
    n = config.grid.n
    m = measurement_count(fraction, n)
    seed = derive_seed(config.master_seed, method, fraction, rep)
    entry = {"method": method, "fraction": fraction, "rep": rep, "m": m}
    try:
        if method == METHOD_CDM:
            masks = generate_masks(m, config.grid, config.density, seed)
            record = simulate_record(config, truth, masks, seed)
            recovered, report = _recover(config, record)
            entry["solver_iterations"] = report.iterations
        else:
            plan = RasterPlan.random(config.grid, fraction, seed)
            recovered = partial_raster_recover(
                truth, plan, config.alpha, config.model,
                budget=config.budget, seed=seed)
        entry["fidelity"] = fidelity(recovered, truth)
    except Exception as exc:
        log.warning("%s run failed (fraction=%s rep=%d): %s",
                    method, fraction, rep, exc)
        entry["fidelity"] = None
        entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def run_sweep(config: SweepConfig, out_dir: str | Path,
              jobs: int = 1) -> dict[str, FidelityCurve]:
    """Full fidelity sweep of both methods; writes all artifacts.

    Emits ``config.resolved.json``, per-run results in ``runs.jsonl``
    (ordered by run coordinates regardless of execution order), and the
    CSV/JSON/gnuplot reports. Returns the two fidelity curves keyed by
    method name.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_dict = config.to_dict()
    (out / "config.resolved.json").write_text(
        json.dumps(cfg_dict, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    tasks = [(method, fraction, rep)
             for method in (METHOD_CDM, METHOD_RASTER)
             for fraction in config.fractions
             for rep in range(config.repetitions)]
    log.info("sweep: %d runs (%d fractions x %d reps x 2 methods)",
             len(tasks), len(config.fractions), config.repetitions)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_run_one,
                                    [cfg_dict] * len(tasks),
                                    *zip(*tasks),
                                    chunksize=8))
    else:
        entries = [_run_one(cfg_dict, *task) for task in tasks]

    with open(out / "runs.jsonl", "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    curves = emit_report(out)
    return curves


def _aggregate(entries: list[dict]) -> dict[str, FidelityCurve]:
    curves: dict[str, FidelityCurve] = {}
    for method in (METHOD_CDM, METHOD_RASTER):
        rows = [e for e in entries if e["method"] == method]
        if not rows:
            continue
        fractions = sorted({float(e["fraction"]) for e in rows})
        curve = FidelityCurve(method, fractions, [], [], [], [])
        for f in fractions:
            fids = [e["fidelity"] for e in rows
                    if float(e["fraction"]) == f and e["fidelity"] is not None]
            fails = sum(1 for e in rows
                        if float(e["fraction"]) == f and e["fidelity"] is None)
            mean = float(np.mean(fids)) if fids else float("nan")
            std = float(np.std(fids, ddof=1)) if len(fids) > 1 else 0.0
            curve.mean.append(mean)
            curve.std.append(std)
            curve.count.append(len(fids))
            curve.failures.append(fails)
        curves[method] = curve
    return curves


def emit_report(out_dir: str | Path) -> dict[str, FidelityCurve]:
    """(Re)build curves.csv, summary.json and the gnuplot files.

    Reads ``runs.jsonl`` and ``config.resolved.json`` from the results
    directory; missing or corrupt run lines are skipped but reported in
    the summary. Output bytes depend only on the run data.
    """
    out = Path(out_dir)
    missing: list[str] = []
    cfg_path = out / "config.resolved.json"
    if cfg_path.exists():
        config = SweepConfig.from_file(cfg_path)
    else:
        missing.append(cfg_path.name)
        config = SweepConfig()
    entries: list[dict] = []
    corrupt = 0
    runs_path = out / "runs.jsonl"
    if runs_path.exists():
        for line in runs_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError:
                corrupt += 1
    else:
        missing.append(runs_path.name)
    entries.sort(key=lambda e: (e["method"], float(e["fraction"]), e["rep"]))
    curves = _aggregate(entries)

    n = config.grid.n
    lines = [",".join(CSV_COLUMNS)]
    for method in sorted(curves):
        curve = curves[method]
        for k, f in enumerate(curve.fractions):
            m = measurement_count(f, n)
            lines.append(",".join([
                method, repr(f), str(m), repr(curve.mean[k]),
                repr(curve.std[k]), str(curve.count[k]),
                repr(speedup_estimate(n, m)),
            ]))
    (out / "curves.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = {
        "config": config.to_dict(),
        "missing_files": missing,
        "corrupt_run_lines": corrupt,
        "curves": {method: asdict(curve) for method, curve in curves.items()},
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _emit_gnuplot(out, curves)
    return curves


def _emit_gnuplot(out: Path, curves: dict[str, FidelityCurve]) -> None:
    blocks = []
    plots = []
    for i, method in enumerate(sorted(curves)):
        curve = curves[method]
        rows = [f"# {method}: fraction mean std"]
        rows += [f"{repr(f)} {repr(m)} {repr(s)}"
                 for f, m, s in zip(curve.fractions, curve.mean, curve.std)]
        blocks.append("\n".join(rows))
        plots.append(f"'fidelity_curve.dat' index {i} using 1:2:3 "
                     f"with yerrorlines title '{method}'")
    (out / "fidelity_curve.dat").write_text("\n\n\n".join(blocks) + "\n",
                                            encoding="utf-8")
    script = ("set xlabel \"measurement fraction M/N\"\n"
              "set ylabel \"fidelity\"\n"
              "set yrange [0:1.05]\n"
              "set key bottom right\n")
    if plots:
        script += "plot " + ", \\\n     ".join(plots) + "\n"
    (out / "plot_fidelity.gp").write_text(script, encoding="utf-8")


# -- single reconstructions ---------------------------------------------------

def phase_agreement(truth: StateVector, mask_bits: np.ndarray,
                    recon: StateVector, amp_frac: float = 0.1) -> float:
    """Fraction of high-amplitude pixels whose recovered phase class
    matches the known binary input mask.

    Reference phases for the two classes come from the phase-fixed
    truth; each recovered pixel is assigned to the nearer reference on
    the circle. High-amplitude means truth amplitude at least
    ``amp_frac`` of the maximum.
    """
    truth = fix_global_phase(truth if truth.normalized else truth.normalize())
    mask = np.asarray(mask_bits).ravel().astype(bool)
    amp = np.abs(truth.amps)
    keep = amp >= amp_frac * amp.max()
    ref = []
    for cls in (False, True):
        sel = keep & (mask == cls)
        if not sel.any():
            raise ValueError("mask class absent among high-amplitude pixels")
        ref.append(np.angle(truth.amps[sel].sum()))
    theta = np.angle(recon.amps)
    d0 = np.abs(np.angle(np.exp(1j * (theta - ref[0]))))
    d1 = np.abs(np.angle(np.exp(1j * (theta - ref[1]))))
    classified = d1 < d0
    return float((classified[keep] == mask[keep]).mean())


def run_reconstruction(config: SweepConfig, fraction: float,
                       out_dir: str | Path) -> dict:
    """Simulate one record at the given fraction, recover, dump fields.

    Writes the truth and recovered states (state files plus plain-text
    field grids for external plotting), the measurement record, the
    solver report and a metrics JSON. Returns the metrics dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = synthesize_state(config)
    n = config.grid.n
    m = measurement_count(fraction, n)
    seed = derive_seed(config.master_seed, "recon", fraction, 0)
    masks = generate_masks(m, config.grid, config.density, seed)
    record = simulate_record(config, truth, masks, seed)
    save_record(out / "record.cdm", record)
    recovered, report = _recover(config, record)
    save_state(out / "truth.state", truth)
    save_state(out / "recovered.state", recovered)
    save_report(out / "solve_report.json", report)

    fixed_truth = fix_global_phase(truth)
    if config.state.kind == "phase-mask":
        field_names = ("amplitude", "phase")
    else:
        field_names = ("amplitude", "real", "imag")
    for name, state in (("truth", fixed_truth), ("recon", recovered)):
        for fname in field_names:
            _dump_field(out / f"{name}_{fname}.txt", state, fname)

    metrics = {
        "fraction": fraction,
        "m": m,
        "n": n,
        "fidelity": fidelity(recovered, truth),
        "solver": report.solver,
        "iterations": report.iterations,
        "converged": report.converged,
        "speedup": speedup_estimate(n, m),
    }
    if config.state.kind == "phase-mask":
        mask = read_pbm(config.state.mask_pbm)
        metrics["phase_agreement"] = phase_agreement(truth, mask, recovered)
    (out / "metrics.json").write_text(
        json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return metrics


def _dump_field(path: Path, state: StateVector, which: str) -> None:
    img = state.image()
    if which == "amplitude":
        data = np.abs(img)
    elif which == "real":
        data = img.real
    elif which == "imag":
        data = img.imag
    elif which == "phase":
        data = np.angle(img)
    else:
        raise ValueError(f"unknown field {which!r}")
    header = (f"{which} field, {state.grid.nx} x {state.grid.ny} pixels, "
              f"pitch {state.grid.pitch} mm; gnuplot: plot ... matrix with image")
    np.savetxt(path, data, fmt="%.10e", header=header)


# -- presets ------------------------------------------------------------------

def _desk_gaussian() -> SweepConfig:
    return SweepConfig(tv=TvParams(tol=1e-4))


def _large_gaussian() -> SweepConfig:
    return SweepConfig(
        grid=Grid2D(120, 160),
        state=StateSpec(kind="gaussian", waist=40.0, defocus=5e-4, astig=2e-4),
        tv=TvParams(tol=1e-4, max_outer=80),
    )


def _large_letters(out_dir: str | Path) -> SweepConfig:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pbm = out / "letters_mask.pbm"
    grid = Grid2D(120, 160)
    write_pbm(pbm, letter_mask(grid, "UR"))
    return SweepConfig(
        grid=grid,
        state=StateSpec(kind="phase-mask", waist=80.0, mask_pbm=str(pbm)),
        tv=TvParams(tol=1e-4, max_outer=80),
    )


PRESETS = {
    "gaussian-192": _desk_gaussian,
    "gaussian-19200": _large_gaussian,
    "letters-19200": _large_letters,
}


def preset_config(name: str, out_dir: str | Path) -> SweepConfig:
    """Named experiment presets (the letters preset writes its PBM mask)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r} (have {sorted(PRESETS)})")
    maker = PRESETS[name]
    return maker(out_dir) if name == "letters-19200" else maker()
