"""On-disk formats for states and measurement records.

Both formats are a single file: one UTF-8 JSON manifest line terminated
by a newline, followed by raw little-endian binary blocks whose sizes
are implied by the manifest.

State file (``cdm-state`` v1)
    manifest: nx, ny, pitch, normalized;
    block: 2N float64, interleaved (re, im) per pixel, row-major.

Record file (``cdm-record`` v1)
    manifest: grid (nx, ny, pitch), m, n, alpha_rad, phi0, kappa,
    density, seed, model, noise_meta;
    block 1: mask rows bit-packed (n bits per row, zero-padded to the
    byte boundary, little-endian bit order), m * ceil(n / 8) bytes;
    block 2: phi, 2m float64 interleaved (re, im).

JSON floats use Python's shortest round-trip repr, so every calibration
value reloads bit-exactly and recovery from a persisted record matches
the in-process result.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .masks import SensingMatrix
from .recovery import SolveReport
from .simulate import MeasurementRecord
from .states import Grid2D, StateVector

__all__ = ["save_state", "load_state", "save_record", "load_record",
           "save_report"]

STATE_FORMAT = "cdm-state"
RECORD_FORMAT = "cdm-record"
FORMAT_VERSION = 1


class FileFormatError(ValueError):
    """Raised for malformed or truncated cdm files."""


def _write(path: str | Path, manifest: dict, blocks: list[bytes]) -> None:
    header = json.dumps(manifest, sort_keys=True).encode("utf-8") + b"\n"
    with open(path, "wb") as fh:
        fh.write(header)
        for block in blocks:
            fh.write(block)


def _read(path: str | Path, expected_format: str) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FileFormatError(f"{path}: missing manifest line")
    try:
        manifest = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: bad manifest ({exc})") from exc
    if manifest.get("format") != expected_format:
        raise FileFormatError(
            f"{path}: expected {expected_format!r}, got {manifest.get('format')!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported version {manifest.get('version')!r}")
    return manifest, raw[nl + 1:]


def save_state(path: str | Path, state: StateVector) -> None:
    manifest = {
        "format": STATE_FORMAT,
        "version": FORMAT_VERSION,
        "nx": state.grid.nx,
        "ny": state.grid.ny,
        "pitch": state.grid.pitch,
        "normalized": state.normalized,
    }
    _write(path, manifest, [state.amps.astype("<c16").tobytes()])


def load_state(path: str | Path) -> StateVector:
    manifest, body = _read(path, STATE_FORMAT)
    grid = Grid2D(int(manifest["nx"]), int(manifest["ny"]),
                  float(manifest["pitch"]))
    need = 16 * grid.n
    if len(body) != need:
        raise FileFormatError(
            f"{path}: amplitude block is {len(body)} bytes, expected {need}")
    amps = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    return StateVector(grid, amps, normalized=bool(manifest["normalized"]))


def save_record(path: str | Path, record: MeasurementRecord) -> None:
    manifest = {
        "format": RECORD_FORMAT,
        "version": FORMAT_VERSION,
        "nx": record.grid.nx,
        "ny": record.grid.ny,
        "pitch": record.grid.pitch,
        "m": record.m,
        "n": record.n,
        "alpha_rad": record.alpha,
        "phi0": record.phi0,
        "kappa": record.kappa,
        "density": record.matrix.density,
        "seed": record.matrix.seed,
        "model": record.model,
        "noise_meta": record.noise_meta,
    }
    blocks = [record.matrix.packed.tobytes(),
              record.phi.astype("<c16").tobytes()]
    _write(path, manifest, blocks)


def load_record(path: str | Path) -> MeasurementRecord:
    manifest, body = _read(path, RECORD_FORMAT)
    grid = Grid2D(int(manifest["nx"]), int(manifest["ny"]),
                  float(manifest["pitch"]))
    m, n = int(manifest["m"]), int(manifest["n"])
    nbytes = (n + 7) // 8
    need = m * nbytes + 16 * m
    if len(body) != need:
        raise FileFormatError(
            f"{path}: body is {len(body)} bytes, expected {need}")
    packed = np.frombuffer(body[: m * nbytes], dtype=np.uint8).reshape(m, nbytes)
    packed = packed.copy()
    if n % 8:
        packed[:, -1] &= np.uint8((1 << (n % 8)) - 1)  # clear padding bits
    phi = np.frombuffer(body[m * nbytes:], dtype="<c16").astype(np.complex128)
    seed = manifest["seed"]
    matrix = SensingMatrix(packed, n=n, density=float(manifest["density"]),
                           seed=None if seed is None else int(seed))
    return MeasurementRecord(
        matrix, phi,
        alpha=float(manifest["alpha_rad"]),
        phi0=float(manifest["phi0"]),
        grid=grid,
        kappa=float(manifest["kappa"]),
        model=str(manifest["model"]),
        noise_meta=manifest["noise_meta"],
    )


def save_report(path: str | Path, report: SolveReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2)
                          + "\n", encoding="utf-8")
