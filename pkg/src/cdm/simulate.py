"""Weak measurement of random mask projectors with a polarization pointer.

Each mask row m weakly couples the projector sum over its set pixels to
a polarization qubit (rotation angle ``alpha`` on masked pixels), then
post-selects on the uniform zero-momentum state. The retained pointer
carries the masked amplitude sum in its Pauli expectations:

* ``sigma_x`` reads the imaginary part, ``sigma_y`` the real part, both
  scaled by ``kappa = 2 * alpha / (phi0 * sqrt(N))``.
* The complex readout ``phi_m = (sigma_y + i * sigma_x) / kappa`` then
  satisfies ``phi = Q @ psi`` exactly in the first-order model.

Three tiers are provided: ``analytic`` (first-order, exact linear
system), ``exact`` (full unitary evolution, no Taylor truncation) and
``counts`` (Poisson photon counting at the four analyzer ports).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linop import MaskOperator
from .masks import STREAM_COUNTS, SensingMatrix, row_rng
from .states import Grid2D, StateVector, fix_global_phase, zero_frequency_overlap

__all__ = [
    "PointerState",
    "DetectorCounts",
    "MeasurementRecord",
    "MODELS",
    "postselected_pointer",
    "simulate_analytic",
    "simulate_exact",
    "simulate_counts",
    "speedup_estimate",
]

MODELS = ("analytic", "exact", "counts")

KAPPA_TOL = 1e-12


class SimulationError(ValueError):
    """Raised for invalid simulator inputs (zero overlap, bad budget...)."""


@dataclass(frozen=True)
class PointerState:
    """Polarization qubit (H, V amplitudes), normalized to 1e-12."""

    h: complex
    v: complex

    def __post_init__(self):
        nrm = abs(self.h) ** 2 + abs(self.v) ** 2
        if abs(nrm - 1.0) > 1e-12:
            raise SimulationError(f"pointer not normalized: |h|^2+|v|^2 = {nrm!r}")

    def sigma_x(self) -> float:
        """<sigma_x>; eigenbasis = diagonal/antidiagonal polarization."""
        return 2.0 * (np.conj(self.h) * self.v).real

    def sigma_y(self) -> float:
        """<sigma_y>; eigenbasis = the circular polarization pair."""
        return 2.0 * (np.conj(self.h) * self.v).imag


@dataclass(frozen=True)
class DetectorCounts:
    """Poisson counts per mask row at the four analyzer ports.

    ``counts`` has shape (m, 4) with columns (sigma_x plus, sigma_x
    minus, sigma_y plus, sigma_y minus).
    """

    counts: np.ndarray

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[1] != 4:
            raise SimulationError(f"counts must be (m, 4), got {counts.shape}")
        if (counts < 0).any():
            raise SimulationError("negative photon count")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    def estimates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pauli estimates (n+ - n-)/(n+ + n-) and a per-row validity mask.

        Rows where either analyzer saw zero photons are marked invalid
        and their estimates are returned as 0.
        """
        c = self.counts.astype(np.float64)
        tot_x = c[:, 0] + c[:, 1]
        tot_y = c[:, 2] + c[:, 3]
        valid = (tot_x > 0) & (tot_y > 0)
        sx = np.zeros(len(c))
        sy = np.zeros(len(c))
        np.divide(c[:, 0] - c[:, 1], tot_x, out=sx, where=tot_x > 0)
        np.divide(c[:, 2] - c[:, 3], tot_y, out=sy, where=tot_y > 0)
        return sx, sy, valid


@dataclass(frozen=True)
class MeasurementRecord:
    """The linear system ``phi = Q psi`` plus calibration metadata.

    This is the sole handoff from simulation to recovery: the sensing
    matrix, the complex readouts, and the calibration constants needed
    to interpret them. ``noise_meta`` carries model-specific extras
    (photon budget, seed, invalid row indices).
    """

    matrix: SensingMatrix
    phi: np.ndarray
    alpha: float
    phi0: float
    grid: Grid2D
    kappa: float
    model: str
    noise_meta: dict | None = None

    def __post_init__(self):
        phi = np.ascontiguousarray(self.phi, dtype=np.complex128)
        if phi.shape != (self.matrix.m,):
            raise SimulationError(
                f"phi has shape {phi.shape}, expected ({self.matrix.m},)")
        phi = phi.copy()
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        if self.model not in MODELS:
            raise SimulationError(f"unknown model {self.model!r}")
        if self.grid.n != self.matrix.n:
            raise SimulationError("grid dimension does not match mask length")
        expected = 2.0 * self.alpha / (self.phi0 * math.sqrt(self.grid.n))
        if abs(self.kappa - expected) > KAPPA_TOL * max(1.0, abs(expected)):
            raise SimulationError(
                f"kappa {self.kappa!r} inconsistent with 2*alpha/(phi0*sqrt(N))")

    @property
    def m(self) -> int:
        return self.matrix.m

    @property
    def n(self) -> int:
        return self.matrix.n

    def invalid_rows(self) -> np.ndarray:
        meta = self.noise_meta or {}
        return np.asarray(meta.get("invalid_rows", []), dtype=np.int64)

    def valid_mask(self) -> np.ndarray:
        """Boolean row mask: True where the readout is usable."""
        mask = np.ones(self.m, dtype=bool)
        bad = self.invalid_rows()
        if bad.size:
            mask[bad] = False
        return mask


def _prepared(state: StateVector) -> tuple[np.ndarray, float]:
    """Phase-fixed amplitudes and the (real, positive) overlap phi0."""
    if not state.normalized:
        raise SimulationError("simulator requires a normalized state")
    fixed = fix_global_phase(state)
    phi0 = zero_frequency_overlap(fixed).phi0.real
    return fixed.amps, phi0


def _kappa(alpha: float, phi0: float, n: int) -> float:
    return 2.0 * alpha / (phi0 * math.sqrt(n))


def postselected_pointer(state: StateVector, mask_bits: np.ndarray,
                         alpha: float) -> tuple[PointerState, float]:
    """Exact post-selected pointer for one mask row.

    Masked pixels rotate the pointer by ``alpha`` (|V> -> cos(a)|V> -
    i sin(a)|H>); the uniform momentum projection then leaves a pure
    polarization state. Returns the normalized pointer and the
    post-selection success probability.
    """
    psi, _ = _prepared(state)
    rootn = math.sqrt(state.grid.n)
    masked = complex(psi[np.asarray(mask_bits, dtype=bool)].sum())
    total = complex(psi.sum())
    v = (total - masked + math.cos(alpha) * masked) / rootn
    h = -1j * math.sin(alpha) * masked / rootn
    p = abs(h) ** 2 + abs(v) ** 2
    if p == 0.0:
        raise SimulationError("post-selection amplitude is exactly zero")
    scale = 1.0 / math.sqrt(p)
    return PointerState(h * scale, v * scale), p


def _exact_pointer_components(psi: np.ndarray, phi0: float, op: MaskOperator,
                              alpha: float):
    """Vectorized unnormalized pointer amplitudes (h, v) and probabilities."""
    rootn = math.sqrt(op.n)
    masked = op.matvec(psi)
    total = rootn * phi0
    v = (total - masked + math.cos(alpha) * masked) / rootn
    h = -1j * math.sin(alpha) * masked / rootn
    p = np.abs(h) ** 2 + np.abs(v) ** 2
    return h, v, p


def simulate_analytic(state: StateVector, masks: SensingMatrix,
                      alpha: float) -> MeasurementRecord:
    """First-order weak-measurement model; ``phi = Q psi`` to machine precision.

    The Pauli expectations are linear in the masked amplitude sums, so
    assembling ``(sigma_y + i sigma_x) / kappa`` reproduces the masked
    sums exactly; they are computed as one matrix application.
    """
    psi, phi0 = _prepared(state)
    op = MaskOperator(masks)
    phi = op.matvec(psi)
    return MeasurementRecord(masks, phi, alpha, phi0, state.grid,
                             _kappa(alpha, phi0, masks.n), "analytic")


def simulate_exact(state: StateVector, masks: SensingMatrix,
                   alpha: float) -> MeasurementRecord:
    """Full-unitary weak measurement (no first-order truncation).

    The per-row pointer is post-selected and normalized exactly, so the
    readout carries the weak-measurement bias of order ``alpha**2``;
    it converges to :func:`simulate_analytic` as ``alpha -> 0``. Rows
    whose post-selection amplitude vanishes identically are flagged
    invalid (listed in ``noise_meta["invalid_rows"]``) and read 0.
    """
    psi, phi0 = _prepared(state)
    op = MaskOperator(masks)
    kappa = _kappa(alpha, phi0, masks.n)
    if alpha == 0.0:
        phi = np.zeros(masks.m, dtype=np.complex128)
        return MeasurementRecord(masks, phi, alpha, phi0, state.grid,
                                 kappa, "exact", {"invalid_rows": []})
    h, v, p = _exact_pointer_components(psi, phi0, op, alpha)
    valid = p > 0.0
    hv = np.conj(h) * v
    sx = np.zeros(masks.m)
    sy = np.zeros(masks.m)
    np.divide(2.0 * hv.real, p, out=sx, where=valid)
    np.divide(2.0 * hv.imag, p, out=sy, where=valid)
    phi = (sy + 1j * sx) / kappa
    phi[~valid] = 0.0
    meta = {"invalid_rows": np.flatnonzero(~valid).tolist()}
    return MeasurementRecord(masks, phi, alpha, phi0, state.grid,
                             kappa, "exact", meta)


def simulate_counts(state: StateVector, masks: SensingMatrix, alpha: float,
                    budget: float, seed: int) -> tuple[DetectorCounts, MeasurementRecord]:
    """Photon-counting weak measurement with Poisson shot noise.

    For each mask row the exact post-selected pointer fixes the four
    analyzer port probabilities; counts are Poisson with mean
    ``budget * p_success * P(port)``, drawn from the per-row counter
    streams (deterministic given ``seed``, any row order). Pauli
    expectations are estimated as normalized count differences; rows
    where an analyzer pair saw no photons are flagged invalid.
    """
    if not budget > 0:
        raise SimulationError(f"photon budget must be positive, got {budget}")
    psi, phi0 = _prepared(state)
    op = MaskOperator(masks)
    kappa = _kappa(alpha, phi0, masks.n)
    h, v, p = _exact_pointer_components(psi, phi0, op, alpha)
    pointer_ok = p > 0.0
    hv = np.conj(h) * v
    sx_true = np.zeros(masks.m)
    sy_true = np.zeros(masks.m)
    np.divide(2.0 * hv.real, p, out=sx_true, where=pointer_ok)
    np.divide(2.0 * hv.imag, p, out=sy_true, where=pointer_ok)
    # Port probabilities: each analyzer splits its basis pair 50/50
    # shifted by the corresponding Pauli expectation.
    lam = np.empty((masks.m, 4))
    lam[:, 0] = (1.0 + sx_true) / 2.0
    lam[:, 1] = (1.0 - sx_true) / 2.0
    lam[:, 2] = (1.0 + sy_true) / 2.0
    lam[:, 3] = (1.0 - sy_true) / 2.0
    lam *= budget * p[:, None]
    np.clip(lam, 0.0, None, out=lam)  # roundoff can graze below zero at |sigma|=1
    counts = np.empty((masks.m, 4), dtype=np.int64)
    for row in range(masks.m):
        counts[row] = row_rng(seed, row, STREAM_COUNTS).poisson(lam[row])
    detector = DetectorCounts(counts)
    sx, sy, counted = detector.estimates()
    valid = pointer_ok & counted
    if alpha == 0.0 or kappa == 0.0:
        phi = np.zeros(masks.m, dtype=np.complex128)
    else:
        phi = (sy + 1j * sx) / kappa
        phi[~valid] = 0.0
    meta = {"invalid_rows": np.flatnonzero(~valid).tolist(),
            "budget": float(budget), "seed": int(seed)}
    record = MeasurementRecord(masks, phi, alpha, phi0, state.grid,
                               kappa, "counts", meta)
    return detector, record


def speedup_estimate(n: int, m: int) -> float:
    """Acquisition speed-up of mask sensing over a pixel raster scan.

    Half-filled masks make the per-measurement pointer signal about
    ``sqrt(n) / 2`` stronger than a single-pixel measurement, and only
    ``m`` of ``n`` measurements are taken: the estimate is the product
    ``(sqrt(n) / 2) * (n / m)``.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    return (math.sqrt(n) / 2.0) * (n / m)
