"""Discrete 2-D complex wavefunctions and the operations defined on them.

A state lives on a rectangular pixel grid. Pixels are indexed row-major:
linear index ``j = iy * nx + ix``, so a length-N amplitude vector reshapes
to an ``(ny, nx)`` image. All Fourier transforms here are unitary (factor
``1/sqrt(N)`` forward) so that the zero-frequency analyzer row is exactly
``1/sqrt(N)`` per pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid2D",
    "StateVector",
    "PostSelector",
    "gaussian_state",
    "phase_mask_state",
    "zero_frequency_overlap",
    "fix_global_phase",
    "fidelity",
    "dft2",
    "idft2",
]

NORM_TOL = 1e-12


class StateError(ValueError):
    """Raised for invalid grids, amplitudes or degenerate states."""


@dataclass(frozen=True)
class Grid2D:
    """Pixelization of the transverse plane.

    Parameters
    ----------
    nx, ny : int
        Pixel counts along x and y. The Hilbert-space dimension is
        ``n = nx * ny``.
    pitch : float
        Physical pixel size in millimeters. Used only for axis labeling
        in emitted field files; all internal coordinates are in pixels.
    """

    nx: int
    ny: int
    pitch: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise StateError(f"grid must have nx, ny >= 1, got {self.nx}x{self.ny}")

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """Image shape ``(ny, nx)`` for reshaping row-major vectors."""
        return (self.ny, self.nx)

    def centered_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates relative to the grid midpoint.

        Returns ``(x, y)`` arrays of shape ``(ny, nx)`` in pixel units;
        for even pixel counts the centers fall on half-integers so the
        grid is exactly mirror symmetric.
        """
        x = np.arange(self.nx, dtype=float) - (self.nx - 1) / 2.0
        y = np.arange(self.ny, dtype=float) - (self.ny - 1) / 2.0
        return np.meshgrid(x, y)


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes on a :class:`Grid2D`, stored as a flat vector.

    Instances are immutable; the amplitude buffer is marked read-only.
    When ``normalized`` is set the 2-norm is validated to 1e-12.
    """

    grid: Grid2D
    amps: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if amps.shape != (self.grid.n,):
            raise StateError(
                f"amplitude vector has shape {amps.shape}, expected ({self.grid.n},)")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)
        if self.normalized:
            nrm = float(np.sum(np.abs(amps) ** 2))
            if abs(nrm - 1.0) > NORM_TOL:
                raise StateError(f"state flagged normalized but sum |amp|^2 = {nrm!r}")

    def image(self) -> np.ndarray:
        """Amplitudes as an ``(ny, nx)`` array (a read-only view)."""
        return self.amps.reshape(self.grid.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise StateError("cannot normalize the zero state")
        return StateVector(self.grid, self.amps / nrm, normalized=True)


@dataclass(frozen=True)
class PostSelector:
    """Overlap of a state with the uniform zero-frequency analyzer row.

    ``phi0`` is the complex amplitude retained by the momentum
    post-selection; after global-phase fixing it is real and positive.
    """

    phi0: complex

    @property
    def probability(self) -> float:
        """Post-selection success probability ``|phi0|**2``."""
        return abs(self.phi0) ** 2


def gaussian_state(grid: Grid2D, waist: float,
                   defocus: float = 0.05, astig: float = 0.02) -> StateVector:
    """Synthesize a normalized Gaussian beam with a polynomial aberration.

    The amplitude is ``exp(-(x^2+y^2)/waist^2)`` on grid-centered pixel
    coordinates and the phase is ``defocus*(x^2+y^2) + astig*(x^2-y^2)``
    in radians (coefficients in rad/px^2). ``waist = math.inf`` gives a
    flat amplitude.

    Parameters
    ----------
    grid : Grid2D
    waist : float
        1/e amplitude radius in pixels; must be positive.
    defocus, astig : float
        Quadratic phase coefficients. Nonzero values make the state
        genuinely complex, mimicking a displaced collimation lens.
    """
    if not waist > 0:
        raise StateError(f"waist must be positive, got {waist}")
    x, y = grid.centered_coords()
    r2 = x * x + y * y
    if math.isinf(waist):
        amp = np.ones_like(r2)
    else:
        amp = np.exp(-r2 / (waist * waist))
    phase = defocus * r2 + astig * (x * x - y * y)
    psi = amp * np.exp(1j * phase)
    psi = psi.ravel()
    return StateVector(grid, psi / np.linalg.norm(psi), normalized=True)


def phase_mask_state(grid: Grid2D, mask: np.ndarray, jump: float,
                     waist: float = math.inf) -> StateVector:
    """Gaussian-amplitude state with a binary phase mask imprinted on it.

    Pixels where ``mask`` is 1 acquire the extra phase ``jump`` (radians).
    The default infinite waist gives a flat illumination.
    """
    mask = np.asarray(mask)
    if mask.shape == grid.shape:
        mask_flat = mask.ravel()
    elif mask.shape == (grid.n,):
        mask_flat = mask
    else:
        raise StateError(
            f"mask shape {mask.shape} does not match grid {grid.ny}x{grid.nx}")
    base = gaussian_state(grid, waist, defocus=0.0, astig=0.0)
    psi = base.amps * np.exp(1j * jump * mask_flat.astype(float))
    return StateVector(grid, psi / np.linalg.norm(psi), normalized=True)


def dft2(state: StateVector) -> StateVector:
    """Unitary 2-D DFT of a state (forward, factor ``1/sqrt(N)``)."""
    ft = np.fft.fft2(state.image()) / math.sqrt(state.grid.n)
    return StateVector(state.grid, ft.ravel(), normalized=state.normalized)


def idft2(state: StateVector) -> StateVector:
    """Inverse of :func:`dft2`; round-trips to 1e-12."""
    ft = np.fft.ifft2(state.image()) * math.sqrt(state.grid.n)
    return StateVector(state.grid, ft.ravel(), normalized=state.normalized)


def zero_frequency_overlap(state: StateVector) -> PostSelector:
    """Overlap ``phi0 = sum_j psi_j / sqrt(N)`` with the uniform row.

    This equals the ``(0, 0)`` component of the unitary 2-D DFT and is the
    amplitude kept by post-selecting on the zero-momentum state.
    """
    phi0 = complex(np.sum(state.amps) / math.sqrt(state.grid.n))
    return PostSelector(phi0)


def fix_global_phase(state: StateVector, tol: float = 0.0) -> StateVector:
    """Rotate the global phase so the zero-frequency overlap is real > 0.

    Raises :class:`StateError` when ``|phi0| <= tol`` (the state is then
    orthogonal to the analyzer row and post-selection never succeeds).
    """
    phi0 = zero_frequency_overlap(state).phi0
    if abs(phi0) <= tol or phi0 == 0:
        raise StateError("zero-frequency overlap vanishes; global phase undefined")
    # roundoff-level residual phase counts as fixed (keeps this idempotent)
    if phi0.real > 0 and abs(phi0.imag) <= 1e-12 * phi0.real:
        return state
    rot = np.exp(-1j * np.angle(phi0))
    return StateVector(state.grid, state.amps * rot, normalized=state.normalized)


def fidelity(a: StateVector, b: StateVector) -> float:
    """Magnitude of the overlap ``|<a|b>|`` between unit-normalized states.

    States not flagged normalized are normalized internally. The result is
    symmetric, lies in [0, 1] and ignores global phases on either input.
    """
    if a.grid != b.grid:
        raise StateError(f"grid mismatch: {a.grid} vs {b.grid}")
    va = a.amps if a.normalized else a.normalize().amps
    vb = b.amps if b.normalized else b.normalize().amps
    return min(1.0, float(abs(np.vdot(va, vb))))
