"""Wavefunction recovery from mask measurements.

Two routes: the minimum-norm least-squares interpolant (conjugate
gradients on the m x m Gram system) and total-variation-regularized
least squares,

    minimize  sum_j ||(grad psi)_j||  +  (mu / 2) ||Q psi - phi||_2^2,

solved by an augmented-Lagrangian alternating-direction scheme with
variable splitting d = grad(psi): isotropic complex shrinkage on d,
a warm-started CG solve for the quadratic psi subproblem, and a dual
update, with multiplicative continuation on the splitting penalty beta.
All operators are applied matrix-free from the bit-packed mask rows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .linop import MaskOperator
from .masks import SensingMatrix
from .simulate import MeasurementRecord
from .states import Grid2D, StateVector, fix_global_phase, zero_frequency_overlap

__all__ = [
    "TvParams",
    "GradientField",
    "SolveReport",
    "RecoveryError",
    "grad2d",
    "div2d",
    "complex_shrink",
    "tv_norm",
    "pinv_recover",
    "tv_admm_recover",
    "mutual_coherence",
]


class RecoveryError(RuntimeError):
    """Raised when a solver cannot produce a usable solution."""


@dataclass(frozen=True)
class TvParams:
    """Tuning knobs of the TV solver.

    ``mu`` weighs data fidelity against total variation; ``None``
    selects the scale-adaptive default ``2**8 * m / ||phi||_1``. The
    splitting penalty starts at ``beta`` and is multiplied by
    ``continuation`` each outer iteration up to ``beta_max``.
    """

    mu: float | None = None
    beta: float = 1.0
    beta_max: float = float(2 ** 16)
    continuation: float = 2.0
    tol: float = 1e-6
    max_outer: int = 300
    cg_tol: float = 1e-8
    cg_max: int = 200

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive")
        if not (self.beta > 0 and self.beta_max >= self.beta):
            raise ValueError("need 0 < beta <= beta_max")
        if not self.continuation >= 1.0:
            raise ValueError("continuation factor must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass(frozen=True)
class GradientField:
    """Forward differences of a state along x and y (flat, row-major)."""

    grid: Grid2D
    gx: np.ndarray
    gy: np.ndarray

    def magnitude(self) -> np.ndarray:
        """Per-pixel isotropic gradient magnitude."""
        return np.sqrt(np.abs(self.gx) ** 2 + np.abs(self.gy) ** 2)


@dataclass
class SolveReport:
    """What a solver did: iterations, objective trace, convergence."""

    solver: str
    iterations: int
    objective: float
    residual: float
    trace: list[float] = field(default_factory=list)
    converged: bool = False
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "iterations": self.iterations,
            "objective": self.objective,
            "residual": self.residual,
            "trace": list(self.trace),
            "converged": self.converged,
            "degenerate": self.degenerate,
        }


# -- discrete gradient pair -------------------------------------------------

def _grad_image(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences with replicate boundary (zero at far edge)."""
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, :-1] = img[:, 1:] - img[:, :-1]
    gy[:-1, :] = img[1:, :] - img[:-1, :]
    return gx, gy


def _div_image(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`_grad_image` (negative discrete divergence)."""
    out = np.zeros_like(gx)
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out


def grad2d(state: StateVector) -> GradientField:
    """Discrete gradient of a state (forward differences, Neumann edge).

    The last column of the x component and last row of the y component
    are zero, so constant states have identically zero gradient.
    """
    img = state.image()
    gx, gy = _grad_image(img)
    return GradientField(state.grid, gx.ravel(), gy.ravel())


def div2d(gradient: GradientField) -> np.ndarray:
    """Adjoint of :func:`grad2d`: <grad2d(psi), g> == <psi, div2d(g)>."""
    shape = gradient.grid.shape
    out = _div_image(gradient.gx.reshape(shape), gradient.gy.reshape(shape))
    return out.ravel()


def complex_shrink(gx: np.ndarray, gy: np.ndarray,
                   t: float) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic shrinkage of the complex gradient 2-vector per pixel.

    With ``r = sqrt(|gx|^2 + |gy|^2)`` both components are scaled by
    ``max(1 - t / r, 0)`` (zero where ``r = 0``); this is the proximal
    step of the isotropic TV term at threshold ``t``.
    """
    if t < 0:
        raise ValueError("shrink threshold must be >= 0")
    if t == 0:
        return gx.copy(), gy.copy()
    r = np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2)
    scale = np.zeros_like(r)
    np.divide(r - t, r, out=scale, where=r > t)
    return gx * scale, gy * scale


def tv_norm(img: np.ndarray) -> float:
    """Isotropic total variation: sum of per-pixel gradient magnitudes."""
    gx, gy = _grad_image(img)
    return float(np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2).sum())


# -- conjugate gradients ----------------------------------------------------

def _cg(apply_op, b: np.ndarray, x0: np.ndarray | None, tol: float,
        maxiter: int) -> tuple[np.ndarray, int, float, list[float]]:
    """CG for a Hermitian positive definite operator; returns the residual trace."""
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0, [0.0]
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.astype(np.complex128, copy=True)
        r = b - apply_op(x)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    trace = [math.sqrt(rs) / bnorm]
    it = 0
    for it in range(1, maxiter + 1):
        ap = apply_op(p)
        denom = float(np.vdot(p, ap).real)
        if denom <= 0.0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.vdot(r, r).real)
        trace.append(math.sqrt(rs_new) / bnorm)
        if math.sqrt(rs_new) <= tol * bnorm:
            rs = rs_new
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, it, trace[-1], trace


def _valid_subsystem(record: MeasurementRecord) -> tuple[SensingMatrix, np.ndarray]:
    """Drop rows flagged invalid by the simulator from the data term."""
    valid = record.valid_mask()
    if valid.all():
        return record.matrix, record.phi
    if not valid.any():
        raise RecoveryError("every measurement row is flagged invalid")
    sub = SensingMatrix(record.matrix.packed[valid], n=record.matrix.n,
                        density=record.matrix.density, seed=record.matrix.seed)
    return sub, record.phi[valid]


def _finish(amps: np.ndarray, grid: Grid2D, normalize: bool) -> StateVector:
    state = StateVector(grid, amps)
    if not normalize:
        return state
    state = state.normalize()
    if abs(zero_frequency_overlap(state).phi0) == 0.0:
        return state
    return fix_global_phase(state)


# -- minimum-norm least squares --------------------------------------------

def pinv_recover(record: MeasurementRecord, normalize: bool = True,
                 cg_tol: float = 1e-12, cg_max: int | None = None,
                 ) -> tuple[StateVector, SolveReport]:
    """Minimum-norm interpolant ``psi = Q^T (Q Q^T)^{-1} phi``.

    The m x m Gram system is solved matrix-free by conjugate gradients
    with a Tikhonov jitter ``1e-10 * trace(Q Q^T) / m`` guarding rank
    deficiency. For ``m = n`` with invertible Q this is the exact
    solution. The result is renormalized and phase-fixed unless
    ``normalize=False`` (degenerate zero solutions are returned as-is).
    """
    matrix, phi = _valid_subsystem(record)
    op = MaskOperator(matrix)
    if op.row_popcounts().max() == 0:
        raise RecoveryError("sensing matrix has no nonzero row")
    m = matrix.m
    jitter = 1e-10 * op.gram_trace() / m

    def gram(y):
        return op.gram_matvec(y) + jitter * y

    maxiter = cg_max if cg_max is not None else 2 * m + 100
    y, iters, relres, trace = _cg(gram, phi, None, cg_tol, maxiter)
    if relres > 1e-6:
        rank = int(np.linalg.matrix_rank(_dense_gram(op)))
        raise RecoveryError(
            f"Gram system numerically singular beyond jitter rescue: "
            f"CG residual {relres:.2e}, rank estimate {rank} < m = {m}")
    # refine against the unjittered Gram operator: iterated Tikhonov
    # removes the jitter bias (the null-space part of y never reaches
    # psi because Q^T annihilates it). An inconsistent phi leaves a
    # residual floor; stop when it no longer shrinks.
    phinorm = float(np.linalg.norm(phi))
    prev = math.inf
    for _ in range(3):
        resid = phi - op.gram_matvec(y)
        floor = float(np.linalg.norm(resid)) / phinorm
        if floor <= cg_tol or floor > 0.5 * prev:
            break
        prev = floor
        dy, extra, _, dtrace = _cg(gram, resid, None, cg_tol, maxiter)
        y += dy
        iters += extra
        trace.extend(dtrace)
    amps = op.rmatvec(y)
    residual = float(np.linalg.norm(op.matvec(amps) - phi))
    report = SolveReport("pinv", iters, residual, residual, trace,
                         converged=relres <= cg_tol)
    if float(np.linalg.norm(amps)) == 0.0:
        report.degenerate = True
        return StateVector(record.grid, amps), report
    return _finish(amps, record.grid, normalize), report


def _dense_gram(op: MaskOperator) -> np.ndarray:
    dense = op.matrix.to_dense().astype(np.float64)
    return dense @ dense.T


# -- total-variation recovery ----------------------------------------------

def tv_admm_recover(record: MeasurementRecord, params: TvParams | None = None,
                    normalize: bool = True) -> tuple[StateVector, SolveReport]:
    """TV-regularized recovery by augmented-Lagrangian alternating direction.

    Each outer iteration shrinks the split gradient, solves the normal
    system ``(mu Q^T Q + beta div grad) psi = mu Q^T phi + beta div(d + u)``
    by warm-started CG, and updates the scaled dual ``u``; ``beta`` then
    advances on the continuation schedule. Stops when the relative
    iterate change drops below ``tol`` with ``beta`` at its cap, or at
    ``max_outer``. Raises :class:`RecoveryError` when the objective
    increases for 10 consecutive iterations (advice: reduce the
    continuation factor).
    """
    params = params or TvParams()
    matrix, phi = _valid_subsystem(record)
    grid = record.grid
    shape = grid.shape
    op = MaskOperator(matrix)

    phinorm1 = float(np.abs(phi).sum())
    if phinorm1 == 0.0:
        report = SolveReport("tv_admm", 0, 0.0, 0.0, [],
                             converged=True, degenerate=True)
        return StateVector(grid, np.zeros(grid.n, dtype=np.complex128)), report
    mu = params.mu if params.mu is not None else float(2 ** 8) * matrix.m / phinorm1

    qt_phi = op.rmatvec(phi)
    psi = _initial_guess(op, phi, qt_phi).reshape(shape)
    beta = params.beta
    beta_cap = params.beta if params.continuation == 1.0 else params.beta_max

    def normal_apply(flat: np.ndarray) -> np.ndarray:
        img = flat.reshape(shape)
        out = mu * op.normal_matvec(flat).reshape(shape)
        out += beta * _div_image(*_grad_image(img))
        return out.ravel()

    ux = np.zeros(shape, dtype=np.complex128)
    uy = np.zeros_like(ux)
    trace: list[float] = []
    bad_streak = 0
    prev_obj = math.inf
    converged = False
    iters = 0

    for iters in range(1, params.max_outer + 1):
        gx, gy = _grad_image(psi)
        dx, dy = complex_shrink(gx - ux, gy - uy, 1.0 / beta)
        rhs = mu * qt_phi + beta * _div_image(dx + ux, dy + uy).ravel()
        flat, _, _, _ = _cg(normal_apply, rhs, psi.ravel(), params.cg_tol,
                            params.cg_max)
        psi_new = flat.reshape(shape)
        gx, gy = _grad_image(psi_new)
        ux += dx - gx
        uy += dy - gy

        resid = float(np.linalg.norm(op.matvec(flat) - phi))
        obj = float(np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2).sum()
                    + 0.5 * mu * resid ** 2)
        trace.append(obj)
        # roundoff-level wiggle is not an increase
        if obj > prev_obj * (1.0 + 1e-10):
            bad_streak += 1
            if bad_streak >= 10:
                raise RecoveryError(
                    "TV objective increased for 10 consecutive iterations; "
                    "try a smaller continuation factor")
        else:
            bad_streak = 0
        prev_obj = obj

        denom = float(np.linalg.norm(psi_new))
        relchg = float(np.linalg.norm(psi_new - psi)) / max(denom, 1e-300)
        psi = psi_new
        if relchg < params.tol and beta >= beta_cap:
            converged = True
            break
        if beta < beta_cap:
            new_beta = min(beta * params.continuation, beta_cap)
            # keep the unscaled multiplier lambda = beta * u continuous
            ux *= beta / new_beta
            uy *= beta / new_beta
            beta = new_beta

    amps = psi.ravel()
    resid = float(np.linalg.norm(op.matvec(amps) - phi))
    report = SolveReport("tv_admm", iters, trace[-1], resid, trace, converged)
    if float(np.linalg.norm(amps)) == 0.0:
        report.degenerate = True
        return StateVector(grid, amps), report
    return _finish(amps, grid, normalize), report


def _initial_guess(op: MaskOperator, phi: np.ndarray,
                   qt_phi: np.ndarray) -> np.ndarray:
    """Back-projection rescaled for least-squares optimal data fit."""
    q_bp = op.matvec(qt_phi)
    denom = float(np.vdot(q_bp, q_bp).real)
    if denom == 0.0:
        return np.zeros_like(qt_phi)
    return qt_phi * (np.vdot(q_bp, phi) / denom)


# -- coherence diagnostic ----------------------------------------------------

TRANSFORMS = ("identity", "gradient-frame", "dft")


def mutual_coherence(masks: SensingMatrix, transform: str,
                     grid: Grid2D | None = None) -> float:
    """Coherence between sensing rows and a transform basis.

    Returns ``sqrt(N)`` times the largest magnitude of a normalized
    inner product between any sensing row and any transform basis
    element. For orthonormal transforms (identity, dft) the value lies
    in ``[1, sqrt(N)]``; low values indicate a mask set suited to
    few-measurement recovery. All-zero sensing rows are skipped with a
    warning; zero basis elements of the gradient frame (far edges) are
    skipped silently.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}")
    n = masks.n
    dense = masks.to_dense().astype(np.float64)
    norms = np.sqrt(dense.sum(axis=1))
    dead = norms == 0.0
    if dead.any():
        warnings.warn(f"skipping {int(dead.sum())} all-zero sensing row(s) "
                      "in coherence diagnostic", stacklevel=2)
        dense = dense[~dead]
        norms = norms[~dead]
        if dense.shape[0] == 0:
            raise RecoveryError("no nonzero sensing rows")
    rows = dense / norms[:, None]

    if transform == "identity":
        best = float(np.abs(rows).max())
    elif transform == "dft":
        if grid is None or grid.n != n:
            raise ValueError("dft coherence needs the matching Grid2D")
        spectra = np.fft.fft2(rows.reshape(-1, *grid.shape)) / math.sqrt(n)
        best = float(np.abs(spectra).max())
    else:
        if grid is None or grid.n != n:
            raise ValueError("gradient-frame coherence needs the matching Grid2D")
        best = 0.0
        for row in rows:
            gx, gy = _grad_image(row.reshape(grid.shape))
            # each frame element is (e_next - e_j)/sqrt(2); far-edge
            # elements are identically zero and carry no information
            best = max(best,
                       float(np.abs(gx[:, :-1]).max(initial=0.0)) / math.sqrt(2),
                       float(np.abs(gy[:-1, :]).max(initial=0.0)) / math.sqrt(2))
    return math.sqrt(n) * best
