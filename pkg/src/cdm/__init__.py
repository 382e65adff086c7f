"""Compressive direct measurement: simulate weak measurements of random
mask projectors on a 2-D complex wavefunction and reconstruct the state
by minimum-norm least squares or total-variation minimization."""

from ._kernels import BACKEND as kernel_backend
from .baseline import RasterPlan, partial_raster_recover, raster_dm
from .harness import (
    FidelityCurve,
    StateSpec,
    SweepConfig,
    emit_report,
    run_reconstruction,
    run_sweep,
)
from .io import load_record, load_state, save_record, save_state
from .masks import SensingMatrix, generate_masks, identity_masks, masks_from_rows
from .recovery import (
    SolveReport,
    TvParams,
    complex_shrink,
    div2d,
    grad2d,
    mutual_coherence,
    pinv_recover,
    tv_admm_recover,
)
from .simulate import (
    DetectorCounts,
    MeasurementRecord,
    PointerState,
    postselected_pointer,
    simulate_analytic,
    simulate_counts,
    simulate_exact,
    speedup_estimate,
)
from .states import (
    Grid2D,
    PostSelector,
    StateVector,
    dft2,
    fidelity,
    fix_global_phase,
    gaussian_state,
    idft2,
    phase_mask_state,
    zero_frequency_overlap,
)

__version__ = "0.1.0"
