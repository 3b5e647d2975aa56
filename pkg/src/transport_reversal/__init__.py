"""Transport reversal for snapshot matrices of hyperbolic problems.

Shift snapshots back along their transport paths so that a truncated SVD
of the aligned data captures them with few modes.
"""

import os as _os

# cap BLAS threads before numpy loads; 0 or unset leaves the library default
_threads = _os.environ.get("TRANSPORT_REVERSAL_THREADS", "").strip()
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .core import (  # noqa: E402
    ConstantVectorError,
    GridField,
    RealShift,
    SnapshotMatrix,
    discrete_laplacian,
    second_difference,
    shift_fractional,
    shift_integer,
    shift_real,
    shift_real_adjoint,
    transport_columns,
    transport_pivot,
    wrap_shift,
)
from .greedy import (  # noqa: E402
    PivotStrategy,
    ReversalConfig,
    ReversalModel,
    adaptive_lambda,
    find_shift,
    greedy_reversal,
    reconstruct,
)
from .pod import SvdReduction, energy_rank, l2_error, reduce  # noqa: E402
from .real import (  # noqa: E402
    best_real_shift,
    candidate_set,
    detect_period,
    forward_real,
    optimal_fraction,
    recursion_step,
    reverse_real,
    sharpen,
    sharpened_reconstruct,
)
from .solvers import (  # noqa: E402
    CFLError,
    InitialCondition,
    Problem,
    ProblemSpec,
    characteristic_snapshots,
    snapshot_at_chebyshev_times,
    solve,
)
from .varspeed import (  # noqa: E402
    PivotMap,
    VelocityField,
    apply_variable_shift,
    build_pivot_map,
    characteristic_compose,
    characteristic_decompose,
    integrate_trajectories,
    reverse_varspeed,
    weighted_mass,
)

__version__ = "0.1.0"
