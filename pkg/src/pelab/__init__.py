"""pelab: adaptive dyadic partitions and coarse multifractal estimators.

Build minimal threshold partitions of the unit cube driven by a monotone
cube function, estimate the growth exponent of their cardinality, solve the
dual budget problem exactly, tabulate level power sums and coarse counts,
and verify the web of inequalities tying these exponents together.
"""

from .adaptive import (
    BSBoundCheck,
    BSTrajectory,
    DualResult,
    DualSweepResult,
    EntropyEstimate,
    GoodPartitionResult,
    PartitionSummary,
    adaptive_partition,
    birman_solomjak,
    brute_force_dual_values,
    brute_force_min_partition,
    bs_bound_check,
    decay_exponent_estimate,
    dual_sweep,
    dual_value,
    entropy_estimate,
    partition_count,
    threshold_summary,
)
from .cubes import (
    CubeId,
    GridScheme,
    Partition,
    PartitionReport,
    children_in_grid,
    classical_grid,
    grid_roots,
    interior_grid,
    is_member,
    predicate_grid,
    unit_cube,
    validate_partition,
)
from .evaluate import Evaluator, SupTruncationWarning, VanishingReport, positive_grid
from .numerics import (
    BudgetError,
    ConfigError,
    GuardError,
    PelabError,
    UnavailableError,
    Value,
    as_value,
)
from .spectra import (
    BoundsReport,
    CheckResult,
    CoarseDimensions,
    CriticalExponents,
    ShiftedTauProfile,
    SpectrumTable,
    bounds_report,
    coarse_count,
    coarse_dimensions,
    critical_exponents,
    format_bounds_report,
    minkowski_estimate,
    nalpha_table,
    q_zero,
    shifted_tau_profile,
    tau_n,
    tau_table,
)
from .specs import (
    DyadicSelfSimilar,
    HomogeneousOscillating,
    MAdicSelfSimilar,
    PowerSpec,
    ProductSpec,
    Schedule,
    Spec,
    VolumeWeight,
    as_rational,
    lebesgue,
    parse_spec,
    spec_to_json,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
