"""Power-divergence goodness-of-fit statistics and their Bahadur efficiencies."""

from .alternatives import (
    check_assumptions,
    contiguity_diagnostic,
    delta_geometric,
    delta_half_support,
    half_support_alternative,
    truncated_geometric,
)
from .bahadur import (
    BahadurContext,
    SequenceForm,
    bahadur_efficiency,
    bahadur_function,
    check_rate_conditions,
    efficiency_ratio_closed_form,
    empirical_slope,
    generating_sequence,
    matching_sample_size,
    ratio_limit_probe,
    sanov_sandwich,
)
from .divergence import (
    bhattacharyya,
    classic_statistic,
    increment_bounds,
    power_divergence,
    power_from_renyi,
    power_function,
    power_function_derivative,
    renyi_divergence,
    renyi_from_power,
    scaled_statistic,
    uniform,
)
from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    IndeterminateFormError,
    InfeasibleError,
    TailUnderflowError,
)
from .projection import ProjectionResult, mixture_construction, numeric_projection
from .sampling import Seed, empirical, sample_counts, simulate_counts, simulate_statistics
from .tails import TailEstimate, count_types, enumerate_types, exact_tail, mc_tail

__version__ = "0.1.0"
