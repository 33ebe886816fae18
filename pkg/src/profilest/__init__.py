"""Pattern maximum likelihood: the distribution that makes an observed pattern most likely."""

from ._backend import BACKEND
from .bounds import (
    BoundsReport,
    bounds_report,
    continuous_mass_cap,
    corollary_flags,
    distinct_values_cap,
    is_discrete_forced,
    support_lower_bound,
    support_upper_bound,
)
from .errors import (
    InfeasibleError,
    InternalError,
    InvalidDistributionError,
    InvalidInputError,
    NotApplicableError,
    ProfilestError,
    ResourceLimitError,
    UnboundedSearchError,
)
from .estimators import (
    AlphaVector,
    convergence_experiment,
    entropy,
    expected_new_symbols,
    kl_divergence,
    l1_distance,
    ml_distribution,
)
from .patterns import (
    Pattern,
    Profile,
    canonical_pattern,
    enumerate_patterns,
    enumerate_profiles,
    is_trivial,
    pattern_of,
    profile_of,
    profile_of_sequence,
)
from .pml_em import EmConfig, ProbabilityEstimate, em_pml, em_probability_estimate
from .pml_exact import (
    PmlMethod,
    PmlResult,
    SearchConfig,
    pml,
    pml_binary,
    pml_search,
    pml_trivial,
    pml_uniform_profile,
    pml_uniform_ratio_limit,
    uniform_profile_k,
)
from .probability import (
    Distribution,
    PatternProbability,
    ProbMethod,
    pattern_distribution_oracle,
    pattern_prob,
    pattern_prob_oracle,
    pattern_prob_profile,
    pattern_prob_uniform,
)

__version__ = "0.1.0"
