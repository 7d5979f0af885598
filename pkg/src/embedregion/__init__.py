"""Inner/outer bounds and random-coding simulation for two-user public
information embedding under a multiple-access attack channel."""

from .errors import *  # noqa: F401,F403
from .probcore import (
    CANONICAL_AXES,
    ConditionalPMF,
    EmbeddingProblem,
    EncoderPolicy,
    FiniteAlphabet,
    JointPMF,
    JointPolicy,
    alphabet,
    compose_inner,
    compose_outer,
    conditional,
    entropy,
    expected_distortion,
    make_conditional,
    make_pmf,
    marginal,
    mutual_information,
)
from .region import (
    RateRegion,
    RateTriple,
    contains,
    feasible,
    hull_union,
    pentagon,
    rate_triple_general,
    rate_triple_independent,
)
from .search import (
    CardinalityCaps,
    RegionReport,
    SearchStrategy,
    compute_inner_region,
    compute_outer_subset,
    grid_policies,
    refine,
    sample_policy,
)

__version__ = "0.1.0"
