"""Monte-Carlo model of the random-coding embedding scheme."""

from .coding import (
    EVENTS,
    Codebooks,
    SchemeLaws,
    SimulationConfig,
    SimulationReport,
    attack,
    build_codebooks,
    ceil_pow2,
    code_sizes,
    decide,
    decode,
    estimate_a,
    estimate_b,
    pre_encode,
    run_trials,
    stego,
    typical_message_pairs,
)
from .typicality import (
    TypicalityParams,
    conditional_nonempty,
    count_bounds,
    enumerate_typical,
    is_typical,
    sample_typical,
    sample_typical_codes,
    typical_mask,
    typical_set_nonempty,
    typicality_frequency,
)

__all__ = [name for name in dir() if not name.startswith("_")]
