"""Universal dilation of finite-state Markov chains and its quantum extension."""

from .dynamics import (
    Coupling,
    Dynamics,
    EnvSymbol,
    WindowedGlobalState,
    build_coupling,
    cocycle_map,
    example2_coupling,
    step,
    step_inverse,
    trajectory,
)
from .markov import (
    Decomposition,
    DeterministicMap,
    LabelSet,
    MatrixSequence,
    StateSpace,
    StochasticMatrix,
    apply_to_observable,
    canonical_decomposition,
    evolution_product,
    recompose,
    sparse_decomposition,
    validate_stochastic,
)
from .sample_space import (
    DilationMeasure,
    SymbolLaw,
    build_measure,
    exact_state_distribution,
    flow_equation_check,
    simulate,
    verify_markov_property,
)

__version__ = "0.1.0"
