"""Sequential causal Stackelberg games: models, solvers, experiments."""

from .errors import (
    ActionSpaceTooLarge,
    CapExceeded,
    CyclicAfterIntervention,
    InvalidParams,
    NoPureEquilibrium,
    ParseError,
    ScmasError,
    TooLarge,
    TypeMismatch,
    TypeSetTooSmall,
    UnknownName,
    UnknownVariable,
    UnsupportedAlternation,
)
from .game import (
    FollowerPolicy,
    InformationStructure,
    LayeredStrategy,
    MixedResponse,
    Observation,
    ScmasGame,
    expected_payoffs,
    game_from_dict,
    game_to_dict,
    observe,
    validate,
)
from .generators import (
    GeneratorParams,
    procurement,
    random_instance,
    synthetic,
)
from .qbf import (
    Qbf,
    brute_force_qbf,
    emit_qdimacs,
    parse_qdimacs,
    reduce_to_scmas,
    verify_reduction,
)
from .scm import (
    EndogenousVar,
    ExogenousVar,
    Scm,
    StructuralEquation,
    enumerate_exogenous,
    evaluate,
    natural_instinct,
    sample_exogenous,
)
from .solvers import (
    EquilibriumProfile,
    SolveMethod,
    approx_scne,
    classical_stackelberg,
    exact_scne,
    follower_best_response,
    forward_induction_filter,
    satisficing_scne,
    trembling_hand_check,
)
from .experiments import (
    ExperimentReport,
    InstanceResult,
    bench_scaling,
    classify_signaling,
    run_monte_carlo,
    run_procurement,
    run_synthetic_suite,
    uniform_equilibrium_welfare,
)

__all__ = [name for name in dir() if not name.startswith("_")]
