"""Data-driven adaptive second-order sliding mode control toolkit."""

from .data import (
    DataSet,
    ExperimentConfig,
    NoiseBound,
    collect,
    forward_difference,
    noise_bound_uniform,
    rank_check,
    verify_noise_energy,
)
from .design import (
    DesignProblem,
    DesignSolution,
    SlidingVariableSpec,
    assemble_lmi,
    build_G,
    classical_design,
    sliding_variable,
    solve_design,
    verify_certificate,
)
from .errors import (
    AssosmError,
    CollectionError,
    ConfigurationError,
    DesignInfeasibleError,
    DivergenceError,
    RankError,
    UsageError,
)
from .harness import (
    ControllerParams,
    ExperimentSpec,
    RunResult,
    benchmark_spec,
    bound_report,
    metrics,
    reproduce,
    run_pipeline,
    simulate_closed_loop,
)
from .plant import (
    DisturbanceSignal,
    PlantModel,
    Trajectory,
    benchmark_plant,
    growth_diagnostic,
    integrate,
    plant_derivative,
)
from .sosm import (
    AdaptiveGainState,
    DifferentiatorState,
    SosmState,
    adaptive_gain_step,
    aux_oracle_eval,
    control_step,
    differentiator_step,
    extremum_detect,
)

__version__ = "0.1.0"
