"""Three-stage t-tests of separated one-sided hypotheses about a normal mean
with unknown variance, with a fully-sequential GLR baseline and a Monte Carlo
engine for operating characteristics."""

from .core_stats import (
    HypothesisSpec,
    ParameterBox,
    SampleAccumulator,
    glr_stat,
    kl_info,
    push,
)
from .design import (
    DesignInputs,
    TestDesign,
    make_design,
    min_surface,
    rho,
    solve_mu2,
    surface,
)
from .estimator import ThreeStageTTest
from .exceptions import (
    DegenerateDataError,
    DegenerateSampleError,
    DomainError,
    InputError,
    InsufficientDataError,
    ThreeStageError,
)
from .procedures import (
    Decision,
    Stage,
    TestOutcome,
    check_reject_h0,
    check_reject_h1,
    run_fixed_sample,
    run_fully_sequential,
    run_three_stage,
    second_stage_size,
)
from .simulation import (
    ReplicationPlan,
    SimulationReport,
    TruthPoint,
    hoeffding_lower_bound,
    lemma21_event_rate,
    monte_carlo,
    normal_stream,
    oracle_sample_size,
)
from .sources import ArraySource, FileSource, NormalStream

__version__ = "0.1.0"
