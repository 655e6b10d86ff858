"""Monte Carlo spin-correlation experiments: singlet, local hidden variable
and conservation-constrained sources, their estimators, and CHSH search."""

from .errors import (
    ConfigurationError,
    DataError,
    EvaluationError,
    InsufficientDataError,
    SpinCorrError,
    ValidationError,
)
from .estimators import (
    AccumulatorState,
    ChshEstimate,
    ConservationAudit,
    CorrelationEstimate,
    chsh,
    chsh_from_events,
    conservation_residual,
    correlation_curve,
    grouped_correlation,
    plain_correlation,
)
from .eventlog import EventFileHeader, accumulate_file, read_events, write_events
from .models import (
    ConditionalKind,
    EventRecord,
    ModelSpec,
    Outcome,
    Setting,
    SpinMagnitude,
    Variant,
    analytic_corr,
    conservation_conditional,
    conservation_joint,
    lhv_linear_corr,
    normalized_corr,
    qm_joint_prob,
    relative_angle,
    sample_conservation_pair,
    sample_lhv_pair,
    sample_qm_pair,
    spin_s_corr,
)
from .optimizer import ChshConfiguration, maximize_chsh, violation_scan
from .simulate import EventBatch, simulate, simulate_angles

__version__ = "0.1.0"
