"""Multi-round LOCC protocols on three-qubit W-class states.

The package splits into layers: `states` holds the canonical coordinate
algebra, `entanglement` the pairwise measures, `measurement` the local
operations, `protocol` the tree description language, `engine` the
executors and protocol families, and `analysis` the verification and
classification tools.  `cli` wires everything into a command line.
"""

from .states import (
    Party,
    PureState3Q,
    WClassState,
    LocalUnitary,
    NotWClassError,
    embed,
    apply_local_unitary,
    canonicalize,
    three_tangle,
)
from .entanglement import (
    PairLabel,
    SchmidtPair,
    ExtractionError,
    concurrence,
    pair_state_of,
    pair_schmidt,
    concurrence_of_assistance,
    coa_closed_form,
    coa_upper_bound,
    gour_feasible,
    nielsen_feasible,
    bell_conversion_prob,
    schmidt_of_concurrence,
)
from .measurement import (
    KrausOp,
    LocalMeasurement,
    OutcomeBranch,
    MeasurementStep,
    IncompleteMeasurementError,
    MajorizationError,
    weighted_pair,
    projective_z,
    hadamard_step,
    nielsen_conversion,
    assisted_conversion_plan,
    validate,
    apply,
    apply_canonical,
)
from .protocol import (
    HaltLabel,
    Edge,
    MeasureSpec,
    ProtocolNode,
    ProtocolGraph,
    Diagnostic,
    ProtocolError,
    UNBOUNDED,
    parse,
    serialize,
    validate_graph,
    round_count,
)
from .engine import (
    HaltRecord,
    OutcomeDistribution,
    ProtocolParams,
    LiftParams,
    ExecutionError,
    HaltAssertionError,
    run_finite,
    run_truncated,
    run_resummed,
    build_w_distillation,
    build_simple3,
    build_looping,
    build_fortescue_lo,
    build_thm1,
    build_thm2,
    fl_success,
    plan_lift,
    lift,
    FAMILY_BUILDERS,
)
from .analysis import (
    Verdict,
    CheckEntry,
    VerificationReport,
    SweepRow,
    classify,
    verify,
    sweep,
)

__version__ = "0.1.0"
