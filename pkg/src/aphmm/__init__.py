"""Profile-HMM training and inference with an accelerator performance model.

The engine runs the full expectation-maximization training loop (forward,
backward, parameter updates) over profile-HMM graphs in two interchangeable
paths: an optimized path with histogram state filtering, memoized
transition*emission products, and a two-row backward buffer consumed on the
fly, and a dense naive oracle for verification.  Application pipelines cover
assembly error correction, protein family search, and multiple sequence
alignment; an analytical model estimates accelerator cycles and speedup
trends for hardware configurations.
"""

from .alphabet import DNA, PROTEIN, Alphabet
from .apps import (
    AlignmentRow,
    CorrectionOptions,
    ReadMapping,
    SearchHit,
    align_viterbi,
    correct,
    family_search,
    msa_align,
    viterbi_decode,
)
from .engine import (
    BackwardBuffer,
    Counters,
    EmissionAccumulator,
    ForwardMatrix,
    NaiveResult,
    ProductTable,
    Step,
    TrainOptions,
    TransitionAccumulator,
    Workspace,
    accumulate_updates,
    backward_init,
    backward_step,
    finalize_updates,
    forward,
    lut_build,
    lut_get,
    naive_reference,
    score,
    train_single,
)
from .errors import (
    AccumulatorStateMissing,
    AlphabetMismatch,
    AphmmError,
    EmptySequence,
    InstanceTooLarge,
    MappingOutOfBounds,
    NoPathError,
    ParseError,
    SequencePositionOutOfRange,
    UnknownParameter,
    UnknownSymbol,
    ValueOutOfRange,
)
from .filtering import FilterConfig, HistogramFilter, SortFilter
from .model import (
    ERROR_CORRECTION,
    TRADITIONAL,
    Diagnostic,
    PhmmGraph,
    PriorConfig,
    StateKind,
    build_error_correction,
    build_traditional,
    deserialize,
    serialize,
    validate,
)
from .perf import (
    ACCELERATED_FRACTIONS,
    OPTIMIZATION_SPEEDUPS,
    OVERALL_OPTIMIZATION_SPEEDUP,
    AcceleratorConfig,
    PerfReport,
    WorkloadProfile,
    amdahl,
    compose_speedups,
    estimate,
    sweep,
    workload_for_chunk,
)
from .seqio import FastaRecord, parse_fasta, parse_mappings, read_fasta, read_mappings, write_fasta

__version__ = "0.1.0"
