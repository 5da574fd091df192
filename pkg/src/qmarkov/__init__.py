"""Process tensors, instrument-specific quantum Markov order and conditional mutual information."""

from .classical_process import (
    BlockPartition,
    JointDistribution,
    NotMarkovError,
    ZeroProbabilityError,
    classical_cmi,
    classical_markov_order,
    recovery_map,
)
from .markov_order import (
    appendix_d_process,
    appendix_d_state,
    cmi_nonmonotonicity_demo,
    conditional_decomposition,
    has_markov_order,
    quantum_cmi,
    theorem2_witness,
)
from .process_tensor import (
    ProcessTensor,
    born_probability,
    condition,
    embed_classical,
    markovian_process,
    validate,
)
from .quantum_maps import (
    CpMap,
    Instrument,
    InstrumentSequence,
    InvalidInstrumentError,
    dual_set,
    mix_instrument,
    sequence_from_instruments,
    validate_instrument,
)
from .tensor_core import (
    FactorError,
    FactorLabel,
    LabeledOperator,
    NotDensityError,
    NotHermitianError,
    kron,
    partial_trace,
    permute_factors,
    von_neumann_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "CpMap",
    "FactorError",
    "FactorLabel",
    "Instrument",
    "InstrumentSequence",
    "InvalidInstrumentError",
    "JointDistribution",
    "LabeledOperator",
    "NotDensityError",
    "NotHermitianError",
    "NotMarkovError",
    "ProcessTensor",
    "ZeroProbabilityError",
    "appendix_d_process",
    "appendix_d_state",
    "born_probability",
    "classical_cmi",
    "classical_markov_order",
    "cmi_nonmonotonicity_demo",
    "condition",
    "conditional_decomposition",
    "dual_set",
    "embed_classical",
    "has_markov_order",
    "kron",
    "markovian_process",
    "mix_instrument",
    "partial_trace",
    "permute_factors",
    "quantum_cmi",
    "recovery_map",
    "sequence_from_instruments",
    "theorem2_witness",
    "validate",
    "validate_instrument",
    "von_neumann_entropy",
]
