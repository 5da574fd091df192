"""Instrument-specific quantum Markov order.

For a partition of the steps into history H, memory M and future F, and a
tester on M, each outcome x leaves the conditional operator
``Y_FH(x) = tr_M[(O_x^T (x) 1) Y]``. The process has Markov order |M| with
respect to that tester when every ``Y_FH(x)`` is a product F (x) H.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import quantum_maps as qm
from .classical_process import PROB_FLOOR, BlockPartition
from .process_tensor import ProcessTensor
from .tensor_core import (
    FactorError,
    LabeledOperator,
    contract,
    kron,
    partial_trace,
    permute_factors,
    trace_distance,
    trace_norm,
    von_neumann_entropy,
)

TOL_FACTOR = 1e-9


@dataclass
class OutcomeDecomposition:
    label: str
    alpha: float
    probability: float
    joint: LabeledOperator | None = None
    future: LabeledOperator | None = None
    history: LabeledOperator | None = None
    distance: float = 0.0
    skipped: bool = False


@dataclass
class OutcomeRecord:
    label: str
    probability: float
    alpha: float
    distance: float
    skipped: bool = False


@dataclass
class MarkovOrderVerdict:
    instrument: str
    outcomes: list[OutcomeRecord]
    tolerance: float = TOL_FACTOR

    @property
    def holds(self) -> bool:
        return all(o.distance <= self.tolerance for o in self.outcomes if not o.skipped)

    @property
    def max_distance(self) -> float:
        return max((o.distance for o in self.outcomes if not o.skipped), default=0.0)


def _block_names(p: ProcessTensor, partition: BlockPartition):
    if set(p.steps) != set(range(partition.n_steps)):
        raise FactorError(f"partition covers {partition.n_steps} steps, process has steps {p.steps}")
    return (
        p.factor_names(partition.future),
        p.factor_names(partition.memory),
        p.factor_names(partition.history),
    )


def conditional_decomposition(
    p: ProcessTensor,
    partition: BlockPartition,
    j_m: qm.InstrumentSequence,
    floor: float = PROB_FLOOR,
) -> list[OutcomeDecomposition]:
    """Per-outcome conditional future and history processes.

    ``future = (d_F^o / alpha) tr_MH[O Y]`` is a proper process and
    ``history = tr_FM[O Y] / d_F^o``; ``alpha = tr[O Y]``. ``distance`` is the
    trace distance between the normalized conditional ``Y_FH / alpha`` and the
    product of its own normalized marginals. Outcomes whose probability under
    discard-and-reprepare probing of F and H falls below ``floor`` are
    returned with ``skipped=True``.
    """
    f_names, m_names, h_names = _block_names(p, partition)
    if set(j_m.elements[0].names) != set(m_names):
        raise FactorError(f"memory tester acts on {j_m.elements[0].names}, memory block is {m_names}")
    d_f = p.output_dim(partition.future)
    d_h = p.output_dim(partition.history)
    out = []
    for label, element in j_m:
        joint = contract(p.op, element)
        alpha = float(np.real(joint.trace()))
        prob = alpha / (d_f * d_h)
        if prob < floor:
            out.append(OutcomeDecomposition(label, alpha, prob, skipped=True))
            continue
        future = partial_trace(joint, h_names) * (d_f / alpha)
        history = partial_trace(joint, f_names) / d_f
        product = kron(future, history)
        distance = trace_distance(joint / alpha, product / alpha)
        out.append(OutcomeDecomposition(label, alpha, prob, joint, future, history, distance))
    return out


def has_markov_order(
    p: ProcessTensor,
    partition: BlockPartition,
    j_m: qm.InstrumentSequence,
    tol: float = TOL_FACTOR,
) -> MarkovOrderVerdict:
    parts = conditional_decomposition(p, partition, j_m)
    records = [OutcomeRecord(d.label, d.probability, d.alpha, d.distance, d.skipped) for d in parts]
    return MarkovOrderVerdict(j_m.name, records, tol)


def _cmi_from_names(rho: LabeledOperator, f, m, h, log_base: float) -> float:
    def s(keep):
        return von_neumann_entropy(partial_trace(rho, [n for n in rho.names if n not in keep]), log_base)

    f, m, h = set(f), set(m), set(h)
    return s(f | m) + s(m | h) - s(m) - s(f | m | h)


def quantum_cmi(state, partition, log_base: float = 2.0) -> float:
    """I(F:H|M) = S(FM) + S(MH) - S(M) - S(FMH) of a normalized state.

    ``state`` is a ProcessTensor (divided by its trace first) or a density
    operator. ``partition`` is a BlockPartition over step-labeled factors or
    a triple ``(future_names, memory_names, history_names)``.
    """
    if isinstance(state, ProcessTensor):
        rho = state.normalized()
        names = state.op.names
    else:
        rho = state
        names = state.names
    if isinstance(partition, BlockPartition):
        blocks = [
            qm.step_factor_names(names, partition.future),
            qm.step_factor_names(names, partition.memory),
            qm.step_factor_names(names, partition.history),
        ]
    else:
        blocks = [list(b) for b in partition]
    covered = set().union(*map(set, blocks))
    if covered != set(names):
        raise FactorError(f"partition {blocks} does not cover factors {names}")
    return _cmi_from_names(rho, *blocks, log_base)


# -- worked example: tripartite state built from a qubit SIC-POVM ---------------

APPENDIX_D_PARTITION = BlockPartition(history=(0,), memory=(1,), future=(2,))


def appendix_d_local_state(b: int) -> np.ndarray:
    """(3/8) 1 + (1/2) Pi_b for the tetrahedral effect Pi_b (b = 0..3)."""
    return 0.375 * np.eye(2) + 0.5 * qm.tetrahedral_effects()[b]


def appendix_d_state() -> LabeledOperator:
    """rho_ABC = sum_b (1/4) rho_A(b) (x) Delta_B(b) (x) rho_C(b), normalized.

    Factors are ``s0:i`` (A), ``s1:i`` (B), ``s2:i`` (C).
    """
    duals = qm.tetrahedral_duals()
    rho = sum(
        0.25 * np.kron(np.kron(appendix_d_local_state(b), duals[b]), appendix_d_local_state(b))
        for b in range(4)
    )
    rho = rho / np.trace(rho)
    return LabeledOperator.from_dims([qm.step_in(0), qm.step_in(1), qm.step_in(2)], [2, 2, 2], rho)


def appendix_d_process() -> ProcessTensor:
    """rho_ABC on the inputs, identity on the outputs of A and B; C has no output."""
    ident = LabeledOperator.from_dims([qm.step_out(1), qm.step_out(0)], [2, 2], np.eye(4))
    return ProcessTensor(kron(appendix_d_state(), ident))


def on_step(instrument: qm.Instrument, step: int) -> qm.InstrumentSequence:
    return qm.sequence_from_instruments([instrument], [step], instrument.name)


def appendix_d_tetrahedral() -> qm.InstrumentSequence:
    """The SIC-POVM on B, re-preparing the maximally mixed state."""
    return on_step(qm.tetrahedral_instrument(prepare=np.eye(2) / 2), 1)


def appendix_d_sharp() -> qm.InstrumentSequence:
    return on_step(qm.sharp_classical_instrument(2), 1)


# -- the "all instruments" no-go, made concrete --------------------------------


@dataclass
class WitnessReport:
    basis: MarkovOrderVerdict
    mixed: MarkovOrderVerdict
    coeffs: np.ndarray
    reconstruction_error: float
    linearity_error: float
    future_spread: float
    history_spread: float

    @property
    def demonstrates(self) -> bool:
        """Finite order under the basis tester but not under its mixture."""
        return self.basis.holds and not self.mixed.holds


def equal_mixing(n_outcomes: int, pair: tuple[int, int] = (0, 1)) -> np.ndarray:
    c = np.eye(n_outcomes)
    a, b = pair
    c[a, a] = c[a, b] = c[b, a] = c[b, b] = 0.5
    return c


def _spread(ops: Sequence[LabeledOperator]) -> float:
    ref = ops[0]
    return max((trace_norm((op - ref).matrix) for op in ops[1:]), default=0.0)


def theorem2_witness(
    p: ProcessTensor,
    partition: BlockPartition,
    basis: qm.InstrumentSequence,
    coeffs=None,
    tol: float = TOL_FACTOR,
) -> WitnessReport:
    """Contrast a decoupling basis tester with a linear mixture of its elements.

    The process must decompose as sum_x Y_F(x) (x) D_x (x) Y_H(x) with D the
    duals of the transposed basis elements; the mixture's conditionals are
    then sum_x c[x, z] Y_F(x) (x) Y_H(x), which is a product only when the
    mixing is trivial or Y_F (or Y_H) does not depend on x.
    """
    coeffs = equal_mixing(len(basis)) if coeffs is None else np.asarray(coeffs, dtype=float)
    mixed = qm.mix_sequence(basis, coeffs)

    parts = conditional_decomposition(p, partition, basis)
    if any(d.skipped for d in parts):
        raise ValueError("basis tester has zero-probability outcomes; no dual decomposition")
    duals = qm.dual_set([e.transpose() for e in basis.elements]).duals
    rebuilt = None
    for d, dual in zip(parts, duals):
        term = kron(d.joint, dual)
        rebuilt = term if rebuilt is None else rebuilt + term
    rebuilt = permute_factors(rebuilt, p.op.names)
    recon = trace_norm((rebuilt - p.op).matrix) / abs(p.op.trace())
    if recon > 1e-8:
        raise ValueError(f"process is not in dual form for this basis (residual {recon:.3g})")

    products = [kron(d.future, d.history).matrix for d in parts]
    mixed_parts = conditional_decomposition(p, partition, mixed)
    linearity = 0.0
    for z, mp in enumerate(mixed_parts):
        if mp.skipped:
            continue
        predicted = sum(coeffs[x, z] * products[x] for x in range(len(parts)))
        linearity = max(linearity, trace_norm(predicted - mp.joint.matrix))

    return WitnessReport(
        basis=has_markov_order(p, partition, basis, tol),
        mixed=has_markov_order(p, partition, mixed, tol),
        coeffs=coeffs,
        reconstruction_error=recon,
        linearity_error=linearity,
        future_spread=_spread([d.future for d in parts]),
        history_spread=_spread([d.history for d in parts]),
    )


# -- CMI under operations on the memory ------------------------------------------


@dataclass
class CmiRow:
    instrument: str
    cmi: float
    change: float

    @property
    def raises(self) -> bool:
        return self.change > TOL_FACTOR

    @property
    def lowers(self) -> bool:
        return self.change < -TOL_FACTOR


def post_instrument_state(p: ProcessTensor, step: int, instrument: qm.Instrument) -> LabeledOperator:
    """Normalized process with the instrument's average channel applied to a step's input."""
    return qm.apply_to_factor(p.normalized(), qm.step_in(step), instrument.average())


def cmi_nonmonotonicity_demo(
    p: ProcessTensor,
    partition: BlockPartition,
    instruments: Mapping[str, qm.Instrument],
    log_base: float = 2.0,
) -> list[CmiRow]:
    """CMI before and after averaging each instrument on the (single) memory step."""
    if len(partition.memory) != 1:
        raise ValueError("the CMI demo acts on a single memory step")
    (step,) = partition.memory
    bare = quantum_cmi(p, partition, log_base)
    rows = [CmiRow("none", bare, 0.0)]
    for name, inst in instruments.items():
        value = quantum_cmi(post_instrument_state(p, step, inst), partition_names(p, partition), log_base)
        rows.append(CmiRow(name, value, value - bare))
    return rows


def partition_names(p: ProcessTensor, partition: BlockPartition):
    return _block_names(p, partition)


def demo_instruments(dim: int = 2) -> dict[str, qm.Instrument]:
    """Memory operations compared by the CMI demo (qubit by default)."""
    ident = qm.Instrument((qm.identity_map(dim),), "identity")
    depol = qm.Instrument((qm.depolarizing_map(dim),), "depolarizing")
    out = {"identity": ident}
    if dim == 2:
        effects = qm.tetrahedral_effects()
        out["tetrahedral-measure-prepare"] = qm.povm_instrument(
            effects, [2 * e for e in effects], "tetrahedral-measure-prepare"
        )
    out["sharp-dephasing"] = qm.sharp_classical_instrument(dim)
    out["depolarizing"] = depol
    return out
