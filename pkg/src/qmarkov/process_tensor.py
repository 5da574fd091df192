"""Process tensors: validity, the multi-time Born rule, conditioning.

A process tensor lives on factors ``s<j>:o`` and ``s<j>:i`` stored latest
step first. ``s<j>:i`` is what the experimenter receives at step j and
``s<j>:o`` what they hand back, which the process carries to step j+1. Any
output factor may be absent (a trivialized output).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import quantum_maps as qm
from .classical_process import PROB_FLOOR, JointDistribution, ZeroProbabilityError
from .tensor_core import (
    TOL_PSD,
    TOL_TRACE,
    FactorError,
    FactorLabel,
    LabeledOperator,
    contract,
    eig_hermitian,
    hermiticity_error,
    kron,
    partial_trace,
    permute_factors,
    trace_norm,
)


class NotCptpError(ValueError):
    pass


@dataclass(frozen=True)
class ProcessTensor:
    op: LabeledOperator

    def __post_init__(self):
        order = qm.canonical_order(self.op.names)
        object.__setattr__(self, "op", permute_factors(self.op, order))

    @property
    def steps(self) -> list[int]:
        return qm.steps_of(self.op.names)

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def factors(self) -> tuple[FactorLabel, ...]:
        return self.op.factors

    def factor_names(self, steps) -> list[str]:
        return qm.step_factor_names(self.op.names, steps)

    def output_dim(self, steps=None) -> int:
        steps = set(self.steps if steps is None else steps)
        d = 1
        for f in self.op.factors:
            j, kind = qm.parse_step_factor(f.name)
            if kind == "o" and j in steps:
                d *= f.dim
        return d

    def normalized(self) -> LabeledOperator:
        """The process as a unit-trace operator."""
        return self.op / self.output_dim()


@dataclass(frozen=True)
class ConditionalProcess:
    op: LabeledOperator
    outcomes: str
    probability: float

    def as_process(self) -> ProcessTensor:
        return ProcessTensor(self.op)


@dataclass
class ProcessReport:
    psd: bool
    min_eigenvalue: float
    hermiticity: float
    causality: dict[str, float] = field(default_factory=dict)
    trace_deviation: float = 0.0
    tolerance: float = TOL_TRACE

    @property
    def max_causality_deviation(self) -> float:
        return max(self.causality.values(), default=0.0)

    @property
    def valid(self) -> bool:
        return (
            self.psd
            and self.hermiticity <= self.tolerance
            and self.max_causality_deviation <= self.tolerance
            and self.trace_deviation <= self.tolerance
        )

    def violations(self) -> list[tuple[str, float]]:
        out = []
        if not self.psd:
            out.append(("psd", self.min_eigenvalue))
        if self.hermiticity > self.tolerance:
            out.append(("hermiticity", self.hermiticity))
        out += [(f"causality[{k}]", v) for k, v in self.causality.items() if v > self.tolerance]
        if self.trace_deviation > self.tolerance:
            out.append(("trace", self.trace_deviation))
        return out


def causality_levels(op: LabeledOperator) -> dict[str, float]:
    """Trace-norm deviations from the causality hierarchy.

    Walking backwards in time, each output factor must enter as an identity
    once everything later has been traced out; the entry keyed by the output
    factor measures ||Y_j - 1_o (x) tr_o(Y_j)/d_o||_1.
    """
    x = permute_factors(op, qm.canonical_order(op.names))
    levels = {}
    for j in reversed(qm.steps_of(op.names)):
        name = qm.step_out(j)
        if name in x.names:
            f = x.factor(name)
            reduced = partial_trace(x, [name]) / f.dim
            rebuilt = kron(LabeledOperator.identity([f]), reduced)
            levels[name] = trace_norm((x - rebuilt).matrix)
            x = reduced
        if qm.step_in(j) in x.names:
            x = partial_trace(x, [qm.step_in(j)])
    return levels


def validate(p: ProcessTensor, tol: float = TOL_TRACE) -> ProcessReport:
    herm = hermiticity_error(p.op)
    h = p.op.with_matrix(0.5 * (p.op.matrix + p.op.matrix.conj().T))
    evals, _ = eig_hermitian(h)
    return ProcessReport(
        psd=bool(evals[0] >= -TOL_PSD),
        min_eigenvalue=float(evals[0]),
        hermiticity=herm,
        causality=causality_levels(p.op),
        trace_deviation=abs(p.op.trace() - p.output_dim()),
        tolerance=tol,
    )


def born_probability(p: ProcessTensor, element: LabeledOperator) -> float:
    """Joint probability tr[O^T Y] of a tester element on every factor of ``p``."""
    if set(element.names) != set(p.op.names):
        raise FactorError(f"tester factors {element.names} do not match process factors {p.op.names}")
    o = permute_factors(element, p.op.names)
    if o.dims != p.op.dims:
        raise FactorError(f"dimension mismatch: {o.dims} vs {p.op.dims}")
    return float(np.real(np.sum(o.matrix * p.op.matrix)))


def outcome_probabilities(p: ProcessTensor, seq: qm.InstrumentSequence) -> dict[str, float]:
    return {label: born_probability(p, e) for label, e in seq}


def _as_element(p: ProcessTensor, partial) -> LabeledOperator:
    if isinstance(partial, LabeledOperator):
        return partial
    if isinstance(partial, Mapping):
        steps = sorted(partial)
        return qm.tensor_sequence([partial[j] for j in steps], steps)
    raise TypeError("partial must be a LabeledOperator or a mapping step -> CpMap")


def condition(p: ProcessTensor, partial, outcomes: str = "", floor: float = PROB_FLOOR) -> ConditionalProcess:
    """Condition on a tester element covering a subset of steps.

    The remaining steps are marginalized with the discard-and-reprepare
    tester when computing the outcome probability.
    """
    element = _as_element(p, partial)
    steps = qm.steps_of(element.names)
    needed = set(p.factor_names(steps))
    if set(element.names) != needed:
        raise FactorError(
            f"tester element must cover whole steps: has {sorted(element.names)}, needs {sorted(needed)}"
        )
    x = contract(p.op, element)
    rest = [j for j in p.steps if j not in steps]
    prob = float(np.real(x.trace())) / p.output_dim(rest)
    if prob < floor:
        raise ZeroProbabilityError(f"outcome probability {prob:.3g} is below {floor:g}")
    return ConditionalProcess(x / prob, outcomes, prob)


def markovian_process(channels: Sequence[qm.CpMap], rho0, final_output: bool = False) -> ProcessTensor:
    """Product process: channel k carries the output of step k-1 to step k.

    The last step has no output factor unless ``final_output`` is set, in
    which case it is an identity factor of the same dimension as its input.
    """
    rho0 = np.asarray(rho0.matrix if isinstance(rho0, LabeledOperator) else rho0, dtype=complex)
    parts = [LabeledOperator.from_dims([qm.step_in(0)], [rho0.shape[0]], rho0)]
    for k, ch in enumerate(channels, start=1):
        if not ch.is_cptp():
            raise NotCptpError(f"channel {k} is not trace preserving (deviation {ch.tp_deviation():.3g})")
        parts.append(ch.choi.rename({"out": qm.step_in(k), "in": qm.step_out(k - 1)}))
    if final_output:
        n = len(channels)
        d = parts[-1].factor(qm.step_in(n)).dim
        parts.append(LabeledOperator.identity([FactorLabel(qm.step_out(n), d)]))
    return ProcessTensor(kron(*parts))


def embed_classical(dist: JointDistribution, dims: Sequence[int] | None = None, outputs: bool = True) -> ProcessTensor:
    """Diagonal process reproducing ``dist`` under sharp classical probing.

    Outputs, when present, are identity factors: the process ignores what
    the experimenter feeds back.
    """
    if not dist.is_normalized():
        raise ValueError(f"distribution sums to {dist.table.sum()!r}")
    sizes = dist.alphabet_sizes
    dims = list(sizes if dims is None else dims)
    if any(a > d for a, d in zip(sizes, dims)):
        raise ValueError(f"alphabet sizes {sizes} exceed dims {dims}")
    padded = np.zeros(dims)
    padded[tuple(slice(0, a) for a in sizes)] = dist.table
    # table axes run t_0 ... t_n, operator factors run latest first
    diag = np.transpose(padded, list(reversed(range(len(dims))))).reshape(-1)
    inputs = LabeledOperator.from_dims(
        [qm.step_in(j) for j in reversed(range(len(dims)))], list(reversed(dims)), np.diag(diag)
    )
    if not outputs:
        return ProcessTensor(inputs)
    ident = LabeledOperator.identity([FactorLabel(qm.step_out(j), d) for j, d in enumerate(dims)])
    return ProcessTensor(kron(inputs, ident))


def sharp_sequence(p: ProcessTensor) -> qm.InstrumentSequence:
    """Sharp computational-basis instruments at every step of ``p``."""
    instruments = []
    for j in p.steps:
        has_out = qm.step_out(j) in p.op.names
        instruments.append(qm.sharp_classical_instrument(p.op.factor(qm.step_in(j)).dim, has_out))
    return qm.sequence_from_instruments(instruments, p.steps, "sharp")
