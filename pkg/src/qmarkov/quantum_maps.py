"""CP maps in Choi form, instruments, multi-step testers and dual sets.

Choi convention: for a map E from ``in`` to ``out`` the Choi operator is
``C = sum_ab E(|a><b|) (x) |a><b|`` on factors ``(out, in)``, i.e. E applied
to one half of the unnormalized maximally entangled projector. A POVM effect
E therefore has Choi operator ``E^T`` on a one-dimensional ``out`` factor,
and every probability is ``tr[O^T Y]``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .tensor_core import (
    TOL_PSD,
    TOL_TRACE,
    FactorError,
    FactorLabel,
    LabeledOperator,
    eig_hermitian,
    hermiticity_error,
    kron,
    partial_trace,
    permute_factors,
    trace_norm,
)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

TETRAHEDRAL_VECTORS = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))

DUAL_MAX_CONDITION = 1e12


class InvalidInstrumentError(ValueError):
    pass


_STEP_RE = re.compile(r"^s(\d+):([io])$")


def step_in(j: int) -> str:
    return f"s{j}:i"


def step_out(j: int) -> str:
    return f"s{j}:o"


def parse_step_factor(name: str) -> tuple[int, str]:
    m = _STEP_RE.match(name)
    if m is None:
        raise FactorError(f"{name!r} is not a step factor name (expected 's<j>:i' or 's<j>:o')")
    return int(m.group(1)), m.group(2)


def canonical_order(names: Iterable[str]) -> list[str]:
    """Latest step first, and within a step the output before the input."""

    def key(name):
        j, kind = parse_step_factor(name)
        return (-j, 0 if kind == "o" else 1)

    return sorted(names, key=key)


def steps_of(names: Iterable[str]) -> list[int]:
    return sorted({parse_step_factor(n)[0] for n in names})


def step_factor_names(names: Iterable[str], steps: Iterable[int]) -> list[str]:
    steps = set(steps)
    return [n for n in names if parse_step_factor(n)[0] in steps]


def drop_trivial(op: LabeledOperator) -> LabeledOperator:
    """Remove one-dimensional factors, which carry no information."""
    return LabeledOperator(tuple(f for f in op.factors if f.dim > 1), op.matrix)


@dataclass(frozen=True)
class CpMap:
    choi: LabeledOperator
    label: str = ""

    def __post_init__(self):
        if self.choi.names != ("out", "in"):
            raise FactorError(f"CpMap Choi operator must be on ('out', 'in'), got {self.choi.names}")
        if hermiticity_error(self.choi) > TOL_PSD:
            raise InvalidInstrumentError(f"Choi operator of {self.label!r} is not Hermitian")
        evals, _ = eig_hermitian(self.choi)
        if evals[0] < -TOL_PSD:
            raise InvalidInstrumentError(
                f"map {self.label!r} is not completely positive (eigenvalue {evals[0]:.3g})"
            )

    @classmethod
    def from_choi(cls, matrix, d_out: int, d_in: int, label: str = "") -> "CpMap":
        return cls(LabeledOperator.from_dims(("out", "in"), (d_out, d_in), matrix), label)

    @property
    def d_out(self) -> int:
        return self.choi.factors[0].dim

    @property
    def d_in(self) -> int:
        return self.choi.factors[1].dim

    def tp_deviation(self) -> float:
        reduced = partial_trace(self.choi, ["out"]).matrix
        return trace_norm(reduced - np.eye(self.d_in))

    def is_cptp(self, tol: float = TOL_TRACE) -> bool:
        return self.tp_deviation() <= tol


@dataclass(frozen=True)
class Instrument:
    elements: tuple[CpMap, ...]
    name: str = ""

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise InvalidInstrumentError("an instrument needs at least one element")
        shapes = {(m.d_out, m.d_in) for m in elements}
        if len(shapes) != 1:
            raise FactorError(f"instrument elements have differing (out, in) dims: {shapes}")
        object.__setattr__(self, "elements", elements)

    @property
    def labels(self) -> list[str]:
        return [m.label or str(k) for k, m in enumerate(self.elements)]

    def average(self) -> CpMap:
        """The deterministic map obtained by ignoring the outcome."""
        total = sum(m.choi.matrix for m in self.elements)
        return CpMap.from_choi(total, self.elements[0].d_out, self.elements[0].d_in, "avg")

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class InstrumentSequence:
    """Outcome-labeled tester elements on step factors ``s<j>:o``, ``s<j>:i``."""

    elements: tuple[LabeledOperator, ...]
    labels: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        elements = tuple(self.elements)
        labels = tuple(self.labels) or tuple(str(k) for k in range(len(elements)))
        if len(labels) != len(elements):
            raise ValueError("one label per element required")
        if not elements:
            raise InvalidInstrumentError("an instrument sequence needs at least one element")
        names = set(elements[0].names)
        for e in elements:
            if set(e.names) != names:
                raise FactorError("all tester elements must share the same factors")
            for n in e.names:
                parse_step_factor(n)
        order = canonical_order(names)
        elements = tuple(permute_factors(e, order) for e in elements)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "labels", labels)

    @property
    def factors(self) -> tuple[FactorLabel, ...]:
        return self.elements[0].factors

    @property
    def steps(self) -> list[int]:
        return steps_of(self.elements[0].names)

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def deterministic(self) -> LabeledOperator:
        total = self.elements[0]
        for e in self.elements[1:]:
            total = total + e
        return total

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(zip(self.labels, self.elements))


@dataclass(frozen=True)
class DualSet:
    basis: tuple[LabeledOperator, ...]
    duals: tuple[LabeledOperator, ...]

    def pairing(self) -> np.ndarray:
        """Matrix of tr(basis_x dual_y)."""
        return np.array(
            [[np.trace(b.matrix @ d.matrix) for d in self.duals] for b in self.basis]
        )

    def biorthogonality_error(self) -> float:
        return float(np.max(np.abs(self.pairing() - np.eye(len(self.basis)))))


@dataclass
class InstrumentReport:
    psd: list[bool]
    deviation: float
    tolerance: float = TOL_TRACE
    levels: list[float] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return all(self.psd) and self.deviation <= self.tolerance


def choi_from_kraus(kraus: Sequence, label: str = "") -> CpMap:
    kraus = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
    if not kraus:
        raise ValueError("at least one Kraus operator required")
    shape = kraus[0].shape
    if any(k.shape != shape for k in kraus):
        raise FactorError(f"inconsistent Kraus shapes {[k.shape for k in kraus]}")
    vecs = np.array([k.reshape(-1) for k in kraus])
    choi = vecs.T @ vecs.conj()
    return CpMap.from_choi(choi, shape[0], shape[1], label)


def identity_map(dim: int) -> CpMap:
    return choi_from_kraus([np.eye(dim)], "id")


def unitary_map(u: np.ndarray, label: str = "U") -> CpMap:
    return choi_from_kraus([u], label)


def depolarizing_map(dim: int, p: float = 1.0) -> CpMap:
    """rho -> (1 - p) rho + p tr(rho) 1/dim."""
    phi = identity_map(dim).choi.matrix
    choi = (1 - p) * phi + p * np.eye(dim * dim) / dim
    return CpMap.from_choi(choi, dim, dim, f"depol({p:g})")


def apply_to_factor(op: LabeledOperator, name: str, m: CpMap) -> LabeledOperator:
    """Apply ``m`` to the factor ``name`` of ``op``; the factor keeps its name."""
    f = op.factor(name)
    if f.dim != m.d_in:
        raise FactorError(f"map expects input dim {m.d_in}, factor {name!r} has {f.dim}")
    rest = [n for n in op.names if n != name]
    x = permute_factors(op, [name] + rest)
    d_rest = x.dim // f.dim
    c = m.choi.matrix.reshape(m.d_out, m.d_in, m.d_out, m.d_in)
    y = np.einsum("oapb,arbs->orps", c, x.matrix.reshape(f.dim, d_rest, f.dim, d_rest))
    out = LabeledOperator(
        (FactorLabel(name, m.d_out),) + x.factors[1:],
        y.reshape(m.d_out * d_rest, m.d_out * d_rest),
    )
    return permute_factors(out, op.names)


def apply_map(m: CpMap, rho: LabeledOperator) -> LabeledOperator:
    """tr_in[(1_out (x) rho^T) C] for a single-factor operator ``rho``."""
    if len(rho.factors) != 1:
        raise FactorError("apply_map expects an operator on a single factor")
    return apply_to_factor(rho, rho.names[0], m)


def _tester_levels(total: LabeledOperator) -> list[float]:
    """Deviations of a deterministic tester from the causal trace conditions.

    Working from the last step backwards: trace the step's output, require
    the remainder to be identity on the step's input, then divide it out.
    The final entry compares the leftover scalar with 1.
    """
    x = total
    levels = []
    for j in reversed(steps_of(total.names)):
        if step_out(j) in x.names:
            x = partial_trace(x, [step_out(j)])
        if step_in(j) in x.names:
            d_in = x.factor(step_in(j)).dim
            reduced = partial_trace(x, [step_in(j)]) / d_in
            rebuilt = kron(LabeledOperator.identity([x.factor(step_in(j))]), reduced)
            levels.append(trace_norm((x - rebuilt).matrix))
            x = reduced
        else:
            levels.append(0.0)
    levels.append(abs(x.trace() - 1.0))
    return levels


def validate_instrument(j: Instrument | InstrumentSequence, tol: float = TOL_TRACE) -> InstrumentReport:
    if isinstance(j, InstrumentSequence):
        psd = [bool(eig_hermitian(e)[0][0] >= -TOL_PSD) for e in j.elements]
        levels = _tester_levels(j.deterministic())
        return InstrumentReport(psd, max(levels), tol, levels)
    psd = []
    for m in j.elements:
        evals, _ = eig_hermitian(m.choi)
        psd.append(bool(evals[0] >= -TOL_PSD))
    total = sum(m.choi.matrix for m in j.elements)
    reduced = partial_trace(j.elements[0].choi.with_matrix(total), ["out"]).matrix
    deviation = trace_norm(reduced - np.eye(j.elements[0].d_in))
    return InstrumentReport(psd, deviation, tol, [deviation])


def dual_set(basis: Sequence[LabeledOperator]) -> DualSet:
    """Operators D_y in the span of the (adjoint) basis with tr(B_x D_y) = delta_xy."""
    basis = tuple(basis)
    ref = basis[0]
    mats = np.array([ref._aligned(b).reshape(-1) for b in basis])
    # G_xz = tr(B_x B_z^dagger)
    gram = mats @ mats.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > DUAL_MAX_CONDITION:
        raise ValueError(f"basis is (numerically) linearly dependent: condition number {cond:.3g}")
    coeffs = np.linalg.inv(gram)
    aligned = [ref._aligned(b) for b in basis]
    duals = np.einsum("zy,zab->yab", coeffs, np.array([b.conj().T for b in aligned]))
    return DualSet(
        tuple(ref.with_matrix(b) for b in aligned),
        tuple(ref.with_matrix(d) for d in duals),
    )


def sharp_classical_instrument(dim: int, with_output: bool = True) -> Instrument:
    """Measure in the computational basis and re-prepare the observed state."""
    if dim < 2:
        raise ValueError("sharp classical instrument needs dim >= 2")
    elements = []
    for x in range(dim):
        proj = np.zeros((dim, dim))
        proj[x, x] = 1.0
        if with_output:
            elements.append(CpMap.from_choi(np.kron(proj, proj), dim, dim, str(x)))
        else:
            elements.append(CpMap.from_choi(proj, 1, dim, str(x)))
    return Instrument(tuple(elements), f"sharp{dim}")


def povm_instrument(effects: Sequence, prepare=None, name: str = "povm") -> Instrument:
    """Measure-and-prepare instrument from POVM effects.

    ``prepare`` is None (no output system), one density matrix re-prepared
    for every outcome, or a list with one density matrix per outcome.
    """
    effects = [np.asarray(e, dtype=complex) for e in effects]
    d_in = effects[0].shape[0]
    if prepare is None:
        states = [None] * len(effects)
    elif isinstance(prepare, (list, tuple)):
        states = [np.asarray(s, dtype=complex) for s in prepare]
    else:
        states = [np.asarray(prepare, dtype=complex)] * len(effects)
    elements = []
    for k, (e, s) in enumerate(zip(effects, states)):
        if s is None:
            elements.append(CpMap.from_choi(e.T, 1, d_in, str(k)))
        else:
            elements.append(CpMap.from_choi(np.kron(s, e.T), s.shape[0], d_in, str(k)))
    return Instrument(tuple(elements), name)


def bloch_operator(coeffs: Sequence[float]) -> np.ndarray:
    return sum(c * s for c, s in zip(coeffs, PAULIS))


def tetrahedral_effects() -> list[np.ndarray]:
    """Qubit SIC-POVM: (1/4)(1 + (1/sqrt 3) c.sigma)."""
    return [0.25 * (PAULI_I + bloch_operator(c) / np.sqrt(3)) for c in TETRAHEDRAL_VECTORS]


def tetrahedral_duals() -> list[np.ndarray]:
    """Closed-form duals (1/2)(1 + sqrt(3) c.sigma) of the tetrahedral effects."""
    return [0.5 * (PAULI_I + np.sqrt(3) * bloch_operator(c)) for c in TETRAHEDRAL_VECTORS]


def tetrahedral_instrument(prepare=None) -> Instrument:
    return povm_instrument(tetrahedral_effects(), prepare, name="tetrahedral")


def _check_mixture(elements: list[LabeledOperator], tol_psd: float) -> None:
    for z, e in enumerate(elements):
        evals, _ = eig_hermitian(e)
        if evals[0] < -tol_psd:
            raise InvalidInstrumentError(
                f"mixed element {z} is not positive (eigenvalue {evals[0]:.3g})"
            )


def mix_elements(elements: Sequence[LabeledOperator], coeffs) -> list[LabeledOperator]:
    """Element z of the result is sum_x coeffs[x, z] * elements[x]."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 2 or coeffs.shape[0] != len(elements):
        raise ValueError(f"coefficient matrix must have {len(elements)} rows")
    ref = elements[0]
    mats = np.array([ref._aligned(e) for e in elements])
    return [ref.with_matrix(np.einsum("x,xab->ab", coeffs[:, z], mats)) for z in range(coeffs.shape[1])]


def mix_instrument(basis: Instrument, coeffs, tol: float = TOL_TRACE) -> Instrument:
    mixed = mix_elements([m.choi for m in basis.elements], coeffs)
    _check_mixture(mixed, TOL_PSD)
    result = Instrument(
        tuple(CpMap(op, f"mix{z}") for z, op in enumerate(mixed)), f"{basis.name}-mixed"
    )
    report = validate_instrument(result, tol)
    if not report.valid:
        raise InvalidInstrumentError(
            f"mixed instrument is not trace preserving (deviation {report.deviation:.3g})"
        )
    return result


def mix_sequence(basis: InstrumentSequence, coeffs, tol: float = TOL_TRACE) -> InstrumentSequence:
    mixed = mix_elements(basis.elements, coeffs)
    _check_mixture(mixed, TOL_PSD)
    result = InstrumentSequence(
        tuple(mixed), tuple(f"mix{z}" for z in range(len(mixed))), f"{basis.name}-mixed"
    )
    report = validate_instrument(result, tol)
    if not report.valid:
        raise InvalidInstrumentError(
            f"mixed tester is not deterministic-complete (deviation {report.deviation:.3g})"
        )
    return result


def place(m: CpMap, step: int) -> LabeledOperator:
    """Choi operator of ``m`` relabeled onto the factors of ``step``."""
    return drop_trivial(m.choi.rename({"out": step_out(step), "in": step_in(step)}))


def tensor_sequence(per_step: Sequence[CpMap], steps: Sequence[int] | None = None) -> LabeledOperator:
    """Uncorrelated tester element: one CP map per step, given in time order."""
    steps = list(range(len(per_step))) if steps is None else list(steps)
    if len(steps) != len(per_step):
        raise ValueError("one step index per map required")
    if len(set(steps)) != len(steps):
        raise FactorError(f"step labels collide: {steps}")
    placed = [place(m, j) for m, j in zip(per_step, steps)]
    out = kron(*placed)
    return permute_factors(out, canonical_order(out.names))


def sequence_from_instruments(
    instruments: Sequence[Instrument], steps: Sequence[int] | None = None, name: str = ""
) -> InstrumentSequence:
    """All outcome combinations of independent per-step instruments."""
    steps = list(range(len(instruments))) if steps is None else list(steps)
    elements, labels = [], []
    for combo in itertools.product(*(range(len(j)) for j in instruments)):
        maps = [j.elements[k] for j, k in zip(instruments, combo)]
        elements.append(tensor_sequence(maps, steps))
        labels.append(",".join(m.label or str(k) for m, k in zip(maps, combo)))
    if not instruments:
        elements, labels = [LabeledOperator.scalar()], ["-"]
    return InstrumentSequence(tuple(elements), tuple(labels), name or "+".join(j.name for j in instruments))


def discard_tester(factors: Iterable[FactorLabel]) -> LabeledOperator:
    """Deterministic tester that discards every input and re-prepares 1/d."""
    factors = tuple(factors)
    diag = []
    for f in factors:
        _, kind = parse_step_factor(f.name)
        diag.append(np.full(f.dim, 1.0 / f.dim if kind == "o" else 1.0))
    values = np.array([1.0])
    for d in diag:
        values = np.kron(values, d)
    return LabeledOperator(factors, np.diag(values))
