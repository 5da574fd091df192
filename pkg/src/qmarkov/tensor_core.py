"""Dense operators on labeled tensor-product spaces.

Every operator carries an ordered tuple of :class:`FactorLabel`. The big
index is formed with the first factor as the most significant digit, so
``kron(a, b)`` places ``a``'s factors before ``b``'s.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_TRACE = 1e-9
EIG_FLOOR = 1e-12


class FactorError(ValueError):
    """Unknown, duplicated or mismatched tensor factors."""


class NotHermitianError(ValueError):
    pass


class NotDensityError(ValueError):
    """Input is not a normalized positive operator."""


@dataclass(frozen=True)
class FactorLabel:
    name: str
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise FactorError(f"factor {self.name!r} has invalid dimension {self.dim}")


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Square complex matrix acting on an ordered product of labeled factors.

    The matrix is copied and made read-only on construction.
    """

    factors: tuple[FactorLabel, ...]
    matrix: np.ndarray

    def __post_init__(self):
        factors = tuple(
            f if isinstance(f, FactorLabel) else FactorLabel(*f) for f in self.factors
        )
        names = [f.name for f in factors]
        if len(set(names)) != len(names):
            raise FactorError(f"duplicate factor names in {names}")
        dim = int(np.prod([f.dim for f in factors], dtype=np.int64))
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (dim, dim):
            raise FactorError(
                f"matrix of shape {matrix.shape} does not match factor dims "
                f"{[f.dim for f in factors]}"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_dims(cls, names: Sequence[str], dims: Sequence[int], matrix) -> "LabeledOperator":
        return cls(tuple(FactorLabel(n, d) for n, d in zip(names, dims)), matrix)

    @classmethod
    def identity(cls, factors: Iterable[FactorLabel]) -> "LabeledOperator":
        factors = tuple(factors)
        dim = int(np.prod([f.dim for f in factors], dtype=np.int64))
        return cls(factors, np.eye(dim))

    @classmethod
    def scalar(cls, value: complex = 1.0) -> "LabeledOperator":
        return cls((), np.array([[value]]))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def factor(self, name: str) -> FactorLabel:
        for f in self.factors:
            if f.name == name:
                return f
        raise FactorError(f"no factor named {name!r} in {self.names}")

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def transpose(self) -> "LabeledOperator":
        return LabeledOperator(self.factors, self.matrix.T)

    def dag(self) -> "LabeledOperator":
        return LabeledOperator(self.factors, self.matrix.conj().T)

    def with_matrix(self, matrix) -> "LabeledOperator":
        return LabeledOperator(self.factors, matrix)

    def rename(self, mapping: dict[str, str]) -> "LabeledOperator":
        factors = tuple(FactorLabel(mapping.get(f.name, f.name), f.dim) for f in self.factors)
        return LabeledOperator(factors, self.matrix)

    def _aligned(self, other: "LabeledOperator") -> np.ndarray:
        if set(other.names) != set(self.names):
            raise FactorError(f"factor mismatch: {self.names} vs {other.names}")
        if other.names != self.names:
            other = permute_factors(other, self.names)
        if other.dims != self.dims:
            raise FactorError(f"dimension mismatch: {self.dims} vs {other.dims}")
        return other.matrix

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        return self.with_matrix(self.matrix + self._aligned(other))

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        return self.with_matrix(self.matrix - self._aligned(other))

    def __mul__(self, scalar) -> "LabeledOperator":
        return self.with_matrix(self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "LabeledOperator":
        return self.with_matrix(self.matrix / scalar)

    def __matmul__(self, other: "LabeledOperator") -> "LabeledOperator":
        return self.with_matrix(self.matrix @ self._aligned(other))

    def __repr__(self):
        fs = ", ".join(f"{f.name}:{f.dim}" for f in self.factors)
        return f"LabeledOperator([{fs}], dim={self.dim})"


def kron(*ops: LabeledOperator) -> LabeledOperator:
    """Tensor product; factor lists are concatenated in argument order."""
    if not ops:
        return LabeledOperator.scalar()
    factors = tuple(f for op in ops for f in op.factors)
    names = [f.name for f in factors]
    if len(set(names)) != len(names):
        raise FactorError(f"kron of operators sharing factor names: {names}")
    matrix = reduce(np.kron, (op.matrix for op in ops))
    return LabeledOperator(factors, matrix)


def _tensor(a: LabeledOperator) -> np.ndarray:
    return a.matrix.reshape(a.dims + a.dims)


def partial_trace(a: LabeledOperator, over: Iterable[str]) -> LabeledOperator:
    """Trace out the named factors; survivors keep their relative order."""
    over = set(over)
    unknown = over - set(a.names)
    if unknown:
        raise FactorError(f"cannot trace unknown factors {sorted(unknown)}")
    if not over:
        return a
    n = len(a.factors)
    keep = [k for k in range(n) if a.names[k] not in over]
    gone = [k for k in range(n) if a.names[k] in over]
    dk = int(np.prod([a.dims[k] for k in keep], dtype=np.int64))
    dg = int(np.prod([a.dims[k] for k in gone], dtype=np.int64))
    t = _tensor(a).transpose(keep + gone + [n + k for k in keep] + [n + k for k in gone])
    reduced = np.einsum("ajbj->ab", t.reshape(dk, dg, dk, dg))
    return LabeledOperator(tuple(a.factors[k] for k in keep), reduced)


def permute_factors(a: LabeledOperator, order: Sequence[str]) -> LabeledOperator:
    order = list(order)
    if sorted(order) != sorted(a.names) or len(order) != len(a.names):
        raise FactorError(f"{order} is not a permutation of {list(a.names)}")
    if tuple(order) == a.names:
        return a
    n = len(a.factors)
    perm = [a.names.index(name) for name in order]
    t = _tensor(a).transpose(perm + [n + k for k in perm])
    return LabeledOperator(tuple(a.factors[k] for k in perm), t.reshape(a.dim, a.dim))


def contract(a: LabeledOperator, tester: LabeledOperator) -> LabeledOperator:
    """Return tr_S[(tester^T (x) 1) a] where S are the tester's factors.

    This is the link product of ``a`` with ``tester`` over the shared
    factors; when ``tester`` covers every factor of ``a`` the result is the
    1x1 operator holding tr[tester^T a].
    """
    shared = tester.names
    missing = set(shared) - set(a.names)
    if missing:
        raise FactorError(f"tester factors {sorted(missing)} absent from operator {a.names}")
    for f in tester.factors:
        if a.factor(f.name).dim != f.dim:
            raise FactorError(f"dimension mismatch on factor {f.name!r}")
    rest = [name for name in a.names if name not in set(shared)]
    a = permute_factors(a, rest + list(shared))
    dr = a.dim // tester.dim if tester.dim else 0
    t = a.matrix.reshape(dr, tester.dim, dr, tester.dim)
    out = np.einsum("asbt,st->ab", t, tester.matrix)
    return LabeledOperator(tuple(a.factors[: len(rest)]), out)


def embed(a: LabeledOperator, op: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Matrix of ``op`` acting on the named factors of ``a``, identity elsewhere."""
    names = list(names)
    rest = [n for n in a.names if n not in names]
    d_rest = int(np.prod([a.factor(n).dim for n in rest], dtype=np.int64))
    big = LabeledOperator(
        tuple(a.factor(n) for n in names) + tuple(a.factor(n) for n in rest),
        np.kron(op, np.eye(d_rest)),
    )
    return permute_factors(big, a.names).matrix


def hermiticity_error(a: LabeledOperator) -> float:
    return float(np.max(np.abs(a.matrix - a.matrix.conj().T), initial=0.0))


def _check_hermitian(a: LabeledOperator, tol: float = TOL_HERM) -> None:
    err = hermiticity_error(a)
    if err > tol:
        raise NotHermitianError(f"operator is not Hermitian (max deviation {err:.3g})")


def eig_hermitian(a: LabeledOperator, tol: float = TOL_HERM) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and column eigenvectors of a Hermitian operator."""
    _check_hermitian(a, tol)
    h = 0.5 * (a.matrix + a.matrix.conj().T)
    return np.linalg.eigh(h)


def is_psd(a: LabeledOperator, tol: float = TOL_PSD) -> bool:
    evals, _ = eig_hermitian(a)
    return bool(evals.size == 0 or evals[0] >= -tol)


def von_neumann_entropy(rho: LabeledOperator, log_base: float = 2.0) -> float:
    """S(rho) = -sum_k l_k log(l_k) over the spectrum of a density operator.

    Eigenvalues within ``TOL_PSD`` below zero are clamped, and anything under
    ``EIG_FLOOR`` contributes nothing.
    """
    evals, _ = eig_hermitian(rho)
    if evals.size and evals[0] < -TOL_PSD:
        raise NotDensityError(f"negative eigenvalue {evals[0]:.3g}")
    tr = float(evals.sum())
    if abs(tr - 1.0) > TOL_TRACE:
        raise NotDensityError(f"trace {tr!r} differs from 1")
    evals = np.clip(evals, 0.0, None)
    evals = evals[evals > EIG_FLOOR]
    return float(-(evals * np.log(evals)).sum() / np.log(log_base))


def trace_norm(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False).sum())


def trace_distance(a: LabeledOperator, b: LabeledOperator) -> float:
    return 0.5 * trace_norm(a.matrix - a._aligned(b))
