"""Exact classical joint distributions: conditioning, Markov order, CMI, recovery."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

PROB_FLOOR = 1e-12
TOL_NORM = 1e-12
TOL_COND = 1e-10


class ZeroProbabilityError(ValueError):
    pass


class NotMarkovError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table whose axis j is the outcome at step j (time order)."""

    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if np.any(table < 0):
            raise ValueError("probabilities must be nonnegative")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return self.table.shape

    @property
    def step_count(self) -> int:
        return self.table.ndim

    def is_normalized(self, tol: float = TOL_NORM) -> bool:
        return abs(self.table.sum() - 1.0) <= tol

    def marginal(self, steps: Sequence[int]) -> np.ndarray:
        """Marginal table with axes in the order given by ``steps``."""
        steps = list(steps)
        drop = tuple(k for k in range(self.step_count) if k not in steps)
        kept = sorted(steps)
        m = self.table.sum(axis=drop) if drop else self.table
        return np.transpose(m, [kept.index(s) for s in steps]) if steps else np.asarray(m)


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous blocks history < memory < future covering all steps."""

    history: tuple[int, ...]
    memory: tuple[int, ...]
    future: tuple[int, ...]

    def __post_init__(self):
        blocks = [tuple(sorted(b)) for b in (self.history, self.memory, self.future)]
        for b in blocks:
            if b and list(b) != list(range(b[0], b[-1] + 1)):
                raise ValueError(f"block {b} is not contiguous")
        flat = [s for b in blocks for s in b]
        if flat != list(range(len(flat))):
            raise ValueError(f"blocks {blocks} must be disjoint, ordered and cover steps 0..n")
        object.__setattr__(self, "history", blocks[0])
        object.__setattr__(self, "memory", blocks[1])
        object.__setattr__(self, "future", blocks[2])

    @classmethod
    def from_cut(cls, n_steps: int, k: int, ell: int) -> "BlockPartition":
        """Future starts at step k, memory holds the previous ``ell`` steps."""
        if not 0 < k < n_steps or ell < 0:
            raise ValueError(f"invalid cut k={k}, ell={ell} for {n_steps} steps")
        start = max(0, k - ell)
        return cls(tuple(range(start)), tuple(range(start, k)), tuple(range(k, n_steps)))

    @property
    def n_steps(self) -> int:
        return len(self.history) + len(self.memory) + len(self.future)


def conditional(dist: JointDistribution, given: Mapping[int, int], floor: float = PROB_FLOOR) -> JointDistribution:
    index = tuple(given.get(k, slice(None)) for k in range(dist.step_count))
    sub = dist.table[index]
    p = float(sub.sum())
    if p <= floor:
        raise ZeroProbabilityError(f"conditioning event {dict(given)} has probability {p:.3g}")
    return JointDistribution(sub / p)


def _blocks(dist: JointDistribution, part: BlockPartition) -> tuple[np.ndarray, tuple, tuple, tuple]:
    """Joint table reshaped to (F, M, H) with each block flattened."""
    shape = dist.alphabet_sizes
    dF = tuple(shape[s] for s in part.future)
    dM = tuple(shape[s] for s in part.memory)
    dH = tuple(shape[s] for s in part.history)
    order = list(part.future) + list(part.memory) + list(part.history)
    t = np.transpose(dist.table, order).reshape(
        int(np.prod(dF)), int(np.prod(dM)), int(np.prod(dH))
    )
    return t, dF, dM, dH


def markov_deviation(dist: JointDistribution, part: BlockPartition, floor: float = PROB_FLOOR) -> float:
    """max |P(f|m,h) - P(f|m)| over events with P(m,h) above ``floor``."""
    t, *_ = _blocks(dist, part)
    p_mh = t.sum(axis=0)
    p_fm = t.sum(axis=2)
    p_m = p_mh.sum(axis=1)
    worst = 0.0
    for m in range(t.shape[1]):
        if p_m[m] <= floor:
            continue
        future_given_m = p_fm[:, m] / p_m[m]
        for h in range(t.shape[2]):
            if p_mh[m, h] <= floor:
                continue
            worst = max(worst, float(np.max(np.abs(t[:, m, h] / p_mh[m, h] - future_given_m))))
    return worst


def has_classical_markov_order(dist: JointDistribution, part: BlockPartition, tol: float = TOL_COND) -> bool:
    return markov_deviation(dist, part) <= tol


def classical_markov_order(dist: JointDistribution, ell: int, k: int | None = None, tol: float = TOL_COND) -> bool:
    """Whether the future from step k on depends only on the previous ``ell`` steps.

    With ``k=None`` every admissible cut 0 < k <= n is checked.
    """
    n = dist.step_count
    cuts = range(1, n) if k is None else [k]
    return all(
        has_classical_markov_order(dist, BlockPartition.from_cut(n, c, ell), tol) for c in cuts
    )


def minimal_markov_order(dist: JointDistribution, tol: float = TOL_COND) -> int:
    """Smallest ell for which every cut satisfies the Markov condition (0 means i.i.d.-like)."""
    for ell in range(dist.step_count):
        if classical_markov_order(dist, ell, tol=tol):
            return ell
    return dist.step_count - 1


def shannon_entropy(p: np.ndarray, log_base: float = 2.0) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum() / np.log(log_base))


def classical_cmi(dist: JointDistribution, part: BlockPartition, log_base: float = 2.0) -> float:
    """I(F:H|M) = H(FM) + H(MH) - H(M) - H(FMH)."""
    t, *_ = _blocks(dist, part)
    return (
        shannon_entropy(t.sum(axis=2), log_base)
        + shannon_entropy(t.sum(axis=0), log_base)
        - shannon_entropy(t.sum(axis=(0, 2)), log_base)
        - shannon_entropy(t, log_base)
    )


@dataclass(frozen=True, eq=False)
class RecoveryMap:
    """Stochastic map that keeps M and samples F from P(F|M).

    ``kernel[f, m]`` is P(x_F = f | x_M = m) over flattened blocks.
    """

    partition: BlockPartition
    kernel: np.ndarray
    future_shape: tuple[int, ...]
    memory_shape: tuple[int, ...]
    history_shape: tuple[int, ...]
    residual: float

    def apply(self, p_mh: np.ndarray) -> np.ndarray:
        """Map a (M..., H...) table to the full table with axes in time order."""
        flat = np.asarray(p_mh).reshape(self.kernel.shape[1], -1)
        joint = self.kernel[:, :, None] * flat[None, :, :]
        part = self.partition
        shaped = joint.reshape(self.future_shape + self.memory_shape + self.history_shape)
        order = list(part.future) + list(part.memory) + list(part.history)
        return np.transpose(shaped, np.argsort(order))


def _recovery(dist: JointDistribution, part: BlockPartition) -> RecoveryMap:
    t, dF, dM, dH = _blocks(dist, part)
    p_fm = t.sum(axis=2)
    p_m = p_fm.sum(axis=0)
    kernel = np.full_like(p_fm, 1.0 / p_fm.shape[0])
    seen = p_m > PROB_FLOOR
    kernel[:, seen] = p_fm[:, seen] / p_m[seen]
    rec = RecoveryMap(part, kernel, dF, dM, dH, 0.0)
    rebuilt = rec.apply(dist.marginal(list(part.memory) + list(part.history)))
    residual = 0.5 * float(np.abs(rebuilt - dist.table).sum())
    return RecoveryMap(part, kernel, dF, dM, dH, residual)


def reconstruction_residual(dist: JointDistribution, part: BlockPartition) -> float:
    """Total-variation distance between P_FMH and W[P_MH]."""
    return _recovery(dist, part).residual


def recovery_map(dist: JointDistribution, part: BlockPartition, tol: float = TOL_COND) -> RecoveryMap:
    rec = _recovery(dist, part)
    if rec.residual > tol:
        raise NotMarkovError(
            f"no recovery map on memory {part.memory}: reconstruction residual {rec.residual:.3g}",
            rec.residual,
        )
    return rec


def markov_chain(initial: Sequence[float], transition, n_steps: int) -> JointDistribution:
    """Order-1 chain; ``transition[a, b]`` = P(next = b | current = a)."""
    transition = np.asarray(transition, dtype=float)
    table = np.asarray(initial, dtype=float)
    for _ in range(n_steps - 1):
        table = table[..., :, None] * transition[(None,) * (table.ndim - 1)]
    return JointDistribution(table)


def binary_flip_chain(p_flip: float, n_steps: int) -> JointDistribution:
    """Uniform start, each step flips the bit with probability ``p_flip``."""
    t = np.array([[1 - p_flip, p_flip], [p_flip, 1 - p_flip]])
    return markov_chain([0.5, 0.5], t, n_steps)
