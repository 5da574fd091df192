"""Random states, channels, instruments, testers and processes.

Processes and correlated testers are generated from explicit dilations, so
they satisfy their causality conditions by construction.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from . import quantum_maps as qm
from .classical_process import JointDistribution
from .process_tensor import ProcessTensor
from .tensor_core import FactorLabel, LabeledOperator, contract, embed, kron, partial_trace


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def random_unitary(d: int, rng=None) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d, random_state=_rng(rng))


def random_density(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    rng = _rng(rng)
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_isometry(d_in: int, d_out: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    g = rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in))
    q, _ = np.linalg.qr(g)
    return q


def random_channel(d_in: int, d_out: int, rng=None, kraus_rank: int = 2) -> qm.CpMap:
    v = random_isometry(d_in, d_out * kraus_rank, rng)
    return qm.choi_from_kraus([v[k * d_out : (k + 1) * d_out] for k in range(kraus_rank)], "rand")


def random_instrument(d_in: int, d_out: int, n_outcomes: int, rng=None, kraus_rank: int = 1) -> qm.Instrument:
    v = random_isometry(d_in, d_out * kraus_rank * n_outcomes, rng)
    blocks = [v[k * d_out : (k + 1) * d_out] for k in range(kraus_rank * n_outcomes)]
    elements = tuple(
        qm.choi_from_kraus(blocks[x * kraus_rank : (x + 1) * kraus_rank], str(x)) for x in range(n_outcomes)
    )
    return qm.Instrument(elements, "random")


def random_povm(d: int, n_outcomes: int, rng=None) -> list[np.ndarray]:
    """Effects E_x = K_x^dag K_x from a random isometry."""
    v = random_isometry(d, n_outcomes, rng) if n_outcomes >= d else random_isometry(d, d * n_outcomes, rng)
    rows = v.shape[0] // n_outcomes
    return [v[x * rows : (x + 1) * rows].conj().T @ v[x * rows : (x + 1) * rows] for x in range(n_outcomes)]


def _apply_unitary(x: LabeledOperator, u: np.ndarray, names: Sequence[str]) -> LabeledOperator:
    big = embed(x, u, names)
    return x.with_matrix(big @ x.matrix @ big.conj().T)


def _phi(a: str, b: str, d: int) -> LabeledOperator:
    v = np.eye(d).reshape(-1)
    return LabeledOperator.from_dims([a, b], [d, d], np.outer(v, v))


def random_dilation(n_steps: int, dim: int = 2, env_dim: int = 2, rng=None):
    """Random initial system-environment state and one unitary per gap between steps."""
    rng = _rng(rng)
    rho_se = random_density(dim * env_dim, rng)
    return rho_se, [random_unitary(dim * env_dim, rng) for _ in range(n_steps - 1)]


def process_from_dilation(
    rho_se: np.ndarray, unitaries: Sequence[np.ndarray], dim: int, env_dim: int, final_output: bool = False
) -> ProcessTensor:
    """Choi operator of the process: each handed-back output is half of a
    maximally entangled pair whose other half enters the dynamics."""
    n_steps = len(unitaries) + 1
    x = LabeledOperator.from_dims(["S", "E"], [dim, env_dim], rho_se)
    for j in range(n_steps):
        x = x.rename({"S": qm.step_in(j)})
        last = j == n_steps - 1
        if not last or final_output:
            x = kron(x, _phi(qm.step_out(j), "S", dim))
        if not last:
            x = _apply_unitary(x, unitaries[j], ["S", "E"])
        elif final_output:
            x = partial_trace(x, ["S"])
    return ProcessTensor(partial_trace(x, ["E"]))


def random_process(
    n_steps: int, dim: int = 2, env_dim: int = 2, rng=None, final_output: bool = False
) -> ProcessTensor:
    """Process from a random system-environment dilation; generic draws are non-Markovian."""
    rho_se, unitaries = random_dilation(n_steps, dim, env_dim, rng)
    return process_from_dilation(rho_se, unitaries, dim, env_dim, final_output)


def random_tester(
    factors: Sequence[FactorLabel], n_outcomes: int = 2, ancilla_dim: int = 2, rng=None
) -> qm.InstrumentSequence:
    """Temporally correlated tester on the given step factors.

    An ancilla carries memory between steps: at each step the received
    system interacts with it, the system is handed back, and the ancilla is
    measured at the end with a random POVM.
    """
    rng = _rng(rng)
    dims = {f.name: f.dim for f in factors}
    x = LabeledOperator.from_dims(["A"], [ancilla_dim], random_density(ancilla_dim, rng))
    for j in qm.steps_of(dims):
        d = dims[qm.step_in(j)]
        if dims.get(qm.step_out(j), d) != d:
            raise ValueError("random_tester needs equal input and output dims per step")
        x = kron(x, _phi("T", qm.step_in(j), d))
        x = _apply_unitary(x, random_unitary(d * ancilla_dim, rng), ["T", "A"])
        if qm.step_out(j) in dims:
            x = x.rename({"T": qm.step_out(j)})
        else:
            x = partial_trace(x, ["T"])
    effects = random_povm(ancilla_dim, n_outcomes, rng)
    elements = tuple(contract(x, LabeledOperator.from_dims(["A"], [ancilla_dim], e.T)) for e in effects)
    return qm.InstrumentSequence(elements, tuple(str(k) for k in range(n_outcomes)), "random-tester")


def random_distribution(sizes: Sequence[int], rng=None, concentration: float = 1.0) -> JointDistribution:
    rng = _rng(rng)
    p = rng.dirichlet(np.full(int(np.prod(sizes)), concentration))
    return JointDistribution(p.reshape(sizes))


def random_markov_chain(sizes: Sequence[int], rng=None) -> JointDistribution:
    """Order-1 chain with random (possibly step-dependent) transitions."""
    rng = _rng(rng)
    table = rng.dirichlet(np.ones(sizes[0]))
    for a, b in zip(sizes[:-1], sizes[1:]):
        t = rng.dirichlet(np.ones(b), size=a)
        table = table[..., :, None] * t
    return JointDistribution(table)


def parity_chain(n_steps: int, noise: float = 0.1) -> JointDistribution:
    """Binary order-2 chain: next bit is the parity of the previous two, flipped w.p. ``noise``."""
    table = np.full((2, 2), 0.25)
    for _ in range(n_steps - 2):
        nxt = np.zeros(table.shape + (2,))
        for idx in np.ndindex(table.shape):
            par = (idx[-1] + idx[-2]) % 2
            nxt[idx + (par,)] = table[idx] * (1 - noise)
            nxt[idx + (1 - par,)] = table[idx] * noise
        table = nxt
    return JointDistribution(table)
