"""Named instruments and testers used by the CLI, scripts and test suites."""

from __future__ import annotations

import numpy as np

from . import quantum_maps as qm
from .tensor_core import LabeledOperator, kron

INSTRUMENT_NAMES = ("tetrahedral", "sharp", "identity", "depolarizing", "noisy-tetrahedral")

BELL_VECTORS = (
    np.array([1, 0, 0, 1]) / np.sqrt(2),
    np.array([1, 0, 0, -1]) / np.sqrt(2),
    np.array([0, 1, 1, 0]) / np.sqrt(2),
    np.array([0, 1, -1, 0]) / np.sqrt(2),
)


def named_instrument(name: str, dim: int = 2, with_output: bool = True) -> qm.Instrument:
    """Single-step instrument by name; measurement instruments re-prepare 1/d."""
    prepare = np.eye(dim) / dim if with_output else None
    if name == "tetrahedral":
        _need_qubit(name, dim)
        return qm.tetrahedral_instrument(prepare)
    if name == "noisy-tetrahedral":
        _need_qubit(name, dim)
        return qm.mix_instrument(qm.tetrahedral_instrument(prepare), noisy_mixing(4, 0.2))
    if name == "sharp":
        return qm.sharp_classical_instrument(dim, with_output)
    if name == "identity":
        _need_output(name, with_output)
        return qm.Instrument((qm.identity_map(dim),), "identity")
    if name == "depolarizing":
        _need_output(name, with_output)
        return qm.Instrument((qm.depolarizing_map(dim),), "depolarizing")
    raise KeyError(f"unknown instrument {name!r}; choose from {INSTRUMENT_NAMES}")


def _need_qubit(name, dim):
    if dim != 2:
        raise ValueError(f"{name} instrument is defined for qubits only")


def _need_output(name, with_output):
    if not with_output:
        raise ValueError(f"{name} instrument needs an output system")


def noisy_mixing(n: int, eps: float) -> np.ndarray:
    """Doubly stochastic matrix keeping each outcome with weight 1 - eps."""
    return (1 - eps) * np.eye(n) + eps * (np.ones((n, n)) - np.eye(n)) / (n - 1)


def sharp_with_feedforward(dim: int = 2) -> qm.Instrument:
    """Measure in the computational basis, then re-prepare a Fourier-basis state
    labeled by the outcome."""
    f = np.exp(2j * np.pi * np.outer(range(dim), range(dim)) / dim) / np.sqrt(dim)
    effects = [np.diag(np.eye(dim)[x]) for x in range(dim)]
    states = [np.outer(f[:, x], f[:, x].conj()) for x in range(dim)]
    return qm.povm_instrument(effects, states, "sharp-feedforward")


def entangled_two_step_tester(step: int, final_prepare=None) -> qm.InstrumentSequence:
    """Qubit tester on steps ``step`` and ``step + 1`` with entanglement across them.

    At the first step the input is measured in the computational basis and
    one half of a Bell pair is handed back, the other half kept. At the
    second step the input and the kept half undergo a Bell measurement, and
    ``final_prepare`` (default 1/2) is handed back.
    """
    final_prepare = np.eye(2) / 2 if final_prepare is None else np.asarray(final_prepare)
    i0, o0 = qm.step_in(step), qm.step_out(step)
    i1, o1 = qm.step_in(step + 1), qm.step_out(step + 1)
    elements, labels = [], []
    for a in range(2):
        effect = np.diag(np.eye(2)[a]).astype(complex)
        for b, v in enumerate(BELL_VECTORS):
            bell = LabeledOperator.from_dims([i1, o0], [2, 2], np.outer(v, v.conj()) / 2)
            elements.append(
                kron(
                    LabeledOperator.from_dims([o1], [2], final_prepare),
                    bell,
                    LabeledOperator.from_dims([i0], [2], effect.T),
                )
            )
            labels.append(f"{a},{b}")
    return qm.InstrumentSequence(tuple(elements), tuple(labels), "entangled-two-step")


def product_on_steps(instrument: qm.Instrument, steps) -> qm.InstrumentSequence:
    steps = list(steps)
    return qm.sequence_from_instruments([instrument] * len(steps), steps, instrument.name)


def boundary_breaking_library() -> dict[str, qm.InstrumentSequence]:
    """Single-step qubit instruments (for memory step 1) whose elements are
    products between what they hand back and what they receive."""
    out = {}
    for name in ("sharp", "tetrahedral", "noisy-tetrahedral"):
        inst = named_instrument(name)
        out[name] = product_on_steps(inst, [1])
    out["sharp-feedforward"] = product_on_steps(sharp_with_feedforward(), [1])
    x_effects = [np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[0.5, -0.5], [-0.5, 0.5]])]
    out["x-measure-prepare-z"] = product_on_steps(
        qm.povm_instrument(x_effects, [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], "x-prep-z"), [1]
    )
    return out
