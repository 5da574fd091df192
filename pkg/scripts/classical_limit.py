"""Classical limit: embed random joint distributions as diagonal processes and
compare quantum and classical verdicts cut by cut. Also counts how often the
total-variation reconstruction residual grows when the memory block shrinks."""

from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass

import numpy as np

from qmarkov import quantum_maps as qm
from qmarkov import sampling
from qmarkov.classical_process import BlockPartition, classical_cmi, has_classical_markov_order, reconstruction_residual
from qmarkov.markov_order import has_markov_order, quantum_cmi
from qmarkov.process_tensor import embed_classical


@dataclass(frozen=True)
class Config:
    samples: int = 60
    steps: int = 4
    max_alphabet: int = 3
    seed: int = 0


def _sharp_memory(p, part: BlockPartition) -> qm.InstrumentSequence:
    dims = [p.op.factor(qm.step_in(j)).dim for j in part.memory]
    return qm.sequence_from_instruments([qm.sharp_classical_instrument(d, False) for d in dims], list(part.memory))


def run(cfg: Config) -> dict:
    rng = np.random.default_rng(cfg.seed)
    agree = cuts = 0
    worst_cmi_gap = 0.0
    pairs = violations = 0
    for k in range(cfg.samples):
        sizes = [int(s) for s in rng.integers(2, cfg.max_alphabet + 1, size=cfg.steps)]
        dist = sampling.random_markov_chain(sizes, rng) if k % 2 else sampling.random_distribution(sizes, rng, 0.5)
        p = embed_classical(dist, outputs=False)
        for split in range(1, cfg.steps):
            for ell in range(1, split + 1):
                part = BlockPartition.from_cut(cfg.steps, split, ell)
                quantum = has_markov_order(p, part, _sharp_memory(p, part)).holds
                agree += quantum == has_classical_markov_order(dist, part)
                cuts += 1
                worst_cmi_gap = max(worst_cmi_gap, abs(quantum_cmi(p, part) - classical_cmi(dist, part)))
                smaller = BlockPartition.from_cut(cfg.steps, split, ell - 1)
                pairs += 1
                violations += reconstruction_residual(dist, smaller) < reconstruction_residual(dist, part) - 1e-12
    return {
        "config": asdict(cfg),
        "cuts": cuts,
        "verdicts_agree": agree,
        "max_cmi_gap": worst_cmi_gap,
        "residual_pairs": pairs,
        "residual_monotonicity_violations": violations,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=Config.samples)
    ap.add_argument("--steps", type=int, default=Config.steps)
    ap.add_argument("--seed", type=int, default=Config.seed)
    a = ap.parse_args()
    print(json.dumps(run(Config(a.samples, a.steps, seed=a.seed)), indent=1))


if __name__ == "__main__":
    main()
