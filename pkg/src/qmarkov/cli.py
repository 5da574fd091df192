"""Command-line front end.

Exit codes: 0 success or a true verdict, 1 an analyzed-false verdict,
2 an input error (unreadable file, mismatched factors, bad arguments).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from . import quantum_maps as qm
from .classical_process import (
    BlockPartition,
    JointDistribution,
    ZeroProbabilityError,
    binary_flip_chain,
    classical_cmi,
)
from .library import INSTRUMENT_NAMES, named_instrument, sharp_with_feedforward
from .markov_order import (
    APPENDIX_D_PARTITION,
    TOL_FACTOR,
    appendix_d_process,
    appendix_d_state,
    equal_mixing,
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
from .tensor_core import TOL_TRACE, FactorError, LabeledOperator

EXIT_OK, EXIT_FALSE, EXIT_INPUT = 0, 1, 2
TOL_BORN = 1e-10
EXAMPLES = ("appendix-d", "markovian", "classical-chain")
CHANNELS = ("identity", "depolarizing", "dephasing")


class InputError(Exception):
    pass


# -- argument helpers ------------------------------------------------------------


def log_base(text: str) -> float:
    return {"2": 2.0, "e": float(np.e)}[text]


def parse_partition(text: str) -> BlockPartition:
    """``"H/M/F"`` with comma-separated steps per block, e.g. ``"0/1,2/3"``."""
    blocks = text.split("/")
    if len(blocks) != 3:
        raise InputError(f"partition {text!r} must have the form H/M/F")
    try:
        parsed = [tuple(int(s) for s in b.split(",") if s.strip()) for b in blocks]
        return BlockPartition(*parsed)
    except ValueError as exc:
        raise InputError(f"bad partition {text!r}: {exc}") from exc


def default_partition(n_steps: int) -> BlockPartition:
    if n_steps < 3:
        raise InputError(f"need --partition for a {n_steps}-step input")
    return BlockPartition((0,), tuple(range(1, n_steps - 1)), (n_steps - 1,))


def load_process(path: str) -> ProcessTensor:
    obj = io.load(path)
    if not isinstance(obj, LabeledOperator):
        raise InputError(f"{path} holds a {type(obj).__name__}, expected an operator")
    return ProcessTensor(obj)


def instrument_on(p: ProcessTensor, spec: str, steps) -> qm.InstrumentSequence:
    """A tester file, or a named single-step instrument repeated on ``steps``."""
    steps = list(steps)
    if Path(spec).is_file():
        seq = io.load(spec)
        if not isinstance(seq, qm.InstrumentSequence):
            raise InputError(f"{spec} is not a tester file")
        if sorted(seq.steps) != sorted(steps):
            raise InputError(f"tester acts on steps {seq.steps}, expected {steps}")
        return seq
    instruments = []
    for j in steps:
        dim = p.op.factor(qm.step_in(j)).dim
        with_output = qm.step_out(j) in p.op.names
        if spec == "sharp-feedforward":
            instruments.append(sharp_with_feedforward(dim))
        elif spec in INSTRUMENT_NAMES:
            instruments.append(named_instrument(spec, dim, with_output))
        else:
            raise InputError(f"{spec!r} is neither a file nor one of {INSTRUMENT_NAMES + ('sharp-feedforward',)}")
    return qm.sequence_from_instruments(instruments, steps, spec)


# -- reports ---------------------------------------------------------------------


def report(args, command: str, inputs, tolerances: dict, result: dict) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "json")}
    return {
        "command": command,
        "arguments": echo,
        "inputs": {str(p): io.digest(p) for p in inputs},
        "tolerances": tolerances,
        "result": result,
    }


def _text_lines(d, indent=""):
    for key, value in d.items():
        if isinstance(value, dict):
            yield f"{indent}{key}:"
            yield from _text_lines(value, indent + "  ")
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            yield f"{indent}{key}:"
            for row in value:
                yield indent + "  - " + "  ".join(f"{k}={v}" for k, v in row.items())
        else:
            yield f"{indent}{key}: {value}"


def render(rep: dict, as_json: bool) -> str:
    if as_json:
        return json.dumps(rep, indent=1, sort_keys=True) + "\n"
    return "\n".join(_text_lines(rep)) + "\n"


def emit(args, rep: dict, to_file: bool = True) -> None:
    text = render(rep, args.json)
    if to_file and args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    p = load_process(args.process)
    tol = args.tolerance if args.tolerance is not None else TOL_TRACE
    r = validate(p, tol)
    result = {
        "valid": r.valid,
        "steps": p.step_count,
        "min_eigenvalue": r.min_eigenvalue,
        "hermiticity": r.hermiticity,
        "trace_deviation": r.trace_deviation,
        "causality": dict(sorted(r.causality.items())),
        "violations": [{"condition": k, "magnitude": v} for k, v in r.violations()],
    }
    emit(args, report(args, "validate", [args.process], {"validity": tol}, result))
    return EXIT_OK if r.valid else EXIT_FALSE


def _channel(name: str, dim: int) -> qm.CpMap:
    if name == "identity":
        return qm.identity_map(dim)
    if name == "depolarizing":
        return qm.depolarizing_map(dim, 0.5)
    if name == "dephasing":
        return qm.Instrument(named_instrument("sharp", dim).elements, "dephasing").average()
    raise InputError(f"unknown channel {name!r}; choose from {CHANNELS}")


def cmd_example(args) -> int:
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    partitions = []
    params: dict = {}

    def put(role: str, d: dict):
        path = out / f"{args.name}-{role}.json"
        io.write_json(path, d)
        files[role] = path.name

    if args.name == "appendix-d":
        put("state", io.operator_to_dict(appendix_d_state()))
        p = appendix_d_process()
        put("process", io.operator_to_dict(p.op))
        partitions.append(APPENDIX_D_PARTITION)
    elif args.name == "markovian":
        if args.steps < 1:
            raise InputError("--steps must be positive")
        rho0 = np.diag([1.0, 0.0])
        p = markovian_process([_channel(args.channel, 2)] * (args.steps - 1), rho0)
        put("process", io.operator_to_dict(p.op))
        params = {"steps": args.steps, "channel": args.channel, "initial_state": "|0><0|"}
    elif args.name == "classical-chain":
        if not 0.0 <= args.p_flip <= 1.0 or args.steps < 1:
            raise InputError("need 0 <= --p-flip <= 1 and positive --steps")
        dist = binary_flip_chain(args.p_flip, args.steps)
        put("distribution", io.distribution_to_dict(dist))
        p = embed_classical(dist)
        put("process", io.operator_to_dict(p.op))
        params = {"steps": args.steps, "p_flip": args.p_flip}
    else:
        raise InputError(f"unknown example {args.name!r}; choose from {EXAMPLES}")

    if not partitions and p.step_count >= 3:
        partitions.append(default_partition(p.step_count))
    manifest = {
        "format_version": io.FORMAT_VERSION,
        "kind": "manifest",
        "example": args.name,
        "parameters": params,
        "files": files,
        "factors": [{"name": f.name, "dim": f.dim} for f in p.factors],
        "partitions": [io.partition_to_dict(b) for b in partitions],
    }
    io.write_json(out / f"{args.name}-manifest.json", manifest)
    files["manifest"] = f"{args.name}-manifest.json"
    result = {"directory": str(out), "files": files}
    emit(args, report(args, "example", [], {}, result), to_file=False)
    return EXIT_OK


def cmd_born(args) -> int:
    p = load_process(args.process)
    seq = instrument_on(p, args.instrument, p.steps)
    probs = [{"outcome": label, "probability": born_probability(p, e)} for label, e in seq]
    total = float(sum(r["probability"] for r in probs))
    tol = args.tolerance if args.tolerance is not None else TOL_BORN
    ok = abs(total - 1.0) <= tol
    result = {"probabilities": probs, "total": total, "normalized": ok}
    emit(args, report(args, "born", _files(args.process, args.instrument), {"sum": tol}, result))
    return EXIT_OK if ok else EXIT_FALSE


def cmd_condition(args) -> int:
    p = load_process(args.process)
    steps = [int(s) for s in args.steps.split(",")]
    seq = instrument_on(p, args.instrument, steps)
    if args.outcome not in seq.labels:
        raise InputError(f"outcome {args.outcome!r} not among {list(seq.labels)}")
    element = seq.elements[seq.labels.index(args.outcome)]
    inputs = _files(args.process, args.instrument)
    try:
        cond = condition(p, element, args.outcome)
    except ZeroProbabilityError as exc:
        emit(args, report(args, "condition", inputs, {}, {"probability": 0.0, "error": str(exc)}), to_file=False)
        return EXIT_FALSE
    if args.output:
        io.write_json(args.output, io.operator_to_dict(cond.op))
    result = {
        "outcome": args.outcome,
        "steps": steps,
        "probability": cond.probability,
        "remaining_factors": [f.name for f in cond.op.factors],
        "written_to": args.output,
    }
    emit(args, report(args, "condition", inputs, {}, result), to_file=False)
    return EXIT_OK


def cmd_markov_order(args) -> int:
    p = load_process(args.process)
    part = parse_partition(args.partition) if args.partition else default_partition(p.step_count)
    seq = instrument_on(p, args.instrument, part.memory)
    tol = args.tolerance if args.tolerance is not None else TOL_FACTOR
    verdict = has_markov_order(p, part, seq, tol)
    result = {
        "partition": io.partition_to_dict(part),
        "instrument": seq.name,
        "markov_order": verdict.holds,
        "memory_length": len(part.memory),
        "max_distance": verdict.max_distance,
        "outcomes": [
            {"outcome": o.label, "probability": o.probability, "distance": o.distance, "skipped": o.skipped}
            for o in verdict.outcomes
        ],
    }
    emit(args, report(args, "markov-order", _files(args.process, args.instrument), {"factorization": tol}, result))
    return EXIT_OK if verdict.holds else EXIT_FALSE


def cmd_cmi(args) -> int:
    obj = io.load(args.input)
    base = log_base(args.log_base)
    if isinstance(obj, JointDistribution):
        part = parse_partition(args.partition) if args.partition else default_partition(obj.step_count)
        value, kind = classical_cmi(obj, part, base), "classical"
    elif isinstance(obj, LabeledOperator):
        p = ProcessTensor(obj)
        part = parse_partition(args.partition) if args.partition else default_partition(p.step_count)
        value, kind = quantum_cmi(p, part, base), "quantum"
    else:
        raise InputError(f"{args.input}: cmi needs an operator or distribution file")
    result = {"kind": kind, "cmi": value, "log_base": args.log_base, "partition": io.partition_to_dict(part)}
    emit(args, report(args, "cmi", [args.input], {}, result))
    return EXIT_OK


def cmd_witness(args) -> int:
    if args.process:
        p = load_process(args.process)
        part = parse_partition(args.partition) if args.partition else default_partition(p.step_count)
    else:
        p = appendix_d_process()
        part = parse_partition(args.partition) if args.partition else APPENDIX_D_PARTITION
    basis = instrument_on(p, args.instrument, part.memory)
    try:
        pair = tuple(int(s) for s in args.pair.split(","))
        coeffs = equal_mixing(len(basis), pair)
    except (ValueError, IndexError) as exc:
        raise InputError(f"bad --pair {args.pair!r}: {exc}") from exc
    tol = args.tolerance if args.tolerance is not None else TOL_FACTOR
    w = theorem2_witness(p, part, basis, coeffs, tol)
    result = {
        "partition": io.partition_to_dict(part),
        "basis": {"instrument": basis.name, "markov_order": w.basis.holds, "max_distance": w.basis.max_distance},
        "mixed": {"pair": list(pair), "markov_order": w.mixed.holds, "max_distance": w.mixed.max_distance},
        "reconstruction_error": w.reconstruction_error,
        "linearity_error": w.linearity_error,
        "future_spread": w.future_spread,
        "history_spread": w.history_spread,
        "demonstrates": w.demonstrates,
    }
    inputs = _files(args.process, args.instrument) if args.process else _files(args.instrument)
    emit(args, report(args, "witness", inputs, {"factorization": tol}, result))
    return EXIT_OK if w.demonstrates else EXIT_FALSE


def _files(*specs):
    return [s for s in specs if s and Path(s).is_file()]


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=float, default=None, help="override the command's numerical threshold")
    common.add_argument("--log-base", choices=("2", "e"), default="2")
    common.add_argument("--output", default=None, help="report path (example: directory; condition: operator file)")
    common.add_argument("--json", action="store_true", help="machine-readable report")

    parser = argparse.ArgumentParser(prog="qmarkov", description="Process tensors and quantum Markov order.")
    sub = parser.add_subparsers(dest="command", required=True)
    instr_help = f"tester file or one of {', '.join(INSTRUMENT_NAMES + ('sharp-feedforward',))}"

    s = sub.add_parser("validate", parents=[common], help="check positivity and causality of a process file")
    s.add_argument("process")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("example", parents=[common], help="write an example process and manifest")
    s.add_argument("name", choices=EXAMPLES)
    s.add_argument("--steps", type=int, default=3)
    s.add_argument("--p-flip", type=float, default=0.3)
    s.add_argument("--channel", choices=CHANNELS, default="identity")
    s.set_defaults(func=cmd_example)

    s = sub.add_parser("born", parents=[common], help="outcome probabilities of a tester on every step")
    s.add_argument("process")
    s.add_argument("--instrument", default="sharp", help=instr_help)
    s.set_defaults(func=cmd_born)

    s = sub.add_parser("condition", parents=[common], help="condition a process on one outcome")
    s.add_argument("process")
    s.add_argument("--steps", required=True, help="comma-separated steps the tester acts on")
    s.add_argument("--instrument", default="sharp", help=instr_help)
    s.add_argument("--outcome", required=True)
    s.set_defaults(func=cmd_condition)

    s = sub.add_parser("markov-order", parents=[common], help="instrument-specific Markov order")
    s.add_argument("process")
    s.add_argument("--partition", default=None, help="H/M/F steps, e.g. 0/1/2")
    s.add_argument("--instrument", default="tetrahedral", help=instr_help)
    s.set_defaults(func=cmd_markov_order)

    s = sub.add_parser("cmi", parents=[common], help="conditional mutual information I(F:H|M)")
    s.add_argument("input", help="operator or distribution file")
    s.add_argument("--partition", default=None)
    s.set_defaults(func=cmd_cmi)

    s = sub.add_parser("witness", parents=[common], help="basis tester versus a mixture of its outcomes")
    s.add_argument("process", nargs="?", default=None, help="defaults to the built-in tetrahedral example")
    s.add_argument("--partition", default=None)
    s.add_argument("--instrument", default="tetrahedral", help=instr_help)
    s.add_argument("--pair", default="0,1", help="two outcomes to mix equally")
    s.set_defaults(func=cmd_witness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, io.ParseError, FactorError, qm.InvalidInstrumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
