import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmarkov import io
from qmarkov import quantum_maps as qm
from qmarkov import sampling
from qmarkov.classical_process import binary_flip_chain
from qmarkov.cli import EXIT_FALSE, EXIT_INPUT, EXIT_OK, main
from qmarkov.markov_order import appendix_d_state
from qmarkov.process_tensor import ProcessTensor, validate
from qmarkov.tensor_core import LabeledOperator


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv, "--json")
    return code, json.loads(out)


@pytest.fixture
def examples(tmp_path, capsys):
    for name in ("appendix-d", "markovian", "classical-chain"):
        assert run(capsys, "example", name, "--output", tmp_path)[0] == EXIT_OK
    return tmp_path


# -- example ---------------------------------------------------------------------


def test_appendix_d_example_files(examples):
    state = io.load(examples / "appendix-d-state.json")
    assert state.dims == (2, 2, 2)
    assert np.allclose(state.matrix, appendix_d_state().matrix, atol=1e-15)
    manifest = io.read_json(examples / "appendix-d-manifest.json")
    assert manifest["format_version"] == "1"
    assert manifest["partitions"] == [{"history": [0], "memory": [1], "future": [2]}]
    assert {f["name"] for f in manifest["factors"]} == {"s2:i", "s1:o", "s1:i", "s0:o", "s0:i"}


def test_markovian_identity_example_is_phi_structure(examples):
    op = io.load(examples / "markovian-process.json")
    assert op.names == ("s2:i", "s1:o", "s1:i", "s0:o", "s0:i")
    v = np.eye(2).reshape(-1)
    phi = np.outer(v, v)
    # the identity channels link s2:i to s1:o and s1:i to s0:o; s0:i holds |0><0|
    expected = np.kron(np.kron(phi, phi), np.diag([1.0, 0.0]))
    assert np.allclose(op.matrix, expected, atol=1e-15)


def test_classical_chain_example_is_the_chain_table_on_the_diagonal(examples):
    dist = io.load(examples / "classical-chain-distribution.json")
    table = binary_flip_chain(0.3, 3).table
    assert np.allclose(dist.table, table, atol=1e-15)
    op = io.load(examples / "classical-chain-process.json")
    assert op.names == ("s2:o", "s2:i", "s1:o", "s1:i", "s0:o", "s0:i")
    assert np.count_nonzero(op.matrix - np.diag(np.diag(op.matrix))) == 0
    diag = np.real(np.diag(op.matrix)).reshape([2] * 6)
    # outputs are identity factors, so every output index repeats P(x0, x1, x2)
    for o2, x2, o1, x1, o0, x0 in np.ndindex(*diag.shape):
        assert diag[o2, x2, o1, x1, o0, x0] == pytest.approx(table[x0, x1, x2], abs=1e-15)
    manifest = io.read_json(examples / "classical-chain-manifest.json")
    assert manifest["parameters"] == {"p_flip": 0.3, "steps": 3}


def test_example_rejects_bad_parameters(tmp_path, capsys):
    assert run(capsys, "example", "classical-chain", "--p-flip", "1.5", "--output", tmp_path)[0] == EXIT_INPUT
    with pytest.raises(SystemExit) as err:
        main(["example", "nonsense"])
    assert err.value.code == EXIT_INPUT


# -- validate --------------------------------------------------------------------


def test_validate_examples(examples, capsys):
    for name in ("appendix-d", "markovian", "classical-chain"):
        code, rep = run_json(capsys, "validate", examples / f"{name}-process.json")
        assert code == EXIT_OK, name
        assert rep["result"]["valid"] and rep["result"]["violations"] == []


def test_truncated_file_is_an_input_error(examples, tmp_path, capsys):
    text = (examples / "appendix-d-process.json").read_text()
    bad = tmp_path / "truncated.json"
    bad.write_text(text[: len(text) // 2])
    assert run(capsys, "validate", bad)[0] == EXIT_INPUT
    assert run(capsys, "validate", tmp_path / "missing.json")[0] == EXIT_INPUT


def test_wrong_matrix_length_is_an_input_error(tmp_path, capsys):
    d = io.operator_to_dict(LabeledOperator.from_dims(["s0:i"], [2], np.eye(2) / 2))
    d["matrix"] = d["matrix"][:3]
    io.write_json(tmp_path / "short.json", d)
    assert run(capsys, "validate", tmp_path / "short.json")[0] == EXIT_INPUT


def test_psd_but_acausal_matrix_fails_validation(tmp_path, capsys):
    # a generic positive matrix on (s1:i, s0:o, s0:i) with the right trace
    # lets the step-1 input depend on the step-0 output marginal: not causal
    op = sampling.random_process(2, 2, 2, 5).op
    rng = np.random.default_rng(5)
    g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    acausal = g @ g.conj().T
    acausal *= 2 / np.trace(acausal).real
    bad = LabeledOperator(op.factors, acausal)
    assert not validate(ProcessTensor(bad)).valid
    io.write_json(tmp_path / "acausal.json", io.operator_to_dict(bad))
    code, rep = run_json(capsys, "validate", tmp_path / "acausal.json")
    assert code == EXIT_FALSE
    conditions = {v["condition"] for v in rep["result"]["violations"]}
    assert any(c.startswith("causality") for c in conditions)
    assert all(v["magnitude"] > 1e-9 for v in rep["result"]["violations"])


# -- born / condition ------------------------------------------------------------


def test_born_on_examples(examples, capsys):
    code, rep = run_json(capsys, "born", examples / "classical-chain-process.json")
    assert code == EXIT_OK
    probs = {r["outcome"]: r["probability"] for r in rep["result"]["probabilities"]}
    table = binary_flip_chain(0.3, 3).table
    # sharp outcomes are listed earliest step first; the table is indexed the same way
    for label, value in probs.items():
        idx = tuple(int(x) for x in label.split(","))
        assert value == pytest.approx(table[idx], abs=1e-12)
    code, rep = run_json(capsys, "born", examples / "appendix-d-process.json", "--instrument", "tetrahedral")
    assert code == EXIT_OK and rep["result"]["total"] == pytest.approx(1.0, abs=1e-12)


def test_born_with_tester_file_and_mismatch(examples, tmp_path, capsys):
    p = io.load(examples / "markovian-process.json")
    seq = sampling.random_tester(ProcessTensor(p).factors, 3, 2, 9)
    io.write_json(tmp_path / "tester.json", io.tester_to_dict(seq))
    code, rep = run_json(capsys, "born", examples / "markovian-process.json", "--instrument", tmp_path / "tester.json")
    assert code == EXIT_OK and len(rep["result"]["probabilities"]) == 3
    one_step = qm.sequence_from_instruments([qm.sharp_classical_instrument(2)], [1])
    io.write_json(tmp_path / "one.json", io.tester_to_dict(one_step))
    assert run(capsys, "born", examples / "markovian-process.json", "--instrument", tmp_path / "one.json")[0] == EXIT_INPUT


def test_condition_writes_a_valid_process(examples, tmp_path, capsys):
    out = tmp_path / "cond.json"
    argv = ["condition", examples / "appendix-d-process.json", "--steps", "0", "--instrument", "sharp"]
    code, rep = run_json(capsys, *argv, "--outcome", "0", "--output", out)
    assert code == EXIT_OK
    assert rep["result"]["probability"] == pytest.approx(0.5, abs=1e-12)
    cond = io.load(out)
    assert set(cond.names) == {"s2:i", "s1:o", "s1:i"}
    assert validate(ProcessTensor(cond)).valid
    assert run(capsys, *argv, "--outcome", "7")[0] == EXIT_INPUT


def test_condition_on_impossible_outcome_exits_false(examples, capsys):
    # the Markovian example starts in |0>, so outcome 1 at step 0 never occurs
    argv = ["condition", examples / "markovian-process.json", "--steps", "0", "--outcome", "1"]
    code, rep = run_json(capsys, *argv)
    assert code == EXIT_FALSE and rep["result"]["probability"] == 0.0


# -- markov-order / cmi / witness --------------------------------------------------


def test_markov_order_verdicts(examples, capsys):
    d = examples / "appendix-d-process.json"
    assert run(capsys, "markov-order", d, "--instrument", "tetrahedral")[0] == EXIT_OK
    code, rep = run_json(capsys, "markov-order", d, "--instrument", "sharp")
    assert code == EXIT_FALSE and rep["result"]["max_distance"] > 0.01
    assert run(capsys, "markov-order", d, "--instrument", "sharp", "--tolerance", "0.1")[0] == EXIT_OK


@pytest.mark.parametrize("channel", ["identity", "depolarizing", "dephasing"])
@pytest.mark.parametrize("instrument", ["tetrahedral", "sharp", "noisy-tetrahedral", "sharp-feedforward"])
def test_markovian_examples_have_order_one_for_breaking_instruments(tmp_path, capsys, channel, instrument):
    run(capsys, "example", "markovian", "--channel", channel, "--steps", 4, "--output", tmp_path)
    p = tmp_path / "markovian-process.json"
    for part in ("0/1,2/3", "0/1/2,3", "0,1/2/3"):
        code = run(capsys, "markov-order", p, "--partition", part, "--instrument", instrument)[0]
        assert code == EXIT_OK, part


def test_markovian_example_with_identity_instrument_is_not_order_one(examples, capsys):
    # the identity instrument hands the memory input back to the process,
    # so the history reaches the future through it (see the decisions ledger)
    code, rep = run_json(capsys, "markov-order", examples / "markovian-process.json", "--instrument", "identity")
    assert code == EXIT_FALSE
    assert rep["result"]["max_distance"] == pytest.approx(0.75, abs=1e-12)


def test_markov_order_bad_partition(examples, capsys):
    d = examples / "appendix-d-process.json"
    assert run(capsys, "markov-order", d, "--partition", "0/1")[0] == EXIT_INPUT
    assert run(capsys, "markov-order", d, "--partition", "1/0/2")[0] == EXIT_INPUT
    assert run(capsys, "markov-order", d, "--instrument", "nope")[0] == EXIT_INPUT


def test_cmi_values(examples, capsys):
    d = examples / "appendix-d-process.json"
    assert run_json(capsys, "cmi", d)[1]["result"]["cmi"] == pytest.approx(0.05913088491450491, abs=1e-12)
    rep = run_json(capsys, "cmi", d, "--log-base", "e")[1]
    assert rep["result"]["cmi"] == pytest.approx(0.04098640616250382, abs=1e-12)
    assert rep["result"]["log_base"] == "e"
    for name in ("classical-chain-process", "classical-chain-distribution", "markovian-process"):
        code, rep = run_json(capsys, "cmi", examples / f"{name}.json")
        assert code == EXIT_OK and abs(rep["result"]["cmi"]) <= 1e-10, name


def test_witness_default_and_pair(capsys):
    code, rep = run_json(capsys, "witness")
    assert code == EXIT_OK
    res = rep["result"]
    assert res["basis"]["markov_order"] and not res["mixed"]["markov_order"]
    assert res["mixed"]["max_distance"] == pytest.approx(0.020833333333333363, abs=1e-12)
    assert run(capsys, "witness", "--pair", "0,9")[0] == EXIT_INPUT


def test_witness_needs_a_process_in_dual_form(examples, capsys):
    # the measure-prepare basis cannot span the identity channel on the memory step
    p = examples / "markovian-process.json"
    assert main(["witness", str(p), "--instrument", "tetrahedral"]) == EXIT_INPUT
    assert "dual form" in capsys.readouterr().err


# -- serialization and reports ------------------------------------------------------


def _dyadic(rng, d):
    return (rng.integers(-64, 64, size=(d, d)) + 1j * rng.integers(-64, 64, size=(d, d))) / 32


@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 3), min_size=1, max_size=3))
def test_operator_round_trip(seed, dims):
    rng = np.random.default_rng(seed)
    d = int(np.prod(dims))
    names = [f"s{k}:i" for k in range(len(dims))]
    for m, exact in ((_dyadic(rng, d), True), (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)), False)):
        op = LabeledOperator.from_dims(names, dims, m)
        back = io.operator_from_dict(json.loads(io.dumps(io.operator_to_dict(op))))
        assert back.factors == op.factors
        if exact:
            assert np.array_equal(back.matrix, op.matrix)
        else:
            assert np.max(np.abs(back.matrix - op.matrix)) <= 1e-15


def test_distribution_and_tester_round_trip():
    dist = sampling.random_distribution([2, 3, 2], 1)
    assert np.array_equal(io.distribution_from_dict(io.distribution_to_dict(dist)).table, dist.table)
    seq = qm.sequence_from_instruments([qm.tetrahedral_instrument()], [1])
    back = io.tester_from_dict(json.loads(io.dumps(io.tester_to_dict(seq))))
    assert back.labels == seq.labels
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(seq.elements, back.elements))


def test_format_version_is_checked():
    d = io.operator_to_dict(LabeledOperator.from_dims(["a"], [1], np.eye(1)))
    d["format_version"] = "2"
    with pytest.raises(io.ParseError):
        io.operator_from_dict(d)


def test_reports_are_byte_deterministic(examples, tmp_path, capsys):
    d = examples / "appendix-d-process.json"
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        run(capsys, "markov-order", d, "--instrument", "sharp", "--json", "--output", path)
        outs.append(path.read_bytes().replace(path.name.encode(), b""))
    assert outs[0] == outs[1]
    first = run(capsys, "cmi", d)[1]
    assert run(capsys, "cmi", d)[1] == first
    rep = run_json(capsys, "cmi", d)[1]
    assert rep["inputs"] == {str(d): io.digest(d)}
    assert rep["arguments"]["log_base"] == "2"


def test_examples_regenerate_identically(tmp_path, capsys):
    for k in range(2):
        run(capsys, "example", "appendix-d", "--output", tmp_path / str(k))
    for name in ("state", "process", "manifest"):
        f = f"appendix-d-{name}.json"
        assert (tmp_path / "0" / f).read_bytes() == (tmp_path / "1" / f).read_bytes()
