import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qmarkov import quantum_maps as qm
from qmarkov import sampling
from qmarkov.library import noisy_mixing
from qmarkov.tensor_core import FactorError, LabeledOperator

seeds = st.integers(0, 2**32 - 1)
PAULI_KRAUS = [np.eye(2) / 2, qm.PAULI_X / 2, qm.PAULI_Y / 2, qm.PAULI_Z / 2]


def state(m, name="in"):
    m = np.asarray(m, dtype=complex)
    return LabeledOperator.from_dims([name], [m.shape[0]], m)


# -- step labels -------------------------------------------------------------------


def test_step_labels_and_canonical_order():
    assert qm.parse_step_factor("s12:o") == (12, "o")
    with pytest.raises(FactorError):
        qm.parse_step_factor("x0:i")
    names = ["s0:i", "s2:i", "s1:o", "s0:o", "s1:i"]
    assert qm.canonical_order(names) == ["s2:i", "s1:o", "s1:i", "s0:o", "s0:i"]
    assert qm.steps_of(names) == [0, 1, 2]


# -- Choi maps -----------------------------------------------------------------------


def test_identity_choi_is_unnormalized_phi():
    choi = qm.choi_from_kraus([np.eye(2)]).choi.matrix
    v = np.eye(2).reshape(-1)
    assert np.allclose(choi, np.outer(v, v))
    assert np.trace(choi) == pytest.approx(2)
    assert np.linalg.matrix_rank(choi) == 1


def test_single_projector_kraus_and_depolarizing_choi():
    keep = qm.choi_from_kraus([np.diag([1.0, 0.0])])
    assert keep.choi.trace() == pytest.approx(1)
    assert not keep.is_cptp()
    depol = qm.choi_from_kraus(PAULI_KRAUS)
    assert np.allclose(depol.choi.matrix, np.eye(4) / 2)
    assert np.allclose(qm.depolarizing_map(2).choi.matrix, np.eye(4) / 2)
    assert depol.is_cptp()


def test_inconsistent_kraus_shapes_raise():
    with pytest.raises(FactorError):
        qm.choi_from_kraus([np.eye(2), np.eye(3)])


def test_non_positive_choi_rejected():
    with pytest.raises(qm.InvalidInstrumentError):
        qm.CpMap.from_choi(np.diag([1.0, -1.0, 0, 0]), 2, 2)


def test_apply_map_examples():
    rho = sampling.random_density(2, 5)
    assert np.allclose(qm.apply_map(qm.identity_map(2), state(rho)).matrix, rho)
    out = qm.apply_map(qm.choi_from_kraus([np.diag([1.0, 0.0])]), state(np.eye(2) / 2))
    assert np.allclose(out.matrix, np.diag([0.5, 0.0]))
    plus = np.full((2, 2), 0.5)
    assert np.allclose(qm.apply_map(qm.choi_from_kraus(PAULI_KRAUS), state(plus)).matrix, np.eye(2) / 2)
    with pytest.raises(FactorError):
        qm.apply_map(qm.identity_map(2), state(np.eye(3) / 3))


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), seeds)
def test_choi_then_apply_matches_direct_kraus(d_in, d_out, rank, seed):
    rng = np.random.default_rng(seed)
    kraus = [rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in)) for _ in range(rank)]
    rho = sampling.random_density(d_in, rng)
    expected = sum(k @ rho @ k.conj().T for k in kraus)
    got = qm.apply_map(qm.choi_from_kraus(kraus), state(rho)).matrix
    assert np.allclose(got, expected, atol=1e-10)


@given(seeds)
def test_apply_to_factor_acts_locally(seed):
    rng = np.random.default_rng(seed)
    rho = sampling.random_density(6, rng)
    joint = LabeledOperator.from_dims(["a", "b"], [2, 3], rho)
    kraus = oracles.random_kraus_instrument(3, 2, 1, rng, rank=2)[0]
    m = qm.choi_from_kraus(kraus)
    got = qm.apply_to_factor(joint, "b", m)
    expected = sum(np.kron(np.eye(2), k) @ rho @ np.kron(np.eye(2), k).conj().T for k in kraus)
    assert got.dims == (2, 2)
    assert np.allclose(got.matrix, expected, atol=1e-10)


# -- instruments -----------------------------------------------------------------------


def test_valid_instruments():
    assert qm.validate_instrument(qm.tetrahedral_instrument()).valid
    assert qm.validate_instrument(qm.tetrahedral_instrument(np.eye(2) / 2)).valid
    for d in (2, 3):
        sharp = qm.sharp_classical_instrument(d)
        assert qm.validate_instrument(sharp).valid
        assert len(sharp) == d
        assert all(m.choi.trace() == pytest.approx(1) for m in sharp.elements)
        assert sum(m.choi.trace() for m in sharp.elements) == pytest.approx(d)


def test_sharp_qubit_elements_are_projector_pairs():
    sharp = qm.sharp_classical_instrument(2)
    for x, m in enumerate(sharp.elements):
        p = np.diag(np.eye(2)[x])
        assert np.array_equal(m.choi.matrix, np.kron(p, p))
    with pytest.raises(ValueError):
        qm.sharp_classical_instrument(1)


def test_missing_projector_reports_quarter_d_deviation():
    effects = qm.tetrahedral_effects()[:3]
    report = qm.validate_instrument(qm.povm_instrument(effects))
    assert not report.valid
    assert report.deviation == pytest.approx(0.25 * 2, abs=1e-12)


@given(st.integers(2, 4), st.integers(1, 4), st.integers(2, 4), seeds)
def test_random_instruments_are_probability_complete(d_in, d_out, n, seed):
    rng = np.random.default_rng(seed)
    inst = sampling.random_instrument(d_in, d_out, n, rng, kraus_rank=2)
    assert qm.validate_instrument(inst).valid
    rho = sampling.random_density(d_in, rng)
    total = 0.0
    for m in inst.elements:
        probe = np.kron(np.eye(m.d_out), rho.T)
        total += np.real(np.trace(m.choi.matrix @ probe))
    assert total == pytest.approx(1.0, abs=1e-10)


# -- dual sets ---------------------------------------------------------------------------


def test_tetrahedral_duals_match_closed_form():
    basis = [state(e, "q") for e in qm.tetrahedral_effects()]
    ds = qm.dual_set(basis)
    assert ds.biorthogonality_error() <= 1e-12
    for got, closed in zip(ds.duals, qm.tetrahedral_duals()):
        assert np.allclose(got.matrix, closed, atol=1e-12)


def test_orthonormal_basis_is_self_dual():
    units = [np.zeros((2, 2)) for _ in range(4)]
    for k, u in enumerate(units):
        u[k // 2, k % 2] = 1.0
    ds = qm.dual_set([state(u, "q") for u in units])
    for b, d in zip(ds.basis, ds.duals):
        assert np.allclose(d.matrix, b.matrix.conj().T)


@given(seeds)
def test_random_basis_duals_against_gram_oracle(seed):
    rng = np.random.default_rng(seed)
    mats = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4)]
    ds = qm.dual_set([state(m, "q") for m in mats])
    # oracle: solve tr(B_x D_y) = delta_xy directly in vectorized form
    a = np.array([m.T.reshape(-1) for m in mats])
    oracle = np.linalg.solve(a, np.eye(4))
    for y, d in enumerate(ds.duals):
        assert np.allclose(d.matrix.reshape(-1), oracle[:, y], atol=1e-9)
    assert ds.biorthogonality_error() <= 1e-9
    # dualizing the duals returns the basis
    back = qm.dual_set(list(ds.duals))
    for b, d in zip(ds.basis, back.duals):
        assert np.allclose(d.matrix, b.matrix, atol=1e-9)


def test_dependent_basis_raises():
    with pytest.raises(ValueError):
        qm.dual_set([state(np.eye(2), "q"), state(2 * np.eye(2), "q")])


# -- mixing ----------------------------------------------------------------------------


def test_identity_mixing_returns_original():
    base = qm.tetrahedral_instrument()
    mixed = qm.mix_instrument(base, np.eye(4))
    for a, b in zip(base.elements, mixed.elements):
        assert np.allclose(a.choi.matrix, b.choi.matrix)


def test_doubly_stochastic_mixing_of_sharp_is_valid():
    mixed = qm.mix_instrument(qm.sharp_classical_instrument(2), noisy_mixing(2, 0.2))
    assert qm.validate_instrument(mixed).valid


def test_negative_coefficient_breaks_positivity():
    c = np.array([[1.0, -0.5], [0.0, 1.5]])
    with pytest.raises(qm.InvalidInstrumentError):
        qm.mix_instrument(qm.sharp_classical_instrument(2), c)


def test_non_stochastic_mixing_breaks_trace_preservation():
    with pytest.raises(qm.InvalidInstrumentError):
        qm.mix_instrument(qm.sharp_classical_instrument(2), 0.5 * np.eye(2))


@given(seeds)
def test_permutation_mixing_relabels_probabilities(seed):
    rng = np.random.default_rng(seed)
    base = sampling.random_instrument(2, 2, 3, rng)
    perm = rng.permutation(3)
    mixed = qm.mix_instrument(base, np.eye(3)[:, perm])
    rho = sampling.random_density(2, rng)

    def probs(inst):
        return [np.real(np.trace(m.choi.matrix @ np.kron(np.eye(2), rho.T))) for m in inst.elements]

    assert np.allclose(np.array(probs(base))[perm], probs(mixed), atol=1e-12)


# -- sequences ---------------------------------------------------------------------------


def test_identity_sequence_is_phi_tensor_power():
    seq = qm.tensor_sequence([qm.identity_map(2)] * 2)
    v = np.eye(2).reshape(-1)
    phi = np.outer(v, v)
    assert seq.names == ("s1:o", "s1:i", "s0:o", "s0:i")
    assert np.allclose(seq.matrix, np.kron(phi, phi))


def test_single_step_sequence_is_the_map_itself():
    m = qm.depolarizing_map(2, 0.3)
    assert np.array_equal(qm.tensor_sequence([m]).matrix, m.choi.matrix)


def test_two_sharp_steps_form_a_valid_tester():
    seq = qm.sequence_from_instruments([qm.sharp_classical_instrument(2)] * 2)
    assert len(seq) == 4
    assert seq.labels == ("0,0", "0,1", "1,0", "1,1")
    assert qm.validate_instrument(seq).valid


def test_label_collision_raises():
    with pytest.raises(FactorError):
        qm.tensor_sequence([qm.identity_map(2)] * 2, [1, 1])


def test_sequence_with_trivial_final_output():
    seq = qm.sequence_from_instruments(
        [qm.sharp_classical_instrument(2), qm.sharp_classical_instrument(2, with_output=False)]
    )
    assert seq.elements[0].names == ("s1:i", "s0:o", "s0:i")
    assert qm.validate_instrument(seq).valid


def test_broken_tester_levels():
    seq = qm.sequence_from_instruments([qm.sharp_classical_instrument(2)] * 2)
    broken = qm.InstrumentSequence(seq.elements[:3], seq.labels[:3])
    report = qm.validate_instrument(broken)
    assert not report.valid


@given(st.integers(1, 3), st.booleans(), seeds)
def test_random_correlated_testers_are_valid(n_steps, final_output, seed):
    rng = np.random.default_rng(seed)
    p = sampling.random_process(n_steps, 2, 2, rng, final_output)
    seq = sampling.random_tester(p.factors, 3, 2, rng)
    report = qm.validate_instrument(seq)
    assert report.valid, report.levels
    assert all(report.psd)


def test_discard_tester_is_deterministic():
    p = sampling.random_process(2, 2, 2, 0)
    d = qm.discard_tester(p.factors)
    assert qm.validate_instrument(qm.InstrumentSequence((d,))).valid
    # factors s1:i, s0:o, s0:i: identity on inputs, white noise handed back
    assert np.allclose(d.matrix, np.kron(np.kron(np.eye(2), np.eye(2) / 2), np.eye(2)))
