import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnvqe import pauli
from nnvqe.configs import config_to_index, enumerate_sector
from nnvqe.integrals import IntegralSet
from nnvqe.solver import build_dense
from conftest import load_fixture, random_integrals


def ladder_dense(n_qubits, q, dagger):
    """Jordan-Wigner ladder operator as a dense matrix (basis index bit q = qubit q)."""
    dim = 1 << n_qubits
    M = np.zeros((dim, dim))
    for x in range(dim):
        occupied = (x >> q) & 1
        if dagger == bool(occupied):
            continue
        sign = (-1) ** ((x & ((1 << q) - 1)).bit_count() & 1)
        M[x ^ (1 << q), x] = sign
    return M


def test_number_operator_example():
    # a+0 a0 for one spatial orbital with h11=1: I - (Z0 + Z1)/2
    ints = IntegralSet(1, 2, 0, 0.0, np.ones((1, 1)), np.zeros((1, 1, 1, 1)))
    ham = pauli.jordan_wigner(ints)
    terms = {t.ops: t.coeff for t in ham.terms}
    assert terms == {"II": 1.0, "ZI": -0.5, "IZ": -0.5}


def test_hopping_example():
    h1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    ints = IntegralSet(2, 2, 0, 0.0, h1, np.zeros((2,) * 4))
    dense = pauli.jordan_wigner(ints).dense_matrix()
    ref = np.zeros((16, 16))
    for p, q in [(0, 1), (1, 0)]:
        for s in (0, 1):
            ref += ladder_dense(4, 2 * p + s, True) @ ladder_dense(4, 2 * q + s, False)
    assert np.abs(dense - ref).max() < 1e-14


def test_jw_matches_determinant_hamiltonian(rng):
    # sector blocks of the Pauli matrix must equal the Slater-Condon matrix
    ints = random_integrals(rng, 3, n_elec=2)
    mat = pauli.jordan_wigner(ints).dense_matrix()
    assert np.abs(mat.imag).max() < 1e-12
    for sector in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        cfgs = enumerate_sector(3, *sector)
        idx = [config_to_index(c) for c in cfgs]
        block = mat.real[np.ix_(idx, idx)]
        ref = build_dense(ints, cfgs)
        assert np.abs(block - ref).max() < 1e-10


def test_jw_hermitian_and_sector_commuting(rng):
    ints = random_integrals(rng, 2, n_elec=2)
    mat = pauli.jordan_wigner(ints).dense_matrix()
    assert np.abs(mat - mat.conj().T).max() < 1e-12
    for op in (pauli.number_operator(4), pauli.sz_operator(4)):
        om = op.dense_matrix()
        assert np.linalg.norm(mat @ om - om @ mat) < 1e-10


def test_identity_absorbs_core():
    ints = IntegralSet(1, 2, 0, 0.25, np.zeros((1, 1)), np.zeros((1, 1, 1, 1)))
    ham = pauli.jordan_wigner(ints)
    assert ham.identity_coeff == 0.25
    assert ham.n_terms() == 1


def test_masks_reconstruct_matrix(rng):
    ints = random_integrals(rng, 2, n_elec=2)
    ham = pauli.jordan_wigner(ints)
    flip, yz, n_y, coeff = ham.masks()
    dim = 1 << ham.n_qubits
    ref = ham.dense_matrix()
    mat = np.zeros((dim, dim), dtype=complex)
    phase_table = (1.0, 1j, -1.0, -1j)
    for k in range(len(coeff)):
        for x in range(dim):
            sign = (-1) ** (int(x & int(yz[k])).bit_count() & 1)
            mat[x ^ int(flip[k]), x] += coeff[k] * phase_table[n_y[k] % 4] * sign
    assert np.abs(mat - ref).max() < 1e-12


def test_diagonal_element(rng):
    ints = random_integrals(rng, 3, n_elec=2)
    ham = pauli.jordan_wigner(ints)
    dense = ham.dense_matrix().real
    for cfg in ("110000", "101001", "000000", "111111"):
        assert abs(ham.diagonal_element(cfg) - dense[config_to_index(cfg), config_to_index(cfg)]) < 1e-10


def test_tailor_zero_threshold_is_identity(rng):
    ham = pauli.jordan_wigner(random_integrals(rng, 2, n_elec=2))
    out, dropped = pauli.tailor(ham, 0.0)
    assert dropped == 0.0
    assert {t.ops: t.coeff for t in out.terms} == {t.ops: t.coeff for t in ham.terms}


def test_tailor_infinite_threshold_keeps_identity(rng):
    ham = pauli.jordan_wigner(random_integrals(rng, 2, n_elec=2))
    out, dropped = pauli.tailor(ham, float("inf"))
    assert out.n_terms() == 1
    assert out.terms[0].ops == "I" * ham.n_qubits
    expected = sum(abs(t.coeff) for t in ham.terms if set(t.ops) != {"I"})
    assert abs(dropped - expected) < 1e-12


def test_tailor_rejects_negative(rng):
    ham = pauli.jordan_wigner(random_integrals(rng, 2, n_elec=2))
    with pytest.raises(ValueError):
        pauli.tailor(ham, -1.0)


def test_tailor_energy_shift_bounded_by_dropped_weight():
    ints = load_fixture("lih_2.60")
    from nnvqe.integrals import ActiveSpace, apply_active_space
    sub = apply_active_space(ints, ActiveSpace(frozen=(0,), active=(1, 2, 5)))
    ham = pauli.jordan_wigner(sub)
    e_full = np.linalg.eigvalsh(ham.dense_matrix().real)[0]
    for thr in (1e-4, 1e-3, 1e-2):
        cut, dropped = pauli.tailor(ham, thr)
        e_cut = np.linalg.eigvalsh(cut.dense_matrix().real)[0]
        assert abs(e_cut - e_full) <= dropped + 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), thr=st.floats(0, 0.5))
def test_tailor_idempotent_and_monotone(seed, thr):
    rng = np.random.default_rng(seed)
    ham = pauli.jordan_wigner(random_integrals(rng, 2, n_elec=2))
    once, d1 = pauli.tailor(ham, thr)
    twice, d2 = pauli.tailor(once, thr)
    assert d2 == 0.0
    assert {t.ops: t.coeff for t in twice.terms} == {t.ops: t.coeff for t in once.terms}
    tighter, _ = pauli.tailor(ham, 2 * thr + 1e-3)
    assert tighter.n_terms() <= once.n_terms()


def test_json_roundtrip(tmp_path, rng):
    ham = pauli.jordan_wigner(random_integrals(rng, 2, n_elec=2))
    path = tmp_path / "ham.json"
    ham.save_json(path)
    back = pauli.load_json(path)
    assert back.n_qubits == ham.n_qubits
    assert {t.ops: t.coeff for t in back.terms} == {t.ops: t.coeff for t in ham.terms}


def test_duplicate_terms_rejected():
    with pytest.raises(ValueError):
        pauli.QubitHamiltonian(2, [pauli.PauliString("XX", 1.0),
                                   pauli.PauliString("XX", 2.0)])


def test_bad_letters_rejected():
    with pytest.raises(ValueError):
        pauli.PauliString("XQ", 1.0)
