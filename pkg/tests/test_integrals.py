import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnvqe.integrals import (ActiveSpace, FcidumpError, IntegralSet,
                             apply_active_space, freeze_lowest, parse_fcidump,
                             write_fcidump)
from conftest import load_fixture, random_integrals


def test_parse_core_only():
    text = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n 0.7137 0 0 0 0\n"
    ints = parse_fcidump(text)
    assert ints.n_orb == 1 and ints.n_elec == 2
    assert ints.e_core == 0.7137
    assert np.all(ints.h1 == 0) and np.all(ints.h2 == 0)


def test_parse_one_orbital_ci():
    # 1 orbital, 2 electrons: E = 2 h11 + (11|11) + e_core
    text = ("&FCI NORB=1,NELEC=2,MS2=0,\n&END\n"
            " 0.5 0 0 0 0\n -1.25 1 1 0 0\n 0.675 1 1 1 1\n")
    ints = parse_fcidump(text)
    e = 2 * ints.h1[0, 0] + ints.h2[0, 0, 0, 0] + ints.e_core
    assert abs(e - (2 * -1.25 + 0.675 + 0.5)) < 1e-15


def test_parse_d_exponent_and_slash_terminator():
    text = "&FCI NORB=1,NELEC=2\n/\n 1.0D-01 1 1 0 0\n"
    ints = parse_fcidump(text)
    assert ints.h1[0, 0] == 0.1


def test_parse_expands_eightfold_symmetry():
    text = ("&FCI NORB=3,NELEC=2,MS2=0,\n&END\n"
            " 0.25 2 1 3 2\n")
    g = parse_fcidump(text).h2
    val = g[1, 0, 2, 1]
    images = [g[1, 0, 2, 1], g[0, 1, 2, 1], g[1, 0, 1, 2], g[0, 1, 1, 2],
              g[2, 1, 1, 0], g[2, 1, 0, 1], g[1, 2, 1, 0], g[1, 2, 0, 1]]
    assert val == 0.25
    assert all(x == val for x in images)


def test_parse_header_errors():
    with pytest.raises(FcidumpError):
        parse_fcidump("NORB=2\n&END\n")
    with pytest.raises(FcidumpError):
        parse_fcidump("&FCI NORB=2,NELEC=2,\n 1.0 1 1 0 0\n")  # no terminator
    with pytest.raises(FcidumpError):
        parse_fcidump("&FCI NELEC=2,\n&END\n")  # missing NORB


def test_parse_index_out_of_range():
    with pytest.raises(FcidumpError):
        parse_fcidump("&FCI NORB=2,NELEC=2,\n&END\n 1.0 3 1 0 0\n")


def test_parse_conflicting_duplicates():
    text = ("&FCI NORB=2,NELEC=2,\n&END\n"
            " 1.0 1 2 0 0\n 1.5 2 1 0 0\n")
    with pytest.raises(FcidumpError):
        parse_fcidump(text)
    # consistent duplicates are fine
    ok = "&FCI NORB=2,NELEC=2,\n&END\n 1.0 1 2 0 0\n 1.0 2 1 0 0\n"
    assert parse_fcidump(ok).h1[0, 1] == 1.0


def test_parse_bad_value_token():
    with pytest.raises(FcidumpError):
        parse_fcidump("&FCI NORB=1,NELEC=2,\n&END\n abc 1 1 0 0\n")


def test_roundtrip_random(rng, tmp_path):
    ints = random_integrals(rng, 4, n_elec=4)
    path = tmp_path / "t.fcidump"
    write_fcidump(ints, path)
    back = parse_fcidump(path.read_text())
    assert back.n_orb == ints.n_orb and back.n_elec == ints.n_elec
    assert back.ms2 == ints.ms2
    assert back.e_core == ints.e_core
    assert np.array_equal(back.h1, ints.h1)
    assert np.array_equal(back.h2, ints.h2)


def test_roundtrip_fixture():
    ints = load_fixture("lih_2.60")
    back = parse_fcidump(write_fcidump(ints))
    assert np.array_equal(back.h1, ints.h1)
    assert np.array_equal(back.h2, ints.h2)
    assert back.e_core == ints.e_core


def test_lih_fixture_shape():
    ints = load_fixture("lih_2.60")
    assert ints.n_orb == 6 and ints.n_elec == 4 and ints.ms2 == 0
    ints.validate()


def test_validate_rejects_broken_symmetry(rng):
    ints = random_integrals(rng, 3, n_elec=2)
    bad = IntegralSet(ints.n_orb, ints.n_elec, ints.ms2, ints.e_core,
                      ints.h1, ints.h2.copy())
    bad.h2[0, 1, 2, 2] += 1.0
    with pytest.raises(ValueError):
        bad.validate()


def test_active_space_identity(rng):
    ints = random_integrals(rng, 4, n_elec=4)
    out = apply_active_space(ints, ActiveSpace(frozen=(), active=(0, 1, 2, 3)))
    assert np.array_equal(out.h1, ints.h1)
    assert np.array_equal(out.h2, ints.h2)
    assert out.e_core == ints.e_core and out.n_elec == ints.n_elec


def test_active_space_overlap_rejected():
    with pytest.raises(ValueError):
        ActiveSpace(frozen=(0,), active=(0, 1))


def test_active_space_bad_index():
    ints = load_fixture("lih_2.60")
    with pytest.raises(ValueError):
        apply_active_space(ints, ActiveSpace(frozen=(9,), active=(0, 1)))


def test_freeze_lowest():
    space = freeze_lowest(6, 2)
    assert space.frozen == (0, 1) and space.active == (2, 3, 4, 5)
    with pytest.raises(ValueError):
        freeze_lowest(4, 5)


def test_frozen_core_oracle(rng):
    # freezing orbital 0 of a 2-orbital system must equal the full-space
    # Hamiltonian restricted to determinants with orbital 0 doubly occupied
    from nnvqe.solver import build_dense
    ints = random_integrals(rng, 2, n_elec=4)
    full = build_dense(ints, ["1111"])  # both orbitals doubly occupied
    reduced = apply_active_space(ints, ActiveSpace(frozen=(0,), active=(1,)))
    red_mat = build_dense(reduced, ["11"])
    assert abs(full[0, 0] - red_mat[0, 0]) < 1e-10


def test_frozen_core_oracle_three_orbitals(rng):
    # 3 orbitals, 4 electrons, freeze orbital 0: compare against the full
    # 6-electron... (4-electron) space restricted to orb-0-doubly-occupied dets
    from nnvqe.configs import enumerate_sector
    from nnvqe.solver import build_dense
    ints = random_integrals(rng, 3, n_elec=4)
    full_dets = [c for c in enumerate_sector(3, 2, 2) if c[:2] == "11"]
    H_full = build_dense(ints, full_dets)
    reduced = apply_active_space(ints, ActiveSpace(frozen=(0,), active=(1, 2)))
    red_dets = [c[2:] for c in full_dets]
    H_red = build_dense(reduced, red_dets)
    assert np.abs(H_full - H_red).max() < 1e-10


def test_disjoint_freezes_compose(rng):
    ints = random_integrals(rng, 4, n_elec=8)
    one = apply_active_space(ints, ActiveSpace(frozen=(0,), active=(1, 2, 3)))
    two = apply_active_space(one, ActiveSpace(frozen=(0,), active=(1, 2)))
    both = apply_active_space(ints, ActiveSpace(frozen=(0, 1), active=(2, 3)))
    assert abs(two.e_core - both.e_core) < 1e-10
    assert np.allclose(two.h1, both.h1, atol=1e-12)
    assert np.allclose(two.h2, both.h2, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 4))
def test_roundtrip_property(seed, n):
    rng = np.random.default_rng(seed)
    ints = random_integrals(rng, n, n_elec=2)
    back = parse_fcidump(write_fcidump(ints))
    assert np.array_equal(back.h1, ints.h1)
    assert np.array_equal(back.h2, ints.h2)
