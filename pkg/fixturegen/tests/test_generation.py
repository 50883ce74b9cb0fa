"""Generator self-checks: SCF oracles, format round-trips, CLI behavior.

The engine package is the consumer contract here: its FCIDUMP parser and
HF-determinant expectation define what "agreement" means for a fixture.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from nnvqe.integrals import read_fcidump
from nnvqe.solver import hf_energy

from fixturegen.basis import build_shells
from fixturegen.cli import generate_one, main
from fixturegen.fcidump import format_fcidump
from fixturegen.md import overlap_matrix
from fixturegen.scf import BOHR_PER_ANGSTROM, ScfError, mo_integrals, run_rhf

REPO = Path(__file__).resolve().parent.parent.parent
FIXTURES = REPO / "fixtures"
SPECS = REPO / "fixturegen" / "specs" / "reference_systems.json"

H2_SPEC = {
    "name": "h2_1.40",
    "basis": "sto-3g",
    "units": "bohr",
    "atoms": [["H", 0.0, 0.0, 0.0], ["H", 0.0, 0.0, 1.4]],
}


def h2_atoms(r=1.4):
    return [("H", np.zeros(3)), ("H", np.array([0.0, 0.0, r]))]


def test_h2_rhf_reference_energy():
    res = run_rhf(h2_atoms(), "sto-3g")
    # standard minimal-basis value at 1.4 bohr
    assert abs(res.e_hf - -1.1167143) < 1e-6
    assert abs(res.e_nuc - 1.0 / 1.4) < 1e-12
    h, _ = mo_integrals(res)
    # gerade and ungerade orbitals cannot mix through the one-body operator
    assert abs(h[0, 1]) < 1e-12


@pytest.mark.parametrize("atoms,basis", [
    (h2_atoms(), "sto-3g"),
    ([("Li", np.zeros(3)), ("H", np.array([0.0, 0.0, 2.6 * BOHR_PER_ANGSTROM]))],
     "sto-3g"),
])
def test_scf_energy_equals_mo_integral_expression(atoms, basis):
    # closed-shell energy written in MO integrals must reproduce the SCF value
    res = run_rhf(atoms, basis)
    h, g = mo_integrals(res)
    n_occ = res.n_elec // 2
    e = res.e_nuc + 2.0 * sum(h[i, i] for i in range(n_occ))
    for i in range(n_occ):
        for j in range(n_occ):
            e += 2.0 * g[i, i, j, j] - g[i, j, j, i]
    assert abs(e - res.e_hf) < 1e-10


def test_overlap_matrix_is_normalized_metric():
    shells = build_shells([("Li", np.zeros(3)),
                           ("H", np.array([0.0, 0.0, 3.0]))], "sto-3g")
    S = overlap_matrix(shells)
    assert np.max(np.abs(np.diag(S) - 1.0)) < 1e-12
    assert np.max(np.abs(S - S.T)) < 1e-14
    assert np.linalg.eigvalsh(S).min() > 0.0


def test_fcidump_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    n = 3
    h1 = rng.standard_normal((n, n))
    h1 = 0.5 * (h1 + h1.T)
    g = rng.standard_normal((n,) * 4)
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    g /= 8.0
    g[2, 2, 1, 0] = g[2, 2, 0, 1] = g[1, 0, 2, 2] = g[0, 1, 2, 2] = 5e-13
    path = tmp_path / "toy.fcidump"
    path.write_text(format_fcidump(h1, g, e_core=0.25, n_elec=4, ms2=0))
    ints = read_fcidump(path)
    assert ints.n_orb == n and ints.n_elec == 4 and ints.ms2 == 0
    assert abs(ints.e_core - 0.25) < 1e-15
    assert np.max(np.abs(ints.h1 - h1)) < 1e-15
    # the planted sub-threshold symmetry class is dropped on write
    expected = g.copy()
    expected[2, 2, 1, 0] = expected[2, 2, 0, 1] = 0.0
    expected[1, 0, 2, 2] = expected[0, 1, 2, 2] = 0.0
    assert np.max(np.abs(ints.h2 - expected)) < 1e-15


def test_generate_one_agrees_with_engine_convention(tmp_path):
    sidecar = generate_one(H2_SPEC, tmp_path)
    ints = read_fcidump(tmp_path / "h2_1.40.fcidump")
    assert ints.n_orb == sidecar["n_orb"]
    assert ints.n_elec == sidecar["n_elec"]
    assert ints.ms2 == sidecar["ms2"]
    assert abs(ints.e_core - sidecar["e_nuc"]) < 1e-12
    assert abs(hf_energy(ints) - sidecar["hf_energy"]) < 5e-6


def test_committed_fixtures_agree_with_engine_convention():
    sidecars = sorted(FIXTURES.glob("*.json"))
    assert len(sidecars) == 36
    for path in sidecars:
        meta = json.loads(path.read_text())
        ints = read_fcidump(path.with_suffix(".fcidump"))
        gap = abs(hf_energy(ints) - meta["hf_energy"])
        assert gap < 5e-6, (meta["name"], gap)


def test_generation_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    generate_one(H2_SPEC, a)
    generate_one(H2_SPEC, b)
    for ext in (".fcidump", ".json"):
        assert (a / f"h2_1.40{ext}").read_bytes() == (b / f"h2_1.40{ext}").read_bytes()


def test_warm_start_chain(tmp_path):
    specs = [
        H2_SPEC,
        {"name": "h2_2.40", "basis": "sto-3g", "units": "bohr",
         "atoms": [["H", 0.0, 0.0, 0.0], ["H", 0.0, 0.0, 2.4]],
         "guess_from": "h2_1.40", "scan_steps": 2},
    ]
    spec_file = tmp_path / "specs.json"
    spec_file.write_text(json.dumps(specs))
    out = tmp_path / "out"
    # subsetting to the stretched system must pull in its warm-start ancestor
    assert main([str(spec_file), str(out), "--only", "h2_2.40"]) == 0
    for name in ("h2_1.40", "h2_2.40"):
        assert (out / f"{name}.fcidump").exists()
        assert (out / f"{name}.json").exists()
    meta = json.loads((out / "h2_2.40.json").read_text())
    ints = read_fcidump(out / "h2_2.40.fcidump")
    assert abs(hf_energy(ints) - meta["hf_energy"]) < 5e-6


def test_guess_from_requires_prior_generation(tmp_path):
    spec = dict(H2_SPEC, name="h2_off", guess_from="missing")
    with pytest.raises(ValueError, match="not generated yet"):
        generate_one(spec, tmp_path, registry={})


def test_guess_from_rejects_mismatched_atoms(tmp_path):
    registry = {}
    generate_one(H2_SPEC, tmp_path, registry)
    bad = {"name": "heh", "basis": "sto-3g", "units": "bohr",
           "atoms": [["He", 0.0, 0.0, 0.0], ["H", 0.0, 0.0, 1.4]],
           "guess_from": "h2_1.40"}
    with pytest.raises(ValueError, match="different atoms"):
        generate_one(bad, tmp_path, registry)


def test_rejects_charged_and_odd_electron_systems(tmp_path):
    with pytest.raises(ValueError, match="neutral"):
        generate_one(dict(H2_SPEC, charge=1), tmp_path)
    with pytest.raises(ScfError, match="even electron count"):
        run_rhf([("H", np.zeros(3))], "sto-3g")


def test_cli_unknown_subset_name(tmp_path, capsys):
    assert main([str(SPECS), str(tmp_path), "--only", "no_such_system"]) == 2
    assert "unknown system names" in capsys.readouterr().err


def test_cli_reports_failed_system(tmp_path, capsys):
    specs = [{"name": "h_atom", "basis": "sto-3g", "units": "bohr",
              "atoms": [["H", 0.0, 0.0, 0.0]]}]
    spec_file = tmp_path / "specs.json"
    spec_file.write_text(json.dumps(specs))
    assert main([str(spec_file), str(tmp_path / "out")]) == 1
    assert "FAILED" in capsys.readouterr().err
    assert not (tmp_path / "out" / "h_atom.fcidump").exists()
