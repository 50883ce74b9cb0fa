"""Command line behavior: config handling, artifacts, exit codes."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nnvqe import solver
from nnvqe.cli import embed_table, main, resolve_config
from nnvqe.integrals import ActiveSpace, apply_active_space, read_fcidump
from nnvqe.pauli import jordan_wigner
from nnvqe.training import load_trace

H4 = "fixtures/h4_1.23.fcidump"
LIH = "fixtures/lih_2.60.fcidump"


def run_cli(capsys, *argv):
    """Returns (exit code, stdout key-value dict, stderr text)."""
    capsys.readouterr()
    rc = main(list(argv))
    captured = capsys.readouterr()
    values = {}
    for line in captured.out.splitlines():
        key, _, rest = line.partition(" ")
        try:
            values[key] = float(rest)
        except ValueError:
            values[key] = rest
    return rc, values, captured.err


def test_inspect_prints_statistics(capsys):
    rc, out, _ = run_cli(capsys, "inspect", "--fcidump", H4)
    assert rc == 0
    assert out["orbitals"] == 4
    assert out["electrons"] == 4
    assert out["qubits"] == 8
    assert out["sector_dim"] == 36
    ham = jordan_wigner(read_fcidump(H4))
    assert out["terms"] == ham.n_terms()
    assert out["identity_coeff"] == pytest.approx(ham.identity_coeff, abs=1e-12)
    assert out["dropped_weight"] == 0.0


def test_inspect_positional_fcidump(capsys):
    rc_pos, out_pos, _ = run_cli(capsys, "inspect", H4)
    rc_flag, out_flag, _ = run_cli(capsys, "inspect", "--fcidump", H4)
    assert rc_pos == rc_flag == 0
    assert out_pos == out_flag
    rc, _, err = run_cli(capsys, "inspect", H4, "--fcidump", LIH)
    assert rc == 1
    assert "positionally" in err


def test_inspect_huge_threshold_keeps_identity_only(capsys):
    rc, out, _ = run_cli(capsys, "inspect", "--fcidump", LIH,
                         "--tailor-threshold", "1e30")
    assert rc == 0
    assert out["tailored_terms"] == 1


def test_inspect_freeze_lowest_flag(capsys):
    rc, out, _ = run_cli(capsys, "inspect", "--fcidump", LIH,
                         "--freeze-lowest", "1")
    assert rc == 0
    assert out["orbitals"] == 5
    assert out["electrons"] == 2
    assert out["qubits"] == 10


def test_fci_prints_reference_energy(capsys):
    rc, out, _ = run_cli(capsys, "fci", "--fcidump", LIH)
    assert rc == 0
    assert abs(out["fci"] - -7.81739992) < 5e-6
    assert out["determinants"] == 225


def test_cisd_prints_reference_energy(capsys):
    rc, out, _ = run_cli(capsys, "cisd", "--fcidump", LIH)
    assert rc == 0
    assert abs(out["cisd"] - -7.81734514) < 5e-6


def test_config_problems_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.json"

    bad.write_text(json.dumps({"fcidump": H4, "typo_key": 1}))
    rc, _, err = run_cli(capsys, "inspect", "--config", str(bad))
    assert rc == 1 and "typo_key" in err

    bad.write_text(json.dumps({"fcidump": H4, "vqe": {"lr": 0.0}}))
    rc, _, err = run_cli(capsys, "vqe", "--config", str(bad), "--out",
                         str(tmp_path / "r"))
    assert rc == 1 and "lr" in err

    bad.write_text(json.dumps({"fcidump": H4, "vmc": {"surprise": 1}}))
    rc, _, err = run_cli(capsys, "train", "--config", str(bad), "--out",
                         str(tmp_path / "r"))
    assert rc == 1 and "surprise" in err

    rc, _, err = run_cli(capsys, "fci", "--fcidump", str(tmp_path / "no.fcidump"))
    assert rc == 1 and "not found" in err

    rc, _, err = run_cli(capsys, "vqe", "--fcidump", H4)  # no --out
    assert rc == 1 and "output directory" in err

    rc, _, err = run_cli(capsys, "no-such-command")
    assert rc == 1


def test_resolve_config_fills_block_seeds():
    cfg = resolve_config({"fcidump": H4, "seed": 7, "vqe": {"seed": 3}})
    assert cfg.vqe["seed"] == 3
    assert cfg.extract["seed"] == 7
    assert cfg.vmc["seed"] == 7


def test_divergent_training_exits_2(capsys, tmp_path):
    cfg = {
        "fcidump": H4,
        "out": str(tmp_path / "run"),
        "model": {"d_model": 8, "n_heads": 2, "n_layers": 1, "d_ff": 16,
                  "phase_hidden": [8]},
        "vmc": {"max_steps": 40, "lr": 1e308, "n_samples": 64,
                "eval_every": 10},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rc, _, err = run_cli(capsys, "train", "--config", str(path))
    assert rc == 2
    assert "numerical failure" in err


def _pipeline_config(outdir) -> dict:
    # small everything: the pipeline structure is under test, not accuracy
    return {
        "fcidump": H4,
        "out": str(outdir),
        "ansatz": {"kind": "uccsd"},
        "model": {"d_model": 8, "n_heads": 2, "n_layers": 1, "d_ff": 16,
                  "phase_hidden": [16]},
        "vqe": {"max_iters": 25, "lr": 0.05},
        "extract": {"mode": "full", "cutoff": 1e-8},
        "pretrain": {"max_epochs": 150, "lr": 1e-2},
        "vmc": {"max_steps": 30, "lr": 2e-3, "n_samples": 256,
                "eval_every": 10},
        "seed": 3,
    }


@pytest.fixture(scope="module")
def h4_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("h4cli")
    outdir = base / "run"
    cfg_path = base / "cfg.json"
    cfg_path.write_text(json.dumps(_pipeline_config(outdir)))
    assert main(["pipeline", "--config", str(cfg_path)]) == 0
    return base, outdir


def _trace_rows(path):
    # wall times differ between runs; compare everything but the last column
    with open(path) as fh:
        fh.readline()
        return [tuple(row[:-1]) for row in csv.reader(fh) if row]


def test_pipeline_writes_run_directory(h4_run):
    _, outdir = h4_run
    for name in ("manifest.json", "vqe.json", "statevector.npy",
                 "extract.jsonl", "pretrain.ckpt", "pretrain.csv",
                 "train.ckpt", "train.csv"):
        assert (outdir / name).is_file(), name
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["command"] == "pipeline"
    assert manifest["config"]["fcidump"] == H4
    assert manifest["config"]["vqe"]["seed"] == 3
    for key in ("vqe_energy", "pretrain_loss", "best_energy", "vmc_steps"):
        assert key in manifest["results"], key
    assert manifest["results"]["vqe_parameters"] == 26


def test_rerun_from_manifest_reproduces_traces(h4_run, tmp_path):
    _, outdir = h4_run
    rerun = tmp_path / "again"
    rc = main(["pipeline", "--config", str(outdir / "manifest.json"),
               "--out", str(rerun)])
    assert rc == 0
    assert _trace_rows(rerun / "train.csv") == _trace_rows(outdir / "train.csv")
    assert _trace_rows(rerun / "pretrain.csv") == _trace_rows(outdir / "pretrain.csv")
    a = json.loads((rerun / "manifest.json").read_text())
    b = json.loads((outdir / "manifest.json").read_text())
    assert a["results"] == b["results"]


def test_stage_chain_matches_pipeline(h4_run, tmp_path, capsys):
    base, outdir = h4_run
    cfg_path = base / "cfg.json"
    stage_dir = tmp_path / "stages"
    args = ["--config", str(cfg_path), "--out", str(stage_dir)]
    assert main(["vqe"] + args) == 0
    assert main(["extract"] + args
                + ["--state", str(stage_dir / "statevector.npy")]) == 0
    assert main(["pretrain"] + args
                + ["--table", str(stage_dir / "extract.jsonl")]) == 0
    rc, out, _ = run_cli(capsys, "train", *args,
                         "--checkpoint", str(stage_dir / "pretrain.ckpt"))
    assert rc == 0
    pipeline_best = json.loads(
        (outdir / "manifest.json").read_text())["results"]["best_energy"]
    assert out["best_energy"] == pipeline_best


def test_report_merges_traces_idempotently(h4_run, tmp_path, capsys):
    _, outdir = h4_run
    ref = -1.9695121652
    out_csv = tmp_path / "report.csv"
    rc, out, _ = run_cli(capsys, "report", str(outdir),
                         "--reference", repr(ref), "--out", str(out_csv))
    assert rc == 0
    first = out_csv.read_bytes()
    with open(out_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert out["rows"] == len(rows)
    methods = {r["method"] for r in rows}
    assert methods == {"vqe", "exact-eval"}
    for r in rows:
        assert float(r["abs_err"]) == abs(float(r["energy"]) - ref)
    n_vqe = len(json.loads((outdir / "vqe.json").read_text())["trace"])
    n_vmc = len(load_trace(outdir / "train.csv").records)
    assert len(rows) == n_vqe + n_vmc
    # merging is pure: a second run writes the identical file
    assert main(["report", str(outdir), "--reference", repr(ref),
                 "--out", str(out_csv)]) == 0
    assert out_csv.read_bytes() == first


def test_embed_table_preserves_energy():
    full = read_fcidump(LIH)
    space = ActiveSpace(frozen=(0,), active=(1, 2, 5))
    act = apply_active_space(full, space)
    e_act, table = solver.solve(act, solver.fci_space(act))

    embedded = embed_table(table, space, full.n_orb)
    assert embedded.n_qubits == 12
    assert embedded.sector == (2, 2)
    for cfg, _ in embedded.entries:
        assert cfg[0:2] == "11"  # frozen orbital doubly occupied
        assert cfg[6:10] == "0000"  # deleted virtuals empty

    # frozen-core folding is exact: the embedded state has the same energy
    # under the full Hamiltonian as the active state under the reduced one
    ham = jordan_wigner(full)
    vec = np.zeros(1 << 12, dtype=complex)
    for cfg, amp in embedded.entries:
        vec[int(cfg[::-1], 2)] = amp
    e_full = float(np.real(np.vdot(vec, ham.sparse_matrix() @ vec)))
    assert abs(e_full - e_act) < 1e-8


def test_embed_table_rejects_register_mismatch():
    full = read_fcidump(LIH)
    space = ActiveSpace(frozen=(0,), active=(1, 2, 5))
    act = apply_active_space(full, space)
    _, table = solver.solve(act, solver.fci_space(act))
    with pytest.raises(ValueError, match="active space"):
        embed_table(table, ActiveSpace(frozen=(0,), active=(1, 2)), full.n_orb)
