"""Command line pipeline: FCIDUMP in, convergence artifacts out.

Subcommands
    inspect   print Hamiltonian statistics for a FCIDUMP
    fci       exact ground state of the (active) determinant space
    cisd      singles-and-doubles ground state
    vqe       circuit optimization; writes vqe.json and statevector.npy
    extract   dominant configurations of a saved statevector
    pretrain  fit the neural wavefunction to an extracted table
    train     variational Monte Carlo refinement of a checkpoint
    pipeline  vqe -> extract -> pretrain -> train in one run directory
    report    merge run traces into one comparison CSV

Settings come from a JSON config (--config), overridable by flags. Every
command that writes files records the fully resolved settings in a
manifest.json, and --config accepts a manifest back, so re-running a
pipeline from its own manifest reproduces the exact-eval trace numbers.

The active-space block reduces the circuit stages (vqe, extract) and the
determinant oracles only; the neural stages always work on the full
register, embedding extracted configurations over doubly occupied frozen
orbitals.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import solver
from .configs import hf_config
from .extraction import extract_full, extract_mc
from .integrals import ActiveSpace, IntegralSet, apply_active_space, read_fcidump
from .nnqs import Model, ModelConfig, load_model, n_params, save_model
from .pauli import QubitHamiltonian, jordan_wigner, tailor
from .simulator import Statevector, apply, basis_state
from .tables import WavefunctionTable, load_jsonl
from .training import (
    PretrainSettings,
    PretrainTarget,
    VmcSettings,
    load_trace,
    pretrain,
    save_trace,
    train_vmc,
)
from .vqe import AnsatzSpec, OptSettings, run_vqe, save_result


class ConfigError(ValueError):
    """Unusable configuration or command line; exit code 1."""


_ANSATZ_DEFAULTS = {"kind": "uccsd", "layers": 1, "trotter_steps": 1}
_MODEL_DEFAULTS = {"d_model": 32, "n_heads": 4, "n_layers": 4, "d_ff": 0,
                   "phase_hidden": [512, 512]}
_VQE_DEFAULTS = {**asdict(OptSettings()), "seed": None}
# pipeline-level pretraining favors a bigger rate and a patience window wide
# enough to clear the sign-structure plateau of the phase loss
_PRETRAIN_DEFAULTS = {**asdict(PretrainSettings()), "lr": 1e-2, "patience": 200}
_EXTRACT_DEFAULTS = {"mode": "full", "cutoff": 1e-8, "steps": 2000,
                     "temperature": 0.01, "seed": None}
_VMC_DEFAULTS = {**asdict(VmcSettings()), "seed": None, "oracle_energy": None}

_TOP_KEYS = {"fcidump", "out", "active_space", "tailor_threshold", "ansatz",
             "model", "vqe", "extract", "pretrain", "vmc", "seed", "threads"}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one run; see module docstring for keys."""

    fcidump: str
    out: str | None
    active_space: dict | None
    tailor_threshold: float
    ansatz: dict
    model: dict
    vqe: dict
    extract: dict
    pretrain: dict
    vmc: dict
    seed: int
    threads: int


def _require(cond, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return _is_int(v) or isinstance(v, float)


def _merge_block(name: str, defaults: dict, given) -> dict:
    given = {} if given is None else given
    _require(isinstance(given, dict), f"config block {name!r} must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in config block {name!r}")
    return {**defaults, **given}


def resolve_config(raw: dict) -> RunConfig:
    """Merge defaults into a raw config dict and validate every knob."""
    _require(isinstance(raw, dict), "config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    _require("fcidump" in raw, "config needs a fcidump path")
    fcidump = raw["fcidump"]
    _require(isinstance(fcidump, str) and Path(fcidump).is_file(),
             f"fcidump file not found: {fcidump!r}")

    seed = raw.get("seed", 0)
    _require(_is_int(seed), "seed must be an integer")
    threads = raw.get("threads", 1)
    _require(_is_int(threads) and threads >= 1, "threads must be a positive integer")
    threshold = raw.get("tailor_threshold", 0.0)
    _require(_is_num(threshold) and threshold >= 0, "tailor_threshold must be >= 0")

    space = raw.get("active_space")
    if space is not None:
        _require(isinstance(space, dict), "active_space must be an object")
        if "freeze_lowest" in space:
            _require(set(space) == {"freeze_lowest"},
                     "freeze_lowest excludes explicit orbital lists")
            _require(_is_int(space["freeze_lowest"]) and space["freeze_lowest"] >= 0,
                     "freeze_lowest must be a non-negative integer")
        else:
            _require(set(space) <= {"frozen", "active"} and "frozen" in space,
                     "active_space needs freeze_lowest or a frozen list")
            for key in space:
                _require(isinstance(space[key], list)
                         and all(_is_int(i) and i >= 0 for i in space[key]),
                         f"active_space {key!r} must list orbital indices")

    ansatz = _merge_block("ansatz", _ANSATZ_DEFAULTS, raw.get("ansatz"))
    _require(ansatz["kind"] in ("uccsd", "hea"),
             f"ansatz kind must be uccsd or hea, got {ansatz['kind']!r}")
    for key in ("layers", "trotter_steps"):
        _require(_is_int(ansatz[key]) and ansatz[key] >= 1,
                 f"ansatz {key} must be a positive integer")

    model = _merge_block("model", _MODEL_DEFAULTS, raw.get("model"))
    for key in ("d_model", "n_heads", "n_layers"):
        _require(_is_int(model[key]) and model[key] >= 1,
                 f"model {key} must be a positive integer")
    _require(_is_int(model["d_ff"]) and model["d_ff"] >= 0,
             "model d_ff must be a non-negative integer (0 picks 4*d_model)")
    _require(isinstance(model["phase_hidden"], list)
             and all(_is_int(h) and h >= 1 for h in model["phase_hidden"]),
             "model phase_hidden must list positive widths")

    vqe = _merge_block("vqe", _VQE_DEFAULTS, raw.get("vqe"))
    _require(_is_int(vqe["max_iters"]) and vqe["max_iters"] >= 1,
             "vqe max_iters must be a positive integer")
    for key in ("lr", "beta1", "beta2", "eps"):
        _require(_is_num(vqe[key]) and vqe[key] > 0, f"vqe {key} must be positive")
    _require(_is_num(vqe["tol"]) and vqe["tol"] >= 0, "vqe tol must be >= 0")
    _require(vqe["group_size"] is None
             or (_is_int(vqe["group_size"]) and vqe["group_size"] >= 1),
             "vqe group_size must be null or a positive integer")

    extract = _merge_block("extract", _EXTRACT_DEFAULTS, raw.get("extract"))
    _require(extract["mode"] in ("full", "mc"),
             f"extract mode must be full or mc, got {extract['mode']!r}")
    _require(_is_num(extract["cutoff"]) and extract["cutoff"] >= 0,
             "extract cutoff must be >= 0")
    _require(_is_int(extract["steps"]) and extract["steps"] >= 1,
             "extract steps must be a positive integer")
    _require(_is_num(extract["temperature"]) and extract["temperature"] > 0,
             "extract temperature must be positive")

    pre = _merge_block("pretrain", _PRETRAIN_DEFAULTS, raw.get("pretrain"))
    for key in ("max_epochs", "patience", "chunk"):
        _require(_is_int(pre[key]) and pre[key] >= 1,
                 f"pretrain {key} must be a positive integer")
    _require(_is_num(pre["lr"]) and pre["lr"] > 0, "pretrain lr must be positive")
    _require(_is_num(pre["lam"]) and pre["lam"] >= 0, "pretrain lam must be >= 0")
    _require(_is_num(pre["tol"]) and pre["tol"] >= 0, "pretrain tol must be >= 0")

    vmc = _merge_block("vmc", _VMC_DEFAULTS, raw.get("vmc"))
    for key in ("max_steps", "n_samples", "eval_every", "patience", "chunk",
                "exact_eval_limit"):
        _require(_is_int(vmc[key]) and vmc[key] >= 1,
                 f"vmc {key} must be a positive integer")
    _require(_is_num(vmc["lr"]) and vmc["lr"] > 0, "vmc lr must be positive")
    _require(_is_num(vmc["target_gap"]) and vmc["target_gap"] > 0,
             "vmc target_gap must be positive")
    _require(vmc["oracle_energy"] is None or _is_num(vmc["oracle_energy"]),
             "vmc oracle_energy must be null or a number")

    for block in (vqe, extract, vmc):
        if block["seed"] is None:
            block["seed"] = seed
        _require(_is_int(block["seed"]), "block seeds must be integers")

    out = raw.get("out")
    _require(out is None or isinstance(out, str), "out must be a path string")
    return RunConfig(fcidump=fcidump, out=out, active_space=space,
                     tailor_threshold=float(threshold), ansatz=ansatz,
                     model=model, vqe=vqe, extract=extract, pretrain=pre,
                     vmc=vmc, seed=seed, threads=threads)


def _load_config_file(path: str) -> dict:
    p = Path(path)
    _require(p.is_file(), f"config file not found: {path!r}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path!r} is not valid JSON: {err}") from err
    if isinstance(data, dict) and "command" in data and "config" in data:
        data = data["config"]  # a manifest doubles as a config
    return data


def _resolve(args) -> RunConfig:
    raw = _load_config_file(args.config) if args.config else {}
    pos = getattr(args, "fcidump_pos", None)
    if pos is not None:
        if args.fcidump is not None and args.fcidump != pos:
            raise ConfigError("fcidump given both positionally and with --fcidump")
        raw["fcidump"] = pos
    if args.fcidump is not None:
        raw["fcidump"] = args.fcidump
    if args.out is not None:
        raw["out"] = args.out
    if args.freeze_lowest is not None:
        raw["active_space"] = {"freeze_lowest": args.freeze_lowest}
    if args.tailor_threshold is not None:
        raw["tailor_threshold"] = args.tailor_threshold
    if args.ansatz is not None:
        raw.setdefault("ansatz", {})["kind"] = args.ansatz
    if args.layers is not None:
        raw.setdefault("ansatz", {})["layers"] = args.layers
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.threads is not None:
        raw["threads"] = args.threads
    return resolve_config(raw)


# ---------------------------------------------------------------- systems


def _load_system(cfg: RunConfig):
    """Returns (full IntegralSet, active IntegralSet, ActiveSpace or None)."""
    full = read_fcidump(cfg.fcidump)
    block = cfg.active_space
    if block is None:
        return full, full, None
    if "freeze_lowest" in block:
        k = block["freeze_lowest"]
        if k == 0:
            return full, full, None
        space = ActiveSpace(frozen=tuple(range(k)),
                            active=tuple(range(k, full.n_orb)))
    else:
        frozen = tuple(block["frozen"])
        active = tuple(block.get("active",
                                 [p for p in range(full.n_orb) if p not in frozen]))
        space = ActiveSpace(frozen=frozen, active=active)
    try:
        space.validate(full.n_orb, full.n_elec)
        act = apply_active_space(full, space)
    except ValueError as err:
        raise ConfigError(f"active_space: {err}") from err
    return full, act, space


def _build_ham(ints: IntegralSet, threshold: float) -> tuple[QubitHamiltonian, float]:
    return tailor(jordan_wigner(ints), threshold)


def embed_table(table: WavefunctionTable, space: ActiveSpace,
                n_orb: int) -> WavefunctionTable:
    """Map an active-register table onto the full register.

    Frozen orbitals become doubly occupied, deleted virtuals empty. Each
    frozen orbital inserts two adjacent fermions, so every crossing sign
    squares away and amplitudes carry over unchanged.
    """
    if table.n_qubits != 2 * len(space.active):
        raise ValueError("table register does not match the active space")
    column = {}
    for i, p in enumerate(space.active):
        column[2 * i] = 2 * p
        column[2 * i + 1] = 2 * p + 1
    base = ["0"] * (2 * n_orb)
    for f in space.frozen:
        base[2 * f] = base[2 * f + 1] = "1"
    entries = []
    for cfg, amp in table.entries:
        full = base.copy()
        for q, bit in enumerate(cfg):
            full[column[q]] = bit
        entries.append(("".join(full), amp))
    k = len(space.frozen)
    sector = (table.sector[0] + k, table.sector[1] + k)
    return WavefunctionTable(2 * n_orb, sector, table.source + "-embedded", entries)


def _save_statevector(path, state: Statevector) -> None:
    np.save(path, state.amps)


def _load_statevector(path) -> Statevector:
    p = Path(path)
    _require(p.is_file(), f"statevector file not found: {path!r}")
    amps = np.load(p)
    n = int(amps.size).bit_length() - 1
    _require(amps.ndim == 1 and amps.size == 1 << n,
             f"statevector length {amps.size} is not a power of two")
    return Statevector(n, amps.astype(complex))


def _write_manifest(outdir: Path, command: str, cfg: RunConfig,
                    outputs: dict, results: dict) -> None:
    payload = {"command": command, "config": asdict(cfg),
               "outputs": outputs, "results": results}
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _outdir(cfg: RunConfig, command: str) -> Path:
    _require(cfg.out is not None, f"{command} needs an output directory (--out)")
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(results: dict, key: str, value) -> None:
    results[key] = value
    if isinstance(value, float):
        value = repr(value)
    print(key, value)


# ------------------------------------------------------------------ stages


def _vqe_stage(cfg: RunConfig, act: IntegralSet, outdir: Path | None,
               results: dict):
    ham, dropped = _build_ham(act, cfg.tailor_threshold)
    reference = hf_config(act.n_orb, act.n_alpha, act.n_beta)
    spec = AnsatzSpec(kind=cfg.ansatz["kind"].upper(), reference=reference,
                      layers=cfg.ansatz["layers"],
                      trotter_steps=cfg.ansatz["trotter_steps"])
    opt = OptSettings(**{k: v for k, v in cfg.vqe.items() if k != "seed"})
    result = run_vqe(ham, spec, opt, seed=cfg.vqe["seed"])
    state = apply(basis_state(ham.n_qubits, "0" * ham.n_qubits),
                  result.circuit, result.params)
    _emit(results, "circuit_dropped_weight", dropped)
    _emit(results, "vqe_parameters", result.circuit.n_params)
    _emit(results, "vqe_iterations", len(result.trace))
    _emit(results, "vqe_energy", float(result.energy))
    if outdir is not None:
        save_result(result, outdir / "vqe.json")
        _save_statevector(outdir / "statevector.npy", state)
    return result, state


def _extract_stage(cfg: RunConfig, act: IntegralSet, state: Statevector,
                   outdir: Path | None, results: dict) -> WavefunctionTable:
    sector = (act.n_alpha, act.n_beta)
    ex = cfg.extract
    if ex["mode"] == "full":
        table = extract_full(state, sector, cutoff=ex["cutoff"])
    else:
        ham, _ = _build_ham(act, cfg.tailor_threshold)
        table = extract_mc(state, sector, ham, solver.hf_energy(act),
                           steps=ex["steps"], temperature=ex["temperature"],
                           seed=ex["seed"], cutoff=ex["cutoff"])
    _emit(results, "extract_entries", len(table.entries))
    _emit(results, "extract_norm_sq", table.norm_sq())
    if outdir is not None:
        table.save_jsonl(outdir / "extract.jsonl")
    return table


def _pretrain_stage(cfg: RunConfig, full: IntegralSet,
                    space: ActiveSpace | None, table: WavefunctionTable,
                    outdir: Path | None, results: dict) -> Model:
    if table.n_qubits != 2 * full.n_orb:
        _require(space is not None and table.n_qubits == 2 * len(space.active),
                 f"table register ({table.n_qubits} qubits) matches neither the "
                 f"full system nor the configured active space")
        table = embed_table(table, space, full.n_orb)
        if outdir is not None:
            table.save_jsonl(outdir / "pretrain_target.jsonl")
    mcfg = ModelConfig(n_orb=full.n_orb, sector=(full.n_alpha, full.n_beta),
                       d_model=cfg.model["d_model"], n_heads=cfg.model["n_heads"],
                       n_layers=cfg.model["n_layers"], d_ff=cfg.model["d_ff"],
                       phase_hidden=tuple(cfg.model["phase_hidden"]))
    model = Model.initialized(mcfg, seed=cfg.seed)
    target = PretrainTarget.from_table(table)
    settings = PretrainSettings(**cfg.pretrain)
    model, trace = pretrain(model, target, settings)
    _emit(results, "model_parameters", n_params(mcfg))
    _emit(results, "pretrain_epochs", len(trace.records))
    _emit(results, "pretrain_loss", float(trace.energies()[-1]))
    if outdir is not None:
        save_model(outdir / "pretrain.ckpt", model)
        save_trace(outdir / "pretrain.csv", trace)
    return model


def _train_stage(cfg: RunConfig, full: IntegralSet, model: Model,
                 outdir: Path | None, results: dict) -> Model:
    ham, dropped = _build_ham(full, cfg.tailor_threshold)
    _require(model.cfg.n_orb == full.n_orb
             and model.cfg.sector == (full.n_alpha, full.n_beta),
             "checkpoint register or sector does not match the system")
    keys = {"seed", "oracle_energy"}
    settings = VmcSettings(**{k: v for k, v in cfg.vmc.items() if k not in keys})
    # a diverging run overflows before the loop raises; the raised error is
    # the diagnostic, so keep the console free of numpy warning noise
    with np.errstate(over="ignore", invalid="ignore"):
        model, trace = train_vmc(model, ham, settings, seed=cfg.vmc["seed"],
                                 oracle_energy=cfg.vmc["oracle_energy"])
    _emit(results, "full_dropped_weight", dropped)
    _emit(results, "vmc_mode", trace.mode)
    _emit(results, "vmc_steps", len(trace.records))
    _emit(results, "best_energy", float(min(trace.energies())))
    if outdir is not None:
        save_model(outdir / "train.ckpt", model)
        save_trace(outdir / "train.csv", trace)
    return model


# ---------------------------------------------------------------- commands


def cmd_inspect(args) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    ham = jordan_wigner(act)
    tailored, dropped = tailor(ham, cfg.tailor_threshold)
    dim = math.comb(act.n_orb, act.n_alpha) * math.comb(act.n_orb, act.n_beta)
    print("orbitals", act.n_orb)
    print("electrons", act.n_elec)
    print("qubits", ham.n_qubits)
    print("sector_dim", dim)
    print("terms", ham.n_terms())
    print("identity_coeff", repr(float(ham.identity_coeff)))
    print("tailored_terms", tailored.n_terms())
    print("dropped_weight", repr(float(dropped)))
    return 0


def _cmd_ci(args, level: str) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    ci = solver.fci_space(act) if level == "fci" else solver.cisd_space(act)
    energy, table = solver.solve(act, ci)
    results = {}
    _emit(results, "determinants", ci.size)
    _emit(results, level, float(energy))
    if cfg.out is not None:
        outdir = _outdir(cfg, level)
        table.save_jsonl(outdir / f"{level}.jsonl")
        _write_manifest(outdir, level, cfg,
                        {"table": f"{level}.jsonl"}, results)
    return 0


def cmd_fci(args) -> int:
    return _cmd_ci(args, "fci")


def cmd_cisd(args) -> int:
    return _cmd_ci(args, "cisd")


def cmd_vqe(args) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    outdir = _outdir(cfg, "vqe")
    results = {}
    _vqe_stage(cfg, act, outdir, results)
    _write_manifest(outdir, "vqe", cfg,
                    {"result": "vqe.json", "statevector": "statevector.npy"},
                    results)
    return 0


def cmd_extract(args) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    state = _load_statevector(args.state)
    _require(state.n_qubits == 2 * act.n_orb,
             f"statevector has {state.n_qubits} qubits, system has {2 * act.n_orb}")
    outdir = _outdir(cfg, "extract")
    results = {}
    _extract_stage(cfg, act, state, outdir, results)
    _write_manifest(outdir, "extract", cfg, {"table": "extract.jsonl"}, results)
    return 0


def cmd_pretrain(args) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    table = load_jsonl(args.table)
    outdir = _outdir(cfg, "pretrain")
    results = {}
    _pretrain_stage(cfg, full, space, table, outdir, results)
    _write_manifest(outdir, "pretrain", cfg,
                    {"checkpoint": "pretrain.ckpt", "trace": "pretrain.csv"},
                    results)
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    if args.checkpoint is not None:
        _require(Path(args.checkpoint).is_file(),
                 f"checkpoint not found: {args.checkpoint!r}")
        model = load_model(args.checkpoint)
    else:
        mcfg = ModelConfig(n_orb=full.n_orb, sector=(full.n_alpha, full.n_beta),
                           d_model=cfg.model["d_model"],
                           n_heads=cfg.model["n_heads"],
                           n_layers=cfg.model["n_layers"], d_ff=cfg.model["d_ff"],
                           phase_hidden=tuple(cfg.model["phase_hidden"]))
        model = Model.initialized(mcfg, seed=cfg.seed)
    outdir = _outdir(cfg, "train")
    results = {}
    _train_stage(cfg, full, model, outdir, results)
    _write_manifest(outdir, "train", cfg,
                    {"checkpoint": "train.ckpt", "trace": "train.csv"}, results)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _resolve(args)
    full, act, space = _load_system(cfg)
    outdir = _outdir(cfg, "pipeline")
    outputs = {"result": "vqe.json", "statevector": "statevector.npy",
               "table": "extract.jsonl", "pretrain_checkpoint": "pretrain.ckpt",
               "pretrain_trace": "pretrain.csv", "train_checkpoint": "train.ckpt",
               "train_trace": "train.csv"}
    # settings land on disk before any physics so a crashed run keeps its seeds
    _write_manifest(outdir, "pipeline", cfg, outputs, {})
    results = {}
    _, state = _vqe_stage(cfg, act, outdir, results)
    table = _extract_stage(cfg, act, state, outdir, results)
    if space is not None:
        outputs["pretrain_target"] = "pretrain_target.jsonl"
    model = _pretrain_stage(cfg, full, space, table, outdir, results)
    _train_stage(cfg, full, model, outdir, results)
    _emit(results, "pipeline_energy", results["best_energy"])
    _write_manifest(outdir, "pipeline", cfg, outputs, results)
    return 0


def cmd_report(args) -> int:
    """Merge vqe.json / train.csv traces into (step, method, energy, abs_err).

    Pure trace merging; nothing is recomputed. Pretraining traces are
    excluded because their energy column records the fitting loss.
    """
    reference = args.reference
    rows = []
    multi = len(args.runs) > 1
    for run in args.runs:
        rundir = Path(run)
        _require(rundir.is_dir(), f"run directory not found: {run!r}")
        label = f"{rundir.name}:" if multi else ""
        vqe_path = rundir / "vqe.json"
        if vqe_path.is_file():
            with open(vqe_path) as fh:
                payload = json.load(fh)
            for it, energy, _ in payload["trace"]:
                rows.append((it, label + "vqe", energy, abs(energy - reference)))
        train_path = rundir / "train.csv"
        if train_path.is_file():
            trace = load_trace(train_path)
            for rec in trace.records:
                rows.append((rec.step, label + trace.mode, rec.energy,
                             abs(rec.energy - reference)))
    _require(rows, "no vqe.json or train.csv traces under the given directories")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "method", "energy", "abs_err"])
        for step, method, energy, err in rows:
            writer.writerow([step, method, repr(float(energy)), repr(float(err))])
    print("rows", len(rows))
    return 0


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise ConfigError(message)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("fcidump_pos", nargs="?", metavar="FCIDUMP",
                        help="FCIDUMP integral file (same as --fcidump)")
    common.add_argument("--config", help="JSON run config, or a manifest.json")
    common.add_argument("--fcidump", help="FCIDUMP integral file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--freeze-lowest", type=int, dest="freeze_lowest",
                        metavar="K", help="freeze the K lowest orbitals")
    common.add_argument("--tailor-threshold", type=float, dest="tailor_threshold",
                        metavar="T", help="drop Pauli terms with |coeff| < T")
    common.add_argument("--ansatz", choices=("uccsd", "hea"))
    common.add_argument("--layers", type=int)
    common.add_argument("--seed", type=int, help="master seed for unset stages")
    common.add_argument("--threads", type=int,
                        help="recorded in the manifest; computation runs "
                             "vectorized in one process")

    parser = _Parser(prog="nnvqe",
                     description="FCIDUMP to neural-wavefunction pipeline")
    sub = parser.add_subparsers(dest="cmd", required=True)
    sub.add_parser("inspect", parents=[common],
                   help="print Hamiltonian statistics")
    sub.add_parser("fci", parents=[common], help="exact diagonalization")
    sub.add_parser("cisd", parents=[common], help="singles-doubles CI")
    sub.add_parser("vqe", parents=[common], help="optimize the circuit ansatz")
    p = sub.add_parser("extract", parents=[common],
                       help="tabulate dominant configurations of a statevector")
    p.add_argument("--state", required=True, help="statevector .npy file")
    p = sub.add_parser("pretrain", parents=[common],
                       help="fit the neural wavefunction to a table")
    p.add_argument("--table", required=True, help="wavefunction table .jsonl")
    p = sub.add_parser("train", parents=[common],
                       help="variational Monte Carlo refinement")
    p.add_argument("--checkpoint", help="starting model checkpoint")
    sub.add_parser("pipeline", parents=[common],
                   help="vqe, extract, pretrain, and train in one run")
    p = sub.add_parser("report", help="merge run traces into one CSV")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--reference", type=float, required=True,
                   help="reference energy for the abs_err column")
    p.add_argument("--out", required=True, help="output CSV path")
    return parser


_DISPATCH = {
    "inspect": cmd_inspect,
    "fci": cmd_fci,
    "cisd": cmd_cisd,
    "vqe": cmd_vqe,
    "extract": cmd_extract,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "pipeline": cmd_pipeline,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _DISPATCH[args.cmd](args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except RuntimeError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
