"""Pretraining and variational Monte Carlo refinement of the model.

Pretraining matches an extracted wavefunction table: forward KL on the
probabilities plus a 1-cos penalty on the phases. VMC then descends the
energy using the centered local-energy estimator; the surrogate scalar
sum_x [w_x Re(A_x)] log p(x) + [2 w_x Im(A_x)] phi(x) with A_x = E_loc(x) -
<E_loc> has exactly the estimator as its tape gradient, so one reverse pass
per batch suffices.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .configs import (
    Configuration,
    config_to_index,
    enumerate_sector,
    index_to_config,
    sector_of,
)
from .nnqs import Model, SampleBatch, unflatten
from .optim import Adam
from .pauli import QubitHamiltonian
from .tables import WavefunctionTable


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, trace: "TrainTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TraceRecord:
    step: int
    energy: float
    variance: float
    grad_norm: float
    unique_samples: int
    wall_ms: float


@dataclass
class TrainTrace:
    mode: str
    records: list[TraceRecord] = field(default_factory=list)

    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])


def save_trace(path, trace: TrainTrace) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# mode={trace.mode}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "energy", "variance", "grad_norm",
                         "unique_samples", "wall_ms"])
        for r in trace.records:
            writer.writerow([r.step, repr(r.energy), repr(r.variance),
                             repr(r.grad_norm), r.unique_samples,
                             repr(r.wall_ms)])


def load_trace(path) -> TrainTrace:
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# mode="):
            raise ValueError("trace file lacks a mode line")
        trace = TrainTrace(mode=first.split("=", 1)[1])
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            trace.records.append(TraceRecord(
                int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                int(row[4]), float(row[5])))
    return trace


@dataclass(frozen=True)
class PretrainTarget:
    """Normalized probabilities and phases over a table's support."""

    configs: tuple[Configuration, ...]
    probs: np.ndarray
    phases: np.ndarray
    sector: tuple[int, int]
    n_qubits: int

    def __post_init__(self):
        if len(self.configs) == 0:
            raise ValueError("pretraining target is empty")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("target probabilities must sum to 1")

    @classmethod
    def from_table(cls, table: WavefunctionTable) -> "PretrainTarget":
        table.validate()
        if not table.entries:
            raise ValueError("pretraining target is empty")
        configs = tuple(cfg for cfg, _ in table.entries)
        amps = np.array([c for _, c in table.entries])
        probs = np.abs(amps) ** 2
        probs /= probs.sum()
        return cls(configs, probs, np.angle(amps), table.sector,
                   table.n_qubits)


class TableWavefunction:
    """Adapter exposing a sparse table through the amplitudes interface."""

    def __init__(self, table: WavefunctionTable):
        self._amp = table.as_dict()

    def amplitudes(self, configs) -> np.ndarray:
        return np.array([self._amp.get(c, 0j) for c in configs])


# -- local energy -------------------------------------------------------------

class _HamTerms:
    """Hamiltonian terms grouped by their bit-flip mask, as int64 arrays."""

    def __init__(self, ham: QubitHamiltonian):
        flip, yz, n_y, coeff = ham.masks()
        self.flip = flip.astype(np.int64)
        self.yz = yz.astype(np.int64)
        self.pref = coeff * (1j ** (n_y.astype(np.int64) % 4))
        self.uniq, self.inv = np.unique(self.flip, return_inverse=True)

    def row(self, x: int):
        """Neighbor indices x^flip and matrix elements <x|H|x^flip>."""
        y = x ^ self.flip
        signs = 1.0 - 2.0 * (np.bitwise_count((y & self.yz).astype(np.uint64))
                             & 1).astype(float)
        elems = np.zeros(len(self.uniq), dtype=complex)
        np.add.at(elems, self.inv, self.pref * signs)
        return x ^ self.uniq, elems


def _alpha_mask(n_qubits: int) -> int:
    return sum(1 << k for k in range(0, n_qubits, 2))


def _in_sector(idx: int, n_qubits: int, sector: tuple[int, int]) -> bool:
    a_mask = _alpha_mask(n_qubits)
    full = (1 << n_qubits) - 1
    return ((idx & a_mask).bit_count() == sector[0]
            and (idx & (full ^ a_mask)).bit_count() == sector[1])


def local_energies(psi, configs, ham: QubitHamiltonian,
                   sector: tuple[int, int] | None = None) -> np.ndarray:
    """E_loc(x) = sum_y <x|H|y> psi(y)/psi(x) for each configuration.

    psi is anything with amplitudes(configs) -> complex array. When sector
    is given, out-of-sector neighbors are skipped (their amplitude is zero
    by construction); otherwise psi itself must return 0 for them.
    """
    if len(configs) == 0:
        return np.zeros(0, dtype=complex)
    n_qubits = len(configs[0])
    terms = _HamTerms(ham)
    x_ints = [config_to_index(c) for c in configs]
    rows = [terms.row(x) for x in x_ints]

    needed = set(x_ints)
    for neighbors, _ in rows:
        for y in neighbors.tolist():
            if sector is None or _in_sector(y, n_qubits, sector):
                needed.add(y)
    ordered = sorted(needed)
    amps = psi.amplitudes([index_to_config(i, n_qubits) for i in ordered])
    amp_of = dict(zip(ordered, amps))

    out = np.zeros(len(configs), dtype=complex)
    for k, (x, (neighbors, elems)) in enumerate(zip(x_ints, rows)):
        ax = amp_of[x]
        if ax == 0:
            raise ZeroDivisionError(
                f"wavefunction amplitude of {configs[k]} is zero")
        acc = 0j
        for y, h_xy in zip(neighbors.tolist(), elems):
            ay = amp_of.get(y, 0j)
            if ay != 0j:
                acc += h_xy * ay
        out[k] = acc / ax
    return out


def local_energy(psi, config: Configuration, ham: QubitHamiltonian,
                 sector: tuple[int, int] | None = None) -> complex:
    return complex(local_energies(psi, [config], ham, sector=sector)[0])


# -- energy and gradient ------------------------------------------------------

def _sector_configs(model: Model) -> list[Configuration]:
    na, nb = model.cfg.sector
    dim = math.comb(model.cfg.n_orb, na) * math.comb(model.cfg.n_orb, nb)
    if dim > 100_000:
        raise ValueError(f"sector holds {dim} configurations, "
                         "too many for exact evaluation")
    return enumerate_sector(model.cfg.n_orb, na, nb)


def _surrogate_gradient(model: Model, configs, coef_logp, coef_phase,
                        chunk: int) -> np.ndarray:
    """One reverse pass per chunk over sum(coef_logp*logp + coef_phase*phi)."""
    flat = np.zeros(model.params.size)
    views = unflatten(model.cfg, flat)
    for lo in range(0, len(configs), chunk):
        hi = min(lo + chunk, len(configs))
        tape, logp_id, phase_id, leaf = model.tape_forward(configs[lo:hi])
        s1 = tape.sum(tape.multiply(logp_id, tape.constant(coef_logp[lo:hi])))
        s2 = tape.sum(tape.multiply(phase_id, tape.constant(coef_phase[lo:hi])))
        grads = tape.backward(tape.add(s1, s2))
        for name, nid in leaf.items():
            views[name] += grads[nid]
    return flat


def exact_eval_energy(model: Model, ham: QubitHamiltonian):
    """(energy, local-energy variance) from full-sector summation."""
    configs = _sector_configs(model)
    logp, _ = model.score_batch(configs)
    w = np.exp(logp)
    keep = w > 0
    kept = [c for c, k in zip(configs, keep) if k]
    w = w[keep]
    eloc = local_energies(model, kept, ham, sector=model.cfg.sector)
    e_mean = np.sum(w * eloc)
    variance = float(np.sum(w * np.abs(eloc - e_mean) ** 2))
    return float(e_mean.real), variance


def energy_and_gradient(model: Model, ham: QubitHamiltonian,
                        batch: SampleBatch | None = None, chunk: int = 64):
    """Energy and estimator gradient, exact over the sector or over a batch.

    Returns (energy, flat gradient, stats dict). With batch=None the
    expectation weights are the model's exact sector probabilities;
    otherwise they are multiplicity/total from the batch.
    """
    if batch is None:
        configs = _sector_configs(model)
        logp, _ = model.score_batch(configs)
        w = np.exp(logp)
    else:
        if not batch.entries:
            raise ValueError("degenerate batch: no entries")
        configs = [e.config for e in batch.entries]
        w = np.array([e.count for e in batch.entries], dtype=float)
        w /= batch.total
    keep = w > 0
    if not np.any(keep):
        raise ValueError("degenerate batch: every configuration has "
                         "zero probability")
    configs = [c for c, k in zip(configs, keep) if k]
    w = w[keep]

    eloc = local_energies(model, configs, ham, sector=model.cfg.sector)
    e_mean = np.sum(w * eloc)
    centered = eloc - e_mean
    grad = _surrogate_gradient(model, configs, w * centered.real,
                               2.0 * w * centered.imag, chunk)
    stats = {
        "variance": float(np.sum(w * np.abs(centered) ** 2)),
        "unique": len(configs),
    }
    return float(e_mean.real), grad, stats


# -- pretraining --------------------------------------------------------------

@dataclass(frozen=True)
class PretrainSettings:
    max_epochs: int = 2000
    lr: float = 1e-3
    lam: float = 1.0  # phase-loss weight
    tol: float = 1e-7
    patience: int = 20
    chunk: int = 64


def pretrain(model: Model, target: PretrainTarget,
             settings: PretrainSettings | None = None,
             seed: int = 0) -> tuple[Model, TrainTrace]:
    """Fit the model to the target table by forward KL plus a phase penalty.

    Loss L = sum_i q_i (log q_i - log p(x_i)) + lam sum_i q_i (1 -
    cos(phi(x_i) - arg c_i)). The trace records the loss in its energy
    column. The seed parameter is reserved for interface stability; full
    support batches make the loop deterministic without it.
    """
    del seed
    opt = settings or PretrainSettings()
    if target.n_qubits != model.cfg.n_qubits:
        raise ValueError("target register size does not match the model")
    for config in target.configs:
        if sector_of(config) != model.cfg.sector:
            raise ValueError(f"target configuration {config} is out of "
                             "the model's sector")

    params = model.params.copy()
    work = Model(model.cfg, params)
    adam = Adam(params.size, lr=opt.lr)
    trace = TrainTrace(mode="pretrain")
    configs = list(target.configs)
    q = target.probs
    log_q = np.log(q)
    initial = best = np.inf
    streak = 0
    for epoch in range(1, opt.max_epochs + 1):
        t0 = time.perf_counter()
        logp, phi = work.score_batch(configs)
        delta = phi - target.phases
        loss = float(np.sum(q * (log_q - logp))
                     + opt.lam * np.sum(q * (1.0 - np.cos(delta))))
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"pretraining loss became non-finite at epoch {epoch}", trace)
        if epoch == 1:
            initial = loss
        grad = _surrogate_gradient(work, configs, -q,
                                   opt.lam * q * np.sin(delta), opt.chunk)
        adam.step(params, grad)
        if not np.all(np.isfinite(params)):
            raise TrainingDivergedError(
                f"parameters became non-finite at epoch {epoch}", trace)
        trace.records.append(TraceRecord(
            epoch, loss, 0.0, float(np.linalg.norm(grad)), len(configs),
            (time.perf_counter() - t0) * 1e3))
        if best - loss < opt.tol:
            streak += 1
            if streak >= opt.patience:
                break
        else:
            streak = 0
        best = min(best, loss)
    final = trace.records[-1].energy
    if not final < initial:
        raise RuntimeError("pretraining did not reduce the loss "
                           f"({initial} -> {final})")
    return work, trace


# -- variational Monte Carlo --------------------------------------------------

@dataclass(frozen=True)
class VmcSettings:
    max_steps: int = 1000
    lr: float = 1e-3
    n_samples: int = 4096
    eval_every: int = 25
    target_gap: float = 1.6e-3  # hartree, chemical accuracy
    patience: int = 5
    chunk: int = 64
    exact_eval_limit: int = 100_000  # sector size cap for the exact monitor


def train_vmc(model: Model, ham: QubitHamiltonian,
              settings: VmcSettings | None = None, seed: int = 0,
              oracle_energy: float | None = None) -> tuple[Model, TrainTrace]:
    """Refine the model by sampled energy descent; return the best checkpoint.

    Each step draws a fresh batch, takes one Adam step on the estimator
    gradient, and every eval_every steps records the exact-eval energy when
    the sector is enumerable (the batch energy otherwise). Stops early once
    the recorded energy stays within target_gap of oracle_energy for
    `patience` consecutive evaluations.
    """
    opt = settings or VmcSettings()
    na, nb = model.cfg.sector
    dim = math.comb(model.cfg.n_orb, na) * math.comb(model.cfg.n_orb, nb)
    exactable = dim <= opt.exact_eval_limit
    trace = TrainTrace(mode="exact-eval" if exactable else "sampled")

    params = model.params.copy()
    work = Model(model.cfg, params)
    adam = Adam(params.size, lr=opt.lr)
    best_energy, best_params = np.inf, params.copy()
    streak = 0
    for step in range(1, opt.max_steps + 1):
        t0 = time.perf_counter()
        step_seed = int(np.random.SeedSequence((seed, step)).generate_state(1)[0])
        # numerical breakdown surfaces either as non-finite numbers or as
        # exceptions from sampling/ratio code; both mean the run diverged
        try:
            batch = work.sample_batch(opt.n_samples, seed=step_seed)
            energy, grad, stats = energy_and_gradient(work, ham, batch=batch,
                                                      chunk=opt.chunk)
        except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
            raise TrainingDivergedError(
                f"step {step} failed numerically: {exc}", trace) from exc
        if not np.isfinite(energy) or not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(
                f"energy or gradient became non-finite at step {step}", trace)
        adam.step(params, grad)
        if not np.all(np.isfinite(params)):
            raise TrainingDivergedError(
                f"parameters became non-finite at step {step}", trace)

        if step % opt.eval_every == 0 or step == opt.max_steps:
            if exactable:
                recorded, variance = exact_eval_energy(work, ham)
            else:
                recorded, variance = energy, stats["variance"]
            trace.records.append(TraceRecord(
                step, recorded, variance, float(np.linalg.norm(grad)),
                len(batch.entries), (time.perf_counter() - t0) * 1e3))
            if recorded < best_energy:
                best_energy, best_params = recorded, params.copy()
            if oracle_energy is not None:
                if abs(recorded - oracle_energy) < opt.target_gap:
                    streak += 1
                    if streak >= opt.patience:
                        break
                else:
                    streak = 0
    return Model(model.cfg, best_params), trace
