"""Autoregressive transformer wavefunction over orbital-occupation tokens.

Each spatial orbital contributes one token in {0,1,2,3} encoding its (alpha,
beta) occupation. A causal decoder predicts per-position token distributions
that are masked to the particle-number sector before the softmax, so the
model is exactly normalized over the sector. A separate MLP on the +/-1
encoded occupation vector supplies the phase; the amplitude of configuration
x is sqrt(p(x)) * exp(i*phi(x)).

Two forward paths share the same arithmetic: a vectorized numpy path for
scoring and sampling, and an autodiff-tape path for training gradients.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .autodiff import Tape
from .configs import Configuration, enumerate_sector, sector_of
from .tables import WavefunctionTable

BEGIN_TOKEN = 4  # input-side vocabulary is the 4 occupations plus this
_MASK_FILL = -1e9
_LN_EPS = 1e-5

# per-token occupation increments, indexed by token value
_TOKEN_ALPHA = np.array([0, 1, 0, 1])
_TOKEN_BETA = np.array([0, 0, 1, 1])


@dataclass(frozen=True)
class ModelConfig:
    n_orb: int
    sector: tuple[int, int]
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 4
    d_ff: int = 0  # 0 means 4*d_model
    phase_hidden: tuple[int, ...] = (512, 512)

    def __post_init__(self):
        if self.n_orb < 1:
            raise ValueError("n_orb must be positive")
        if self.d_model < 1 or self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be a positive multiple of n_heads")
        if self.n_layers < 1:
            raise ValueError("n_layers must be positive")
        object.__setattr__(self, "sector", tuple(self.sector))
        na, nb = self.sector
        if not (0 <= na <= self.n_orb and 0 <= nb <= self.n_orb):
            raise ValueError("sector occupations must fit in n_orb orbitals")
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        if self.d_ff < 1:
            raise ValueError("d_ff must be positive")
        object.__setattr__(self, "phase_hidden", tuple(self.phase_hidden))
        if any(h < 1 for h in self.phase_hidden):
            raise ValueError("phase_hidden widths must be positive")

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_orb


def tokenize(config: Configuration) -> np.ndarray:
    """Token t_p = alpha bit of orbital p plus twice its beta bit."""
    if len(config) % 2 != 0:
        raise ValueError("configuration length must be even")
    bits = np.frombuffer(config.encode(), dtype=np.uint8) - ord("0")
    if np.any(bits > 1):
        raise ValueError("configuration must be a bitstring")
    return (bits[0::2] + 2 * bits[1::2]).astype(np.int64)


def detokenize(tokens) -> Configuration:
    out = []
    for t in np.asarray(tokens, dtype=int):
        if not 0 <= t <= 3:
            raise ValueError("tokens must lie in 0..3")
        out.append(f"{t & 1}{(t >> 1) & 1}")
    return "".join(out)


def allowed_tokens(n_orb: int, sector: tuple[int, int], pos: int,
                   a_used: int, b_used: int) -> np.ndarray:
    """Boolean mask over the 4 tokens permitted at this position.

    A token is allowed iff it neither overshoots the sector counts nor
    leaves a deficit the remaining positions cannot supply.
    """
    na, nb = sector
    rem = n_orb - pos - 1
    a_after = a_used + _TOKEN_ALPHA
    b_after = b_used + _TOKEN_BETA
    return ((a_after <= na) & (b_after <= nb)
            & (na - a_after <= rem) & (nb - b_after <= rem))


# -- parameter layout -------------------------------------------------------

def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, f = cfg.d_model, cfg.d_ff
    shapes = [("tok_emb", (BEGIN_TOKEN + 1, d)), ("pos_emb", (cfg.n_orb, d))]
    for i in range(cfg.n_layers):
        p = f"l{i}."
        shapes += [(p + "ln1.g", (d,)), (p + "ln1.b", (d,)),
                   (p + "wq", (d, d)), (p + "bq", (d,)),
                   (p + "wk", (d, d)), (p + "bk", (d,)),
                   (p + "wv", (d, d)), (p + "bv", (d,)),
                   (p + "wo", (d, d)), (p + "bo", (d,)),
                   (p + "ln2.g", (d,)), (p + "ln2.b", (d,)),
                   (p + "w1", (d, f)), (p + "b1", (f,)),
                   (p + "w2", (f, d)), (p + "b2", (d,))]
    shapes += [("lnf.g", (d,)), ("lnf.b", (d,)),
               ("wout", (d, 4)), ("bout", (4,))]
    dims = [cfg.n_qubits, *cfg.phase_hidden, 4]
    for j in range(len(dims) - 1):
        shapes += [(f"phase.w{j}", (dims[j], dims[j + 1])),
                   (f"phase.b{j}", (dims[j + 1],))]
    return shapes


def n_params(cfg: ModelConfig) -> int:
    return sum(math.prod(s) for _, s in param_shapes(cfg))


def unflatten(cfg: ModelConfig, flat: np.ndarray) -> dict[str, np.ndarray]:
    """Named views into the flat parameter vector (no copies)."""
    views, offset = {}, 0
    for name, shape in param_shapes(cfg):
        size = math.prod(shape)
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    if offset != flat.size:
        raise ValueError(f"expected {offset} parameters, got {flat.size}")
    return views


def init_params(cfg: ModelConfig, seed: int = 0) -> np.ndarray:
    """Seeded normal(0, 0.02) weights, zero biases, unit layer-norm gains.

    The final phase layer starts at zero so the initial state is real and
    positive.
    """
    rng = np.random.default_rng(seed)
    n_phase_layers = len(cfg.phase_hidden) + 1
    parts = []
    for name, shape in param_shapes(cfg):
        if name == f"phase.w{n_phase_layers - 1}":
            parts.append(np.zeros(shape))
        elif len(shape) == 2:
            parts.append(rng.normal(0.0, 0.02, size=shape))
        elif name.endswith(".g"):
            parts.append(np.ones(shape))
        else:
            parts.append(np.zeros(shape))
    return np.concatenate([p.reshape(-1) for p in parts])


# -- numpy forward path ------------------------------------------------------

def _ln_np(x, g, b):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS) * g + b


def _gelu_np(x):
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _softmax_np(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _decoder_logits(cfg, views, inp):
    """Per-position occupation logits for input token rows inp (B, L)."""
    B, L = inp.shape
    d_k = cfg.d_model // cfg.n_heads
    x = views["tok_emb"][inp] + views["pos_emb"][:L]
    future = np.triu(np.ones((L, L), dtype=bool), k=1)
    for i in range(cfg.n_layers):
        p = f"l{i}."
        h = _ln_np(x, views[p + "ln1.g"], views[p + "ln1.b"])
        q = h @ views[p + "wq"] + views[p + "bq"]
        k = h @ views[p + "wk"] + views[p + "bk"]
        v = h @ views[p + "wv"] + views[p + "bv"]
        q = q.reshape(B, L, cfg.n_heads, d_k).transpose(0, 2, 1, 3)
        k = k.reshape(B, L, cfg.n_heads, d_k).transpose(0, 2, 1, 3)
        v = v.reshape(B, L, cfg.n_heads, d_k).transpose(0, 2, 1, 3)
        scores = (q / np.sqrt(d_k)) @ k.swapaxes(-1, -2)
        scores = np.where(future, _MASK_FILL, scores)
        ctx = _softmax_np(scores) @ v
        ctx = ctx.transpose(0, 2, 1, 3).reshape(B, L, cfg.d_model)
        x = x + ctx @ views[p + "wo"] + views[p + "bo"]
        h2 = _ln_np(x, views[p + "ln2.g"], views[p + "ln2.b"])
        ff = _gelu_np(h2 @ views[p + "w1"] + views[p + "b1"])
        x = x + ff @ views[p + "w2"] + views[p + "b2"]
    x = _ln_np(x, views["lnf.g"], views["lnf.b"])
    return x @ views["wout"] + views["bout"]


def _phase_np(cfg, views, pm):
    h = pm
    for j in range(len(cfg.phase_hidden)):
        h = np.tanh(h @ views[f"phase.w{j}"] + views[f"phase.b{j}"])
    j = len(cfg.phase_hidden)
    out = h @ views[f"phase.w{j}"] + views[f"phase.b{j}"]
    return out.sum(axis=-1)


def _feasibility(cfg, tokens):
    """Allowed-token mask (B, n_orb, 4) given each configuration's prefix."""
    na, nb = cfg.sector
    a_bits, b_bits = tokens & 1, tokens >> 1
    a_before = np.cumsum(a_bits, axis=1) - a_bits
    b_before = np.cumsum(b_bits, axis=1) - b_bits
    rem = cfg.n_orb - 1 - np.arange(cfg.n_orb)
    a_after = a_before[:, :, None] + _TOKEN_ALPHA
    b_after = b_before[:, :, None] + _TOKEN_BETA
    return ((a_after <= na) & (b_after <= nb)
            & (na - a_after <= rem[:, None]) & (nb - b_after <= rem[:, None]))


def _plus_minus(configs) -> np.ndarray:
    bits = np.array([[int(c) for c in config] for config in configs], dtype=float)
    return 1.0 - 2.0 * bits


@dataclass(frozen=True)
class SampleEntry:
    config: Configuration
    count: int
    log_prob: float
    phase: float


@dataclass(frozen=True)
class SampleBatch:
    entries: tuple[SampleEntry, ...]
    total: int


class Model:
    """Transformer wavefunction: immutable config plus a flat parameter vector."""

    def __init__(self, cfg: ModelConfig, params: np.ndarray):
        self.cfg = cfg
        self.params = np.asarray(params, dtype=float)
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters must be finite")
        self.views = unflatten(cfg, self.params)

    @classmethod
    def initialized(cls, cfg: ModelConfig, seed: int = 0) -> "Model":
        return cls(cfg, init_params(cfg, seed))

    @property
    def n_params(self) -> int:
        return self.params.size

    def _tokens(self, configs) -> np.ndarray:
        rows = []
        for config in configs:
            if len(config) != self.cfg.n_qubits:
                raise ValueError(
                    f"configuration must have {self.cfg.n_qubits} bits")
            rows.append(tokenize(config))
        return np.array(rows, dtype=np.int64)

    def score_batch(self, configs) -> tuple[np.ndarray, np.ndarray]:
        """(log p, phase) arrays; out-of-sector rows get log p = -inf."""
        tokens = self._tokens(configs)
        B, n = tokens.shape
        inp = np.concatenate(
            [np.full((B, 1), BEGIN_TOKEN, dtype=np.int64), tokens[:, :-1]],
            axis=1)
        logits = _decoder_logits(self.cfg, self.views, inp)
        allowed = _feasibility(self.cfg, tokens)
        probs = _softmax_np(np.where(~allowed, _MASK_FILL, logits))
        sel = np.take_along_axis(probs, tokens[:, :, None], axis=2)[:, :, 0]
        realized_ok = np.take_along_axis(
            allowed, tokens[:, :, None], axis=2)[:, :, 0].all(axis=1)
        with np.errstate(divide="ignore"):
            logp = np.where(realized_ok, np.log(sel).sum(axis=1), -np.inf)
        return logp, _phase_np(self.cfg, self.views, _plus_minus(configs))

    def log_prob_and_phase(self, config: Configuration) -> tuple[float, float]:
        logp, phase = self.score_batch([config])
        return float(logp[0]), float(phase[0])

    def amplitudes(self, configs) -> np.ndarray:
        """Complex sqrt(p) * exp(i*phi) for each configuration."""
        logp, phase = self.score_batch(configs)
        mag = np.exp(0.5 * logp)
        return mag * np.exp(1j * phase)

    def sample_batch(self, n_samples: int, seed: int = 0) -> SampleBatch:
        """Tree-splitting autoregressive sampler.

        One prefix starts with the whole sample budget; at each position the
        budget splits across tokens by a multinomial draw from the masked
        conditional. Each branch draws from its own generator keyed by
        (seed, position, prefix), so the result does not depend on how
        branches are ordered or sharded.
        """
        if n_samples < 1:
            raise ValueError("n_samples must be positive")
        cfg = self.cfg
        prefixes = [((), n_samples, 0, 0)]  # tokens, multiplicity, a, b used
        for pos in range(cfg.n_orb):
            inp = np.array(
                [(BEGIN_TOKEN,) + toks for toks, _, _, _ in prefixes],
                dtype=np.int64)
            logits = _decoder_logits(cfg, self.views, inp)[:, -1, :]
            children = []
            for row, (toks, mult, a_used, b_used) in enumerate(prefixes):
                mask = allowed_tokens(cfg.n_orb, cfg.sector, pos, a_used, b_used)
                probs = _softmax_np(np.where(~mask, _MASK_FILL, logits[row]))
                probs = probs / probs.sum()
                key = 0
                for t in toks:
                    key = 4 * key + int(t)
                rng = np.random.default_rng((seed, pos, key))
                counts = rng.multinomial(mult, probs)
                for tok in range(4):
                    if counts[tok] > 0:
                        children.append((toks + (tok,), int(counts[tok]),
                                         a_used + int(_TOKEN_ALPHA[tok]),
                                         b_used + int(_TOKEN_BETA[tok])))
            prefixes = children
        configs = [detokenize(toks) for toks, _, _, _ in prefixes]
        logp, phase = self.score_batch(configs)
        entries = [SampleEntry(c, mult, float(lp), float(ph))
                   for (c, (_, mult, _, _), lp, ph)
                   in zip(configs, prefixes, logp, phase)]
        entries.sort(key=lambda e: (-e.count, e.config))
        return SampleBatch(tuple(entries), n_samples)

    # -- tape path for gradients ------------------------------------------
    def tape_forward(self, configs):
        """Build a tape scoring the given in-sector configurations.

        Returns (tape, logp node over configs, phase node, leaf ids by
        parameter name). Configurations are stacked block-diagonally so one
        2-d attention pass covers the whole batch.
        """
        cfg = self.cfg
        for config in configs:
            if sector_of(config) != cfg.sector:
                raise ValueError(f"configuration {config} is out of sector")
        tokens = self._tokens(configs)
        B, n = tokens.shape
        R = B * n
        d_k = cfg.d_model // cfg.n_heads

        inp = np.concatenate(
            [np.full((B, 1), BEGIN_TOKEN, dtype=np.int64), tokens[:, :-1]],
            axis=1).reshape(-1)
        block = np.repeat(np.arange(B), n)
        pos = np.tile(np.arange(n), B)
        visible = (block[:, None] == block[None, :]) & (pos[None, :] <= pos[:, None])
        scale = np.full((R, d_k), 1.0 / np.sqrt(d_k))

        tape = Tape()
        leaf = {name: tape.param(arr) for name, arr in self.views.items()}
        x = tape.add(tape.embedding_lookup(leaf["tok_emb"], inp),
                     tape.embedding_lookup(leaf["pos_emb"], pos))
        for i in range(cfg.n_layers):
            p = f"l{i}."
            h = tape.layer_norm(x, leaf[p + "ln1.g"], leaf[p + "ln1.b"])
            q = tape.add(tape.matmul(h, leaf[p + "wq"]), leaf[p + "bq"])
            k = tape.add(tape.matmul(h, leaf[p + "wk"]), leaf[p + "bk"])
            v = tape.add(tape.matmul(h, leaf[p + "wv"]), leaf[p + "bv"])
            heads = []
            for hd in range(cfg.n_heads):
                cols = (slice(None), slice(hd * d_k, (hd + 1) * d_k))
                qh = tape.multiply(tape.slice(q, cols), tape.constant(scale))
                scores = tape.matmul(qh, tape.slice(k, cols), transpose_b=True)
                probs = tape.softmax_rows(
                    tape.masked_fill(scores, ~visible, _MASK_FILL))
                heads.append(tape.matmul(probs, tape.slice(v, cols)))
            ctx = tape.concat(heads, axis=1)
            attn = tape.add(tape.matmul(ctx, leaf[p + "wo"]), leaf[p + "bo"])
            x = tape.add(x, attn)
            h2 = tape.layer_norm(x, leaf[p + "ln2.g"], leaf[p + "ln2.b"])
            ff = tape.gelu(tape.add(tape.matmul(h2, leaf[p + "w1"]),
                                    leaf[p + "b1"]))
            x = tape.add(x, tape.add(tape.matmul(ff, leaf[p + "w2"]),
                                     leaf[p + "b2"]))
        x = tape.layer_norm(x, leaf["lnf.g"], leaf["lnf.b"])
        logits = tape.add(tape.matmul(x, leaf["wout"]), leaf["bout"])
        infeasible = ~_feasibility(cfg, tokens).reshape(R, 4)
        probs = tape.softmax_rows(
            tape.masked_fill(logits, infeasible, _MASK_FILL))
        sel = tape.slice(probs, (np.arange(R)[:, None],
                                 tokens.reshape(-1)[:, None]))
        per_config = np.kron(np.eye(B), np.ones((1, n)))
        logp = tape.slice(tape.matmul(tape.constant(per_config),
                                      tape.log(sel)), (slice(None), 0))

        h = tape.constant(_plus_minus(configs))
        for j in range(len(cfg.phase_hidden)):
            h = tape.tanh(tape.add(tape.matmul(h, leaf[f"phase.w{j}"]),
                                   leaf[f"phase.b{j}"]))
        j = len(cfg.phase_hidden)
        out = tape.add(tape.matmul(h, leaf[f"phase.w{j}"]), leaf[f"phase.b{j}"])
        phase = tape.sum(out, axis=1)
        return tape, logp, phase, leaf

    def dump_table(self, cutoff: float = 0.0) -> WavefunctionTable:
        """Score the whole sector into a table (sectors up to 1e5 configs)."""
        na, nb = self.cfg.sector
        dim = math.comb(self.cfg.n_orb, na) * math.comb(self.cfg.n_orb, nb)
        if dim > 100_000:
            raise ValueError(f"sector holds {dim} configurations, "
                             "too many to enumerate")
        configs = enumerate_sector(self.cfg.n_orb, na, nb)
        amps = self.amplitudes(configs)
        entries = [(c, a) for c, a in zip(configs, amps) if abs(a) > cutoff]
        return WavefunctionTable(self.cfg.n_qubits, self.cfg.sector,
                                 "model-dump", entries)


def save_model(path, model: Model) -> None:
    """Binary checkpoint: length-prefixed JSON config then little-endian doubles."""
    header = json.dumps({
        "n_orb": model.cfg.n_orb, "sector": list(model.cfg.sector),
        "d_model": model.cfg.d_model, "n_heads": model.cfg.n_heads,
        "n_layers": model.cfg.n_layers, "d_ff": model.cfg.d_ff,
        "phase_hidden": list(model.cfg.phase_hidden),
    }).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(model.params.astype("<f8").tobytes())


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise ValueError("checkpoint truncated")
    (hlen,) = struct.unpack_from("<Q", raw)
    if len(raw) < 8 + hlen:
        raise ValueError("checkpoint truncated")
    meta = json.loads(raw[8:8 + hlen].decode())
    cfg = ModelConfig(n_orb=meta["n_orb"], sector=tuple(meta["sector"]),
                      d_model=meta["d_model"], n_heads=meta["n_heads"],
                      n_layers=meta["n_layers"], d_ff=meta["d_ff"],
                      phase_hidden=tuple(meta["phase_hidden"]))
    flat = np.frombuffer(raw[8 + hlen:], dtype="<f8")
    if flat.size != n_params(cfg):
        raise ValueError(f"checkpoint holds {flat.size} parameters, "
                         f"expected {n_params(cfg)}")
    return Model(cfg, flat.astype(float))
