"""Sparse wavefunction tables: configuration -> complex amplitude."""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass, field

import numpy as np

from .configs import Configuration, sector_of


@dataclass
class WavefunctionTable:
    """Ordered sparse representation of a quantum state.

    entries are (configuration, amplitude) pairs sorted by descending |amplitude|
    (ties broken by configuration string). All configurations share one particle
    sector and the squared norm never exceeds 1 (it equals 1 for complete
    extractions and oracle eigenvectors, and is smaller when a table was
    truncated).
    """

    n_qubits: int
    sector: tuple[int, int]
    source: str
    entries: list[tuple[Configuration, complex]] = field(default_factory=list)

    def __post_init__(self):
        self.sector = tuple(self.sector)
        self.sort()

    def sort(self) -> None:
        self.entries.sort(key=lambda e: (-abs(e[1]), e[0]))

    def norm_sq(self) -> float:
        return float(sum(abs(c) ** 2 for _, c in self.entries))

    def validate(self) -> None:
        seen = set()
        for cfg, _ in self.entries:
            if len(cfg) != self.n_qubits or set(cfg) - {"0", "1"}:
                raise ValueError(f"bad configuration {cfg!r}")
            if sector_of(cfg) != self.sector:
                raise ValueError(f"configuration {cfg} outside sector {self.sector}")
            if cfg in seen:
                raise ValueError(f"duplicate configuration {cfg}")
            seen.add(cfg)
        if self.norm_sq() > 1.0 + 1e-10:
            raise ValueError("table norm exceeds 1")

    def gauge_fix(self) -> "WavefunctionTable":
        """Rotate the global phase so the largest-|c| amplitude is real positive."""
        self.sort()
        if self.entries and abs(self.entries[0][1]) > 0:
            phase = cmath.exp(-1j * cmath.phase(self.entries[0][1]))
            self.entries = [(cfg, c * phase) for cfg, c in self.entries]
            # keep the leading amplitude exactly real
            cfg0, c0 = self.entries[0]
            self.entries[0] = (cfg0, complex(abs(c0), 0.0))
        return self

    def amplitude(self, config: Configuration) -> complex:
        for cfg, c in self.entries:
            if cfg == config:
                return c
        return 0j

    def as_dict(self) -> dict[Configuration, complex]:
        return dict(self.entries)

    def truncated(self, threshold: float) -> "WavefunctionTable":
        """Drop entries with |c| below threshold (norm is not rescaled)."""
        kept = [(cfg, c) for cfg, c in self.entries if abs(c) >= threshold]
        return WavefunctionTable(self.n_qubits, self.sector, self.source, kept)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            meta = {
                "meta": {
                    "n_qubits": self.n_qubits,
                    "sector": list(self.sector),
                    "source": self.source,
                }
            }
            fh.write(json.dumps(meta) + "\n")
            for cfg, c in self.entries:
                fh.write(
                    json.dumps({"config": cfg, "re": float(c.real), "im": float(c.imag)}) + "\n"
                )


def load_jsonl(path) -> WavefunctionTable:
    with open(path) as fh:
        first = json.loads(fh.readline())
        if "meta" not in first:
            raise ValueError("missing table header record")
        meta = first["meta"]
        entries = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            entries.append((rec["config"], complex(rec["re"], rec["im"])))
    table = WavefunctionTable(
        n_qubits=int(meta["n_qubits"]),
        sector=tuple(meta["sector"]),
        source=str(meta["source"]),
        entries=entries,
    )
    table.validate()
    return table


def table_from_vector(
    vec: np.ndarray,
    configs: list[Configuration],
    n_qubits: int,
    source: str,
    threshold: float = 0.0,
) -> WavefunctionTable:
    """Build a gauge-fixed table from parallel (configs, amplitudes) arrays."""
    if len(configs) == 0:
        raise ValueError("empty configuration list")
    sector = sector_of(configs[0])
    entries = [
        (cfg, complex(vec[i])) for i, cfg in enumerate(configs) if abs(vec[i]) > threshold
    ]
    table = WavefunctionTable(n_qubits=n_qubits, sector=sector, source=source, entries=entries)
    return table.gauge_fix()
