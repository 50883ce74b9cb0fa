"""FCIDUMP serialization for MO-basis integrals."""

from __future__ import annotations

import numpy as np


def format_fcidump(
    h1: np.ndarray,
    h2: np.ndarray,
    e_core: float,
    n_elec: int,
    ms2: int = 0,
    threshold: float = 1e-12,
) -> str:
    """Molpro-style FCIDUMP text: canonical 8-fold loop, 1-based indices.

    Entries with magnitude below threshold are dropped (they are exact
    symmetry zeros up to round-off for the systems generated here).
    """
    n = h1.shape[0]
    lines = [
        f"&FCI NORB={n:4d},NELEC={n_elec:3d},MS2={ms2:2d},",
        "  ORBSYM=" + ",".join(["1"] * n) + ",",
        "  ISYM=1,",
        "&END",
    ]
    for p in range(n):
        for q in range(p + 1):
            for r in range(p + 1):
                smax = q if r == p else r
                for s in range(smax + 1):
                    v = h2[p, q, r, s]
                    if abs(v) > threshold:
                        lines.append(f" {v: .16E} {p+1:4d} {q+1:4d} {r+1:4d} {s+1:4d}")
    for p in range(n):
        for q in range(p + 1):
            v = h1[p, q]
            if abs(v) > threshold:
                lines.append(f" {v: .16E} {p+1:4d} {q+1:4d} {0:4d} {0:4d}")
    lines.append(f" {e_core: .16E} {0:4d} {0:4d} {0:4d} {0:4d}")
    return "\n".join(lines) + "\n"
