"""Molecular integral ingestion: FCIDUMP parsing, active-space reduction, serialization.

Spatial-orbital integrals are stored dense: ``h1[p, q]`` one-electron,
``h2[p, q, r, s]`` two-electron in chemists' notation (pq|rs) with the full
8-fold permutational symmetry expanded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np


class FcidumpError(ValueError):
    """Raised for malformed FCIDUMP content."""


@dataclass(frozen=True)
class IntegralSet:
    """Second-quantized Hamiltonian coefficients for a molecular system.

    Attributes
    ----------
    n_orb : int
        Number of spatial orbitals.
    n_elec : int
        Total electron count.
    ms2 : int
        Twice the spin projection (N_alpha - N_beta).
    e_core : float
        Scalar offset (nuclear repulsion plus any folded frozen-core energy).
    h1 : np.ndarray
        (n_orb, n_orb) symmetric one-electron integrals.
    h2 : np.ndarray
        (n_orb,)*4 two-electron integrals, chemists' notation (pq|rs).
    """

    n_orb: int
    n_elec: int
    ms2: int
    e_core: float
    h1: np.ndarray = field(repr=False)
    h2: np.ndarray = field(repr=False)

    def __post_init__(self):
        h1 = np.asarray(self.h1, dtype=float)
        h2 = np.asarray(self.h2, dtype=float)
        n = self.n_orb
        if h1.shape != (n, n) or h2.shape != (n, n, n, n):
            raise ValueError("integral array shapes do not match n_orb")
        if self.n_elec < 0 or self.n_elec > 2 * n:
            raise ValueError("n_elec out of range for n_orb")
        if abs(self.ms2) > self.n_elec or (self.n_elec - self.ms2) % 2:
            raise ValueError("ms2 incompatible with n_elec")
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)

    @property
    def n_alpha(self) -> int:
        return (self.n_elec + self.ms2) // 2

    @property
    def n_beta(self) -> int:
        return (self.n_elec - self.ms2) // 2

    def validate(self, tol: float = 1e-8) -> None:
        """Check hermiticity of h1 and 8-fold symmetry of h2."""
        if not np.allclose(self.h1, self.h1.T, atol=tol):
            raise ValueError("h1 is not symmetric")
        g = self.h2
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(g, g.transpose(perm), atol=tol):
                raise ValueError(f"h2 violates permutation symmetry {perm}")


@dataclass(frozen=True)
class ActiveSpace:
    """Partition of spatial orbitals into frozen core, active set, and deleted virtuals.

    Orbitals listed in neither ``frozen`` nor ``active`` are removed entirely;
    they must be unoccupied in the reduced problem. ``active`` order is kept,
    so active orbital i of the reduced system is ``active[i]`` of the parent.
    """

    frozen: tuple[int, ...]
    active: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "frozen", tuple(self.frozen))
        object.__setattr__(self, "active", tuple(self.active))
        if set(self.frozen) & set(self.active):
            raise ValueError("frozen and active sets overlap")
        if len(set(self.frozen)) != len(self.frozen) or len(set(self.active)) != len(self.active):
            raise ValueError("duplicate orbital index in active-space lists")

    def validate(self, n_orb: int, n_elec: int) -> None:
        for i in self.frozen + self.active:
            if not 0 <= i < n_orb:
                raise ValueError(f"orbital index {i} out of range")
        n_active_elec = n_elec - 2 * len(self.frozen)
        if n_active_elec < 0:
            raise ValueError("more frozen electrons than electrons present")
        if n_active_elec > 2 * len(self.active):
            raise ValueError("active space too small for remaining electrons")


def freeze_lowest(n_orb: int, k: int) -> ActiveSpace:
    """Freeze the k energetically lowest orbitals, keep the rest active."""
    if not 0 <= k <= n_orb:
        raise ValueError("freeze count out of range")
    return ActiveSpace(frozen=tuple(range(k)), active=tuple(range(k, n_orb)))


_NUM = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([EeDd][-+]?\d+)?$")


def _parse_value(tok: str, lineno: int) -> float:
    if not _NUM.match(tok):
        raise FcidumpError(f"line {lineno}: bad numeric field {tok!r}")
    return float(tok.replace("D", "E").replace("d", "e"))


def _canon4(i: int, j: int, k: int, l: int) -> tuple[int, int, int, int]:
    # canonical representative of the 8-fold symmetry orbit (0-based)
    ij = (max(i, j), min(i, j))
    kl = (max(k, l), min(k, l))
    return ij + kl if ij >= kl else kl + ij


def parse_fcidump(text: str) -> IntegralSet:
    """Parse FCIDUMP text into an IntegralSet.

    Accepts the Molpro namelist header (&FCI ... &END or / terminator),
    Fortran D-exponents, and data lines of the form ``value i j k l`` with
    1-based indices. Index patterns: all-zero -> core energy, k=l=0 -> h1,
    all-positive -> h2. Duplicate entries must agree within 1e-12.
    """
    lines = text.splitlines()
    # --- header ---
    header_toks: list[str] = []
    data_start = None
    in_header = False
    for ln, raw in enumerate(lines):
        s = raw.strip()
        if not s:
            continue
        if not in_header:
            if not s.upper().startswith("&FCI"):
                raise FcidumpError(f"line {ln + 1}: expected &FCI header")
            in_header = True
            s = s[4:]
        end = re.search(r"&END|/", s, flags=re.IGNORECASE)
        if end:
            header_toks.extend(s[: end.start()].replace(",", " ").split())
            data_start = ln + 1
            break
        header_toks.extend(s.replace(",", " ").split())
    if data_start is None:
        raise FcidumpError("unterminated FCIDUMP header")

    fields: dict[str, str] = {}
    key = None
    for tok in header_toks:
        if "=" in tok:
            key, _, val = tok.partition("=")
            key = key.strip().upper()
            fields[key] = val.strip()
        elif key is not None:
            # continuation of a comma-separated list value (e.g. ORBSYM)
            fields[key] += " " + tok
    try:
        n_orb = int(fields["NORB"])
        n_elec = int(fields["NELEC"])
    except KeyError as exc:
        raise FcidumpError(f"header missing required field {exc}") from exc
    ms2 = int(fields.get("MS2", "0") or 0)
    if n_orb <= 0:
        raise FcidumpError("NORB must be positive")

    e_core = 0.0
    have_core = False
    h1_map: dict[tuple[int, int], float] = {}
    h2_map: dict[tuple[int, int, int, int], float] = {}

    for ln in range(data_start, len(lines)):
        s = lines[ln].strip()
        if not s:
            continue
        toks = s.split()
        if len(toks) != 5:
            raise FcidumpError(f"line {ln + 1}: expected 5 fields, got {len(toks)}")
        val = _parse_value(toks[0], ln + 1)
        try:
            i, j, k, l = (int(t) for t in toks[1:])
        except ValueError:
            raise FcidumpError(f"line {ln + 1}: non-integer orbital index") from None
        for idx in (i, j, k, l):
            if idx < 0 or idx > n_orb:
                raise FcidumpError(f"line {ln + 1}: orbital index {idx} out of range")
        nz = (i > 0) + (j > 0) + (k > 0) + (l > 0)
        if nz == 0:
            if have_core and abs(e_core - val) > 1e-12:
                raise FcidumpError(f"line {ln + 1}: conflicting core energy")
            e_core, have_core = val, True
        elif nz == 2 and i > 0 and j > 0:
            keyh = (max(i, j) - 1, min(i, j) - 1)
            if keyh in h1_map and abs(h1_map[keyh] - val) > 1e-12:
                raise FcidumpError(f"line {ln + 1}: conflicting h1 entry {keyh}")
            h1_map[keyh] = val
        elif nz == 4:
            keyg = _canon4(i - 1, j - 1, k - 1, l - 1)
            if keyg in h2_map and abs(h2_map[keyg] - val) > 1e-12:
                raise FcidumpError(f"line {ln + 1}: conflicting h2 entry {keyg}")
            h2_map[keyg] = val
        else:
            raise FcidumpError(f"line {ln + 1}: unsupported index pattern {(i, j, k, l)}")

    h1 = np.zeros((n_orb, n_orb))
    for (p, q), v in h1_map.items():
        h1[p, q] = h1[q, p] = v
    h2 = np.zeros((n_orb,) * 4)
    for (p, q, r, s), v in h2_map.items():
        for a, b in ((p, q), (q, p)):
            for c, d in ((r, s), (s, r)):
                h2[a, b, c, d] = v
                h2[c, d, a, b] = v
    return IntegralSet(n_orb=n_orb, n_elec=n_elec, ms2=ms2, e_core=e_core, h1=h1, h2=h2)


def read_fcidump(path) -> IntegralSet:
    with open(path) as fh:
        return parse_fcidump(fh.read())


def write_fcidump(ints: IntegralSet, path=None) -> str:
    """Serialize to FCIDUMP text (canonical 8-fold loop order, 17 significant digits).

    Re-parsing the output reproduces the IntegralSet exactly; entries that are
    exactly zero are omitted.
    """
    n = ints.n_orb
    out = [
        f"&FCI NORB={n:4d},NELEC={ints.n_elec:3d},MS2={ints.ms2:2d},",
        "  ORBSYM=" + ",".join(["1"] * n) + ",",
        "  ISYM=1,",
        "&END",
    ]

    def emit(v, i, j, k, l):
        out.append(f" {v: .16E} {i:4d} {j:4d} {k:4d} {l:4d}")

    for p in range(n):
        for q in range(p + 1):
            for r in range(p + 1):
                smax = q if r == p else r
                for s in range(smax + 1):
                    v = ints.h2[p, q, r, s]
                    if v != 0.0:
                        emit(v, p + 1, q + 1, r + 1, s + 1)
    for p in range(n):
        for q in range(p + 1):
            if ints.h1[p, q] != 0.0:
                emit(ints.h1[p, q], p + 1, q + 1, 0, 0)
    emit(ints.e_core, 0, 0, 0, 0)
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def apply_active_space(ints: IntegralSet, space: ActiveSpace) -> IntegralSet:
    """Fold frozen doubly-occupied orbitals into e_core/h1 and drop deleted virtuals.

    The frozen-core energy is
        E_f = sum_i 2 h_ii + sum_ij (2 (ii|jj) - (ij|ji)),   i, j in frozen,
    and the active one-electron integrals pick up
        h'_pq = h_pq + sum_i (2 (pq|ii) - (pi|iq)).
    """
    space.validate(ints.n_orb, ints.n_elec)
    f = list(space.frozen)
    a = list(space.active)
    h1, h2 = ints.h1, ints.h2

    e_f = 2.0 * sum(h1[i, i] for i in f)
    for i in f:
        for j in f:
            e_f += 2.0 * h2[i, i, j, j] - h2[i, j, j, i]

    h1a = h1[np.ix_(a, a)].copy()
    if f:
        h1a += 2.0 * h2[np.ix_(a, a, f, f)].trace(axis1=2, axis2=3)
        h1a -= h2[np.ix_(a, f, f, a)].trace(axis1=1, axis2=2)
    h2a = h2[np.ix_(a, a, a, a)].copy()

    return IntegralSet(
        n_orb=len(a),
        n_elec=ints.n_elec - 2 * len(f),
        ms2=ints.ms2,
        e_core=ints.e_core + e_f,
        h1=h1a,
        h2=h2a,
    )
