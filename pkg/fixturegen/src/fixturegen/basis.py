"""Minimal Gaussian basis data (STO-3G, STO-6G) for the elements used here.

Each element maps to a list of shells (label, [(exponent, coefficient), ...]).
'SP' shells carry a second coefficient column for the p functions.
Coefficients refer to unit-normalized primitives; contracted functions are
renormalized exactly when the basis is built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATOMIC_NUMBER = {"H": 1, "He": 2, "Li": 3, "C": 6, "N": 7, "O": 8, "F": 9}

# (label, exponents, s-coefficients, p-coefficients or None)
_STO3G = {
    "H": [
        ("S", [3.42525091, 0.62391373, 0.16885540],
         [0.15432897, 0.53532814, 0.44463454], None),
    ],
    "Li": [
        ("S", [16.1195750, 2.9362007, 0.7946505],
         [0.15432897, 0.53532814, 0.44463454], None),
        ("SP", [0.6362897, 0.1478601, 0.0480887],
         [-0.09996723, 0.39951283, 0.70011547],
         [0.15591627, 0.60768372, 0.39195739]),
    ],
    "N": [
        ("S", [99.1061690, 18.0523120, 4.8856602],
         [0.15432897, 0.53532814, 0.44463454], None),
        ("SP", [3.7804559, 0.8784966, 0.2857144],
         [-0.09996723, 0.39951283, 0.70011547],
         [0.15591627, 0.60768372, 0.39195739]),
    ],
    "O": [
        ("S", [130.7093200, 23.8088610, 6.4436083],
         [0.15432897, 0.53532814, 0.44463454], None),
        ("SP", [5.0331513, 1.1695961, 0.3803890],
         [-0.09996723, 0.39951283, 0.70011547],
         [0.15591627, 0.60768372, 0.39195739]),
    ],
    "F": [
        ("S", [166.6791300, 30.3608120, 8.2168207],
         [0.15432897, 0.53532814, 0.44463454], None),
        ("SP", [6.4648032, 1.5022812, 0.4885885],
         [-0.09996723, 0.39951283, 0.70011547],
         [0.15591627, 0.60768372, 0.39195739]),
    ],
}

_STO6G = {
    "H": [
        ("S", [35.52322122, 6.513143725, 1.822142904,
               0.625955266, 0.243076747, 0.100112428],
         [0.00916359628, 0.04936149294, 0.16853830490,
          0.37056279970, 0.41649152980, 0.13033408410], None),
    ],
}

_BASES = {"sto-3g": _STO3G, "sto-6g": _STO6G}


@dataclass(frozen=True)
class Shell:
    """One contracted shell: l = 0 (s) or 1 (p), shared exponents."""

    center: np.ndarray
    l: int
    exps: np.ndarray
    coeffs: np.ndarray  # contraction over unit-normalized primitives


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def primitive_norm(alpha: float, l: int) -> float:
    """Normalization constant of a cartesian primitive x^l exp(-a r^2) (m=n=0)."""
    return (2.0 * alpha / np.pi) ** 0.75 * (4.0 * alpha) ** (l / 2.0) / np.sqrt(
        _double_factorial(2 * l - 1)
    )


def _normalize_contraction(exps, coeffs, l):
    """Scale coefficients so the contracted function has unit self-overlap."""
    c = np.array([co * primitive_norm(a, l) for a, co in zip(exps, coeffs)])
    # primitive overlap on one center for angular momentum along a single axis
    s = 0.0
    for i, a in enumerate(exps):
        for j, b in enumerate(exps):
            p = a + b
            s += (
                c[i]
                * c[j]
                * (np.pi / p) ** 1.5
                * _double_factorial(2 * l - 1)
                / (2.0 * p) ** l
            )
    return c / np.sqrt(s)


def build_shells(atoms: list[tuple[str, np.ndarray]], basis: str) -> list[Shell]:
    """Expand a geometry into contracted shells; SP shells split into S and P."""
    try:
        table = _BASES[basis.lower()]
    except KeyError:
        raise ValueError(f"unknown basis {basis!r}") from None
    shells: list[Shell] = []
    for sym, xyz in atoms:
        if sym not in table:
            raise ValueError(f"element {sym} not available in {basis}")
        for label, exps, cs, cp in table[sym]:
            exps_a = np.asarray(exps, dtype=float)
            shells.append(
                Shell(np.asarray(xyz, float), 0, exps_a, _normalize_contraction(exps_a, cs, 0))
            )
            if label == "SP":
                shells.append(
                    Shell(np.asarray(xyz, float), 1, exps_a, _normalize_contraction(exps_a, cp, 1))
                )
    return shells


def basis_dimension(shells: list[Shell]) -> int:
    return sum(1 if sh.l == 0 else 3 for sh in shells)
