"""Qubit Hamiltonians via the Jordan-Wigner transformation.

Spin orbitals are interleaved: spatial orbital p maps to qubit 2p (alpha)
and qubit 2p+1 (beta), so the Hartree-Fock occupation reads as a prefix of
1s in the configuration string. Pauli products are stored as full letter
strings over {I, X, Y, Z}; coefficients are real because the integrals are.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .integrals import IntegralSet

# single-qubit products: (a, b) -> (phase, a*b) for a != b, neither identity
_MUL = {
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}

_Y_PHASE = (1.0, 1j, -1.0, -1j)


@dataclass(frozen=True)
class PauliString:
    """One Pauli product: letter per qubit and a real coefficient."""

    ops: str
    coeff: float

    def __post_init__(self):
        if not set(self.ops) <= {"I", "X", "Y", "Z"}:
            raise ValueError(f"bad Pauli letters in {self.ops!r}")


@dataclass
class QubitHamiltonian:
    """Real-weighted sum of distinct Pauli products on n_qubits qubits."""

    n_qubits: int
    terms: list

    def __post_init__(self):
        for t in self.terms:
            if len(t.ops) != self.n_qubits:
                raise ValueError("term length does not match n_qubits")
        if len({t.ops for t in self.terms}) != len(self.terms):
            raise ValueError("duplicate Pauli strings")

    @property
    def identity_coeff(self) -> float:
        eye = "I" * self.n_qubits
        for t in self.terms:
            if t.ops == eye:
                return t.coeff
        return 0.0

    def n_terms(self) -> int:
        return len(self.terms)

    def masks(self):
        """Bitmask form of every term.

        Returns (flip, yz, n_y, coeff) arrays where term k maps basis state
        x to phase * |x XOR flip[k]> with
        phase = i**n_y[k] * (-1)**popcount(x & yz[k]). Qubit q is bit q.
        """
        m = len(self.terms)
        flip = np.zeros(m, dtype=np.uint64)
        yz = np.zeros(m, dtype=np.uint64)
        n_y = np.zeros(m, dtype=np.int64)
        coeff = np.zeros(m)
        for k, t in enumerate(self.terms):
            f = z = ny = 0
            for q, letter in enumerate(t.ops):
                if letter == "X":
                    f |= 1 << q
                elif letter == "Y":
                    f |= 1 << q
                    z |= 1 << q
                    ny += 1
                elif letter == "Z":
                    z |= 1 << q
            flip[k], yz[k], n_y[k], coeff[k] = f, z, ny, t.coeff
        return flip, yz, n_y, coeff

    def sparse_matrix(self) -> sparse.csr_matrix:
        """Matrix over the full 2**n_qubits computational basis."""
        dim = 1 << self.n_qubits
        x = np.arange(dim, dtype=np.uint64)
        flip, yz, n_y, coeff = self.masks()
        rows = []
        cols = []
        vals = []
        for k in range(len(coeff)):
            sign = 1.0 - 2.0 * (np.bitwise_count(x & yz[k]) & 1)
            rows.append((x ^ flip[k]).astype(np.int64))
            cols.append(x.astype(np.int64))
            vals.append(coeff[k] * _Y_PHASE[n_y[k] % 4] * sign)
        mat = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim), dtype=complex)
        return mat.tocsr()

    def dense_matrix(self) -> np.ndarray:
        return self.sparse_matrix().toarray()

    def diagonal_element(self, config: str) -> float:
        """<x|H|x> for a configuration bitstring (qubit 0 leftmost)."""
        x = int(config[::-1], 2)
        out = 0.0
        for t in self.terms:
            if "X" in t.ops or "Y" in t.ops:
                continue
            parity = 0
            for q, letter in enumerate(t.ops):
                if letter == "Z" and (x >> q) & 1:
                    parity ^= 1
            out += -t.coeff if parity else t.coeff
        return out

    def save_json(self, path) -> None:
        doc = {"n_qubits": self.n_qubits,
               "terms": [{"paulis": t.ops, "coeff": t.coeff}
                         for t in sorted(self.terms, key=lambda t: t.ops)]}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")


def load_json(path) -> QubitHamiltonian:
    with open(path) as fh:
        doc = json.load(fh)
    terms = [PauliString(d["paulis"], float(d["coeff"])) for d in doc["terms"]]
    return QubitHamiltonian(int(doc["n_qubits"]), terms)


def _multiply(ops_a: str, ops_b: str):
    """Product of two Pauli letter strings: (phase, letters)."""
    phase = 1.0 + 0j
    out = []
    for a, b in zip(ops_a, ops_b):
        if a == "I":
            out.append(b)
        elif b == "I":
            out.append(a)
        elif a == b:
            out.append("I")
        else:
            ph, c = _MUL[(a, b)]
            phase *= ph
            out.append(c)
    return phase, "".join(out)


def _ladder(q: int, n_qubits: int, dagger: bool) -> dict:
    """Jordan-Wigner image of a creation or annihilation operator."""
    pre = "Z" * q
    post = "I" * (n_qubits - q - 1)
    y_coeff = -0.5j if dagger else 0.5j
    return {pre + "X" + post: 0.5 + 0j, pre + "Y" + post: y_coeff}


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for ta, ca in a.items():
        for tb, cb in b.items():
            ph, t = _multiply(ta, tb)
            c = ca * cb * ph
            prev = out.get(t)
            out[t] = c if prev is None else prev + c
    return out


def _poly_accum(total: dict, poly: dict, scale: complex) -> None:
    for t, c in poly.items():
        prev = total.get(t)
        inc = scale * c
        total[t] = inc if prev is None else prev + inc


def jordan_wigner(ints: IntegralSet) -> QubitHamiltonian:
    """Map an integral set to an interleaved-ordering qubit Hamiltonian.

    Terms merge exactly; coefficients below 1e-12 are dropped; e_core joins
    the identity term.
    """
    n = ints.n_orb
    nq = 2 * n
    eye = "I" * nq
    total = {eye: complex(ints.e_core)}

    create = [_ladder(q, nq, True) for q in range(nq)]
    destroy = [_ladder(q, nq, False) for q in range(nq)]

    h1 = ints.h1
    for p in range(n):
        for q in range(n):
            if abs(h1[p, q]) < 1e-14:
                continue
            for s in (0, 1):
                _poly_accum(total, _poly_mul(create[2 * p + s], destroy[2 * q + s]),
                            h1[p, q])

    # 1/2 sum <PQ|RS> aP+ aQ+ aS aR with <PQ|RS> = (pr|qs), spins P=R, Q=S
    h2 = ints.h2
    pair_cache = {}
    for p in range(n):
        for r in range(n):
            for q in range(n):
                for s in range(n):
                    v = h2[p, r, q, s]
                    if abs(v) < 1e-14:
                        continue
                    for sig in (0, 1):
                        P, R = 2 * p + sig, 2 * r + sig
                        for tau in (0, 1):
                            Q, S = 2 * q + tau, 2 * s + tau
                            if P == Q or R == S:
                                continue
                            key = (P, Q, S, R)
                            poly = pair_cache.get(key)
                            if poly is None:
                                poly = _poly_mul(_poly_mul(create[P], create[Q]),
                                                 _poly_mul(destroy[S], destroy[R]))
                                pair_cache[key] = poly
                            _poly_accum(total, poly, 0.5 * v)

    terms = []
    for ops, c in total.items():
        if abs(c.imag) > 1e-10:
            raise ValueError(f"non-real Pauli coefficient {c} on {ops}")
        if ops != eye and abs(c.real) < 1e-12:
            continue
        terms.append(PauliString(ops, c.real))
    terms.sort(key=lambda t: t.ops)
    return QubitHamiltonian(nq, terms)


def tailor(ham: QubitHamiltonian, threshold: float):
    """Drop non-identity terms with |coeff| < threshold.

    Returns (tailored Hamiltonian, total dropped weight). The ground energy
    of the tailored operator differs from the original by at most the
    dropped weight.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    eye = "I" * ham.n_qubits
    kept = []
    dropped = 0.0
    for t in ham.terms:
        if t.ops != eye and abs(t.coeff) < threshold:
            dropped += abs(t.coeff)
        else:
            kept.append(t)
    return QubitHamiltonian(ham.n_qubits, list(kept)), dropped


def number_operator(n_qubits: int) -> QubitHamiltonian:
    """Total particle number sum_q (I - Z_q)/2."""
    terms = [PauliString("I" * n_qubits, 0.5 * n_qubits)]
    for q in range(n_qubits):
        ops = "I" * q + "Z" + "I" * (n_qubits - q - 1)
        terms.append(PauliString(ops, -0.5))
    return QubitHamiltonian(n_qubits, terms)


def sz_operator(n_qubits: int) -> QubitHamiltonian:
    """Spin projection: alpha qubits (even) count +1/2, beta -1/2."""
    terms = []
    for q in range(n_qubits):
        ops = "I" * q + "Z" + "I" * (n_qubits - q - 1)
        terms.append(PauliString(ops, -0.25 if q % 2 == 0 else 0.25))
    return QubitHamiltonian(n_qubits, terms)
