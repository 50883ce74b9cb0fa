"""Determinant-space eigensolvers: HF expectation, CISD, FCI.

Determinants are encoded as python integers over interleaved spin orbitals
(bit 2p = alpha_p, bit 2p+1 = beta_p), matching the simulator's qubit order,
so eigenvector phases are directly comparable with statevector amplitudes.
The large-sector FCI path works on per-spin occupation strings and converts
its result back to the interleaved sign convention at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp

from .configs import (
    Configuration,
    config_to_strings,
    hf_config,
    interleave_parity,
    sector_of,
    strings_to_config,
)
from .integrals import IntegralSet
from .tables import WavefunctionTable, table_from_vector


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class CiSpace:
    """A determinant basis: the CI level, the reference, and the member list."""

    level: str  # 'FCI' or 'CISD'
    reference: Configuration
    determinants: tuple[Configuration, ...]

    @property
    def size(self) -> int:
        return len(self.determinants)


def fci_space(ints: IntegralSet, reference: Configuration | None = None) -> CiSpace:
    from .configs import enumerate_sector

    ref = reference or hf_config(ints.n_orb, ints.n_alpha, ints.n_beta)
    dets = enumerate_sector(ints.n_orb, *sector_of(ref))
    return CiSpace(level="FCI", reference=ref, determinants=tuple(dets))


def cisd_space(ints: IntegralSet, reference: Configuration | None = None) -> CiSpace:
    """Reference plus all spin-projection-conserving single and double excitations."""
    n = ints.n_orb
    ref = reference or hf_config(n, ints.n_alpha, ints.n_beta)
    a0, b0 = config_to_strings(ref)
    dets = {ref}

    def spin_singles(occ: int) -> list[int]:
        occ_list = [p for p in range(n) if (occ >> p) & 1]
        vir_list = [p for p in range(n) if not (occ >> p) & 1]
        return [occ ^ (1 << i) | (1 << a) for i in occ_list for a in vir_list]

    def spin_doubles(occ: int) -> list[int]:
        occ_list = [p for p in range(n) if (occ >> p) & 1]
        vir_list = [p for p in range(n) if not (occ >> p) & 1]
        out = []
        for i, j in combinations(occ_list, 2):
            for a, b in combinations(vir_list, 2):
                out.append(occ ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b))
        return out

    for a1 in spin_singles(a0):
        dets.add(strings_to_config(a1, b0, n))
        for b1 in spin_singles(b0):  # alpha+beta mixed double
            dets.add(strings_to_config(a1, b1, n))
    for b1 in spin_singles(b0):
        dets.add(strings_to_config(a0, b1, n))
    for a2 in spin_doubles(a0):
        dets.add(strings_to_config(a2, b0, n))
    for b2 in spin_doubles(b0):
        dets.add(strings_to_config(a0, b2, n))
    return CiSpace(level="CISD", reference=ref, determinants=tuple(sorted(dets)))


# --- Slater-Condon matrix elements (interleaved spin-orbital convention) ---


def _so_h1(h1, P: int, Q: int) -> float:
    if (P ^ Q) & 1:
        return 0.0
    return h1[P >> 1][Q >> 1]


def _parity_below(det: int, k: int) -> int:
    return (det & ((1 << k) - 1)).bit_count() & 1


def _seq_phase(det: int, annihilate: list[int], create: list[int]) -> int:
    """Sign of a+_{c1} a+_{c2}... a_{a1} a_{a2}... |det> applied right to left."""
    sign = 0
    for k in annihilate:
        sign ^= _parity_below(det, k)
        det ^= 1 << k
    for k in create:
        sign ^= _parity_below(det, k)
        det |= 1 << k
    return -1 if sign else 1


def hamiltonian_element(ints: IntegralSet, det_a: Configuration, det_b: Configuration) -> float:
    """<a|H|b> by the Slater-Condon rules, e_core included on the diagonal."""
    ia = int(det_a[::-1], 2)
    ib = int(det_b[::-1], 2)
    return _element_int(ints.h1.tolist(), ints.h2.tolist(), ints.e_core, ia, ib)


def _element_int(h1, h2, e_core: float, ia: int, ib: int) -> float:
    diff = ia ^ ib
    deg2 = diff.bit_count()
    if deg2 > 4:
        return 0.0

    if deg2 == 0:
        occ = _occ_list(ia)
        e = e_core
        for P in occ:
            p = P >> 1
            e += h1[p][p]
        for n1, P in enumerate(occ):
            p = P >> 1
            for Q in occ[n1 + 1 :]:
                q = Q >> 1
                e += h2[p][p][q][q]
                if not (P ^ Q) & 1:
                    e -= h2[p][q][q][p]
        return e

    if deg2 == 2:
        B = (ib & diff).bit_length() - 1  # occupied in b only
        A = (ia & diff).bit_length() - 1  # occupied in a only
        if (A ^ B) & 1:
            return 0.0  # spin flip: zero by spin integration
        a, b = A >> 1, B >> 1
        val = h1[a][b]
        common = ia & ib
        for R in _occ_list(common):
            r = R >> 1
            val += h2[a][b][r][r]
            if not (R ^ A) & 1:
                val -= h2[a][r][r][b]
        return _seq_phase(ib, [B], [A]) * val

    # degree 2: a has {A1 < A2}, b has {B1 < B2}
    onlya = ia & diff
    onlyb = ib & diff
    A1 = (onlya & -onlya).bit_length() - 1
    A2 = onlya.bit_length() - 1
    B1 = (onlyb & -onlyb).bit_length() - 1
    B2 = onlyb.bit_length() - 1
    val = 0.0
    if not ((A1 ^ B1) & 1 or (A2 ^ B2) & 1):
        val += h2[A1 >> 1][B1 >> 1][A2 >> 1][B2 >> 1]
    if not ((A1 ^ B2) & 1 or (A2 ^ B1) & 1):
        val -= h2[A1 >> 1][B2 >> 1][A2 >> 1][B1 >> 1]
    if val == 0.0:
        return 0.0
    # phase of a+_{A1} a+_{A2} a_{B2} a_{B1} |b>, operators applied right to left
    return _seq_phase(ib, [B1, B2], [A2, A1]) * val


def _occ_list(det: int) -> list[int]:
    out = []
    while det:
        low = det & -det
        out.append(low.bit_length() - 1)
        det ^= low
    return out


def hf_energy(ints: IntegralSet, reference: Configuration | None = None) -> float:
    ref = reference or hf_config(ints.n_orb, ints.n_alpha, ints.n_beta)
    return hamiltonian_element(ints, ref, ref)


def build_dense(ints: IntegralSet, dets: list[Configuration] | tuple[Configuration, ...]) -> np.ndarray:
    """Dense Hamiltonian over an explicit determinant list."""
    m = len(dets)
    ints_i = [int(d[::-1], 2) for d in dets]
    h1 = ints.h1.tolist()
    h2 = ints.h2.tolist()
    H = np.zeros((m, m))
    for i in range(m):
        H[i, i] = _element_int(h1, h2, ints.e_core, ints_i[i], ints_i[i])
        for j in range(i + 1, m):
            if (ints_i[i] ^ ints_i[j]).bit_count() <= 4:
                v = _element_int(h1, h2, ints.e_core, ints_i[i], ints_i[j])
                H[i, j] = H[j, i] = v
    return H


def _connected(det: int, n_so: int):
    """Generate (sector-preserving) single and double excitations of det."""
    occ = _occ_list(det)
    vir = [k for k in range(n_so) if not (det >> k) & 1]
    for i in occ:
        for a in vir:
            if (i ^ a) & 1 == 0:
                yield det ^ (1 << i) | (1 << a)
    for n1, i in enumerate(occ):
        for j in occ[n1 + 1 :]:
            si, sj = i & 1, j & 1
            for m2, a in enumerate(vir):
                for b in vir[m2 + 1 :]:
                    if (a & 1) + (b & 1) == si + sj:
                        yield det ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b)


def build_sparse(ints: IntegralSet, dets) -> sp.csr_matrix:
    """Sparse Hamiltonian over a determinant list via connected enumeration."""
    n_so = 2 * ints.n_orb
    ints_i = [int(d[::-1], 2) for d in dets]
    index = {d: i for i, d in enumerate(ints_i)}
    h1 = ints.h1.tolist()
    h2 = ints.h2.tolist()
    rows, cols, vals = [], [], []
    for i, di in enumerate(ints_i):
        rows.append(i)
        cols.append(i)
        vals.append(_element_int(h1, h2, ints.e_core, di, di))
        for dj in _connected(di, n_so):
            j = index.get(dj)
            if j is not None and j > i:
                v = _element_int(h1, h2, ints.e_core, di, dj)
                if v != 0.0:
                    rows.extend((i, j))
                    cols.extend((j, i))
                    vals.extend((v, v))
    m = len(ints_i)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


# --- string-driven FCI for large sectors -----------------------------------


class _StringBasis:
    """Occupation strings of one spin channel and their a+_p a_q actions."""

    def __init__(self, n_orb: int, n_elec: int):
        self.n_orb = n_orb
        self.n_elec = n_elec
        self.strings = [
            sum(1 << p for p in occ) for occ in combinations(range(n_orb), n_elec)
        ]
        self.strings.sort()
        self.index = {s: i for i, s in enumerate(self.strings)}
        self.dim = len(self.strings)

    def excitation_matrix(self, p: int, q: int) -> sp.csr_matrix:
        """Sparse matrix of a+_p a_q in the string basis (blocked-spin parity)."""
        rows, cols, vals = [], [], []
        for i, s in enumerate(self.strings):
            if not (s >> q) & 1:
                continue
            t = s ^ (1 << q)
            if (t >> p) & 1:
                continue
            sign = _parity_below(s, q) ^ _parity_below(t, p)
            rows.append(self.index[t | (1 << p)])
            cols.append(i)
            vals.append(-1.0 if sign else 1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))


class _FciMatvec:
    """sigma = H c on C[I_alpha, I_beta] via the spin-factorized generator form.

    H = sum_pq k_pq E_pq + 1/2 sum_pqrs (pq|rs) E_pq E_rs with
    k_pq = h_pq - 1/2 sum_r (pr|rq); E_pq = a+_pa a_qa + a+_pb a_qb.
    """

    def __init__(self, ints: IntegralSet):
        n = ints.n_orb
        self.n = n
        self.e_core = ints.e_core
        self.ba = _StringBasis(n, ints.n_alpha)
        self.bb = self.ba if ints.n_beta == ints.n_alpha else _StringBasis(n, ints.n_beta)
        self.Ea = [[self.ba.excitation_matrix(p, q) for q in range(n)] for p in range(n)]
        self.Eb = (
            self.Ea
            if self.bb is self.ba
            else [[self.bb.excitation_matrix(p, q) for q in range(n)] for p in range(n)]
        )
        k = ints.h1 - 0.5 * np.einsum("prrq->pq", ints.h2)
        self.Ka = sum(k[p, q] * self.Ea[p][q] for p in range(n) for q in range(n)).tocsr()
        self.Kb = (
            self.Ka
            if self.bb is self.ba
            else sum(k[p, q] * self.Eb[p][q] for p in range(n) for q in range(n)).tocsr()
        )
        self.g = ints.h2.reshape(n * n, n * n)
        self.dim = self.ba.dim * self.bb.dim

    def __call__(self, c: np.ndarray) -> np.ndarray:
        n = self.n
        C = c.reshape(self.ba.dim, self.bb.dim)
        sigma = self.Ka @ C + C @ self.Kb.T
        D = np.empty((n * n, self.ba.dim * self.bb.dim))
        for p in range(n):
            for q in range(n):
                D[p * n + q] = (self.Ea[p][q] @ C + C @ self.Eb[p][q].T).ravel()
        G = (self.g @ D).reshape(n, n, self.ba.dim, self.bb.dim)
        for p in range(n):
            for q in range(n):
                Gpq = G[p, q]
                sigma += 0.5 * (self.Ea[p][q] @ Gpq + Gpq @ self.Eb[p][q].T)
        return sigma.ravel() + self.e_core * c

    def configurations(self) -> list[Configuration]:
        """Det list in (I_alpha major, I_beta minor) order."""
        return [
            strings_to_config(a, b, self.n) for a in self.ba.strings for b in self.bb.strings
        ]

    def interleave_signs(self) -> np.ndarray:
        return np.array(
            [
                interleave_parity(a, b)
                for a in self.ba.strings
                for b in self.bb.strings
            ],
            dtype=float,
        )


def lanczos_ground(matvec, dim: int, v0: np.ndarray, tol: float = 1e-9, max_iter: int = 600):
    """Lowest eigenpair by Lanczos with full reorthogonalization.

    Residual condition: ||H x - theta x|| < tol. Raises SolverError when the
    iteration cap is reached without convergence.
    """
    v = v0 / np.linalg.norm(v0)
    V = [v]
    alphas: list[float] = []
    betas: list[float] = []
    w = None
    for it in range(max_iter):
        w = matvec(V[-1])
        alphas.append(float(np.dot(V[-1], w)))
        w -= alphas[-1] * V[-1]
        if len(V) > 1:
            w -= betas[-1] * V[-2]
        # full reorthogonalization, twice for numerical safety
        for _ in range(2):
            for u in V:
                w -= np.dot(u, w) * u
        beta = float(np.linalg.norm(w))
        exhausted = beta < 1e-13 or len(V) == dim
        if it % 5 == 4 or exhausted or it == max_iter - 1:
            T = np.diag(alphas)
            if betas:
                off = np.array(betas)
                T += np.diag(off, 1) + np.diag(off, -1)
            theta, S = np.linalg.eigh(T)
            resid_est = beta * abs(S[-1, 0])
            if resid_est < 0.1 * tol or exhausted:
                x = np.zeros(dim)
                for coef, u in zip(S[:, 0], V):
                    x += coef * u
                x /= np.linalg.norm(x)
                resid = float(np.linalg.norm(matvec(x) - theta[0] * x))
                if resid < tol or exhausted:
                    return float(theta[0]), x
        if exhausted:
            break
        betas.append(beta)
        V.append(w / beta)
    raise SolverError(f"Lanczos failed to reach residual {tol} in {max_iter} iterations")


def solve(ints: IntegralSet, space: CiSpace, seed: int = 0, dense_cutoff: int = 2000):
    """Ground state in the given determinant space.

    Returns (energy, WavefunctionTable). Small spaces are diagonalized densely;
    full FCI sectors above the cutoff use the string-driven matvec with Lanczos;
    other large spaces fall back to a sparse matrix with Lanczos.
    """
    dets = space.determinants
    m = len(dets)
    if m == 0:
        raise SolverError("empty determinant space")
    n_qubits = 2 * ints.n_orb

    if m <= dense_cutoff:
        H = build_dense(ints, dets)
        evals, evecs = np.linalg.eigh(H)
        energy = float(evals[0])
        vec = evecs[:, 0]
        table = table_from_vector(vec, list(dets), n_qubits, space.level.lower())
        return energy, table

    full = comb(ints.n_orb, ints.n_alpha) * comb(ints.n_orb, ints.n_beta)
    rng = np.random.default_rng(seed)
    if space.level == "FCI" and m == full:
        mv = _FciMatvec(ints)
        configs = mv.configurations()
        ref = space.reference
        v0 = 0.05 * rng.standard_normal(mv.dim)
        v0[configs.index(ref)] += 1.0
        energy, vec = lanczos_ground(mv, mv.dim, v0)
        vec = vec * mv.interleave_signs()
        table = table_from_vector(vec, configs, n_qubits, space.level.lower())
        return energy, table

    H = build_sparse(ints, dets)
    v0 = 0.05 * rng.standard_normal(m)
    if space.reference in dets:
        v0[dets.index(space.reference)] += 1.0
    energy, vec = lanczos_ground(lambda x: H @ x, m, v0)
    table = table_from_vector(vec, list(dets), n_qubits, space.level.lower())
    return energy, table
