"""McMurchie-Davidson molecular integrals over contracted s/p Gaussians.

Produces overlap, kinetic, nuclear-attraction, and two-electron repulsion
integrals in the atomic-orbital basis. Angular momentum is limited to s and p
shells, which covers the minimal bases shipped in basis.py. All-s electron
repulsion blocks take a vectorized fast path so long hydrogen chains stay cheap.
"""

from __future__ import annotations

import numpy as np
from scipy.special import hyp1f1

from .basis import Shell

_COMPONENTS = {0: [(0, 0, 0)], 1: [(1, 0, 0), (0, 1, 0), (0, 0, 1)]}


def boys(n: int, x: float) -> float:
    return hyp1f1(n + 0.5, n + 1.5, -x) / (2.0 * n + 1.0)


def _e1d(i: int, j: int, t: int, Qx: float, a: float, b: float) -> float:
    """Hermite expansion coefficient E_t^{ij} for a 1D Gaussian product."""
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return np.exp(-q * Qx * Qx)
    if j == 0:
        return (
            _e1d(i - 1, j, t - 1, Qx, a, b) / (2.0 * p)
            - (q * Qx / a) * _e1d(i - 1, j, t, Qx, a, b)
            + (t + 1) * _e1d(i - 1, j, t + 1, Qx, a, b)
        )
    return (
        _e1d(i, j - 1, t - 1, Qx, a, b) / (2.0 * p)
        + (q * Qx / b) * _e1d(i, j - 1, t, Qx, a, b)
        + (t + 1) * _e1d(i, j - 1, t + 1, Qx, a, b)
    )


def _overlap_prim(a, lmn1, A, b, lmn2, B) -> float:
    s = 1.0
    for ax in range(3):
        s *= _e1d(lmn1[ax], lmn2[ax], 0, A[ax] - B[ax], a, b)
    return s * (np.pi / (a + b)) ** 1.5


def _kinetic_prim(a, lmn1, A, b, lmn2, B) -> float:
    l2, m2, n2 = lmn2
    term0 = b * (2 * (l2 + m2 + n2) + 3) * _overlap_prim(a, lmn1, A, b, lmn2, B)
    term1 = -2.0 * b * b * (
        _overlap_prim(a, lmn1, A, b, (l2 + 2, m2, n2), B)
        + _overlap_prim(a, lmn1, A, b, (l2, m2 + 2, n2), B)
        + _overlap_prim(a, lmn1, A, b, (l2, m2, n2 + 2), B)
    )
    term2 = -0.5 * (
        l2 * (l2 - 1) * _overlap_prim(a, lmn1, A, b, (l2 - 2, m2, n2), B)
        + m2 * (m2 - 1) * _overlap_prim(a, lmn1, A, b, (l2, m2 - 2, n2), B)
        + n2 * (n2 - 1) * _overlap_prim(a, lmn1, A, b, (l2, m2, n2 - 2), B)
    )
    return term0 + term1 + term2


def _hermite_coulomb(t, u, v, n, p, PC, boys_table) -> float:
    if t < 0 or u < 0 or v < 0:
        return 0.0
    if t == u == v == 0:
        return (-2.0 * p) ** n * boys_table[n]
    if t > 0:
        return (t - 1) * _hermite_coulomb(t - 2, u, v, n + 1, p, PC, boys_table) + PC[
            0
        ] * _hermite_coulomb(t - 1, u, v, n + 1, p, PC, boys_table)
    if u > 0:
        return (u - 1) * _hermite_coulomb(t, u - 2, v, n + 1, p, PC, boys_table) + PC[
            1
        ] * _hermite_coulomb(t, u - 1, v, n + 1, p, PC, boys_table)
    return (v - 1) * _hermite_coulomb(t, u, v - 2, n + 1, p, PC, boys_table) + PC[
        2
    ] * _hermite_coulomb(t, u, v - 1, n + 1, p, PC, boys_table)


def _nuclear_prim(a, lmn1, A, b, lmn2, B, C) -> float:
    l1, m1, n1 = lmn1
    l2, m2, n2 = lmn2
    p = a + b
    P = (a * A + b * B) / p
    PC = P - C
    x = p * float(PC @ PC)
    nmax = l1 + l2 + m1 + m2 + n1 + n2
    boys_table = [boys(n, x) for n in range(nmax + 1)]
    val = 0.0
    for t in range(l1 + l2 + 1):
        Ex = _e1d(l1, l2, t, A[0] - B[0], a, b)
        if Ex == 0.0:
            continue
        for u in range(m1 + m2 + 1):
            Ey = _e1d(m1, m2, u, A[1] - B[1], a, b)
            if Ey == 0.0:
                continue
            for v in range(n1 + n2 + 1):
                Ez = _e1d(n1, n2, v, A[2] - B[2], a, b)
                if Ez == 0.0:
                    continue
                val += Ex * Ey * Ez * _hermite_coulomb(t, u, v, 0, p, PC, boys_table)
    return 2.0 * np.pi / p * val


def _eri_prim(a, lmn1, A, b, lmn2, B, c, lmn3, C, d, lmn4, D) -> float:
    l1, m1, n1 = lmn1
    l2, m2, n2 = lmn2
    l3, m3, n3 = lmn3
    l4, m4, n4 = lmn4
    p = a + b
    q = c + d
    alpha = p * q / (p + q)
    P = (a * A + b * B) / p
    Q = (c * C + d * D) / q
    PQ = P - Q
    x = alpha * float(PQ @ PQ)
    nmax = l1 + l2 + m1 + m2 + n1 + n2 + l3 + l4 + m3 + m4 + n3 + n4
    boys_table = [boys(n, x) for n in range(nmax + 1)]
    val = 0.0
    for t in range(l1 + l2 + 1):
        E1x = _e1d(l1, l2, t, A[0] - B[0], a, b)
        if E1x == 0.0:
            continue
        for u in range(m1 + m2 + 1):
            E1y = _e1d(m1, m2, u, A[1] - B[1], a, b)
            if E1y == 0.0:
                continue
            for v in range(n1 + n2 + 1):
                E1z = _e1d(n1, n2, v, A[2] - B[2], a, b)
                if E1z == 0.0:
                    continue
                e1 = E1x * E1y * E1z
                for tt in range(l3 + l4 + 1):
                    E2x = _e1d(l3, l4, tt, C[0] - D[0], c, d)
                    if E2x == 0.0:
                        continue
                    for uu in range(m3 + m4 + 1):
                        E2y = _e1d(m3, m4, uu, C[1] - D[1], c, d)
                        if E2y == 0.0:
                            continue
                        for vv in range(n3 + n4 + 1):
                            E2z = _e1d(n3, n4, vv, C[2] - D[2], c, d)
                            if E2z == 0.0:
                                continue
                            val += (
                                e1
                                * E2x
                                * E2y
                                * E2z
                                * (-1.0) ** (tt + uu + vv)
                                * _hermite_coulomb(
                                    t + tt, u + uu, v + vv, 0, alpha, PQ, boys_table
                                )
                            )
    return val * 2.0 * np.pi**2.5 / (p * q * np.sqrt(p + q))


def _shell_offsets(shells: list[Shell]) -> list[int]:
    offs = []
    k = 0
    for sh in shells:
        offs.append(k)
        k += len(_COMPONENTS[sh.l])
    return offs


def overlap_matrix(shells: list[Shell]) -> np.ndarray:
    return _one_electron(shells, _overlap_prim)


def kinetic_matrix(shells: list[Shell]) -> np.ndarray:
    return _one_electron(shells, _kinetic_prim)


def _one_electron(shells, prim_fn) -> np.ndarray:
    offs = _shell_offsets(shells)
    n = offs[-1] + len(_COMPONENTS[shells[-1].l])
    M = np.zeros((n, n))
    for i1, sh1 in enumerate(shells):
        for i2 in range(i1 + 1):
            sh2 = shells[i2]
            for c1, lmn1 in enumerate(_COMPONENTS[sh1.l]):
                for c2, lmn2 in enumerate(_COMPONENTS[sh2.l]):
                    v = 0.0
                    for a, ca in zip(sh1.exps, sh1.coeffs):
                        for b, cb in zip(sh2.exps, sh2.coeffs):
                            v += ca * cb * prim_fn(a, lmn1, sh1.center, b, lmn2, sh2.center)
                    M[offs[i1] + c1, offs[i2] + c2] = v
                    M[offs[i2] + c2, offs[i1] + c1] = v
    return M


def nuclear_matrix(shells: list[Shell], charges: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Electron-nucleus attraction (negative definite contribution)."""
    offs = _shell_offsets(shells)
    n = offs[-1] + len(_COMPONENTS[shells[-1].l])
    M = np.zeros((n, n))
    for i1, sh1 in enumerate(shells):
        for i2 in range(i1 + 1):
            sh2 = shells[i2]
            for c1, lmn1 in enumerate(_COMPONENTS[sh1.l]):
                for c2, lmn2 in enumerate(_COMPONENTS[sh2.l]):
                    v = 0.0
                    for a, ca in zip(sh1.exps, sh1.coeffs):
                        for b, cb in zip(sh2.exps, sh2.coeffs):
                            for z, C in charges:
                                v -= (
                                    z
                                    * ca
                                    * cb
                                    * _nuclear_prim(a, lmn1, sh1.center, b, lmn2, sh2.center, C)
                                )
                    M[offs[i1] + c1, offs[i2] + c2] = v
                    M[offs[i2] + c2, offs[i1] + c1] = v
    return M


class _SPairData:
    """Primitive-pair data of an all-s shell pair, for the vectorized ERI path."""

    def __init__(self, sh1: Shell, sh2: Shell):
        a = sh1.exps[:, None]
        b = sh2.exps[None, :]
        self.p = (a + b).ravel()
        AB2 = float(np.sum((sh1.center - sh2.center) ** 2))
        self.K = np.exp(-(a * b / (a + b)) * AB2).ravel()
        self.cc = (sh1.coeffs[:, None] * sh2.coeffs[None, :]).ravel()
        self.P = (
            (a[..., None] * sh1.center + b[..., None] * sh2.center) / (a + b)[..., None]
        ).reshape(-1, 3)


def _eri_ssss(pd1: _SPairData, pd2: _SPairData) -> float:
    p = pd1.p[:, None]
    q = pd2.p[None, :]
    alpha = p * q / (p + q)
    PQ2 = np.sum((pd1.P[:, None, :] - pd2.P[None, :, :]) ** 2, axis=2)
    x = alpha * PQ2
    f0 = hyp1f1(0.5, 1.5, -x)
    pref = 2.0 * np.pi**2.5 / (p * q * np.sqrt(p + q))
    val = pref * pd1.K[:, None] * pd2.K[None, :] * f0
    return float((pd1.cc[:, None] * pd2.cc[None, :] * val).sum())


def eri_tensor(shells: list[Shell]) -> np.ndarray:
    """Full (pq|rs) tensor in chemists' notation with 8-fold symmetry."""
    offs = _shell_offsets(shells)
    n = offs[-1] + len(_COMPONENTS[shells[-1].l])
    eri = np.zeros((n, n, n, n))
    npairs = [(i, j) for i in range(len(shells)) for j in range(i + 1)]
    spair: dict[tuple[int, int], _SPairData] = {}

    def get_spair(i, j):
        if (i, j) not in spair:
            spair[(i, j)] = _SPairData(shells[i], shells[j])
        return spair[(i, j)]

    for ij, (i1, i2) in enumerate(npairs):
        sh1, sh2 = shells[i1], shells[i2]
        for kl in range(ij + 1):
            k1, k2 = npairs[kl]
            sh3, sh4 = shells[k1], shells[k2]
            all_s = sh1.l == sh2.l == sh3.l == sh4.l == 0
            block = np.zeros(
                (
                    len(_COMPONENTS[sh1.l]),
                    len(_COMPONENTS[sh2.l]),
                    len(_COMPONENTS[sh3.l]),
                    len(_COMPONENTS[sh4.l]),
                )
            )
            if all_s:
                block[0, 0, 0, 0] = _eri_ssss(get_spair(i1, i2), get_spair(k1, k2))
            else:
                for c1, lmn1 in enumerate(_COMPONENTS[sh1.l]):
                    for c2, lmn2 in enumerate(_COMPONENTS[sh2.l]):
                        for c3, lmn3 in enumerate(_COMPONENTS[sh3.l]):
                            for c4, lmn4 in enumerate(_COMPONENTS[sh4.l]):
                                v = 0.0
                                for a, ca in zip(sh1.exps, sh1.coeffs):
                                    for b, cb in zip(sh2.exps, sh2.coeffs):
                                        for c, cc in zip(sh3.exps, sh3.coeffs):
                                            for d, cd in zip(sh4.exps, sh4.coeffs):
                                                v += ca * cb * cc * cd * _eri_prim(
                                                    a, lmn1, sh1.center,
                                                    b, lmn2, sh2.center,
                                                    c, lmn3, sh3.center,
                                                    d, lmn4, sh4.center,
                                                )
                                block[c1, c2, c3, c4] = v
            o1, o2, o3, o4 = offs[i1], offs[i2], offs[k1], offs[k2]
            for c1 in range(block.shape[0]):
                for c2 in range(block.shape[1]):
                    for c3 in range(block.shape[2]):
                        for c4 in range(block.shape[3]):
                            v = block[c1, c2, c3, c4]
                            p, q, r, s = o1 + c1, o2 + c2, o3 + c3, o4 + c4
                            eri[p, q, r, s] = eri[q, p, r, s] = v
                            eri[p, q, s, r] = eri[q, p, s, r] = v
                            eri[r, s, p, q] = eri[s, r, p, q] = v
                            eri[r, s, q, p] = eri[s, r, q, p] = v
    return eri


def nuclear_repulsion(charges: list[tuple[float, np.ndarray]]) -> float:
    e = 0.0
    for i, (zi, ri) in enumerate(charges):
        for zj, rj in charges[:i]:
            e += zi * zj / float(np.linalg.norm(ri - rj))
    return e
