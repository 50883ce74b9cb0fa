"""Restricted Hartree-Fock with DIIS, plus the AO->MO transformation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ATOMIC_NUMBER, build_shells
from .md import (
    eri_tensor,
    kinetic_matrix,
    nuclear_matrix,
    nuclear_repulsion,
    overlap_matrix,
)

BOHR_PER_ANGSTROM = 1.0 / 0.529177210903  # CODATA 2018 Bohr radius in Angstrom


class ScfError(RuntimeError):
    pass


@dataclass
class ScfResult:
    e_hf: float
    e_nuc: float
    mo_energies: np.ndarray
    C: np.ndarray  # AO -> MO coefficients, columns are MOs
    h_ao: np.ndarray
    eri_ao: np.ndarray
    n_elec: int
    iterations: int
    density: np.ndarray = None  # converged AO density (per spin pair), for warm starts


def _canonical_sign(C: np.ndarray) -> np.ndarray:
    """Flip each MO so its largest-|coefficient| AO entry is positive."""
    C = C.copy()
    for k in range(C.shape[1]):
        col = C[:, k]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0:
            C[:, k] = -col
    return C


def run_rhf(
    atoms: list[tuple[str, np.ndarray]],
    basis: str,
    max_iter: int = 200,
    conv_e: float = 1e-12,
    conv_err: float = 1e-10,
    diis_depth: int = 8,
    d_init: np.ndarray | None = None,
) -> ScfResult:
    """Closed-shell RHF with DIIS. Coordinates in bohr.

    Starts from the core-Hamiltonian guess unless d_init (an AO density from a
    nearby geometry) is given; warm starts keep stretched-bond scans on the
    same SCF branch as the equilibrium solution.
    """
    shells = build_shells(atoms, basis)
    charges = [(float(ATOMIC_NUMBER[sym]), np.asarray(xyz, float)) for sym, xyz in atoms]
    n_elec = int(sum(z for z, _ in charges))
    if n_elec % 2:
        raise ScfError("RHF requires an even electron count")
    n_occ = n_elec // 2

    S = overlap_matrix(shells)
    T = kinetic_matrix(shells)
    V = nuclear_matrix(shells, charges)
    H = T + V
    eri = eri_tensor(shells)
    e_nuc = nuclear_repulsion(charges)

    s_vals, s_vecs = np.linalg.eigh(S)
    if s_vals.min() < 1e-8:
        raise ScfError("near-singular overlap matrix")
    X = s_vecs @ np.diag(s_vals**-0.5) @ s_vecs.T

    def fock(D):
        J = np.einsum("pqrs,rs->pq", eri, D)
        K = np.einsum("prqs,rs->pq", eri, D)
        return H + 2.0 * J - K

    def density(F):
        Fp = X.T @ F @ X
        eps, Cp = np.linalg.eigh(Fp)
        C = X @ Cp
        Cocc = C[:, :n_occ]
        return Cocc @ Cocc.T, eps, C

    if d_init is not None:
        if d_init.shape != S.shape:
            raise ScfError("warm-start density has wrong dimension")
        D = d_init
        F0 = fock(D)
        _, eps, C = density(F0)
    else:
        D, eps, C = density(H)
    e_old = np.inf
    fock_hist: list[np.ndarray] = []
    err_hist: list[np.ndarray] = []
    for it in range(1, max_iter + 1):
        F = fock(D)
        e_tot = float(np.sum(D * (H + F))) + e_nuc
        err = X.T @ (F @ D @ S - S @ D @ F) @ X
        err_norm = float(np.linalg.norm(err))
        if abs(e_tot - e_old) < conv_e and err_norm < conv_err:
            return ScfResult(
                e_hf=e_tot,
                e_nuc=e_nuc,
                mo_energies=eps,
                C=_canonical_sign(C),
                h_ao=H,
                eri_ao=eri,
                n_elec=n_elec,
                iterations=it,
                density=D,
            )
        e_old = e_tot

        fock_hist.append(F)
        err_hist.append(err)
        if len(fock_hist) > diis_depth:
            fock_hist.pop(0)
            err_hist.pop(0)
        if len(fock_hist) > 1:
            m = len(fock_hist)
            B = -np.ones((m + 1, m + 1))
            B[m, m] = 0.0
            for i in range(m):
                for j in range(m):
                    B[i, j] = float(np.sum(err_hist[i] * err_hist[j]))
            rhs = np.zeros(m + 1)
            rhs[m] = -1.0
            try:
                w = np.linalg.solve(B, rhs)[:m]
                F = sum(wi * Fi for wi, Fi in zip(w, fock_hist))
            except np.linalg.LinAlgError:
                pass
        D, eps, C = density(F)
    raise ScfError(f"SCF not converged in {max_iter} iterations (last E={e_old:.10f})")


def mo_integrals(res: ScfResult) -> tuple[np.ndarray, np.ndarray]:
    """Transform h and (pq|rs) to the MO basis."""
    C = res.C
    h_mo = C.T @ res.h_ao @ C
    g = np.einsum("pi,pqrs->iqrs", C, res.eri_ao, optimize=True)
    g = np.einsum("qj,iqrs->ijrs", C, g, optimize=True)
    g = np.einsum("rk,ijrs->ijks", C, g, optimize=True)
    g = np.einsum("sl,ijks->ijkl", C, g, optimize=True)
    return h_mo, g
