"""Turn simulated statevectors into sparse wavefunction tables.

Small sectors are read exhaustively; larger ones run a seeded accept/reject
walk that grows a configuration table while its Rayleigh-quotient energy
keeps improving, stopping once new configurations stop mattering.
"""

from __future__ import annotations

from math import comb, exp

import numpy as np

from .configs import (
    Configuration,
    config_to_index,
    config_to_strings,
    enumerate_sector,
    hf_config,
    index_to_config,
)
from .pauli import QubitHamiltonian
from .simulator import Statevector
from .tables import WavefunctionTable

_Y_PHASE = (1.0, 1j, -1.0, -1j)


class SectorTooLargeError(ValueError):
    """Full enumeration refused; use extract_mc for sectors this size."""


class CannotSeedError(ValueError):
    """The sampling walk cannot start on a zero-amplitude reference."""


def table_as_statevector(table: WavefunctionTable) -> Statevector:
    """Dense statevector with the table's amplitudes, zeros elsewhere."""
    amps = np.zeros(1 << table.n_qubits, dtype=complex)
    for cfg, c in table.entries:
        amps[config_to_index(cfg)] = c
    return Statevector(table.n_qubits, amps)


def extract_full(state: Statevector, sector: tuple[int, int],
                 cutoff: float = 1e-8, limit: int = 10**6) -> WavefunctionTable:
    """Read every sector amplitude; keep |c| >= cutoff, gauge-fixed."""
    if state.n_qubits % 2:
        raise ValueError("spin-orbital registers have even qubit counts")
    n_orb = state.n_qubits // 2
    n_alpha, n_beta = sector
    dim = comb(n_orb, n_alpha) * comb(n_orb, n_beta)
    if dim > limit:
        raise SectorTooLargeError(
            f"sector holds {dim} configurations (limit {limit}); use extract_mc")
    entries = []
    for cfg in enumerate_sector(n_orb, n_alpha, n_beta):
        c = complex(state.amps[config_to_index(cfg)])
        if abs(c) >= cutoff:
            entries.append((cfg, c))
    table = WavefunctionTable(state.n_qubits, sector, "vqe-extract-full", entries)
    return table.gauge_fix()


def _term_masks(ham: QubitHamiltonian):
    """Per-term (flip, yz, phase prefactor, coeff) with python ints for keys."""
    flip, yz, n_y, coeff = ham.masks()
    out = []
    for k in range(len(coeff)):
        out.append((int(flip[k]), int(yz[k]),
                    _Y_PHASE[int(n_y[k]) % 4], float(coeff[k])))
    return out


def _connected_sum(z_idx: int, terms, amps: dict) -> complex:
    """sum over table configs y of H[z,y] * c_y, skipping the diagonal."""
    acc = 0j
    for flip, yz, ph, coeff in terms:
        if flip == 0:
            continue
        y = z_idx ^ flip
        c_y = amps.get(y)
        if c_y is not None:
            sign = -1.0 if (y & yz).bit_count() & 1 else 1.0
            acc += coeff * ph * sign * c_y
    return acc


def _diagonal(z_idx: int, terms) -> float:
    val = 0.0
    for flip, yz, ph, coeff in terms:
        if flip:
            continue
        sign = -1.0 if (z_idx & yz).bit_count() & 1 else 1.0
        val += coeff * sign
    return val


def _relocate(occ: int, n_orb: int, rng) -> int:
    """Move one set bit of the occupation integer to a random empty slot."""
    filled = [p for p in range(n_orb) if (occ >> p) & 1]
    empty = [p for p in range(n_orb) if not (occ >> p) & 1]
    src = filled[int(rng.integers(len(filled)))]
    dst = empty[int(rng.integers(len(empty)))]
    return occ ^ (1 << src) | (1 << dst)


def extract_mc(state: Statevector, sector: tuple[int, int],
               ham: QubitHamiltonian, e_hf: float, steps: int,
               temperature: float = 0.01, seed: int = 0,
               cutoff: float = 1e-8) -> WavefunctionTable:
    """Grow a table by a seeded Metropolis walk over sector configurations.

    Proposals relocate one alpha and/or one beta electron of the walker.
    A proposal joins the table if it lowers the accumulated Rayleigh-quotient
    energy, or with probability exp(-dE/temperature) otherwise. The walk
    stops after `steps` proposals or once 50 consecutive accepted additions
    each moved the energy by less than 1e-6.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    n_orb = state.n_qubits // 2
    n_alpha, n_beta = sector
    reference = hf_config(n_orb, n_alpha, n_beta)
    ref_idx = config_to_index(reference)
    ref_amp = complex(state.amps[ref_idx])
    if abs(ref_amp) < 1e-15:
        raise CannotSeedError("reference configuration has zero amplitude")

    terms = _term_masks(ham)
    amps = {ref_idx: ref_amp}
    numer = _diagonal(ref_idx, terms) * abs(ref_amp) ** 2
    norm = abs(ref_amp) ** 2
    e_cur = e_hf

    moves = []
    if 0 < n_alpha < n_orb:
        moves.append("a")
    if 0 < n_beta < n_orb:
        moves.append("b")
    if len(moves) == 2:
        moves.append("ab")

    rng = np.random.default_rng(seed)
    walker = reference
    streak = 0
    for _ in range(steps):
        if not moves:
            break
        alpha, beta = config_to_strings(walker)
        kind = moves[int(rng.integers(len(moves)))]
        if "a" in kind:
            alpha = _relocate(alpha, n_orb, rng)
        if "b" in kind:
            beta = _relocate(beta, n_orb, rng)
        z_idx = 0
        for p in range(n_orb):
            if (alpha >> p) & 1:
                z_idx |= 1 << (2 * p)
            if (beta >> p) & 1:
                z_idx |= 1 << (2 * p + 1)

        if z_idx in amps:
            # revisit: the walker moves but no addition happens, so the
            # consecutive-additions streak is untouched
            walker = index_to_config(z_idx, state.n_qubits)
            continue

        c_z = complex(state.amps[z_idx])
        d_numer = 2.0 * (np.conj(c_z) * _connected_sum(z_idx, terms, amps)).real \
            + _diagonal(z_idx, terms) * abs(c_z) ** 2
        d_norm = abs(c_z) ** 2
        e_cand = (numer + d_numer) / (norm + d_norm) if norm + d_norm > 0 else e_cur
        if e_cand < e_cur:
            accept = True
        else:
            accept = rng.random() < exp(-(e_cand - e_cur) / temperature)
        if accept:
            amps[z_idx] = c_z
            numer += d_numer
            norm += d_norm
            delta = e_cand - e_cur
            e_cur = e_cand
            walker = index_to_config(z_idx, state.n_qubits)
            streak = streak + 1 if abs(delta) < 1e-6 else 0
            if streak >= 50:
                break

    entries = [(index_to_config(idx, state.n_qubits), c)
               for idx, c in amps.items() if abs(c) >= cutoff]
    table = WavefunctionTable(state.n_qubits, sector, "vqe-extract-mc", entries)
    return table.gauge_fix()
