"""Occupation-number configurations on interleaved spin orbitals.

A configuration is a string of '0'/'1' of length 2*n_orb. Character k gives
the occupation of spin orbital k, where spin orbital 2p is the alpha and
2p+1 the beta component of spatial orbital p. Character k corresponds to
qubit k of the simulator, so ``int(config[::-1], 2)`` is the basis index.
"""

from __future__ import annotations

from itertools import combinations

Configuration = str


def config_to_index(config: Configuration) -> int:
    return int(config[::-1], 2)


def index_to_config(index: int, n_qubits: int) -> Configuration:
    if not 0 <= index < (1 << n_qubits):
        raise ValueError("basis index out of range")
    return format(index, f"0{n_qubits}b")[::-1]


def config_to_strings(config: Configuration) -> tuple[int, int]:
    """Split into (alpha, beta) occupation integers over spatial orbitals.

    Bit p of each integer is the occupation of spatial orbital p.
    """
    a = b = 0
    for p in range(len(config) // 2):
        if config[2 * p] == "1":
            a |= 1 << p
        if config[2 * p + 1] == "1":
            b |= 1 << p
    return a, b


def strings_to_config(alpha: int, beta: int, n_orb: int) -> Configuration:
    chars = []
    for p in range(n_orb):
        chars.append("1" if (alpha >> p) & 1 else "0")
        chars.append("1" if (beta >> p) & 1 else "0")
    return "".join(chars)


def sector_of(config: Configuration) -> tuple[int, int]:
    """(N_alpha, N_beta) particle content of a configuration."""
    a, b = config_to_strings(config)
    return a.bit_count(), b.bit_count()


def hf_config(n_orb: int, n_alpha: int, n_beta: int) -> Configuration:
    """Aufbau reference: lowest n_alpha/n_beta spatial orbitals occupied."""
    if n_alpha > n_orb or n_beta > n_orb:
        raise ValueError("more electrons of one spin than orbitals")
    return strings_to_config((1 << n_alpha) - 1, (1 << n_beta) - 1, n_orb)


def enumerate_sector(n_orb: int, n_alpha: int, n_beta: int) -> list[Configuration]:
    """All configurations of the (n_alpha, n_beta) sector, lexicographically sorted."""
    alphas = [sum(1 << p for p in occ) for occ in combinations(range(n_orb), n_alpha)]
    betas = [sum(1 << p for p in occ) for occ in combinations(range(n_orb), n_beta)]
    out = [strings_to_config(a, b, n_orb) for a in alphas for b in betas]
    out.sort()
    return out


def interleave_parity(alpha: int, beta: int) -> int:
    """Sign relating blocked (all alpha, then all beta) to interleaved mode order.

    Returns +1 or -1: the parity of the permutation that maps the occupied
    modes from interleaved order (a0 b0 a1 b1 ...) to blocked order
    (a0 a1 ... b0 b1 ...). Each occupied beta_p crossing an occupied alpha_q
    with q > p contributes one inversion.
    """
    inv = 0
    p = beta
    while p:
        low = p & -p
        idx = low.bit_length() - 1
        inv += (alpha >> (idx + 1)).bit_count()
        p ^= low
    return -1 if inv & 1 else 1
