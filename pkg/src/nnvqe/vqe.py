"""Variational circuit optimization against a qubit Hamiltonian.

Two ansatz families: unitary coupled cluster with singles and doubles
(one first-order Trotter step of exp(T - T^dag), every Pauli rotation of one
excitation sharing a parameter) and a hardware-efficient ansatz of RY layers
separated by CZ chains. Gradients use the parameter-shift rule at the level
of individual gate occurrences, which is exact for this gate family.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .configs import Configuration, hf_config, sector_of
from .pauli import QubitHamiltonian, _ladder, _poly_accum, _poly_mul
from .simulator import (
    _ROTATIONS,
    Circuit,
    Gate,
    PauliExpectation,
    Statevector,
    _apply_gate,
    apply,
    basis_state,
)
from .optim import Adam


class OptimizerDivergedError(RuntimeError):
    """Raised when the energy turns non-finite; carries the trace so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class AnsatzSpec:
    kind: str
    reference: Configuration
    layers: int = 1
    trotter_steps: int = 1

    def __post_init__(self):
        if self.kind not in ("UCCSD", "HEA"):
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        if len(self.reference) % 2 or not self.reference:
            raise ValueError("reference must cover an even qubit count")
        n_orb = len(self.reference) // 2
        n_alpha, n_beta = sector_of(self.reference)
        if self.reference != hf_config(n_orb, n_alpha, n_beta):
            raise ValueError("reference must fill the lowest orbitals per spin")
        if self.layers < 1:
            raise ValueError("layers must be at least 1")
        if self.trotter_steps < 1:
            raise ValueError("trotter_steps must be at least 1")


@dataclass
class VqeResult:
    params: np.ndarray
    energy: float
    trace: list  # (iteration, energy, gradient norm) per outer iteration
    circuit: Circuit
    spec: AnsatzSpec
    seed: int


@dataclass
class OptSettings:
    max_iters: int = 300
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tol: float = 1e-8
    group_size: int | None = None  # None runs all parameters as one group


def excitations(n_orb: int, n_alpha: int, n_beta: int):
    """Spin-conserving singles then doubles over interleaved spin orbitals.

    Singles ascend by (occupied, virtual); doubles by (occ pair, virt pair).
    """
    occ = [2 * p for p in range(n_alpha)] + [2 * p + 1 for p in range(n_beta)]
    virt = [2 * p for p in range(n_alpha, n_orb)] + [2 * p + 1 for p in range(n_beta, n_orb)]
    occ, virt = sorted(occ), sorted(virt)
    singles = sorted((i, a) for i in occ for a in virt if (i - a) % 2 == 0)
    doubles = []
    occ_pairs = [(i, j) for i in occ for j in occ if i < j]
    virt_pairs = [(a, b) for a in virt for b in virt if a < b]
    for i, j in occ_pairs:
        for a, b in virt_pairs:
            if sorted((i % 2, j % 2)) == sorted((a % 2, b % 2)):
                doubles.append((i, j, a, b))
    return singles, sorted(doubles)


def _generator_words(ex, n_qubits):
    """Pauli expansion of the anti-Hermitian excitation generator.

    Returns (axis word, g) pairs with the generator equal to sum of i*g*P;
    all words of one excitation commute, so their rotations factor exactly.
    """
    if len(ex) == 2:
        i, a = ex
        fwd = _poly_mul(_ladder(a, n_qubits, True), _ladder(i, n_qubits, False))
        rev = _poly_mul(_ladder(i, n_qubits, True), _ladder(a, n_qubits, False))
    else:
        i, j, a, b = ex
        fwd = _poly_mul(_ladder(a, n_qubits, True), _ladder(b, n_qubits, True))
        fwd = _poly_mul(fwd, _ladder(j, n_qubits, False))
        fwd = _poly_mul(fwd, _ladder(i, n_qubits, False))
        rev = _poly_mul(_ladder(i, n_qubits, True), _ladder(j, n_qubits, True))
        rev = _poly_mul(rev, _ladder(b, n_qubits, False))
        rev = _poly_mul(rev, _ladder(a, n_qubits, False))
    total: dict = {}
    _poly_accum(total, fwd, 1.0)
    _poly_accum(total, rev, -1.0)
    words = []
    for ops, coeff in sorted(total.items()):
        if abs(coeff) < 1e-12:
            continue
        assert abs(coeff.real) < 1e-12
        words.append((ops, coeff.imag))
    return words


def _prep_gates(reference: Configuration) -> list[Gate]:
    return [Gate("X", (q,)) for q, bit in enumerate(reference) if bit == "1"]


def build_uccsd(n_orb: int, n_alpha: int, n_beta: int, spec: AnsatzSpec) -> Circuit:
    """Reference preparation plus one Trotterized exp(T - T^dag) sweep."""
    if spec.kind != "UCCSD":
        raise ValueError("spec.kind must be UCCSD")
    if len(spec.reference) != 2 * n_orb or sector_of(spec.reference) != (n_alpha, n_beta):
        raise ValueError("reference inconsistent with the active space")
    n_qubits = 2 * n_orb
    singles, doubles = excitations(n_orb, n_alpha, n_beta)
    gates = _prep_gates(spec.reference)
    # rotation angle for a generator term i*g*theta*P is -2*g*theta
    per_step = 1.0 / spec.trotter_steps
    expansions = [_generator_words(ex, n_qubits) for ex in singles + doubles]
    for _ in range(spec.trotter_steps):
        for k, words in enumerate(expansions):
            for ops, g in words:
                gates.append(Gate("PauliRotation", (), param_index=k,
                                  multiplier=-2.0 * g * per_step, axis=ops))
    return Circuit(n_qubits, tuple(gates), n_params=len(expansions))


def build_hea(n_qubits: int, spec: AnsatzSpec) -> Circuit:
    """RY layers interleaved with linear CZ chains after reference prep."""
    if spec.kind != "HEA":
        raise ValueError("spec.kind must be HEA")
    if len(spec.reference) != n_qubits:
        raise ValueError("reference inconsistent with the qubit count")
    gates = _prep_gates(spec.reference)
    for layer in range(spec.layers):
        for q in range(n_qubits):
            gates.append(Gate("RY", (q,), param_index=layer * n_qubits + q))
        for q in range(n_qubits - 1):
            gates.append(Gate("CZ", (q, q + 1)))
    for q in range(n_qubits):
        gates.append(Gate("RY", (q,), param_index=spec.layers * n_qubits + q))
    return Circuit(n_qubits, tuple(gates), n_params=n_qubits * (spec.layers + 1))


def build_ansatz(ham_qubits: int, spec: AnsatzSpec) -> Circuit:
    if spec.kind == "UCCSD":
        n_alpha, n_beta = sector_of(spec.reference)
        return build_uccsd(ham_qubits // 2, n_alpha, n_beta, spec)
    return build_hea(ham_qubits, spec)


def parameter_shift_gradient(circuit: Circuit, ham: QubitHamiltonian,
                             params, reference: Configuration | None = None,
                             param_indices=None, _expect=None) -> np.ndarray:
    """dE/dtheta by shifting each parameterized gate occurrence by pi/2.

    reference is the initial basis state; ansatz circuits prepare their own
    reference internally, so the default is the vacuum. param_indices limits
    the work to a parameter subset (other entries return 0).
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError("parameter vector length mismatch")
    for g in circuit.gates:
        if g.param_index is not None and g.kind not in _ROTATIONS:
            raise ValueError(f"cannot shift parameterized gate kind {g.kind!r}")
    expect = _expect if _expect is not None else PauliExpectation(ham)
    n = circuit.n_qubits
    start = basis_state(n, reference if reference is not None else "0" * n)
    wanted = None if param_indices is None else set(int(i) for i in param_indices)

    # one forward pass keeps the state before every gate; each occurrence
    # then re-simulates only its suffix
    bound = [g.bound_angle(params) if g.kind in _ROTATIONS else None
             for g in circuit.gates]
    prefixes = []
    amps = start.amps.copy()
    for g, theta in zip(circuit.gates, bound):
        prefixes.append(amps.copy())
        _apply_gate(amps, n, g, theta)

    grad = np.zeros(circuit.n_params)
    for pos, g in enumerate(circuit.gates):
        if g.param_index is None:
            continue
        if wanted is not None and g.param_index not in wanted:
            continue
        shifted = np.empty(2)
        for s, shift in enumerate((np.pi / 2, -np.pi / 2)):
            work = prefixes[pos].copy()
            _apply_gate(work, n, g, bound[pos] + shift)
            for later in range(pos + 1, len(circuit.gates)):
                _apply_gate(work, n, circuit.gates[later], bound[later])
            shifted[s] = expect(Statevector(n, work))
        grad[g.param_index] += g.multiplier * (shifted[0] - shifted[1]) / 2.0
    return grad


def run_vqe(ham: QubitHamiltonian, spec: AnsatzSpec,
            opt: OptSettings | None = None, seed: int = 0) -> VqeResult:
    """Grouped Adam descent on the circuit energy; returns the best iterate.

    Parameters start at zero (UCCSD) or small seeded uniforms (HEA). Every
    outer iteration reshuffles the parameters into groups and steps each
    group in turn on its own parameter-shift gradient. Stops at max_iters or
    after 10 consecutive energy changes below opt.tol.
    """
    if opt is None:
        opt = OptSettings()
    if len(spec.reference) != ham.n_qubits:
        raise ValueError("spec reference length must match the Hamiltonian")
    circuit = build_ansatz(ham.n_qubits, spec)
    rng = np.random.default_rng(seed)
    if spec.kind == "UCCSD":
        params = np.zeros(circuit.n_params)
    else:
        params = rng.uniform(-0.1, 0.1, size=circuit.n_params)

    expect = PauliExpectation(ham)
    vacuum = basis_state(ham.n_qubits, "0" * ham.n_qubits)
    adam = Adam(circuit.n_params, lr=opt.lr, beta1=opt.beta1,
                beta2=opt.beta2, eps=opt.eps)

    def energy(p):
        return expect(apply(vacuum, circuit, p))

    e_prev = energy(params)
    trace = [(0, e_prev, 0.0)]
    best_e, best_p = e_prev, params.copy()
    group_size = opt.group_size or circuit.n_params
    streak = 0

    for it in range(1, opt.max_iters + 1):
        if opt.group_size is None:
            order = np.arange(circuit.n_params)
        else:
            order = rng.permutation(circuit.n_params)
        full_grad = np.zeros(circuit.n_params)
        for lo in range(0, circuit.n_params, group_size):
            group = order[lo:lo + group_size]
            grad = parameter_shift_gradient(circuit, ham, params,
                                            param_indices=group, _expect=expect)
            adam.step(params, grad, indices=group)
            full_grad[group] = grad[group]
        if not np.all(np.isfinite(params)):
            raise OptimizerDivergedError("parameters are no longer finite", trace)
        e = energy(params)
        if not np.isfinite(e):
            raise OptimizerDivergedError("energy is no longer finite", trace)
        trace.append((it, e, float(np.linalg.norm(full_grad))))
        if e < best_e:
            best_e, best_p = e, params.copy()
        streak = streak + 1 if abs(e - e_prev) < opt.tol else 0
        e_prev = e
        if streak >= 10:
            break

    return VqeResult(params=best_p, energy=best_e, trace=trace,
                     circuit=circuit, spec=spec, seed=seed)


def save_result(result: VqeResult, path) -> None:
    """JSON form: ansatz spec, seed, parameters, energy, trace."""
    payload = {
        "spec": {
            "kind": result.spec.kind,
            "reference": result.spec.reference,
            "layers": result.spec.layers,
            "trotter_steps": result.spec.trotter_steps,
        },
        "seed": result.seed,
        "params": [float(p) for p in result.params],
        "energy": result.energy,
        "trace": [[it, e, g] for it, e, g in result.trace],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_result(path) -> VqeResult:
    with open(path) as fh:
        payload = json.load(fh)
    spec = AnsatzSpec(kind=payload["spec"]["kind"],
                      reference=payload["spec"]["reference"],
                      layers=payload["spec"]["layers"],
                      trotter_steps=payload["spec"]["trotter_steps"])
    circuit = build_ansatz(len(spec.reference), spec)
    return VqeResult(params=np.array(payload["params"]),
                     energy=payload["energy"],
                     trace=[tuple(row) for row in payload["trace"]],
                     circuit=circuit, spec=spec, seed=payload["seed"])
