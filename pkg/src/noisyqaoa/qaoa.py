"""QAOA circuit compilation and execution.

A circuit for step count n alternates, for each step k: one diagonal
two-qubit gate exp(-i gamma_k C_ij Z_i Z_j) per edge (sorted (i, j)
ascending), then one mixer gate exp(+i beta_k X_q) per qubit. The mixer
exponent is positive because the drive Hamiltonian is -sum_q X_q. The
gate count is N = n * (E + m); state preparation |+>^m is noiseless and
not counted.

Noise is inserted after every gate, once per touched qubit (two channel
applications for edge gates, one for mixer gates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maxcut import ProblemHamiltonian, WeightedGraph, exact_expectation
from .noise import NoiseChannel
from .statevector import (
    MAX_DENSE_QUBITS,
    DensityMatrix,
    GateOp,
    SimulationError,
    StateVector,
    apply_gate,
    apply_superop_1q,
    expand_diag,
    mul_left_1q,
    mul_right_1q,
    plus_state,
    sample_kraus,
)

_X_MAT = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

_ZZ_PARITY = np.array([1.0, -1.0, -1.0, 1.0])


@dataclass(frozen=True)
class QaoaParams:
    """Parameter vectors (gamma, beta), each of length n (radians)."""

    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if g.shape != b.shape or g.ndim != 1 or g.size < 1:
            raise ValueError("gamma and beta must be equal-length 1-D vectors, n >= 1")
        if not (np.isfinite(g).all() and np.isfinite(b).all()):
            raise ValueError("non-finite QAOA parameters")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def n(self) -> int:
        return int(self.gamma.size)


@dataclass(frozen=True)
class GateSequence:
    """Compiled ordered gate list; gate_count is N = n * (E + m)."""

    num_qubits: int
    gates: tuple

    @property
    def gate_count(self) -> int:
        return len(self.gates)


def _edge_gate(i: int, j: int, weight: float, angle: float, step: int) -> GateOp:
    d = np.exp(-1j * angle * weight * _ZZ_PARITY)
    return GateOp(
        kind="two", targets=(i, j), matrix=np.diag(d), diag=d,
        step=step, param="gamma", weight=weight, angle=angle,
    )


def _mixer_gate(q: int, angle: float, step: int) -> GateOp:
    c, s = math.cos(angle), math.sin(angle)
    mat = np.array([[c, 1j * s], [1j * s, c]])
    return GateOp(
        kind="single", targets=(q,), matrix=mat,
        step=step, param="beta", weight=1.0, angle=angle,
    )


def build_circuit(graph: WeightedGraph, params: QaoaParams) -> GateSequence:
    """Compile the alternating edge/mixer gate list for the given graph."""
    gates = []
    for k in range(params.n):
        for i, j, w in sorted(graph.edges):
            gates.append(_edge_gate(i, j, w, float(params.gamma[k]), k))
        for q in range(graph.num_nodes):
            gates.append(_mixer_gate(q, float(params.beta[k]), k))
    return GateSequence(graph.num_nodes, tuple(gates))


def with_shifted_gate(seq: GateSequence, index: int, delta: float) -> GateSequence:
    """Copy of the sequence with only gate `index`'s angle shifted by delta."""
    g = seq.gates[index]
    if g.param == "gamma":
        i, j = g.targets
        shifted = _edge_gate(i, j, g.weight, g.angle + delta, g.step)
    elif g.param == "beta":
        shifted = _mixer_gate(g.targets[0], g.angle + delta, g.step)
    else:
        raise ValueError(f"gate {index} carries no parameter provenance")
    gates = list(seq.gates)
    gates[index] = shifted
    return GateSequence(seq.num_qubits, tuple(gates))


def run_ideal(circuit: GateSequence) -> StateVector:
    """|+>^m evolved through all gates in order (noiseless)."""
    state = plus_state(circuit.num_qubits)
    for gate in circuit.gates:
        state = apply_gate(state, gate)
    return state


def run_exact_noisy(circuit: GateSequence, channel: NoiseChannel) -> DensityMatrix:
    """Exact density-matrix evolution with the channel after every gate.

    The channel acts independently on each qubit the gate touches. For
    mixer gates the unitary and channel superoperators are fused into a
    single 4x4 application.
    """
    m = circuit.num_qubits
    if m > MAX_DENSE_QUBITS:
        raise ValueError(f"density-matrix evolution limited to {MAX_DENSE_QUBITS} qubits")
    dim = 1 << m
    rho = np.full((dim, dim), 1.0 / dim, dtype=complex)
    S_ch = channel.superop
    for gate in circuit.gates:
        if gate.diag is not None:
            d = expand_diag(m, gate.targets, gate.diag)
            rho = rho * np.outer(d, d.conj())
            for q in gate.targets:
                rho = apply_superop_1q(rho, S_ch, q, m)
        elif gate.kind == "single":
            S = S_ch @ np.kron(gate.matrix, gate.matrix.conj())
            rho = apply_superop_1q(rho, S, gate.targets[0], m)
        else:  # non-diagonal two-qubit gate: generic path
            from .statevector import apply_gate_density

            dm = apply_gate_density(DensityMatrix(m, rho), gate)
            rho = dm.entries
            for q in gate.targets:
                rho = apply_superop_1q(rho, S_ch, q, m)
    return DensityMatrix(m, rho)


def _num_steps(circuit: GateSequence) -> int:
    steps = [g.step for g in circuit.gates]
    if not steps or min(steps) < 0:
        raise ValueError("circuit gates carry no step provenance")
    return 1 + max(steps)


def _apply_1q_vec(psi: np.ndarray, M: np.ndarray, q: int, m: int) -> np.ndarray:
    hi, lo = 1 << (m - 1 - q), 1 << q
    t = psi.reshape(hi, 2, lo)
    return np.einsum("xu,aub->axb", M, t).reshape(-1)


def adjoint_gradient_ideal(
    circuit: GateSequence, h: ProblemHamiltonian
) -> tuple[float, np.ndarray, np.ndarray]:
    """Noiseless cost and its per-gate shift-rule gradient in one sweep.

    Equivalent to summing shifted cost evaluations gate by gate (the
    generators are involutory, so the +-pi/4 angle-shift difference is
    the exact derivative), but computed with a single forward pass and a
    single backward pass: O(N) gate applications instead of O(N^2).
    Returns (cost, d_gamma, d_beta).
    """
    m = circuit.num_qubits
    n = _num_steps(circuit)
    psi = run_ideal(circuit).amplitudes
    cost = float(np.vdot(psi, h.energies * psi).real)
    b = h.energies * psi
    d_gamma = np.zeros(n)
    d_beta = np.zeros(n)
    for gate in reversed(circuit.gates):
        if gate.param == "gamma":
            s = expand_diag(m, gate.targets, _ZZ_PARITY)
            # d/dgamma term: 2 Re <b| (-i w ZZ) |psi>
            d_gamma[gate.step] += 2.0 * gate.weight * complex(
                np.einsum("i,i,i->", b.conj(), s, psi)
            ).imag
            inv = expand_diag(m, gate.targets, gate.diag.conj())
            psi = inv * psi
            b = inv * b
        else:
            q = gate.targets[0]
            hi, lo = 1 << (m - 1 - q), 1 << q
            b3 = b.reshape(hi, 2, lo)
            p3 = psi.reshape(hi, 2, lo)
            # d/dbeta term: 2 Re <b| (+i X) |psi> = -2 Im <b| X psi>
            d_beta[gate.step] += -2.0 * complex(
                np.einsum("aub,aub->", b3.conj(), p3[:, ::-1, :])
            ).imag
            Ud = gate.matrix.conj().T
            psi = _apply_1q_vec(psi, Ud, q, m)
            b = _apply_1q_vec(b, Ud, q, m)
    return cost, d_gamma, d_beta


def adjoint_gradient_noisy(
    circuit: GateSequence, h: ProblemHamiltonian, channel: NoiseChannel
) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact-noisy cost and shift-rule gradient via forward/backward sweeps.

    The forward pass stores each post-unitary, pre-noise density matrix;
    the backward pass propagates the observable through the adjoint
    channel and gate maps. The per-gate derivative is
    Tr(E_k d(U rho U^dag)/dtheta) with E_k the back-propagated
    observable, identical (to rounding) to the shifted-evaluation
    construction. Returns (cost, d_gamma, d_beta).
    """
    m = circuit.num_qubits
    if m > MAX_DENSE_QUBITS:
        raise ValueError(f"density-matrix evolution limited to {MAX_DENSE_QUBITS} qubits")
    n = _num_steps(circuit)
    dim = 1 << m
    S_ch = channel.superop
    S_adj = channel.superop_adjoint
    rho = np.full((dim, dim), 1.0 / dim, dtype=complex)
    sigmas = []
    for gate in circuit.gates:
        if gate.diag is not None:
            d = expand_diag(m, gate.targets, gate.diag)
            rho = rho * (d[:, None] * d.conj()[None, :])
        else:
            rho = mul_left_1q(rho, gate.matrix, gate.targets[0], m)
            rho = mul_right_1q(rho, gate.matrix.conj().T, gate.targets[0], m)
        sigmas.append(rho)
        for q in gate.targets:
            rho = apply_superop_1q(rho, S_ch, q, m)
    cost = float((h.energies * np.diagonal(rho).real).sum())
    d_gamma = np.zeros(n)
    d_beta = np.zeros(n)
    D = np.diag(h.energies).astype(complex)
    for gate, sigma in zip(reversed(circuit.gates), reversed(sigmas)):
        E = D
        for q in reversed(gate.targets):
            E = apply_superop_1q(E, S_adj, q, m)
        if gate.param == "gamma":
            s = expand_diag(m, gate.targets, _ZZ_PARITY)
            # Tr(E (-i w) [ZZ, sigma]) with [ZZ, sigma]_rc = (s_r - s_c) sigma_rc
            M = sigma * (s[:, None] - s[None, :])
            d_gamma[gate.step] += gate.weight * complex(np.einsum("rc,cr->", E, M)).imag
        else:
            q = gate.targets[0]
            comm = mul_left_1q(sigma, _X_MAT, q, m) - mul_right_1q(sigma, _X_MAT, q, m)
            # Tr(E (+i) [X, sigma])
            d_beta[gate.step] += -complex(np.einsum("rc,cr->", E, comm)).imag
        if gate.diag is not None:
            d = expand_diag(m, gate.targets, gate.diag)
            D = E * (d.conj()[:, None] * d[None, :])
        else:
            D = mul_left_1q(E, gate.matrix.conj().T, gate.targets[0], m)
            D = mul_right_1q(D, gate.matrix, gate.targets[0], m)
    return cost, d_gamma, d_beta


def run_trajectory(circuit: GateSequence, channel: NoiseChannel, rng) -> StateVector:
    """One Monte-Carlo trajectory: sample a Kraus branch per touched qubit.

    Consumes exactly one uniform from `rng` per noise event, in gate
    order then target order, so a trajectory is bitwise reproducible
    from its seed and matches the batched kernel row-for-row.
    """
    state = plus_state(circuit.num_qubits)
    for gate in circuit.gates:
        state = apply_gate(state, gate)
        for q in gate.targets:
            state, _ = sample_kraus(state, channel, q, rng.random())
    return state


def noise_event_count(circuit: GateSequence) -> int:
    """Number of uniforms one trajectory consumes (sum of gate arities)."""
    return sum(len(g.targets) for g in circuit.gates)


def _apply_gate_batch(states: np.ndarray, gate: GateOp, m: int) -> np.ndarray:
    T = states.shape[0]
    t = states.reshape((T,) + (2,) * m)
    axes = tuple(1 + m - 1 - q for q in gate.targets)
    k = len(axes)
    t = np.moveaxis(t, axes, range(1, k + 1))
    rest = t.shape[k + 1:]
    flat = t.reshape(T, 1 << k, -1)
    if gate.diag is not None:
        flat = gate.diag[None, :, None] * flat
    else:
        flat = np.einsum("ab,tbr->tar", gate.matrix, flat)
    t = np.moveaxis(flat.reshape((T,) + (2,) * k + rest), range(1, k + 1), axes)
    return t.reshape(T, -1)


def _sample_kraus_batch(
    states: np.ndarray, channel: NoiseChannel, qubit: int, r: np.ndarray, m: int
) -> np.ndarray:
    T = states.shape[0]
    t = states.reshape((T,) + (2,) * m)
    ax = 1 + m - 1 - qubit
    t = np.moveaxis(t, ax, 1)
    rest = t.shape[2:]
    v = t.reshape(T, 2, -1)
    sigma = np.einsum("tar,tbr->tab", v, v.conj())
    probs = np.stack([np.einsum("ab,tba->t", M, sigma).real for M in channel.povm])
    if np.any(probs.sum(axis=0) <= 1e-12):
        raise SimulationError("all Kraus branch probabilities vanished in batch")
    cdf = np.cumsum(probs, axis=0)
    chosen = (r[None, :] >= cdf).sum(axis=0)
    np.clip(chosen, 0, len(channel.kraus) - 1, out=chosen)
    out = np.empty_like(v)
    for i, K in enumerate(channel.kraus):
        mask = chosen == i
        if mask.any():
            out[mask] = np.einsum("ab,tbr->tar", K, v[mask])
    nrm = np.sqrt(np.einsum("tar,tar->t", out, out.conj()).real)
    if np.any(nrm <= 1e-12):
        raise SimulationError("a selected Kraus branch annihilated the state")
    out = out / nrm[:, None, None]
    t = np.moveaxis(out.reshape((T, 2) + rest), 1, ax)
    return t.reshape(T, -1)


def trajectory_states(
    circuit: GateSequence,
    channel: NoiseChannel,
    num_traj: int,
    seed: int | None = None,
    uniforms: np.ndarray | None = None,
) -> np.ndarray:
    """Final pure states of num_traj independent trajectories, shape (T, 2^m).

    Each trajectory t consumes the uniform stream derived from
    (seed, t), identical to run_trajectory with rng =
    np.random.default_rng([seed, t]); alternatively a pre-drawn
    (T, events) uniform matrix may be supplied.
    """
    m = circuit.num_qubits
    events = noise_event_count(circuit)
    if uniforms is None:
        if seed is None:
            raise ValueError("need either a seed or a uniform matrix")
        uniforms = np.empty((num_traj, events))
        for t in range(num_traj):
            uniforms[t] = np.random.default_rng([seed, t]).random(events)
    elif uniforms.shape != (num_traj, events):
        raise ValueError(f"uniform matrix has shape {uniforms.shape}, expected ({num_traj}, {events})")
    states = np.full((num_traj, 1 << m), 2.0 ** (-m / 2.0), dtype=complex)
    col = 0
    for gate in circuit.gates:
        states = _apply_gate_batch(states, gate, m)
        for q in gate.targets:
            states = _sample_kraus_batch(states, channel, q, uniforms[:, col], m)
            col += 1
    return states


def output_fidelity(ideal: StateVector, noisy: DensityMatrix) -> float:
    """<phi|rho|phi> between a pure reference and a mixed output."""
    if ideal.num_qubits != noisy.num_qubits:
        raise ValueError("state dimensions differ")
    v = ideal.amplitudes
    f = np.vdot(v, noisy.entries @ v)
    if abs(f.imag) > 1e-10:
        raise SimulationError(f"fidelity has imaginary residue {f.imag:.3e}")
    return float(f.real)


def cost_exact(
    circuit: GateSequence, h: ProblemHamiltonian, channel: NoiseChannel | None = None
) -> float:
    """<H_p> of the circuit output: ideal, or exact-noisy if given a channel."""
    if channel is None:
        return exact_expectation(run_ideal(circuit), h)
    return exact_expectation(run_exact_noisy(circuit, channel), h)


def cost_sampled(
    circuit: GateSequence,
    h: ProblemHamiltonian,
    channel: NoiseChannel,
    shots: int,
    rng,
) -> tuple[float, list]:
    """Shot-based noisy cost estimate from trajectory executions.

    For each ZZ term, runs `shots` trajectories, samples one two-qubit
    outcome per run and accumulates C_ij (2 p_ij - 1) with
    p_ij = phat00 + phat11. Returns (estimate, [((i, j), p_ij), ...]).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    m = circuit.num_qubits
    events = noise_event_count(circuit)
    estimate = 0.0
    per_edge = []
    for i, j, w in h.terms:
        R = rng.random((shots, events))
        states = trajectory_states(circuit, channel, shots, uniforms=R)
        pr = np.abs(states) ** 2
        t = np.moveaxis(pr.reshape((shots,) + (2,) * m), (1 + m - 1 - i, 1 + m - 1 - j), (1, 2))
        probs4 = t.reshape(shots, 4, -1).sum(axis=2)
        u = rng.random(shots)
        outcomes = (u[:, None] >= np.cumsum(probs4, axis=1)).sum(axis=1)
        np.clip(outcomes, 0, 3, out=outcomes)
        p_ij = float(np.mean((outcomes == 0) | (outcomes == 3)))
        per_edge.append(((i, j), p_ij))
        estimate += w * (2.0 * p_ij - 1.0)
    return estimate, per_edge
