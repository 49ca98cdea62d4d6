"""Dense pure-state and density-matrix simulation kernel.

Qubit ordering is little-endian: qubit 0 is the least significant bit of
the amplitude index. For an array reshaped to [2]*m the axis of qubit q
is therefore m-1-q.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .noise import NoiseChannel

MAX_PURE_QUBITS = 24
MAX_DENSE_QUBITS = 12
NORM_TOL = 1e-10


class SimulationError(RuntimeError):
    """Numerical failure during simulation (degenerate branch weights etc.)."""


@dataclass
class StateVector:
    """Pure state of num_qubits qubits as a length-2^m complex array."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        dim = 1 << self.num_qubits
        if self.amplitudes.shape != (dim,):
            raise ValueError(
                f"amplitude array has shape {self.amplitudes.shape}, expected ({dim},)"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def projector(self) -> "DensityMatrix":
        """|phi><phi| as a DensityMatrix."""
        a = self.amplitudes
        return DensityMatrix(self.num_qubits, np.outer(a, a.conj()))


@dataclass
class DensityMatrix:
    """Mixed state of num_qubits qubits as a 2^m x 2^m complex matrix."""

    num_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        dim = 1 << self.num_qubits
        if self.entries.shape != (dim, dim):
            raise ValueError(
                f"density matrix has shape {self.entries.shape}, expected ({dim}, {dim})"
            )

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, self.entries.copy())


@dataclass(frozen=True)
class GateOp:
    """A single- or two-qubit unitary gate.

    diag holds the 4-entry diagonal for diagonal two-qubit gates (fast
    path). step/param/weight/angle carry provenance for shift-rule
    bookkeeping: which QAOA step and parameter the gate depends on.
    """

    kind: str                      # "single" | "two"
    targets: tuple
    matrix: np.ndarray
    diag: np.ndarray | None = None
    step: int = -1
    param: str = ""                # "gamma" | "beta" | ""
    weight: float = 0.0
    angle: float = 0.0

    def __post_init__(self):
        dim = {"single": 2, "two": 4}.get(self.kind)
        if dim is None:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != (1 if self.kind == "single" else 2):
            raise ValueError(f"{self.kind} gate needs {1 if dim == 2 else 2} targets")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate gate targets {self.targets}")
        if any(q < 0 for q in self.targets):
            raise ValueError(f"negative qubit index in {self.targets}")
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (dim, dim):
            raise ValueError(f"gate matrix has shape {mat.shape}, expected ({dim}, {dim})")
        if np.abs(mat.conj().T @ mat - np.eye(dim)).max() > 1e-10:
            raise ValueError("gate matrix is not unitary")
        object.__setattr__(self, "matrix", mat)
        if self.diag is not None:
            object.__setattr__(self, "diag", np.asarray(self.diag, dtype=complex))


def plus_state(m: int) -> StateVector:
    """|+>^(x m): the uniform real superposition over all 2^m basis states."""
    if not 1 <= m <= MAX_PURE_QUBITS:
        raise ValueError(f"qubit count m={m} outside [1, {MAX_PURE_QUBITS}]")
    dim = 1 << m
    return StateVector(m, np.full(dim, 2.0 ** (-m / 2.0), dtype=complex))


def _check_targets(m: int, targets) -> None:
    for q in targets:
        if not 0 <= q < m:
            raise ValueError(f"qubit index {q} out of range for {m} qubits")


@lru_cache(maxsize=None)
def _bit(m: int, q: int) -> np.ndarray:
    """Bit of qubit q across all 2^m basis indices (read-only)."""
    bits = (np.arange(1 << m) >> q) & 1
    bits.setflags(write=False)
    return bits


def expand_diag(m: int, targets, diag4: np.ndarray) -> np.ndarray:
    """Lift a two-qubit diagonal (indexed 2*b_i + b_j) to the full register."""
    i, j = targets
    return np.asarray(diag4)[2 * _bit(m, i) + _bit(m, j)]


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply a gate; norm is preserved to 1e-10 (unitary)."""
    m = state.num_qubits
    _check_targets(m, gate.targets)
    psi = state.amplitudes.reshape((2,) * m)
    axes = tuple(m - 1 - q for q in gate.targets)
    k = len(axes)
    psi = np.moveaxis(psi, axes, range(k))
    rest = psi.shape[k:]
    flat = psi.reshape(1 << k, -1)
    if gate.diag is not None:
        flat = gate.diag[:, None] * flat
    else:
        flat = gate.matrix @ flat
    psi = np.moveaxis(flat.reshape((2,) * k + rest), range(k), axes)
    return StateVector(m, psi.reshape(-1))


def apply_superop_1q(rho: np.ndarray, S: np.ndarray, qubit: int, m: int) -> np.ndarray:
    """Apply a 4x4 superoperator to the (row bit, col bit) pair of one qubit."""
    hi, lo = 1 << (m - 1 - qubit), 1 << qubit
    t = rho.reshape(hi, 2, lo, hi, 2, lo).transpose(1, 4, 0, 2, 3, 5)
    t = (S @ t.reshape(4, -1)).reshape(2, 2, hi, lo, hi, lo)
    return t.transpose(2, 0, 3, 4, 1, 5).reshape(rho.shape)


def mul_left_1q(arr: np.ndarray, M: np.ndarray, qubit: int, m: int) -> np.ndarray:
    """M acting on the row index of a 2^m x 2^m array at one qubit."""
    dim = arr.shape[0]
    hi, lo = 1 << (m - 1 - qubit), 1 << qubit
    t = arr.reshape(hi, 2, lo * dim)
    return np.einsum("xu,aub->axb", M, t).reshape(dim, dim)


def mul_right_1q(arr: np.ndarray, M: np.ndarray, qubit: int, m: int) -> np.ndarray:
    """out_rc = sum_c' arr_rc' M_c'c with M acting on one qubit of the column."""
    dim = arr.shape[0]
    hi, lo = 1 << (m - 1 - qubit), 1 << qubit
    t = arr.reshape(dim * hi, 2, lo)
    return np.einsum("aub,uc->acb", t, M).reshape(dim, dim)


def apply_gate_density(rho: DensityMatrix, gate: GateOp) -> DensityMatrix:
    """rho -> U rho U^dag for a GateOp."""
    m = rho.num_qubits
    _check_targets(m, gate.targets)
    dim = 1 << m
    if gate.diag is not None:
        d = expand_diag(m, gate.targets, gate.diag)
        return DensityMatrix(m, rho.entries * np.outer(d, d.conj()))
    if gate.kind == "single":
        S = np.kron(gate.matrix, gate.matrix.conj())
        return DensityMatrix(m, apply_superop_1q(rho.entries, S, gate.targets[0], m))
    # general two-qubit unitary: transform row indices, then column indices
    axes = tuple(m - 1 - q for q in gate.targets)
    t = rho.entries.reshape((2,) * m + (dim,))
    t = np.moveaxis(t, axes, (0, 1)).reshape(4, -1)
    t = gate.matrix @ t
    t = np.moveaxis(t.reshape((2, 2) + (2,) * (m - 2) + (dim,)), (0, 1), axes)
    t = t.reshape(dim, dim).reshape((dim,) + (2,) * m)
    col_axes = tuple(1 + m - 1 - q for q in gate.targets)
    t = np.moveaxis(t, col_axes, (m - 1, m))
    t = t.reshape(-1, 4) @ gate.matrix.conj().T
    t = np.moveaxis(t.reshape((dim,) + (2,) * (m - 2) + (2, 2)), (m - 1, m), col_axes)
    return DensityMatrix(m, t.reshape(dim, dim))


def apply_kraus_exact(rho: DensityMatrix, channel: NoiseChannel, qubit: int) -> DensityMatrix:
    """Exact channel action sum_i (K_i x I) rho (K_i x I)^dag on one qubit."""
    m = rho.num_qubits
    _check_targets(m, (qubit,))
    return DensityMatrix(m, apply_superop_1q(rho.entries, channel.superop, qubit, m))


def _reduced_gram(psi: np.ndarray, qubit: int, m: int) -> tuple[np.ndarray, np.ndarray, tuple]:
    """View amplitudes as (2, rest) over one qubit; also return its 2x2 Gram."""
    t = np.moveaxis(psi.reshape((2,) * m), m - 1 - qubit, 0)
    rest = t.shape[1:]
    v = t.reshape(2, -1)
    return v, v @ v.conj().T, rest


def sample_kraus(
    state: StateVector, channel: NoiseChannel, qubit: int, r: float
) -> tuple[StateVector, int]:
    """One Monte-Carlo trajectory step on one qubit.

    Branch probabilities are p_i = <phi|K_i^dag K_i|phi>; the branch l is
    the first with cumulative probability exceeding r (r = 0 selects the
    first branch). Returns the renormalized K_l|phi> and l (0-based).
    """
    m = state.num_qubits
    _check_targets(m, (qubit,))
    v, sigma, rest = _reduced_gram(state.amplitudes, qubit, m)
    probs = np.array([np.trace(M @ sigma).real for M in channel.povm])
    total = probs.sum()
    if total <= 1e-12:
        raise SimulationError("all Kraus branch probabilities vanished")
    cdf = np.cumsum(probs)
    l = int(np.searchsorted(cdf, r, side="right"))
    if l >= len(probs):
        nz = np.flatnonzero(probs > 1e-15)
        if nz.size == 0:
            raise SimulationError("all Kraus branch probabilities vanished")
        l = int(nz[-1])
    w = channel.kraus[l] @ v
    nrm = np.linalg.norm(w)
    if nrm <= 1e-12:
        raise SimulationError(f"selected Kraus branch {l} annihilated the state")
    w = w / nrm
    out = np.moveaxis(w.reshape((2,) + rest), 0, m - 1 - qubit).reshape(-1)
    return StateVector(m, out), l


def pure_fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for two pure states of equal dimension."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("state dimensions differ")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def measurement_probabilities(state, qubits) -> tuple[float, float, float, float]:
    """Computational-basis marginal (p00, p01, p10, p11) over a qubit pair.

    The first subscript is the bit of qubits[0], the second of qubits[1].
    Accepts a StateVector or DensityMatrix.
    """
    i, j = qubits
    if i == j:
        raise ValueError("measurement qubits must be distinct")
    m = state.num_qubits
    _check_targets(m, (i, j))
    if isinstance(state, DensityMatrix):
        pr = np.diagonal(state.entries).real.copy()
    else:
        pr = np.abs(state.amplitudes) ** 2
    t = np.moveaxis(pr.reshape((2,) * m), (m - 1 - i, m - 1 - j), (0, 1))
    p = t.reshape(4, -1).sum(axis=1)
    return tuple(float(x) for x in p)
