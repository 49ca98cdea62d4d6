"""Single-qubit Kraus noise channels and the experimental strength grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

CPTP_TOL = 1e-12

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KINDS = ("dephasing", "bitflip", "depolarizing", "custom")


@dataclass(frozen=True)
class NoiseChannel:
    """A single-qubit channel given by a list of 2x2 Kraus operators.

    Immutable after construction; the Kraus tuple is stored in full so
    that zero operators at p=0 keep the code paths uniform.
    """

    kind: str
    p: float
    kraus: tuple = field(repr=False)

    @cached_property
    def povm(self) -> tuple:
        """K_i^dag K_i for each operator (branch-probability observables)."""
        return tuple(K.conj().T @ K for K in self.kraus)

    @cached_property
    def superop(self) -> np.ndarray:
        """4x4 superoperator sum_i K_i (x) conj(K_i) acting on vec(rho)."""
        S = np.zeros((4, 4), dtype=complex)
        for K in self.kraus:
            S += np.kron(K, K.conj())
        return S

    @cached_property
    def superop_adjoint(self) -> np.ndarray:
        """Superoperator of the adjoint (Heisenberg) map B -> sum_i K_i^dag B K_i."""
        S = np.zeros((4, 4), dtype=complex)
        for K in self.kraus:
            Kd = K.conj().T
            S += np.kron(Kd, Kd.conj())
        return S

    @property
    def num_operators(self) -> int:
        return len(self.kraus)


def cptp_residual(kraus: Sequence[np.ndarray]) -> float:
    """Max-entry magnitude of sum_i K_i^dag K_i - I."""
    acc = np.zeros((2, 2), dtype=complex)
    for K in kraus:
        acc += np.asarray(K).conj().T @ np.asarray(K)
    return float(np.abs(acc - _I2).max())


def validate_cptp(channel: NoiseChannel) -> tuple[bool, float]:
    """Diagnostic completeness check: (pass, residual norm)."""
    residual = cptp_residual(channel.kraus)
    return residual < CPTP_TOL, residual


def make_channel(kind: str, p: float) -> NoiseChannel:
    """Build one of the three named channels at strength p in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"channel strength p={p} outside [0, 1]")
    kind = kind.lower()
    if kind == "dephasing":
        kraus = (np.sqrt(1.0 - p) * _I2, np.sqrt(p) * _Z)
    elif kind == "bitflip":
        kraus = (np.sqrt(1.0 - p) * _I2, np.sqrt(p) * _X)
    elif kind == "depolarizing":
        kraus = (
            np.sqrt(1.0 - 0.75 * p) * _I2,
            0.5 * np.sqrt(p) * _X,
            0.5 * np.sqrt(p) * _Y,
            0.5 * np.sqrt(p) * _Z,
        )
    else:
        raise ValueError(f"unknown channel kind {kind!r}; use custom_channel() for custom Kraus sets")
    channel = NoiseChannel(kind, float(p), kraus)
    ok, residual = validate_cptp(channel)
    if not ok:  # pragma: no cover - algebraically impossible for the named sets
        raise ValueError(f"{kind} channel at p={p} violates CPTP (residual {residual:.3e})")
    return channel


def custom_channel(kraus: Sequence[np.ndarray], p: float = 0.0) -> NoiseChannel:
    """Wrap an arbitrary single-qubit Kraus set, gated by the CPTP check."""
    ops = tuple(np.asarray(K, dtype=complex) for K in kraus)
    if not ops:
        raise ValueError("need at least one Kraus operator")
    for K in ops:
        if K.shape != (2, 2):
            raise ValueError(f"Kraus operator has shape {K.shape}, expected (2, 2)")
    residual = cptp_residual(ops)
    if residual >= CPTP_TOL:
        raise ValueError(f"Kraus set violates CPTP completeness (residual {residual:.3e})")
    return NoiseChannel("custom", float(p), ops)


def noise_grid() -> list[float]:
    """The 11-point exponential strength grid p_i = 0.0001 * 200^(0.1 i)."""
    return [1e-4 * 200.0 ** (0.1 * i) for i in range(11)]
