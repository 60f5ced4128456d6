"""Collective spin operators on the symmetric (Dicke) subspace and the probe/qubit tensor layout.

Basis convention used everywhere in the package: probe states are ordered
``m = j, j-1, ..., -j`` and the composite space is ``probe (x) qubit`` with the
qubit ordered ``(|e>, |g>)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class DickeSpace:
    """Symmetric sector of ``N`` spin-1/2 particles, ``j = N/2``."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"invalid probe size N={self.N!r}; need a positive integer")

    @property
    def two_j(self) -> int:
        return int(self.N)

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @property
    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order (j down to -j)."""
        return (self.two_j - 2 * np.arange(self.dim)) / 2

    def index(self, m) -> int:
        """Basis index of ``|j, m>``; ``m`` may be a float or Fraction half-integer."""
        two_m = Fraction(m) * 2
        if two_m.denominator != 1 or abs(two_m) > self.two_j or (self.two_j - two_m) % 2:
            raise ValueError(f"m={m} is not a valid projection for j={self.j}")
        return int((self.two_j - two_m) // 2)


@dataclass(frozen=True)
class SpinOperators:
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray

    def along(self, alpha: float) -> np.ndarray:
        """Equatorial generator ``cos(alpha) Jx + sin(alpha) Jy``."""
        return np.cos(alpha) * self.jx + np.sin(alpha) * self.jy


def build_collective_operators(space: DickeSpace) -> SpinOperators:
    m = space.m_values
    j = space.j
    jplus = np.zeros((space.dim, space.dim), dtype=complex)
    # <j, m+1| J+ |j, m> sits one row above the column of m
    k = np.arange(1, space.dim)
    jplus[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jminus = jplus.conj().T.copy()
    return SpinOperators(
        jx=(jplus + jminus) / 2,
        jy=(jplus - jminus) / 2j,
        jz=np.diag(m).astype(complex),
        jplus=jplus,
        jminus=jminus,
    )


class QubitSpace:
    """Ancilla operators in the ``(|e>, |g>)`` basis."""

    sigma_x = np.array([[0, 1], [1, 0]], dtype=complex)
    sigma_y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sigma_z = np.array([[1, 0], [0, -1]], dtype=complex)
    identity = np.eye(2, dtype=complex)
    excited = np.array([1, 0], dtype=complex)
    ground = np.array([0, 1], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)

    @classmethod
    def sign_state(cls, sign: int) -> np.ndarray:
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign!r}")
        return cls.plus if sign > 0 else cls.minus

    @classmethod
    def projector(cls, sign: int) -> np.ndarray:
        v = cls.sign_state(sign)
        return np.outer(v, v.conj())


def expm_hermitian(generator: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(-i t G)`` for Hermitian ``G`` through its eigendecomposition."""
    w, v = np.linalg.eigh(generator)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


class HermitianPropagator:
    """Cached eigendecomposition of a Hermitian generator for repeated ``exp(-i t G)``."""

    def __init__(self, generator: np.ndarray):
        self.generator = generator
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(generator)

    def __call__(self, t: float) -> np.ndarray:
        v = self.eigenvectors
        return (v * np.exp(-1j * t * self.eigenvalues)) @ v.conj().T


def jx_eigenstate(space: DickeSpace, m) -> np.ndarray:
    """``|j, m>_x = exp(-i pi/2 Jy) |j, m>_z``; this fixes the global phase."""
    k = space.index(m)
    ops = build_collective_operators(space)
    return expm_hermitian(ops.jy, np.pi / 2)[:, k]


def jx_eigenbasis(space: DickeSpace) -> np.ndarray:
    """Columns are ``|j, m>_x`` in basis order m = j ... -j."""
    ops = build_collective_operators(space)
    return expm_hermitian(ops.jy, np.pi / 2)


def rotation(space: DickeSpace, alpha: float, theta: float) -> np.ndarray:
    if not (np.isfinite(alpha) and np.isfinite(theta)):
        raise ValueError("rotation angles must be finite")
    ops = build_collective_operators(space)
    return expm_hermitian(ops.along(alpha), theta)


def parity_probe(space: DickeSpace) -> np.ndarray:
    """``(-1)^(j - Jz)``, i.e. +1, -1, +1, ... down the diagonal."""
    return np.diag((-1.0) ** np.arange(space.dim)).astype(complex)


def embed(probe_op: np.ndarray, qubit_op: np.ndarray) -> np.ndarray:
    """Tensor product in the fixed ``probe (x) qubit`` order."""
    probe_op = np.asarray(probe_op)
    qubit_op = np.asarray(qubit_op)
    if qubit_op.shape[0] != 2:
        raise ValueError(f"qubit factor must have leading dimension 2, got {qubit_op.shape}")
    if probe_op.ndim != qubit_op.ndim:
        raise ValueError("cannot embed an operator with a vector")
    if probe_op.ndim == 2 and (probe_op.shape[0] != probe_op.shape[1] or qubit_op.shape != (2, 2)):
        raise ValueError(f"dimension mismatch: {probe_op.shape} (x) {qubit_op.shape}")
    return np.kron(probe_op, qubit_op)
