"""Joint probe-ancilla XXZ dynamics.

Two independent routes to ``U(t) = exp(-iHt)`` are provided: the closed 2x2 block
form (:func:`analytic_evolution`) and a brute-force Hermitian eigendecomposition
(:func:`oracle_evolution`).  All frequencies are in units of the detuning
``delta_A = omega_A - omega_P/2`` and times in ``1/delta_A``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dicke import DickeSpace, QubitSpace, build_collective_operators, embed, expm_hermitian


@dataclass(frozen=True)
class ProtocolConfig:
    N: int
    omega_P: float = 0.0
    delta_A: float = 1.0
    g: float = 0.0
    g_z: float = 0.0
    t1: float = 0.0
    t2: float = 0.0
    theta: float = 0.0
    delta: float = 0.0
    n1: int = 0
    nP: int = 10
    nz: Optional[float] = None
    n2: int = 1
    n3: int = 1
    omega_A: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"invalid probe size N={self.N!r}")
        if not self.delta_A > 0:
            raise ValueError("delta_A must be positive")
        if self.t1 < 0 or self.t2 < 0:
            raise ValueError("durations must be non-negative")
        expected = self.omega_P / 2 + self.delta_A
        if self.omega_A is None:
            object.__setattr__(self, "omega_A", expected)
        elif not np.isclose(self.omega_A, expected, rtol=1e-12, atol=1e-12):
            raise ValueError(
                f"omega_A={self.omega_A} inconsistent with omega_P/2 + delta_A = {expected}"
            )
        for name in ("omega_P", "g", "g_z", "t1", "t2", "theta", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def space(self) -> DickeSpace:
        return DickeSpace(int(self.N))

    def replace(self, **changes) -> "ProtocolConfig":
        if "omega_P" in changes or "delta_A" in changes:
            changes.setdefault("omega_A", None)
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class OperatorFunctions:
    """Diagonal functions of ``Jz`` entering the propagator.

    Each method takes ``m`` (scalar or array) and returns the matching values:
    ``omega(m) = g sqrt((j-m)(j+m+1))``, ``lam(m) = g_z (m+1/2) + delta_A``,
    ``Omega = sqrt(omega^2 + lam^2)`` and ``A(m) = omega_P (m+1/2) - g_z/2``.
    """

    j: float
    g: float
    g_z: float
    omega_P: float
    delta_A: float

    def omega(self, m):
        m = np.asarray(m, dtype=float)
        return self.g * np.sqrt(np.clip((self.j - m) * (self.j + m + 1), 0.0, None))

    def lam(self, m):
        return self.g_z * (np.asarray(m, dtype=float) + 0.5) + self.delta_A

    def Omega(self, m):
        return np.hypot(self.omega(m), self.lam(m))

    def A(self, m):
        return self.omega_P * (np.asarray(m, dtype=float) + 0.5) - self.g_z / 2

    def table(self, m_values):
        """Value tables ``(omega, lam, Omega, A)`` over the given ``m``."""
        return self.omega(m_values), self.lam(m_values), self.Omega(m_values), self.A(m_values)


def operator_functions(config: ProtocolConfig) -> OperatorFunctions:
    return OperatorFunctions(
        j=config.space.j,
        g=config.g,
        g_z=config.g_z,
        omega_P=config.omega_P,
        delta_A=config.delta_A,
    )


def hamiltonian_parts(config: ProtocolConfig):
    """Split ``H = H0 + HI`` with ``[H0, HI] = 0``.

    ``H0 = omega_P (Jz + sigma_z/2)`` is proportional to the conserved excitation
    number; ``HI = delta_A sigma_z + g_z Jz sigma_z + g (Jx sigma_x + Jy sigma_y)``
    holds the detuning and the couplings.
    """
    ops = build_collective_operators(config.space)
    eye_p = np.eye(config.space.dim)
    q = QubitSpace
    h0 = config.omega_P * (embed(ops.jz, q.identity) + 0.5 * embed(eye_p, q.sigma_z))
    hi = (
        config.delta_A * embed(eye_p, q.sigma_z)
        + config.g_z * embed(ops.jz, q.sigma_z)
        + config.g * (embed(ops.jx, q.sigma_x) + embed(ops.jy, q.sigma_y))
    )
    return h0, hi


def build_hamiltonian(config: ProtocolConfig) -> np.ndarray:
    h0, hi = hamiltonian_parts(config)
    return h0 + hi


def _sin_over(Omega, t):
    # sin(Omega t)/Omega, finite as Omega -> 0
    return t * np.sinc(Omega * t / np.pi)


def analytic_evolution(config: ProtocolConfig, t: float) -> np.ndarray:
    """Assemble ``exp(-iHt)`` from the excitation-number blocks.

    Blocks are spanned by ``{|j,m+1,g>, |j,m,e>}`` for ``-j <= m <= j-1``; the
    states ``|j,j,e>`` and ``|j,-j,g>`` only pick up phases.
    """
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    space = config.space
    N, j = space.two_j, space.j
    fns = operator_functions(config)
    dim = 2 * space.dim
    U = np.zeros((dim, dim), dtype=complex)

    m = space.m_values[1:]  # j-1 ... -j
    omega, lam, Omega, _ = fns.table(m)
    c = np.cos(Omega * t)
    s = _sin_over(Omega, t)
    phase = np.exp(-1j * ((m + 0.5) * config.omega_P - config.g_z / 2) * t)
    k = np.arange(1, space.dim)  # probe index of m
    ig = 2 * (k - 1) + 1  # |m+1, g>
    ie = 2 * k  # |m, e>
    U[ig, ig] = phase * (c + 1j * lam * s)
    U[ie, ie] = phase * (c - 1j * lam * s)
    U[ig, ie] = U[ie, ig] = phase * (-1j * omega * s)

    U[0, 0] = np.exp(-1j * (j * (config.omega_P + config.g_z) + config.omega_A) * t)
    U[2 * N + 1, 2 * N + 1] = np.exp(1j * (j * (config.omega_P - config.g_z) + config.omega_A) * t)
    return U


def oracle_evolution(config: ProtocolConfig, t: float) -> np.ndarray:
    return expm_hermitian(build_hamiltonian(config), t)


def evolution(config: ProtocolConfig, t: float) -> np.ndarray:
    """Default propagator used by the circuit (the block form)."""
    return analytic_evolution(config, t)


def strip_global_phase(U: np.ndarray, reference: Optional[np.ndarray] = None) -> float:
    """Max-entry distance ``min_chi |U - e^{i chi} V|`` with chi from ``tr(V^dag U)``.

    ``V`` defaults to the identity.
    """
    V = np.eye(U.shape[0]) if reference is None else reference
    overlap = np.trace(V.conj().T @ U)
    chi = np.angle(overlap) if abs(overlap) > 0 else 0.0
    return float(np.max(np.abs(U - np.exp(1j * chi) * V)))
