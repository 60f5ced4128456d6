"""Closed-form protocol parameters: couplings, durations, probe frequency and phase."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import ProtocolConfig, operator_functions


class NoRealCouplingError(ValueError):
    """Raised when ``g_z`` is below the threshold ``2 delta_A / (N+1)``."""


def coupling_threshold(N: int, delta_A: float = 1.0) -> float:
    return 2 * delta_A / (N + 1)


def coupling_from_gz(N: int, g_z: float, delta_A: float = 1.0) -> float:
    """Transversal coupling on the optimal ridge ``g_z^2 - g^2 = (2 delta_A/(N+1))^2``."""
    gap = g_z**2 - coupling_threshold(N, delta_A) ** 2
    # tolerate round-off at the pure-ZZ threshold
    if gap < 0 and gap > -1e-14 * max(g_z**2, 1.0):
        gap = 0.0
    if gap < 0 or g_z < 0:
        raise NoRealCouplingError(
            f"g_z={g_z} is below the threshold {coupling_threshold(N, delta_A)} for N={N}"
        )
    return math.sqrt(gap)


def t1_opt(N: int, delta_A: float = 1.0, n1: int = 0) -> float:
    return (N + 1) * (2 * n1 + 1) * math.pi / (4 * delta_A)


def phi_parameter(N: int, g_z: float, delta_A: float = 1.0, n1: int = 0) -> float:
    """Relative phase of the two evolution paths (raw, not reduced mod 2 pi)."""
    return (2 * n1 + 1) * (0.5 + (N + 1) ** 2 * g_z / (4 * delta_A)) * math.pi


def wrap_phase(phi: float) -> float:
    return float(np.mod(phi, 2 * math.pi))


def omega_p_opt(t1: float, nP: int) -> float:
    return nP * math.pi / t1


def gz_quantized(N: int, delta_A: float = 1.0, n1: int = 0, nz: float | None = None) -> float:
    """Longitudinal coupling making the effective two-path map unitary.

    ``nz`` defaults to ``N``.  Half-integer ``nz`` is accepted and shifts the
    path phase by ``pi/2``.
    """
    nz = N if nz is None else nz
    return (N + 2 * nz - 1) / (2 * n1 + 1) * 2 * delta_A / (N + 1) ** 2


def gz_quantized_phi(N: int, delta_A: float = 1.0, n1: int = 0, n_phi: int = 0) -> float:
    return (N + 2 * n_phi - 2) / (2 * n1 + 1) * 2 * delta_A / (N + 1) ** 2


def t2_time_reversal(t1: float, n2: int = 1) -> float:
    return (4 * n2 - 1) * t1


def t2_identity(t1: float, n3: int = 1) -> float:
    if n3 == 0:
        raise ValueError("n3 must be a nonzero integer")
    return 4 * n3 * t1


@dataclass(frozen=True)
class OptimalParameterSet:
    N: int
    g: float
    g_z: float
    t1_opt: float
    omega_P: float
    phi: float
    t2: float
    delta_A: float = 1.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.g < 0 or self.g_z < 0:
            raise ValueError("couplings must be non-negative")
        if self.g > self.g_z:
            raise ValueError("transversal coupling may not exceed the longitudinal one")

    def ridge_residual(self) -> float:
        return abs(self.g_z**2 - self.g**2 - coupling_threshold(self.N, self.delta_A) ** 2)

    def to_config(self, **overrides) -> ProtocolConfig:
        p = self.provenance
        kwargs = dict(
            N=self.N,
            omega_P=self.omega_P,
            delta_A=self.delta_A,
            g=self.g,
            g_z=self.g_z,
            t1=self.t1_opt,
            t2=self.t2,
            n1=p.get("n1", 0),
            nP=p.get("nP", 10),
            nz=p.get("nz"),
            n2=p.get("n2", 1),
            n3=p.get("n3", 1),
        )
        kwargs.update(overrides)
        return ProtocolConfig(**kwargs)


def optimal_parameters(
    N: int,
    delta_A: float = 1.0,
    n1: int = 0,
    nP: int = 10,
    nz: float | None = None,
    t2: float = 0.0,
) -> OptimalParameterSet:
    nz = N if nz is None else nz
    gz = gz_quantized(N, delta_A, n1, nz)
    t1 = t1_opt(N, delta_A, n1)
    return OptimalParameterSet(
        N=N,
        g=coupling_from_gz(N, gz, delta_A),
        g_z=gz,
        t1_opt=t1,
        omega_P=omega_p_opt(t1, nP),
        phi=phi_parameter(N, gz, delta_A, n1),
        t2=t2,
        delta_A=delta_A,
        provenance={"n1": n1, "nP": nP, "nz": nz},
    )


def fig2_config(N: int, **overrides) -> ProtocolConfig:
    """Default optimal configuration: ``n1 = 0``, ``nP = 10``, ``nz = N``, ``t2 = 0``.

    Keyword overrides (``nP``, ``nz``, ``n1``, ``delta_A``, ``t2``, ``theta``,
    ``delta``) are routed either to the parameter solver or to the config.
    """
    knobs = {k: overrides.pop(k) for k in ("n1", "nP", "nz", "delta_A") if k in overrides}
    params = optimal_parameters(N, **knobs)
    return params.to_config(**overrides)


def master_condition_residual(config: ProtocolConfig) -> float:
    """Max-entry gap between ``exp(-2i Omega(Jz) t1)`` and ``exp(-i phi) exp(-i pi Jz)``."""
    space = config.space
    m = space.m_values
    Omega = operator_functions(config).Omega(m)
    phi = phi_parameter(space.N, config.g_z, config.delta_A, config.n1)
    lhs = np.exp(-2j * Omega * config.t1)
    rhs = np.exp(-1j * phi) * np.exp(-1j * np.pi * m)
    return float(np.max(np.abs(lhs - rhs)))
