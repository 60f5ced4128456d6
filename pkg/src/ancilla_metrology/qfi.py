"""Quantum Fisher information: numerics from simulated states and closed forms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .circuit import BranchOutput, Circuit
from .evolution import ProtocolConfig

SLD_CUTOFF = 1e-12


@dataclass(frozen=True)
class QfiReport:
    f_plus: float
    f_minus: float
    closed_form_value: Optional[float] = None
    closed_form_id: Optional[str] = None
    zero_probability_branches: tuple = ()

    @property
    def f_total(self) -> float:
        return self.f_plus + self.f_minus

    @property
    def relative_gap(self) -> Optional[float]:
        if self.closed_form_value is None or self.closed_form_value == 0:
            return None
        return abs(self.f_total - self.closed_form_value) / self.closed_form_value


def branch_qfi(branch: BranchOutput, tol: float = 1e-14) -> float:
    """Probability-weighted QFI of one pure branch.

    Uses ``4 N [<dPsi'|dPsi'> - |<Psi'|dPsi'>|^2]`` with ``Psi' = Psi/sqrt(N)``; the
    branch probability does not depend on theta, so ``dPsi' = dPsi/sqrt(N)``.
    """
    if branch.mixed:
        raise ValueError("branch_qfi expects a pure branch; use qfi_mixed")
    p = branch.probability
    if p <= tol:
        return 0.0
    psi, dpsi = branch.state, branch.derivative
    val = 4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2 / p)
    return float(max(val, 0.0))


def qfi_pure_branches(
    branch_plus: BranchOutput,
    branch_minus: BranchOutput,
    closed_form_value: Optional[float] = None,
    closed_form_id: Optional[str] = None,
) -> QfiReport:
    zero = tuple(b.outcome for b in (branch_plus, branch_minus) if b.probability <= 1e-14)
    return QfiReport(
        f_plus=branch_qfi(branch_plus),
        f_minus=branch_qfi(branch_minus),
        closed_form_value=closed_form_value,
        closed_form_id=closed_form_id,
        zero_probability_branches=zero,
    )


def qfi_pure_state(psi: np.ndarray, dpsi: np.ndarray) -> float:
    """``4 [<dpsi|dpsi> - |<psi|dpsi>|^2]`` for a normalized state."""
    return float(4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2))


def qfi_mixed(rho: np.ndarray, drho: np.ndarray, cutoff: float = SLD_CUTOFF, atol: float = 1e-9) -> float:
    """Spectral SLD formula ``sum_{kl} 2 |<k|drho|l>|^2 / (p_k + p_l)``.

    Pairs with ``p_k + p_l`` below ``cutoff * max(p)`` are dropped.
    """
    rho = np.asarray(rho)
    drho = np.asarray(drho)
    scale = max(1.0, float(np.max(np.abs(rho))))
    if np.max(np.abs(rho - rho.conj().T)) > atol * scale:
        raise ValueError("rho is not Hermitian")
    if np.max(np.abs(drho - drho.conj().T)) > atol * max(1.0, float(np.max(np.abs(drho)))):
        raise ValueError("d(rho)/d(theta) is not Hermitian")
    p, V = np.linalg.eigh((rho + rho.conj().T) / 2)
    p = np.clip(p, 0.0, None)
    D = V.conj().T @ drho @ V
    S = p[:, None] + p[None, :]
    keep = S > cutoff * p.max()
    return float(np.sum(2 * np.abs(D[keep]) ** 2 / S[keep]))


def qfi_numeric(config: ProtocolConfig, probe, qubit="+", theta: Optional[float] = None) -> float:
    """Exact QFI of the unconditional output for a given input."""
    c = Circuit(config, probe, qubit)
    if c.mixed:
        rho, drho = c.output(theta)
        return qfi_mixed(rho, drho)
    return qfi_pure_branches(*c.branches(theta)).f_total


def richardson_derivative(f: Callable[[float], np.ndarray], x: float, h: float = 1e-3, levels: int = 3):
    """Central difference refined by Richardson extrapolation (step halved per level)."""
    table = []
    for i in range(levels):
        hi = h / 2**i
        row = [(f(x + hi) - f(x - hi)) / (2 * hi)]
        for k in range(1, i + 1):
            row.append(row[k - 1] + (row[k - 1] - table[i - 1][k - 1]) / (4**k - 1))
        table.append(row)
    return table[-1][-1]


# --- closed forms ---------------------------------------------------------


def qfi_closed_polarized(N: int) -> float:
    return N**2 * (1 - 4 / (N + 1) ** 2)


def qfi_closed_superposition(N: int, m, a_m: float, b_m: float, phi_m: float, phi: float) -> float:
    """Large-N QFI for ``a_m|j,m>_opt + b_m e^{-i phi_m}|j,-m>_opt`` (valid to order N^0)."""
    M = (N + 1) ** 2
    s = math.sin(phi_m) * math.sin(phi + (N + 1) * math.pi / 2)
    denom = M - 4 * m**2 * (a_m**2 - b_m**2) ** 2
    second = 0.0
    if a_m * b_m != 0 and s != 0:
        second = (M - 4 * m**2) ** 2 / denom * 16 * m**2 / M * a_m**2 * b_m**2 * s**2
    third = (-1) ** N * 8 * m * (N * (N + 2) - 4 * m**2) / M * a_m * b_m * s
    return 4 * (1 - 6 / M) * m**2 - second + third + 2 * N**2 / M


def qfi_closed_superposition_reduced(N: int, m) -> float:
    """Form left when ``a_m b_m = 0``, ``phi_m`` is a multiple of pi, or g_z is phi-quantized."""
    M = (N + 1) ** 2
    return 4 * (1 - 6 / M) * m**2 + 2 * N**2 / M


def qfi_closed_thermal(N: int, beta: float) -> float:
    """Large-N thermal-probe QFI.

    Branch weights are ``((N - 2m)/(4N))^2 e^{-m beta}/Z``; the ``+`` branch
    normalizer is the sum of those weights so that the output populations
    ``p_m`` add up to one.
    """
    k = np.arange(N + 1)  # N - 2m = 2k with m = N/2 - k
    m = N / 2 - k
    w = (2 * k) ** 2 / (16.0 * N**2)
    x = -m * beta
    shift = x.max()
    log_z = shift + math.log(np.sum(np.exp(x - shift)))
    p = np.exp(x - log_z)
    norm_plus = float(np.sum(w * p))
    first = 4 / norm_plus * np.sum(m**2 * w * p)
    # 1 / (Z (e^{-m beta} + e^{m beta})) evaluated in log space
    log_cosh2 = np.logaddexp(m * beta, -m * beta)
    second = 8 / norm_plus * np.sum(w * m**2 * np.exp(-log_z - log_cosh2))
    return float(first - second)


def qfi_closed_deviation(N: int, delta: float, nP: int, standard_orientation: bool = True) -> float:
    """Second-order QFI under a tilted encoding axis ``Jx cos(delta) + Jy sin(delta)``.

    With ``standard_orientation`` the linear term has the sign that matches
    ``[Jx, Jy] = i Jz`` (the convention of :mod:`ancilla_metrology.dicke`); pass
    ``False`` for the mirrored sign ``-delta (-1)^nP (2N-1)``.
    """
    s = 1 if standard_orientation else -1
    bracket = (N + 1) ** 2 - 4 + s * delta * (-1) ** nP * (2 * N - 1) - delta**2 * (N**2 + 2 * N - 2)
    return N**2 / (N + 1) ** 2 * bracket


def optimal_deviation(N: int, nP: int, standard_orientation: bool = True) -> float:
    s = 1 if standard_orientation else -1
    return s * (-1) ** nP * (2 * N - 1) / (2 * (N**2 + 2 * N - 2))
