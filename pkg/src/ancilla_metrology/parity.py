"""Parity readout on the ancilla or the probe, and error-propagation sensitivity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .circuit import Circuit, prepare_polarized
from .conditions import t2_identity, t2_time_reversal
from .dicke import DickeSpace, QubitSpace, embed, parity_probe
from .evolution import ProtocolConfig

DIVERGENCE_THRESHOLD = 1e-10


@dataclass
class SensitivityCurve:
    theta: np.ndarray
    signal: np.ndarray
    slope: np.ndarray
    sensitivity: np.ndarray  # NaN marks a divergence
    minima: list = field(default_factory=list)

    @property
    def divergences(self) -> np.ndarray:
        return self.theta[np.isnan(self.sensitivity)]

    @property
    def global_minimum(self):
        return min(self.minima, key=lambda t: t[1]) if self.minima else None


def ancilla_parity(space: DickeSpace) -> np.ndarray:
    return embed(np.eye(space.dim), QubitSpace.sigma_z)


def probe_parity(space: DickeSpace) -> np.ndarray:
    return embed(parity_probe(space), QubitSpace.identity)


class ParitySignal:
    """Exact ``<Pi>(theta)`` and its analytic slope for a fixed circuit."""

    def __init__(self, circuit: Circuit, observable: np.ndarray):
        self.circuit = circuit
        self.observable = observable

    def __call__(self, theta: float) -> tuple[float, float]:
        O = self.observable
        signal = 0.0
        slope = 0.0
        for b in self.circuit.branches(theta):
            if b.mixed:
                signal += np.real(np.trace(O @ b.state))
                slope += np.real(np.trace(O @ b.derivative))
            else:
                Ov = O @ b.state
                signal += np.real(np.vdot(b.state, Ov))
                slope += 2 * np.real(np.vdot(Ov, b.derivative))
        return float(signal), float(slope)

    def sensitivity(self, theta: float) -> float:
        s, d = self(theta)
        return error_propagation(s, d)


def error_propagation(signal, slope, threshold: float = DIVERGENCE_THRESHOLD):
    """``sqrt(1 - <Pi>^2) / |d<Pi>/dtheta|``; NaN where the slope is below ``threshold``."""
    signal = np.asarray(signal, dtype=float)
    slope = np.abs(np.asarray(slope, dtype=float))
    num = np.sqrt(np.clip(1 - signal**2, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(slope < threshold, np.nan, num / np.where(slope == 0, 1.0, slope))
    return out if out.ndim else float(out)


def ancilla_config(config: ProtocolConfig) -> ProtocolConfig:
    """Second stage set to the time reversal of the first, ``t2 = (4 n2 - 1) t1``."""
    return config.replace(t2=t2_time_reversal(config.t1, config.n2))


def probe_config(config: ProtocolConfig, t2_mode: str = "zero") -> ProtocolConfig:
    if t2_mode == "zero":
        return config.replace(t2=0.0)
    if t2_mode == "identity":
        return config.replace(t2=t2_identity(config.t1, config.n3))
    raise ValueError(f"unknown t2 mode {t2_mode!r}; expected 'zero' or 'identity'")


def signal_ancilla(config: ProtocolConfig, probe=None, qubit="+") -> ParitySignal:
    config = ancilla_config(config)
    probe = prepare_polarized(config, -1) if probe is None else probe
    c = Circuit(config, probe, qubit)
    return ParitySignal(c, ancilla_parity(config.space))


def signal_probe(config: ProtocolConfig, probe=None, qubit="+", t2_mode: str = "zero") -> ParitySignal:
    config = probe_config(config, t2_mode)
    probe = prepare_polarized(config, -1) if probe is None else probe
    c = Circuit(config, probe, qubit)
    return ParitySignal(c, probe_parity(config.space))


def sensitivity_from_signal(signal: Sequence[float], slope: Sequence[float], theta: Sequence[float]) -> SensitivityCurve:
    theta = np.asarray(theta, dtype=float)
    signal = np.asarray(signal, dtype=float)
    slope = np.asarray(slope, dtype=float)
    sens = error_propagation(signal, slope)
    return SensitivityCurve(theta, signal, slope, np.atleast_1d(sens), _grid_minima(theta, sens))


def _grid_minima(theta, sens):
    out = []
    s = np.where(np.isnan(sens), np.inf, sens)
    for i in range(1, len(s) - 1):
        if np.isfinite(s[i]) and s[i] <= s[i - 1] and s[i] < s[i + 1]:
            out.append((float(theta[i]), float(s[i])))
    return out


def refine_minimum(fn: Callable[[float], float], left: float, mid: float, right: float, xtol: float = 1e-8):
    """Golden-section refinement inside a grid bracket ``fn(mid) < fn(left), fn(right)``."""
    res = minimize_scalar(fn, bracket=(left, mid, right), method="golden", tol=xtol)
    x = float(res.x)
    if not left <= x <= right:
        x = mid
    return x, float(fn(x))


def scan_sensitivity(sig: Callable[[float], tuple[float, float]], theta: Sequence[float], refine: bool = True) -> SensitivityCurve:
    """Sample ``sig`` on a grid, then refine every interior grid minimum."""
    theta = np.asarray(theta, dtype=float)
    vals = np.array([sig(t) for t in theta])
    curve = sensitivity_from_signal(vals[:, 0], vals[:, 1], theta)
    if refine:
        def f(t):
            s, d = sig(t)
            v = error_propagation(s, d)
            return np.inf if np.isnan(v) else v

        refined = []
        for t0, _ in curve.minima:
            i = int(np.searchsorted(theta, t0))
            refined.append(refine_minimum(f, theta[i - 1], theta[i], theta[i + 1]))
        curve.minima = refined
    return curve


def working_window(fn: Callable[[float], float], theta_opt: float, factor: float = 1.2, span: float = math.pi, step: float = 1e-3):
    """Distances left and right of ``theta_opt`` where ``fn`` first reaches ``factor * fn(theta_opt)``."""
    target = factor * fn(theta_opt)

    def g(t):
        v = fn(t)
        return (np.inf if np.isnan(v) else v) - target

    widths = []
    for direction in (-1, 1):
        prev = theta_opt
        x = theta_opt + direction * step
        width = span
        while abs(x - theta_opt) <= span:
            if g(x) > 0:
                a, b = sorted((prev, x))
                if np.isfinite(fn(a)) and np.isfinite(fn(b)):
                    root = brentq(g, a, b, xtol=1e-12)
                else:
                    root = x
                width = abs(root - theta_opt)
                break
            prev = x
            x += direction * step
        widths.append(width)
    return tuple(widths)


# --- closed forms ---------------------------------------------------------


def signal_closed_ancilla(N: int, theta):
    """Large-N ancilla parity signal ``N [N sin(N theta) + sin(theta)] / (N+1)^2``."""
    theta = np.asarray(theta, dtype=float)
    return N * (N * np.sin(N * theta) + np.sin(theta)) / (N + 1) ** 2


def slope_closed_ancilla(N: int, theta):
    theta = np.asarray(theta, dtype=float)
    return N * (N**2 * np.cos(N * theta) + np.cos(theta)) / (N + 1) ** 2


def sensitivity_closed_ancilla(N: int, theta):
    theta = np.asarray(theta, dtype=float)
    num = np.sqrt((1 + 1 / N) ** 4 - (np.sin(N * theta) + np.sin(theta) / N) ** 2)
    den = np.abs(np.cos(N * theta) + np.cos(theta) / N**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den < DIVERGENCE_THRESHOLD, np.nan, num / (N * np.where(den == 0, 1, den)))
    return out if out.ndim else float(out)


def optimal_points_ancilla(N: int, k: int = 0) -> dict:
    return {
        "theta_opt": k * math.pi,
        "min": (N + 1) ** 2 / (N * (N**2 + 1)),
        "flatness": flatness_ancilla(N),
    }


def flatness_ancilla(N: int, exact: bool = False) -> float:
    """Curvature coefficient ``c`` in ``|dtheta| ~ min + c dtheta^2`` around ``theta = k pi``.

    The default is the large-N value ``(4N+3)/(2N+4)``; ``exact=True`` returns the
    Taylor coefficient of the closed-form sensitivity itself.
    """
    if not exact:
        return (4 * N + 3) / (2 * N + 4)
    num = 4 * N**7 + 3 * N**6 + 4 * N**5 - N**4 + 4 * N**3 + 5 * N**2 + 4 * N + 1
    return num / (2 * N * (N + 1) ** 2 * (N**2 + 1) ** 2)


def _probe_phase(N: int, phi: float, t2_mode: str) -> float:
    if t2_mode == "identity":
        return math.pi / 2
    if t2_mode == "zero":
        return phi
    raise ValueError(f"unknown t2 mode {t2_mode!r}")


def signal_closed_probe(N: int, theta, phi: float = 0.0, t2_mode: str = "zero"):
    """``N/(N+1) sin(N theta + j pi + phi)``; the identity mode is the same with ``phi = pi/2``."""
    theta = np.asarray(theta, dtype=float)
    ph = _probe_phase(N, phi, t2_mode)
    return N / (N + 1) * np.sin(N * theta + N * math.pi / 2 + ph)


def sensitivity_closed_probe(N: int, theta, phi: float = 0.0, t2_mode: str = "zero"):
    theta = np.asarray(theta, dtype=float)
    ph = _probe_phase(N, phi, t2_mode)
    c2 = np.cos(N * theta + N * math.pi / 2 + ph) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(c2 < DIVERGENCE_THRESHOLD**2, np.nan, np.sqrt(1 + (2 * N + 1) / (N**2 * np.where(c2 == 0, 1, c2))) / N)
    return out if out.ndim else float(out)


def optimal_points_probe(N: int, phi: float = 0.0, k1: int = 0, t2_mode: str = "zero") -> dict:
    ph = _probe_phase(N, phi, t2_mode)
    return {
        "theta_opt": ((k1 - N / 2) * math.pi - ph) / N,
        "min": (N + 1) / N**2,
        "flatness": (2 * N + 1) / (2 * N + 2),
    }


def divergence_points_probe(N: int, phi: float = 0.0, k2: int = 0, t2_mode: str = "zero") -> float:
    ph = _probe_phase(N, phi, t2_mode)
    return ((k2 - N / 2 + 0.5) * math.pi - ph) / N
