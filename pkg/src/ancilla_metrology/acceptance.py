"""Acceptance checks: exact simulation measured against the stated targets.

Every check returns one or more ``CheckResult`` rows.  Failures are data; no
check raises on a missed target.  Sensitivities are reported as ``N |dtheta|``
and windows in units of pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .circuit import Circuit, ghz_fidelity, prepare_polarized, prepare_thermal, probe_factor
from .conditions import fig2_config
from .evolution import ProtocolConfig, analytic_evolution, oracle_evolution
from .parity import (
    scan_sensitivity,
    sensitivity_closed_ancilla,
    sensitivity_closed_probe,
    signal_ancilla,
    signal_closed_probe,
    signal_probe,
    sensitivity_from_signal,
    working_window,
)
from .qfi import (
    optimal_deviation,
    qfi_closed_deviation,
    qfi_closed_polarized,
    qfi_closed_thermal,
    qfi_mixed,
    qfi_pure_branches,
)

ORACLE_SEED = 20240917
THETA_SPAN = math.pi / 2
THETA_COUNT = 401


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    measured: float
    target: float
    tolerance: float
    passed: bool
    informational: bool = False


def _within(criterion, name, measured, target, tol) -> CheckResult:
    ok = bool(np.isfinite(measured) and abs(measured - target) <= tol)
    return CheckResult(criterion, name, float(measured), float(target), float(tol), ok)


def _at_least(criterion, name, measured, bound, slack=0.0) -> CheckResult:
    ok = bool(np.isfinite(measured) and measured >= bound - slack)
    return CheckResult(criterion, name, float(measured), float(bound), float(slack), ok)


def _at_most(criterion, name, measured, bound) -> CheckResult:
    ok = bool(np.isfinite(measured) and measured <= bound)
    return CheckResult(criterion, name, float(measured), 0.0, float(bound), ok)


def _info(criterion, name, measured, target=float("nan")) -> CheckResult:
    return CheckResult(criterion, name, float(measured), float(target), 0.0, True, True)


def _config(N: int, spec=None, **extra) -> ProtocolConfig:
    if spec is None:
        return fig2_config(N, **extra)
    from .experiments import resolve_config

    return resolve_config(N, spec, **extra)


def _pure_qfi(cfg: ProtocolConfig) -> float:
    c = Circuit(cfg, prepare_polarized(cfg, -1), "+")
    return qfi_pure_branches(*c.branches()).f_total


def _thermal_qfi(cfg: ProtocolConfig, beta: float) -> float:
    c = Circuit(cfg, prepare_thermal(cfg, beta), "+")
    return qfi_mixed(*c.output())


def _thermal_point(args):
    cfg, beta = args
    return _thermal_qfi(cfg, beta)


# --- 1: propagator ------------------------------------------------------------


def random_configs(rng: np.random.Generator, N: int, count: int):
    for _ in range(count):
        delta_A = rng.uniform(0.2, 2.0)
        g_z = rng.uniform(0.0, 1.5)
        g = rng.uniform(0.0, 1.5)
        if rng.random() < 0.2:
            g = g_z  # isotropic point, Omega can reach zero
        cfg = ProtocolConfig(N=N, omega_P=rng.uniform(0.0, 20.0), delta_A=delta_A, g=g, g_z=g_z)
        yield cfg, rng.uniform(0.0, 50.0)


def check_1(spec=None) -> list:
    rng = np.random.default_rng(ORACLE_SEED)
    worst = 0.0
    for N in (1, 2, 5, 20, 50):
        for cfg, t in random_configs(rng, N, 100):
            gap = np.max(np.abs(analytic_evolution(cfg, t) - oracle_evolution(cfg, t)))
            worst = max(worst, float(gap))
    return [_at_most(1, "propagator max entrywise gap (500 configs)", worst, 1e-10)]


# --- 2: master condition -------------------------------------------------------


def check_2(spec=None) -> list:
    from .conditions import master_condition_residual

    return [
        _at_most(2, f"master condition residual N={N}", master_condition_residual(_config(N, spec)), 1e-9)
        for N in (2, 10, 100)
    ]


# --- 3: branch probability ------------------------------------------------------


def check_3(spec=None) -> list:
    out = []
    for N in (10, 20, 50, 100):
        cfg = _config(N, spec)
        c = Circuit(cfg, prepare_polarized(cfg, -1), "+")
        closed = (1 + N / (N + 1)) / 2
        out.append(_within(3, f"P(+) vs closed form N={N}", c.probabilities[1], closed, 2 / N))
    return out


# --- 4: polarized QFI ------------------------------------------------------------


def check_4(spec=None) -> list:
    N = 100
    cfg = _config(N, spec)
    c = Circuit(cfg, prepare_polarized(cfg, -1), "+")
    pure = qfi_pure_branches(*c.branches()).f_total
    sld = qfi_mixed(*c.output())
    return [
        _within(4, "F/N^2 vs 1-4/(N+1)^2 at N=100", pure / N**2, qfi_closed_polarized(N) / N**2, 1e-3),
        _at_most(4, "pure vs spectral-SLD |dF|/N^2", abs(pure - sld) / N**2, 1e-8),
    ]


# --- 5: thermal QFI --------------------------------------------------------------

THERMAL_GRID = {2.0: (10, 20, 40, 100, 250), 1.0: (15, 30, 60, 120, 250), 0.1: (70, 100, 150, 250)}
SLOPE_GRID = (100, 125, 150, 175, 200, 225, 250)


def check_5(spec=None) -> list:
    from .experiments import parallel_map

    workers = getattr(spec, "parallelism", 1)
    jobs = [(_config(N, spec), beta) for beta, Ns in THERMAL_GRID.items() for N in Ns]
    jobs += [(_config(N, spec), 0.1) for N in SLOPE_GRID]
    values = iter(parallel_map(_thermal_point, jobs, workers))
    cache = {}
    for cfg, beta in jobs:
        cache[(cfg.N, beta)] = next(values)
    out = []
    for beta, Ns in THERMAL_GRID.items():
        for N in Ns:
            num = cache[(N, beta)]
            closed = qfi_closed_thermal(N, beta)
            out.append(_at_most(5, f"thermal |rel gap| beta={beta:g} N={N}", abs(num / closed - 1), 0.01))
    x = np.log(SLOPE_GRID)
    y = np.log([cache[(N, 0.1)] for N in SLOPE_GRID])
    slope = float(np.polyfit(x, y, 1)[0])
    out.append(_within(5, "log-log slope beta=0.1 N in [100,250]", slope, 1.95, 0.05))
    closed = np.log([qfi_closed_thermal(N, 0.1) for N in SLOPE_GRID])
    out.append(_info(5, "closed-form log-log slope beta=0.1 N in [100,250]", float(np.polyfit(x, closed, 1)[0])))
    return out


# --- 6: deviation robustness -------------------------------------------------------


def _argmax(f: Callable[[float], float], lo: float, hi: float) -> tuple[float, float]:
    res = minimize_scalar(lambda d: -f(d), bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    return float(res.x), float(-res.fun)


def check_6(spec=None) -> list:
    N = 100
    out = []
    for nP in (10, 11):
        base = _config(N, spec, nP=nP)
        pol = lambda d: _pure_qfi(base.replace(delta=d)) / N**2
        th = lambda d: _thermal_qfi(base.replace(delta=d), 1.0) / N**2
        out.append(_at_least(6, f"polarized F/N^2 min over |delta|=0.1 nP={nP}", min(pol(-0.1), pol(0.1)), 0.988))
        closed = min(qfi_closed_deviation(N, d, nP) for d in (-0.1, 0.1)) / N**2
        out.append(_info(6, f"closed-form F/N^2 min over |delta|=0.1 nP={nP}", closed, 0.988))
        out.append(_at_least(6, f"thermal b=1 F/N^2 min over |delta|=0.1 nP={nP}", min(th(-0.1), th(0.1)), 0.956))
        d_th, peak = _argmax(th, -0.05, 0.05)
        out.append(_within(6, f"thermal b=1 peak F/N^2 nP={nP}", peak, 0.964, 0.005))
        out.append(_info(6, f"thermal b=1 peak location nP={nP}", d_th))
        d_pol, _ = _argmax(pol, -0.05, 0.05)
        out.append(_within(6, f"polarized argmax delta vs closed-form delta* nP={nP}", d_pol, optimal_deviation(N, nP), 0.002))
    return out


# --- 7: coupling robustness -------------------------------------------------------


def check_7(spec=None) -> list:
    N = 100
    base = _config(N, spec)
    f = lambda g, gz: _pure_qfi(base.replace(g=g, g_z=gz)) / N**2
    band = min(f(0.2, gz) for gz in np.linspace(0.19, 0.21, 11))
    return [
        _at_least(7, "g=0.2 band min F/N^2 over g_z in [0.19,0.21]", band, 0.9),
        _within(7, "g=g_z=0.043 F/N^2", f(0.043, 0.043), 0.84, 0.02),
        _within(7, "g=g_z=0.24 F/N^2", f(0.24, 0.24), 0.98, 0.02),
    ]


# --- 8, 9: parity -------------------------------------------------------------------


def _thetas():
    return np.linspace(-THETA_SPAN, THETA_SPAN, THETA_COUNT)


def _scaled(N, fn):
    def g(t):
        s, d = fn(t)
        from .parity import error_propagation

        return N * error_propagation(s, d)

    return g


def _curve_stats(N: int, sig, near: float = 0.0):
    """Global minimum, minimum nearest ``near`` and its half window (both N-scaled)."""
    curve = scan_sensitivity(sig, _thetas())
    if not curve.minima:
        return curve, math.inf, None, math.nan
    best = min(curve.minima, key=lambda tv: tv[1])
    t0, _ = min(curve.minima, key=lambda tv: abs(tv[0] - near))
    left, right = working_window(_scaled(N, sig), t0)
    return curve, N * best[1], t0, min(left, right) / math.pi


def _local_min_near(curve, N, where: float, reach: float = 0.05 * math.pi) -> float:
    cands = [v for t, v in curve.minima if abs(t - where) <= reach]
    return N * min(cands) if cands else math.inf


def _closed_window(N: int, sens: Callable, t0: float) -> float:
    left, right = working_window(lambda t: float(sens(t)), t0)
    return min(left, right) / math.pi


ANCILLA_MINIMA = {1: 2.0, 5: 1.38, 10: 1.20}
ANCILLA_WINDOWS = {1: 0.199, 5: 0.041, 10: 0.021}
PROBE_MINIMA = {1: 2.0, 5: 1.2, 10: 1.1}
PROBE_WINDOWS = {1: 0.208, 5: 0.056, 10: 0.032}


def check_8(spec=None) -> list:
    out = []
    for N in (1, 5, 10):
        curve, gmin, t0, window = _curve_stats(N, signal_ancilla(_config(N, spec)))
        out.append(_within(8, f"ancilla min N|dtheta| N={N}", gmin, ANCILLA_MINIMA[N], 0.02))
        if N == 5:
            out.append(_within(8, "ancilla local min at theta=0.2pi N=5", _local_min_near(curve, N, 0.2 * math.pi), 1.48, 0.03))
            out.append(_within(8, "ancilla local min at theta=0.4pi N=5", _local_min_near(curve, N, 0.4 * math.pi), 1.41, 0.03))
        out.append(_within(8, f"ancilla window/pi N={N}", window, ANCILLA_WINDOWS[N], 0.002))
        closed = _closed_window(N, lambda t: sensitivity_closed_ancilla(N, t), 0.0)
        out.append(_info(8, f"ancilla closed-form window/pi N={N}", closed, ANCILLA_WINDOWS[N]))
    return out


def check_9(spec=None) -> list:
    out = []
    th = _thetas()
    phi = math.pi / 2
    for N in (1, 5, 10):
        sig = signal_probe(_config(N, spec), t2_mode="identity")
        _, gmin, t0, window = _curve_stats(N, sig)
        out.append(_within(9, f"probe min N|dtheta| N={N}", gmin, PROBE_MINIMA[N], 0.02))
        gap = np.max(np.abs(signal_closed_probe(N, th, phi, "identity") - signal_closed_probe(N, th, phi, "zero")))
        out.append(_at_most(9, f"closed-form t2=4t1 vs t2=0 (phi=pi/2) signal gap N={N}", gap, 1e-8))
        out.append(_within(9, f"probe window/pi N={N}", window, PROBE_WINDOWS[N], 0.002))
        sens = lambda t: sensitivity_closed_probe(N, t, phi, "identity")
        from .parity import optimal_points_probe

        t_opt = optimal_points_probe(N, phi, k1=round(N / 2), t2_mode="identity")["theta_opt"]
        out.append(_info(9, f"probe closed-form window/pi N={N}", _closed_window(N, sens, t_opt), PROBE_WINDOWS[N]))
    return out


# --- 10: Cramer-Rao ----------------------------------------------------------------


def check_10(spec=None) -> list:
    out = []
    th = _thetas()
    for N in (1, 5, 10):
        cfg = _config(N, spec)
        for label, sig in (
            ("ancilla", signal_ancilla(cfg)),
            ("probe t2=4t1", signal_probe(cfg, t2_mode="identity")),
            ("probe t2=0", signal_probe(cfg, t2_mode="zero")),
        ):
            F = qfi_pure_branches(*sig.circuit.branches()).f_total
            vals = np.array([sig(t) for t in th])
            curve = sensitivity_from_signal(vals[:, 0], vals[:, 1], th)
            s = curve.sensitivity[np.isfinite(curve.sensitivity)]
            name = f"min(|dtheta| - 1/sqrt(F)) {label} N={N}"
            if not s.size:
                # every sample divergent: the bound holds trivially
                out.append(CheckResult(10, name + " (all samples divergent)", 0.0, 0.0, 1e-6, True))
                continue
            margin = float(np.min(s) - 1 / math.sqrt(F))
            out.append(_at_least(10, name, margin, 0.0, 1e-6))
    return out


# --- 11: GHZ-likeness ---------------------------------------------------------------

GHZ_NS = (10, 20, 40, 80)


def ghz_fidelities(spec=None) -> list:
    vals = []
    for N in GHZ_NS:
        cfg = _config(N, spec).replace(t2=0.0)
        c = Circuit(cfg, prepare_polarized(cfg, -1), "+")
        b = max(c.branches(), key=lambda br: br.probability)
        vals.append(ghz_fidelity(probe_factor(b), maximize=True))
    return vals


def check_11(spec=None) -> list:
    vals = ghz_fidelities(spec)
    steps = np.diff(vals)
    out = [_at_least(11, "min consecutive GHZ fidelity increase", float(steps.min()), 0.0, 1e-12)]
    out.append(_at_least(11, "min GHZ fidelity minus N=10 value", float(min(vals) - vals[0]), 0.0, 1e-12))
    out += [_info(11, f"GHZ fidelity N={N}", v) for N, v in zip(GHZ_NS, vals)]
    return out


# --- 12: determinism -------------------------------------------------------------------


def check_12(spec=None) -> list:
    from .experiments import ExperimentSpec, run

    small = ExperimentSpec("fig5", {"N_list": "5"}, {})
    first = run(small).to_csv().encode()
    second = run(small).to_csv().encode()
    return [_at_least(12, "in-process repeat of a fig5 run is byte-identical", float(first == second), 1.0)]


CHECKS = (check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9, check_10, check_11, check_12)


def run_all(spec=None, only: Optional[set] = None) -> list:
    results = []
    for i, check in enumerate(CHECKS, start=1):
        if only and i not in only:
            continue
        results += check(spec)
    return results


def summarize(results) -> dict:
    """Criterion number -> overall pass (informational rows never fail)."""
    verdict = {}
    for r in results:
        verdict[r.criterion] = verdict.get(r.criterion, True) and (r.passed or r.informational)
    return verdict
