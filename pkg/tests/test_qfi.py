import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ancilla_metrology.circuit import Circuit, prepare_polarized, prepare_superposition, prepare_thermal
from ancilla_metrology.conditions import fig2_config, phi_parameter
from ancilla_metrology.dicke import DickeSpace, build_collective_operators, jx_eigenstate
from ancilla_metrology.evolution import ProtocolConfig
from ancilla_metrology.qfi import (
    optimal_deviation,
    qfi_closed_deviation,
    qfi_closed_polarized,
    qfi_closed_superposition,
    qfi_closed_superposition_reduced,
    qfi_closed_thermal,
    qfi_mixed,
    qfi_numeric,
    qfi_pure_branches,
    qfi_pure_state,
    richardson_derivative,
)


def random_state(r, d):
    v = r.normal(size=d) + 1j * r.normal(size=d)
    return v / np.linalg.norm(v)


def test_theta_independent_gives_zero():
    cfg = fig2_config(8)
    c = Circuit(cfg, prepare_polarized(cfg, -1), encoding=False)
    rep = qfi_pure_branches(*c.branches(0.3))
    assert rep.f_total == 0.0


def test_polarized_n100():
    N = 100
    cfg = fig2_config(N)
    rep = qfi_pure_branches(*Circuit(cfg, prepare_polarized(cfg, -1)).branches(), qfi_closed_polarized(N), "polarized")
    ratio = rep.f_total / N**2
    assert 0.9990 <= ratio <= 0.9999
    assert abs(ratio - qfi_closed_polarized(N) / N**2) <= 1e-3
    assert abs(rep.relative_gap) <= 1e-3
    assert rep.zero_probability_branches == ()


def test_jx_eigenstate_has_no_information():
    cfg = ProtocolConfig(N=1)
    assert qfi_numeric(cfg, jx_eigenstate(cfg.space, -0.5)) <= 1e-14


def test_zero_probability_branch_is_reported():
    cfg = ProtocolConfig(N=3, g=0.2, g_z=0.3)
    rep = qfi_pure_branches(*Circuit(cfg, prepare_polarized(cfg, -1)).branches())
    assert rep.zero_probability_branches == (-1,)
    assert rep.f_minus == 0.0


@given(st.integers(1, 10), st.integers(0, 2**31 - 1), st.floats(-2, 2))
def test_mixed_matches_pure(N, seed, theta):
    r = np.random.default_rng(seed)
    space = DickeSpace(N)
    psi = random_state(r, space.dim)
    G = build_collective_operators(space).jx
    dpsi = -1j * G @ psi
    rho = np.outer(psi, psi.conj())
    drho = np.outer(dpsi, psi.conj()) + np.outer(psi, dpsi.conj())
    assert abs(qfi_mixed(rho, drho) - qfi_pure_state(psi, dpsi)) <= 1e-8
    # four times the generator variance, bounded by N^2
    var = np.vdot(psi, G @ G @ psi).real - np.vdot(psi, G @ psi).real ** 2
    assert math.isclose(qfi_pure_state(psi, dpsi), 4 * var, abs_tol=1e-10)
    assert qfi_pure_state(psi, dpsi) <= N**2 + 1e-9


def test_maximally_mixed_has_no_information():
    cfg = fig2_config(6, theta=0.3)
    rho, drho = Circuit(cfg, np.eye(7) / 7, np.eye(2) / 2).output()
    assert np.allclose(rho, np.eye(14) / 14)
    assert qfi_mixed(rho, drho) <= 1e-12


def test_mixed_rejects_non_hermitian():
    with pytest.raises(ValueError):
        qfi_mixed(np.array([[1, 1], [0, 0]]), np.zeros((2, 2)))


@pytest.mark.parametrize("t2_factor", [0, 3])
def test_pure_branches_agree_with_spectral_formula(t2_factor):
    cfg = fig2_config(30)
    cfg = cfg.replace(t2=t2_factor * cfg.t1, delta=0.04)
    c = Circuit(cfg, prepare_polarized(cfg, -1))
    pure = qfi_pure_branches(*c.branches(0.2)).f_total
    assert abs(pure - qfi_mixed(*c.output(0.2))) <= 1e-8 * 30**2


def test_numeric_qfi_matches_finite_difference_fidelity():
    # F = 8 (1 - sqrt fidelity) / h^2 for pure output branches, cross-checked per branch
    cfg = fig2_config(6).replace(delta=0.02)
    c = Circuit(cfg, prepare_polarized(cfg, -1))
    for outcome in (1, -1):
        b = c.branch(outcome, 0.1)
        norm = lambda t: c.branch(outcome, t).state / math.sqrt(b.probability)
        d = richardson_derivative(norm, 0.1, h=1e-3)
        psi = norm(0.1)
        f_fd = 4 * (np.vdot(d, d).real - abs(np.vdot(psi, d)) ** 2)
        from ancilla_metrology.qfi import branch_qfi

        assert math.isclose(branch_qfi(b) / b.probability, f_fd, rel_tol=1e-7)


def test_richardson_derivative():
    d = richardson_derivative(np.sin, 0.4, h=0.1, levels=4)
    assert abs(d - math.cos(0.4)) <= 1e-10


@pytest.mark.parametrize("nP,delta", [(10, 0.01), (11, -0.01)])
def test_thermal_peak_level(nP, delta):
    N = 100
    cfg = fig2_config(N, nP=nP, delta=delta)
    F = qfi_numeric(cfg, prepare_thermal(cfg, 1.0))
    assert abs(F / N**2 - 0.964) <= 0.005


def test_closed_polarized_values():
    assert round(qfi_closed_polarized(100), 2) == 9996.08
    assert qfi_closed_polarized(1) == 0.0
    assert abs(qfi_closed_polarized(10**6) / 1e12 - 1) < 1e-11


def test_superposition_reduced_conditions():
    N, m, phi = 40, 7, 1.1
    red = qfi_closed_superposition_reduced(N, m)
    assert qfi_closed_superposition(N, m, 1.0, 0.0, 0.4, phi) == red
    assert qfi_closed_superposition(N, m, 0.6, 0.8, 3 * math.pi, phi) == pytest.approx(red, abs=1e-9)


@pytest.mark.parametrize("N", [1, 2, 10, 101, 250])
def test_superposition_top_state_reduces_to_polarized(N):
    assert math.isclose(qfi_closed_superposition_reduced(N, N / 2), qfi_closed_polarized(N), rel_tol=1e-12)


@pytest.mark.parametrize("m,a,b,phi_m", [(100, 1, 0, 0), (95, 0.6, 0.8, 0.7), (50, 0.6, 0.8, 1.3), (50, 0.6, 0.8, 0.0)])
def test_superposition_closed_vs_simulation(m, a, b, phi_m):
    N = 200
    cfg = fig2_config(N)
    num = qfi_numeric(cfg, prepare_superposition(cfg, m, a, b, phi_m))
    closed = qfi_closed_superposition(N, m, a, b, phi_m, phi_parameter(N, cfg.g_z))
    assert abs(num - closed) / N**2 <= 0.01


@pytest.mark.parametrize("N", [20, 50, 100])
def test_thermal_closed_cold_limit(N):
    assert abs(qfi_closed_thermal(N, 50.0) / qfi_closed_polarized(N) - 1) <= 0.01


@pytest.mark.parametrize("N,beta", [(10, 2.0), (100, 2.0), (70, 0.1)])
def test_thermal_closed_vs_simulation(N, beta):
    cfg = fig2_config(N)
    num = qfi_numeric(cfg, prepare_thermal(cfg, beta))
    assert abs(num / qfi_closed_thermal(N, beta) - 1) <= 0.01


def test_thermal_closed_is_finite_for_large_beta_n():
    assert math.isfinite(qfi_closed_thermal(250, 40.0))


def test_deviation_closed_form_at_tenth_radian():
    assert qfi_closed_deviation(100, 0.1, 10) / 100**2 > 0.988
    assert qfi_closed_deviation(100, -0.1, 10) / 100**2 > 0.988


def test_deviation_closed_form():
    assert math.isclose(qfi_closed_deviation(100, 0.0, 10), qfi_closed_polarized(100))
    for N in (10, 100):
        assert optimal_deviation(N, 10) == -optimal_deviation(N, 11)
        assert optimal_deviation(N, 10, standard_orientation=False) == -optimal_deviation(N, 10)


def test_deviation_closed_vs_simulation_near_peak():
    N = 100
    for nP in (10, 11):
        d = optimal_deviation(N, nP)
        cfg = fig2_config(N, nP=nP, delta=d)
        num = qfi_numeric(cfg, prepare_polarized(cfg, -1))
        assert abs(num - qfi_closed_deviation(N, d, nP)) / N**2 <= 1e-3


def test_deviation_orientation_matches_simulation():
    # the simulated QFI is larger on the side picked by the default orientation
    N = 60
    cfg = fig2_config(N, nP=10)
    f = lambda d: qfi_numeric(cfg.replace(delta=d), prepare_polarized(cfg, -1))
    d = optimal_deviation(N, 10)
    assert f(d) > f(-d)
