import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ancilla_metrology.conditions import (
    NoRealCouplingError,
    OptimalParameterSet,
    coupling_from_gz,
    coupling_threshold,
    fig2_config,
    gz_quantized,
    gz_quantized_phi,
    master_condition_residual,
    omega_p_opt,
    optimal_parameters,
    phi_parameter,
    t1_opt,
    t2_identity,
    t2_time_reversal,
    wrap_phase,
)
from ancilla_metrology.evolution import analytic_evolution, strip_global_phase


def test_pure_zz_threshold():
    assert coupling_from_gz(7, 2 / 8) == 0.0


def test_coupling_n100():
    g = coupling_from_gz(100, 598 / 10201)
    assert math.isclose(g, 4 * math.sqrt(19800) / 10201, rel_tol=1e-13)


@given(st.integers(1, 300), st.floats(1.0, 50.0), st.floats(0.1, 5.0))
def test_coupling_round_trip(N, factor, delta_A):
    gz = factor * coupling_threshold(N, delta_A)
    g = coupling_from_gz(N, gz, delta_A)
    assert abs(gz**2 - g**2 - coupling_threshold(N, delta_A) ** 2) <= 1e-14 * max(1.0, gz**2)


def test_coupling_below_threshold():
    with pytest.raises(NoRealCouplingError):
        coupling_from_gz(10, 0.1)
    assert issubclass(NoRealCouplingError, ValueError)


def test_t1_examples():
    assert math.isclose(t1_opt(100), 101 * math.pi / 4)
    assert math.isclose(t1_opt(100, n1=1), 3 * t1_opt(100))
    assert math.isclose(t1_opt(1), math.pi / 2)
    assert math.isclose(t1_opt(9, delta_A=2.0), t1_opt(9) / 2)


def test_phi_examples():
    N = 100
    gz = gz_quantized(N)
    assert math.isclose(phi_parameter(N, gz), 1.5 * N * math.pi)
    assert wrap_phase(phi_parameter(N, gz)) == pytest.approx(0.0, abs=1e-9) or wrap_phase(
        phi_parameter(N, gz)
    ) == pytest.approx(2 * math.pi, abs=1e-9)
    assert math.isclose(phi_parameter(N, 0.0, n1=2), 5 * math.pi / 2)
    base = phi_parameter(N, 0.0)
    one = phi_parameter(N, 0.01) - base
    assert math.isclose(phi_parameter(N, 0.02) - base, 2 * one)


def test_omega_p_examples():
    t1 = t1_opt(100)
    assert math.isclose(omega_p_opt(t1, 10), 40 / 101)
    assert omega_p_opt(t1, 0) == 0.0
    assert math.isclose(omega_p_opt(t1, 11), 44 / 101)


def test_gz_quantized_examples():
    assert math.isclose(gz_quantized(100), 2 * 299 / 101**2)
    assert math.isclose(gz_quantized(10, nz=10), 58 / 121)
    for n1 in (0, 1, 2):
        diff = gz_quantized(30, n1=n1, nz=5) - gz_quantized_phi(30, n1=n1, n_phi=5)
        assert math.isclose(diff, 2 / ((2 * n1 + 1) * 31**2))


def test_second_stage_times():
    t1 = t1_opt(12)
    assert math.isclose(t2_time_reversal(t1), 3 * t1)
    assert math.isclose(t2_identity(t1), 4 * t1)
    with pytest.raises(ValueError):
        t2_identity(t1, 0)


@pytest.mark.parametrize("N", [1, 2, 5, 10, 40])
def test_four_t1_is_identity(N):
    cfg = fig2_config(N)
    U = analytic_evolution(cfg, cfg.t1) @ analytic_evolution(cfg, 3 * cfg.t1)
    assert strip_global_phase(U) <= 1e-8


def test_fig2_config_n100():
    N = 100
    cfg = fig2_config(N)
    assert math.isclose(cfg.t1, 101 * math.pi / 4)
    assert math.isclose(cfg.omega_P, 40 / 101)
    assert math.isclose(cfg.g_z, 2 * (3 * N - 1) / (N + 1) ** 2)
    assert math.isclose(cfg.g, 4 * math.sqrt(2 * N * (N - 1)) / (N + 1) ** 2, rel_tol=1e-12)
    assert (cfg.n1, cfg.nP, cfg.nz, cfg.t2) == (0, 10, N, 0.0)


def test_fig2_config_n2_and_overrides():
    cfg = fig2_config(2)
    assert math.isclose(cfg.g, 4 * math.sqrt(4) / 9)
    odd = fig2_config(2, nP=11, theta=0.2)
    assert odd.nP == 11 and odd.theta == 0.2
    assert math.isclose(odd.omega_P, 11 * math.pi / odd.t1)


@given(st.integers(1, 250), st.sampled_from([0, 1]), st.integers(0, 12))
def test_optimal_set_invariants(N, n1, nP):
    if gz_quantized(N, n1=n1) < coupling_threshold(N) * (1 - 1e-12):
        with pytest.raises(NoRealCouplingError):
            optimal_parameters(N, n1=n1, nP=nP)
        return
    p = optimal_parameters(N, n1=n1, nP=nP)
    assert p.ridge_residual() <= 1e-14
    assert 0 <= p.g <= p.g_z
    assert master_condition_residual(p.to_config()) <= 1e-9


def test_optimal_set_rejects_bad_couplings():
    with pytest.raises(ValueError):
        OptimalParameterSet(N=3, g=0.5, g_z=0.4, t1_opt=1.0, omega_P=0.0, phi=0.0, t2=0.0)


@pytest.mark.parametrize("N", [2, 10, 100])
def test_master_condition(N):
    assert master_condition_residual(fig2_config(N)) <= 1e-9


def test_master_condition_detects_perturbation():
    cfg = fig2_config(10)
    assert master_condition_residual(cfg.replace(g_z=1.1 * cfg.g_z)) > 1e-3


def test_half_integer_nz_shifts_phase():
    N = 6
    a = phi_parameter(N, gz_quantized(N, nz=N))
    b = phi_parameter(N, gz_quantized(N, nz=N + 0.5))
    assert math.isclose(b - a, math.pi / 2)
    assert master_condition_residual(fig2_config(N, nz=N + 0.5)) <= 1e-9
