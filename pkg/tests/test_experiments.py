import logging
import math

import numpy as np
import pytest

from ancilla_metrology.experiments import (
    ConfigError,
    ExperimentSpec,
    GridAxis,
    ResultTable,
    format_cell,
    load_config_file,
    parse_assignments,
    resolve_config,
    run,
)


def test_grid_axis():
    assert np.allclose(GridAxis("g", 0, 1, 3).values(), [0, 0.5, 1])
    assert np.allclose(GridAxis("N", 1, 100, 3, "log").values(), [1, 10, 100])
    ax = GridAxis.parse("g", "0, 0.5, 11")
    assert ax.count == 11 and ax.scale == "linear"
    assert GridAxis.parse("N", "2:250:5:log").scale == "log"
    for bad in (("g", 0, 1, 1), ("g", 0, 1, 3, "cubic"), ("g", 0, 1, 3, "log")):
        with pytest.raises(ConfigError):
            GridAxis(*bad)
    with pytest.raises(ConfigError):
        GridAxis.parse("g", "0,1")


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec("fig9")
    with pytest.raises(ConfigError):
        ExperimentSpec("fig2", {"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentSpec("fig2", parallelism=0)
    with pytest.raises(ConfigError):
        ExperimentSpec("sweep", grids={"nonsense": GridAxis("nonsense", 0, 1, 2)})
    ExperimentSpec("fig2", {"g_z": 0.1, "betas": "1,2"})


def test_result_table_format():
    t = ResultTable(["a", "b", "c"], ["1", "1", "-"], [[1, 0.1, "x"]], {"k": "v"})
    text = t.to_csv()
    assert text == "# k: v\n# units: 1,1,-\na,b,c\n1,1.0000000000000001e-01,x\n"
    with pytest.raises(ValueError):
        ResultTable(["a"], ["1", "1"], [])
    with pytest.raises(ValueError):
        ResultTable(["a", "b"], ["1", "1"], [[1]])
    with pytest.raises(ValueError):
        format_cell(float("nan"))
    assert format_cell(True) == "1"
    assert format_cell(-1.0) == "-1.0000000000000000e+00"


def test_result_table_writes_siblings(tmp_path):
    extra = ResultTable(["x"], ["1"], [[2.0]])
    t = ResultTable(["x"], ["1"], [[1.0]], extra={"ridge": extra})
    paths = t.write(tmp_path / "out.csv")
    assert [p.name for p in paths] == ["out.csv", "out_ridge.csv"]
    assert (tmp_path / "out_ridge.csv").read_bytes().endswith(b"2.0000000000000000e+00\n")


def test_resolve_config_routes_knobs():
    spec = ExperimentSpec("fig2", {"nP": 11, "theta": 0.2, "gz_scale": 1.1})
    cfg = resolve_config(10, spec)
    assert cfg.nP == 11 and cfg.theta == 0.2
    base = resolve_config(10, ExperimentSpec("fig2", {"nP": 11}))
    assert math.isclose(cfg.g_z, 1.1 * base.g_z)


def test_fig2_columns_and_references():
    t = run(ExperimentSpec("fig2", {"N_list": "10,80", "betas": "2,0.1"}))
    assert t.columns == [
        "N", "beta", "qfi_numeric", "qfi_closed_thermal", "qfi_polarized_closed", "shot_noise_ref", "heisenberg_ref",
    ]
    for row in t.rows:
        assert row[6] == row[0] ** 2 and row[5] == row[0]
    row = [r for r in t.rows if r[0] == 80 and r[1] == 0.1]
    assert len(row) == 1 and row[0][2] > 0 and row[0][3] > 0
    assert "config[N=80]" in t.metadata


def test_fig2_beta2_rows_within_one_percent():
    t = run(ExperimentSpec("fig2", {"N_list": "10,40,100", "betas": "2"}))
    for N, _, num, closed, *_ in t.rows:
        assert abs(num / closed - 1) <= 0.01, N


def test_fig2_skips_infeasible(caplog):
    with caplog.at_level(logging.WARNING):
        t = run(ExperimentSpec("fig2", {"N_list": "3,6", "nz": 0}))
    assert t.rows == []
    assert "skipped[N=3]" in t.metadata and "skipped[N=6]" in t.metadata
    assert "skipping N=3" in caplog.text


def test_fig3_table_and_argmax_flip():
    spec = ExperimentSpec("fig3", {"N": 40}, {"delta": GridAxis("delta", -0.05, 0.05, 21)})
    t = run(spec)
    assert len(t.rows) == 2 * 2 * 21
    thermal = [r for r in t.rows if r[2].startswith("thermal")]
    assert all(r[4] == -1.0 for r in thermal)
    argmax = {}
    for nP in (10, 11):
        pol = [r for r in t.rows if r[1] == nP and r[2] == "polarized"]
        argmax[nP] = max(pol, key=lambda r: r[3])[0]
    assert argmax[10] * argmax[11] < 0


def test_fig3_default_quoted_levels():
    t = run(ExperimentSpec("fig3", {}, {"delta": GridAxis("delta", -0.1, 0.1, 3)}))
    edge = [r for r in t.rows if abs(r[0]) == 0.1]
    pol = min(r[3] for r in edge if r[2] == "polarized")
    thermal = min(r[3] for r in edge if r[2] != "polarized")
    assert pol >= 0.988
    assert thermal >= 0.956


def test_fig4_ridge_and_band():
    grids = {"g": GridAxis("g", 0.0, 0.5, 11), "g_z": GridAxis("g_z", 0.0, 0.5, 11)}
    t = run(ExperimentSpec("fig4", {}, grids))
    assert len(t.rows) == 121
    ridge = t.extra["ridge"]
    assert ridge.rows and all(r[2] >= 0.99 for r in ridge.rows)
    band = run(ExperimentSpec("fig4", {}, {"g": GridAxis("g", 0.2, 0.21, 2), "g_z": GridAxis("g_z", 0.19, 0.21, 5)}))
    assert all(r[2] >= 0.9 for r in band.rows if r[0] == 0.2)


def test_fig4_isotropic_point():
    t = run(ExperimentSpec("fig4", {}, {"g": GridAxis("g", 0.2, 0.24, 2), "g_z": GridAxis("g_z", 0.2, 0.24, 2)}))
    vals = {(round(r[0], 3), round(r[1], 3)): r[2] for r in t.rows}
    assert abs(vals[(0.24, 0.24)] - 0.98) <= 0.01


def test_fig5_sentinel_and_minima():
    t = run(ExperimentSpec("fig5", {"N_list": "1,5"}, {"theta": GridAxis("theta", -1.5, 1.5, 61)}))
    n1 = [r for r in t.rows if r[0] == 1]
    assert n1 and all(r[3] == -1.0 for r in n1)
    assert all(r[3] >= 0 for r in t.rows if r[0] == 5)
    minima = t.extra["minima"]
    assert minima.rows and all(r[0] == 5 for r in minima.rows)
    assert "t2" in t.metadata["config[N=5,mode=ancilla]"]


@pytest.mark.parametrize("N", [5, 10])
def test_fig6_two_couplings_cover_range(N):
    t = run(ExperimentSpec("fig6", {"N_list": str(N)}))
    curves = {}
    for mode in ("zero", "zero_shifted"):
        v = np.array([r[3] for r in t.rows if r[4] == mode])
        curves[mode] = np.where(v < 0, np.inf, v)
    union = np.minimum(curves["zero"], curves["zero_shifted"])
    assert union.max() <= 1.3 * union.min()


def test_fig6_modes_present():
    t = run(ExperimentSpec("fig6", {"N_list": "5"}, {"theta": GridAxis("theta", -1, 1, 11)}))
    assert {r[4] for r in t.rows} == {"identity", "zero", "zero_shifted"}
    assert len(t.rows) == 33


def test_sweep():
    grids = parse_assignments(["grid.g=0,0.4,3", "grid.N=4,8,2"])[1]
    t = run(ExperimentSpec("sweep", {"probe": "thermal", "beta": 1.0}, grids))
    assert t.columns[:2] == ["g", "N"]
    assert len(t.rows) == 6
    assert all(0 <= r[2] <= 1 for r in t.rows)
    with pytest.raises(ConfigError):
        run(ExperimentSpec("sweep"))
    with pytest.raises(ConfigError):
        run(ExperimentSpec("sweep", {"probe": "squeezed"}, grids))


def test_determinism_and_worker_invariance():
    spec = lambda w: ExperimentSpec("fig2", {"N_list": "4,9", "betas": "1"}, parallelism=w)
    a = run(spec(1)).to_csv()
    assert a == run(spec(1)).to_csv()
    assert a == run(spec(2)).to_csv()


def test_parse_assignments():
    o, g = parse_assignments(["N=20", "beta=0.5", "probe=thermal", "betas=2,1", "grid.g=0,1,5"])
    assert o == {"N": 20, "beta": 0.5, "probe": "thermal", "betas": "2,1"}
    assert g["g"].count == 5
    with pytest.raises(ConfigError):
        parse_assignments(["N"])


def test_config_file(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nN = 30\nbetas = 2, 1  # inline\ngrid.delta = -0.1, 0.1, 5\n")
    o, g = load_config_file(f)
    assert o["N"] == 30 and o["betas"] == "2, 1"
    assert g["delta"].count == 5
    bad = tmp_path / "bad.cfg"
    bad.write_text("[section]\nN = 3\n[section]\n")
    with pytest.raises(ConfigError):
        load_config_file(bad)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.cfg")


def test_validate_perturbed_coupling_reports_failure():
    from ancilla_metrology.acceptance import check_2

    spec = ExperimentSpec("validate", {"gz_scale": 1.1})
    rows = check_2(spec)
    assert rows and not any(r.passed for r in rows)
