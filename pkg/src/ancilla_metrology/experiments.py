"""Config-driven experiment runners producing deterministic CSV tables."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .circuit import Circuit, prepare_polarized, prepare_thermal
from .conditions import (
    NoRealCouplingError,
    coupling_threshold,
    fig2_config,
)
from .evolution import ProtocolConfig
from .parity import ancilla_config, probe_config, scan_sensitivity, signal_ancilla, signal_probe
from .qfi import (
    qfi_closed_deviation,
    qfi_closed_polarized,
    qfi_closed_thermal,
    qfi_mixed,
    qfi_pure_branches,
)

log = logging.getLogger(__name__)

KINDS = ("fig2", "fig3", "fig4", "fig5", "fig6", "sweep", "validate")
CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(ProtocolConfig) if f.name != "N")
SOLVER_KNOBS = ("n1", "nP", "nz", "delta_A")
EXPERIMENT_KEYS = ("N", "N_list", "beta", "betas", "nP_list", "probe", "gz_scale")
SENTINEL = -1.0


class ConfigError(ValueError):
    """Bad experiment configuration (maps to exit status 2)."""


@dataclass(frozen=True)
class GridAxis:
    name: str
    start: float
    stop: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError(f"grid {self.name!r} needs at least 2 points")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"grid {self.name!r}: scale must be linear or log")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError(f"grid {self.name!r}: log scale needs positive bounds")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)

    @classmethod
    def parse(cls, name: str, text: str) -> "GridAxis":
        parts = [p.strip() for p in text.replace(":", ",").split(",") if p.strip()]
        if len(parts) not in (3, 4):
            raise ConfigError(f"grid {name!r} expects start, stop, count[, scale]; got {text!r}")
        try:
            return cls(name, float(parts[0]), float(parts[1]), int(parts[2]), *(parts[3:] or []))
        except ValueError as exc:
            raise ConfigError(f"grid {name!r}: {exc}") from None


@dataclass
class ExperimentSpec:
    kind: str
    overrides: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    output_path: Optional[str] = None
    parallelism: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment {self.kind!r}")
        for key in self.overrides:
            if key not in CONFIG_FIELDS and key not in EXPERIMENT_KEYS:
                raise ConfigError(f"unknown override key {key!r}")
        for key in self.grids:
            if key not in CONFIG_FIELDS and key not in ("N", "beta"):
                raise ConfigError(f"grid axis {key!r} is not a config field")
        if self.parallelism < 1:
            raise ConfigError("workers must be >= 1")

    def get(self, key, default=None):
        return self.overrides.get(key, default)

    def grid(self, key, default: GridAxis) -> np.ndarray:
        return self.grids.get(key, default).values()


@dataclass
class ResultTable:
    columns: list
    units: list
    rows: list
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # suffix -> ResultTable

    def __post_init__(self):
        if len(self.columns) != len(self.units):
            raise ValueError("columns and units differ in length")
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row {r!r} does not match {len(self.columns)} columns")

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {value}\n")
        buf.write("# units: " + ",".join(self.units) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows([format_cell(v) for v in r] for r in self.rows)
        return buf.getvalue()

    def write(self, path) -> list:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        written = [path]
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())
        for suffix, table in self.extra.items():
            sub = path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")
            written += table.write(sub)
        return written


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            raise ValueError("NaN is not allowed in result tables")
        return f"{v:.16e}"
    return str(v)


def _finite_or_sentinel(v: float) -> float:
    return SENTINEL if (v is None or not np.isfinite(v)) else float(v)


# --- config resolution ---------------------------------------------------------


def resolve_config(N: int, spec: ExperimentSpec, **extra) -> ProtocolConfig:
    """Optimal config for ``N`` with knob and field overrides applied."""
    values = {k: v for k, v in spec.overrides.items() if k in CONFIG_FIELDS}
    values.update(extra)
    knobs = {k: values.pop(k) for k in SOLVER_KNOBS if k in values}
    cfg = fig2_config(int(N), **knobs)
    if values:
        cfg = cfg.replace(**values)
    scale = float(spec.get("gz_scale", 1.0))
    if scale != 1.0:
        cfg = cfg.replace(g_z=cfg.g_z * scale)
    return cfg


def config_echo(cfg: ProtocolConfig) -> str:
    d = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in cfg.as_dict().items()}
    return json.dumps(d, sort_keys=True)


def base_metadata(spec: ExperimentSpec) -> dict:
    return {
        "experiment": spec.kind,
        "code_version": f"ancilla_metrology {__version__}",
        "overrides": json.dumps(spec.overrides, sort_keys=True, default=str),
    }


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Ordered map; results do not depend on the worker count."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _as_list(value, cast=float) -> list:
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(v) for v in str(value).split(",") if str(v).strip()]


def _n_list(spec: ExperimentSpec, default: list) -> list:
    Ns = _as_list(spec.get("N_list"), int) or default
    if any(N < 1 for N in Ns):
        raise ConfigError(f"probe sizes must be >= 1, got {Ns}")
    return Ns


# --- point evaluators (module level so they pickle) -----------------------------


def _qfi_point(args) -> dict:
    cfg, probe_kind, beta = args
    if probe_kind == "thermal":
        c = Circuit(cfg, prepare_thermal(cfg, beta), "+")
        rho, drho = c.output()
        f = qfi_mixed(rho, drho)
    else:
        c = Circuit(cfg, prepare_polarized(cfg, -1), "+")
        f = qfi_pure_branches(*c.branches()).f_total
    return {"qfi": f, "p_plus": c.probabilities[1]}


def _parity_point(args):
    cfg, mode, thetas = args
    if mode == "ancilla":
        sig = signal_ancilla(cfg)
    else:
        sig = signal_probe(cfg, t2_mode=mode)
    return scan_sensitivity(sig, thetas)


# --- figure runners -----------------------------------------------------------


def default_fig2_grid() -> list:
    return sorted({int(round(x)) for x in np.geomspace(2, 250, 24)})


def run_fig2(spec: ExperimentSpec) -> ResultTable:
    betas = _as_list(spec.get("betas"), float) or [2.0, 1.0, 0.1]
    if "N" in spec.grids:
        Ns = sorted({int(round(x)) for x in spec.grids["N"].values()})
    else:
        Ns = _n_list(spec, default_fig2_grid())
    meta = base_metadata(spec)
    points, keys = [], []
    for N in Ns:
        try:
            cfg = resolve_config(N, spec)
        except NoRealCouplingError as exc:
            log.warning("skipping N=%s: %s", N, exc)
            meta[f"skipped[N={N}]"] = str(exc)
            continue
        meta[f"config[N={N}]"] = config_echo(cfg)
        for beta in betas:
            points.append((cfg, "thermal", beta))
            keys.append((N, beta))
    results = parallel_map(_qfi_point, points, spec.parallelism)
    rows = []
    for (N, beta), res in zip(keys, results):
        rows.append([
            N, beta, res["qfi"], qfi_closed_thermal(N, beta), qfi_closed_polarized(N), float(N), float(N**2),
        ])
    return ResultTable(
        ["N", "beta", "qfi_numeric", "qfi_closed_thermal", "qfi_polarized_closed", "shot_noise_ref", "heisenberg_ref"],
        ["1", "1", "1", "1", "1", "1", "1"],
        rows,
        meta,
    )


def run_fig3(spec: ExperimentSpec) -> ResultTable:
    N = int(spec.get("N", 100))
    deltas = spec.grid("delta", GridAxis("delta", -0.1, 0.1, 81))
    nPs = _as_list(spec.get("nP_list"), int) or [10, 11]
    beta = float(spec.get("beta", 1.0))
    meta = base_metadata(spec)
    points, keys = [], []
    for nP in nPs:
        base = resolve_config(N, spec, nP=nP)
        meta[f"config[nP={nP}]"] = config_echo(base)
        for prep in ("polarized", "thermal"):
            for d in deltas:
                points.append((base.replace(delta=float(d)), prep, beta))
                keys.append((float(d), nP, prep))
    results = parallel_map(_qfi_point, points, spec.parallelism)
    rows = []
    for (d, nP, prep), res in zip(keys, results):
        closed = qfi_closed_deviation(N, d, nP) / N**2 if prep == "polarized" else SENTINEL
        label = "polarized" if prep == "polarized" else f"thermal_beta={beta:g}"
        rows.append([d, nP, label, res["qfi"] / N**2, closed])
    return ResultTable(
        ["delta", "nP", "prep", "qfi_over_N2_numeric", "qfi_over_N2_closed"],
        ["rad", "1", "-", "1", "1 (-1: not applicable)"],
        rows,
        meta,
    )


def run_fig4(spec: ExperimentSpec) -> ResultTable:
    N = int(spec.get("N", 100))
    gs = spec.grid("g", GridAxis("g", 0.0, 0.5, 26))
    gzs = spec.grid("g_z", GridAxis("g_z", 0.0, 0.5, 26))
    base = resolve_config(N, spec)
    meta = base_metadata(spec)
    meta["config"] = config_echo(base)
    points, keys = [], []
    for g in gs:
        for gz in gzs:
            points.append((base.replace(g=float(g), g_z=float(gz)), "polarized", None))
            keys.append((float(g), float(gz)))
    results = parallel_map(_qfi_point, points, spec.parallelism)
    rows = [[g, gz, r["qfi"] / N**2] for (g, gz), r in zip(keys, results)]

    thr = coupling_threshold(N, base.delta_A)
    ridge_pts = [(float(g), math.sqrt(g**2 + thr**2)) for g in gs if math.sqrt(g**2 + thr**2) <= gzs.max() + 1e-12]
    ridge_res = parallel_map(
        _qfi_point, [(base.replace(g=g, g_z=gz), "polarized", None) for g, gz in ridge_pts], spec.parallelism
    )
    ridge = ResultTable(
        ["g", "g_z", "qfi_over_N2"],
        ["delta_A", "delta_A", "1"],
        [[g, gz, r["qfi"] / N**2] for (g, gz), r in zip(ridge_pts, ridge_res)],
        {"table": "analytic ridge g_z = sqrt(g^2 + (2 delta_A/(N+1))^2)", **meta},
    )
    return ResultTable(["g", "g_z", "qfi_over_N2"], ["delta_A", "delta_A", "1"], rows, meta, {"ridge": ridge})


def _parity_table(spec, modes: dict, default_span: float) -> ResultTable:
    Ns = _n_list(spec, [1, 5, 10])
    thetas = spec.grid("theta", GridAxis("theta", -default_span, default_span, 401))
    meta = base_metadata(spec)
    jobs, keys = [], []
    for N in Ns:
        for label, (mode, extra) in modes.items():
            cfg = resolve_config(N, spec, **extra)
            effective = ancilla_config(cfg) if mode == "ancilla" else probe_config(cfg, mode)
            meta[f"config[N={N},mode={label}]"] = config_echo(effective)
            jobs.append((cfg, mode, thetas))
            keys.append((N, label))
    curves = parallel_map(_parity_point, jobs, spec.parallelism)
    rows, mins = [], []
    for (N, label), curve in zip(keys, curves):
        for t, s, v in zip(curve.theta, curve.signal, curve.sensitivity):
            rows.append([N, float(t), float(s), _finite_or_sentinel(N * v), label])
        for t, v in curve.minima:
            mins.append([N, t, _finite_or_sentinel(N * v), label])
    minima = ResultTable(
        ["N", "theta_opt", "sensitivity_times_N_min", "mode"], ["1", "rad", "1", "-"], mins, dict(meta)
    )
    return ResultTable(
        ["N", "theta", "signal", "sensitivity_times_N", "mode"],
        ["1", "rad", "1", "1 (-1: divergent)", "-"],
        rows,
        meta,
        {"minima": minima},
    )


def run_fig5(spec: ExperimentSpec) -> ResultTable:
    return _parity_table(spec, {"ancilla": ("ancilla", {})}, math.pi / 2)


def fig6_modes(N: int) -> dict:
    """Probe-parity settings: ``t2 = 4 t1`` and two ``t2 = 0`` couplings a quarter period apart."""
    return {
        "identity": ("identity", {}),
        "zero": ("zero", {}),
        "zero_shifted": ("zero", {"nz": N + 0.5}),
    }


def run_fig6(spec: ExperimentSpec) -> ResultTable:
    Ns = _n_list(spec, [1, 5, 10])
    tables = [
        _parity_table(
            ExperimentSpec("fig6", {**spec.overrides, "N_list": [N]}, spec.grids, parallelism=spec.parallelism),
            fig6_modes(N),
            math.pi / 2,
        )
        for N in Ns
    ]
    first = tables[0]
    for t in tables[1:]:
        first.rows += t.rows
        first.metadata.update(t.metadata)
        first.extra["minima"].rows += t.extra["minima"].rows
    first.metadata["overrides"] = json.dumps(spec.overrides, sort_keys=True, default=str)
    return first


def run_sweep(spec: ExperimentSpec) -> ResultTable:
    """QFI and branch probability over a Cartesian grid of config fields."""
    if not spec.grids:
        raise ConfigError("sweep needs at least one grid axis (e.g. --set grid.g=0,0.5,11)")
    names = list(spec.grids)
    axes = [spec.grids[n].values() for n in names]
    probe = str(spec.get("probe", "polarized"))
    if probe not in ("polarized", "thermal"):
        raise ConfigError("probe must be polarized or thermal")
    base_N = int(spec.get("N", 20))
    beta = float(spec.get("beta", 1.0))
    meta = base_metadata(spec)
    points, keys = [], []
    for combo in np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(names), -1).T:
        values = dict(zip(names, combo))
        N = int(round(values.pop("N", base_N)))
        b = float(values.pop("beta", beta))
        cfg = resolve_config(N, spec)
        knobs = {k: values.pop(k) for k in SOLVER_KNOBS if k in values}
        if knobs:
            cfg = resolve_config(N, spec, **knobs)
        cfg = cfg.replace(**{k: float(v) for k, v in values.items()})
        points.append((cfg, probe, b))
        keys.append((tuple(float(x) for x in combo), N))
    results = parallel_map(_qfi_point, points, spec.parallelism)
    rows = [list(k) + [r["p_plus"], r["qfi"], r["qfi"] / N**2] for (k, N), r in zip(keys, results)]
    meta["base_config"] = config_echo(resolve_config(base_N, spec))
    return ResultTable(
        names + ["probability_plus", "qfi", "qfi_over_N2"],
        ["-"] * len(names) + ["1", "1", "1"],
        rows,
        meta,
    )


def run_validate(spec: ExperimentSpec) -> ResultTable:
    from .acceptance import run_all

    checks = run_all(spec)
    rows = [
        [c.criterion, c.name, _finite_or_sentinel(c.measured), _finite_or_sentinel(c.target), c.tolerance, c.passed, c.informational]
        for c in checks
    ]
    meta = base_metadata(spec)
    gating = [c for c in checks if not c.informational]
    meta["overall"] = "pass" if all(c.passed for c in gating) else "fail"
    return ResultTable(
        ["criterion", "check", "measured", "target", "tolerance", "passed", "informational"],
        ["-", "-", "1 (-1: divergent or undefined)", "1 (-1: none)", "1", "bool", "bool"],
        rows,
        meta,
    )


RUNNERS = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "sweep": run_sweep,
    "validate": run_validate,
}


def run(spec: ExperimentSpec) -> ResultTable:
    return RUNNERS[spec.kind](spec)


# --- config files ---------------------------------------------------------------


def _parse_value(text: str) -> Any:
    text = text.strip()
    if "," in text:
        return text
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_assignments(pairs: Iterable[str]) -> tuple[dict, dict]:
    """Split ``key=value`` strings into (overrides, grids); ``grid.<name>=start,stop,count[,scale]``."""
    overrides, grids = {}, {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, value = (s.strip() for s in pair.split("=", 1))
        if key.startswith("grid."):
            name = key[5:]
            grids[name] = GridAxis.parse(name, value)
        else:
            overrides[key] = _parse_value(value)
    return overrides, grids


def load_config_file(path) -> tuple[dict, dict]:
    """Read a flat ``key = value`` file (``#`` comments, no sections)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    return parse_assignments(f"{k}={v}" for k, v in parser.items("config"))
