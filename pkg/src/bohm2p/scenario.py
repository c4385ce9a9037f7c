"""Scenario configuration, run pipeline, verification checks, and reports.

A scenario is a single JSON document (``schema_version`` 1) describing the
model, sampling and integration settings, a time grid, named detector
regions, a list of checks, and output options.  ``run_scenario`` executes
sample -> propagate -> statistics and emits trajectories.csv, marginals.csv
and report.json; every number in the report comes from a library operation.

``run_property_checks`` hosts the fast ensemble-free suites (gradient versus
finite differences, mirror antisymmetry, exchange covariance, velocity-sum
closed form, gauge invariance) used by ``bohm2p check`` and the test suite.
"""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics
from .dynamics import IntegratorSettings, constraint_residual, velocity
from .ensemble import SamplerSettings, propagate, sample_positions
from .errors import ConfigError
from .statistics import Region, bohmian_detection, crossing_statistics, marginal_histogram
from .wavefunction import (Composition, ConfigPoint, GaussianSlit, OscillatorPair,
                           PhysicalConstants, PlaneWavePair, ScaledModel, WaveModel)

__all__ = [
    "SCHEMA_VERSION",
    "CheckResult",
    "RunReport",
    "builtin_scenarios",
    "load_config",
    "validate_config",
    "build_model",
    "run_scenario",
    "run_property_checks",
    "PROPERTY_SUITES",
]

logger = logging.getLogger("bohm2p")

SCHEMA_VERSION = 1

_VARIANTS = ("plane_wave", "oscillator", "gaussian_slit")
_CHECK_TYPES = ("constraint_residual", "x_constancy", "marginal_ks",
                "detection_agreement", "noncrossing", "same_side_fraction",
                "midpoint_band")
_COORDS = ("x1", "x2", "x1+x2")


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "measured": float(self.measured),
                "threshold": float(self.threshold), "detail": self.detail}


@dataclass
class RunReport:
    name: str
    checks: list[CheckResult]
    diagnostics: dict
    config: dict
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        # Wall-clock timings are intentionally left out: report files must be
        # byte-identical across reruns of the same config and seed.
        return _jsonable({
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "diagnostics": self.diagnostics,
            "config": self.config,
        })


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- built-in scenarios --------------------------------------------------------


def builtin_scenarios() -> dict[str, dict]:
    """Named ready-to-run configurations covering the three model families."""
    gaussian = {
        "schema_version": SCHEMA_VERSION,
        "name": "gaussian-different-slits",
        "description": "Symmetrized Gaussian slit pairs: center-of-mass scaling "
                       "law, marginal agreement, and detector coincidences",
        "model": {"variant": "gaussian_slit", "sigma0": 1.0, "a": 10.0,
                  "kx": 0.0, "ky": 1.0, "composition": "symmetrized"},
        "constants": {"hbar": 1.0, "mass": 1.0},
        "sampler": {"n_samples": 10000, "seed": 20260809},
        "integrator": {"rel_tol": 1e-11, "abs_tol": 1e-13},
        "time_grid": {"t_start": 0.0, "t_end": 10.0, "n_times": 11},
        "regions": {"upper": [[0.0, None], [None, None]]},
        "checks": [
            {"type": "constraint_residual", "threshold": 1e-6, "min_fraction": 0.99},
            {"type": "marginal_ks", "coordinates": ["x1", "x2", "x1+x2"],
             "times": [0.0, "end"], "alpha": 0.01},
            {"type": "detection_agreement", "region": "upper", "time": 1.0,
             "expect": "near_zero", "quantum_tiny": 1e-4},
            {"type": "detection_agreement", "region": "upper", "time": "end",
             "expect": "positive", "n_sigma": 3.0},
            {"type": "midpoint_band", "band_sigma": 3.0, "min_fraction": 0.99},
        ],
        "output": {"trajectories": True,
                   "marginals": {"coordinates": ["x1", "x2", "x1+x2"],
                                 "times": [0.0, "end"], "bins": 60}},
    }
    product = {
        "schema_version": SCHEMA_VERSION,
        "name": "gaussian-product",
        "description": "Product-composition Gaussian slits (both particles may "
                       "share a slit) with tilted packets",
        "model": {"variant": "gaussian_slit", "sigma0": 1.0, "a": 6.0,
                  "kx": 0.5, "ky": 1.0, "composition": "product"},
        "constants": {"hbar": 1.0, "mass": 1.0},
        "sampler": {"n_samples": 4000, "seed": 915},
        "integrator": {"rel_tol": 1e-11, "abs_tol": 1e-13},
        "time_grid": {"t_start": 0.0, "t_end": 6.0, "n_times": 13},
        "regions": {"upper": [[0.0, None], [None, None]]},
        "checks": [
            {"type": "marginal_ks", "coordinates": ["x1", "x2"],
             "times": [0.0, "end"], "alpha": 0.01},
            {"type": "detection_agreement", "region": "upper", "time": 0.0,
             "n_sigma": 3.0},
            {"type": "detection_agreement", "region": "upper", "time": "end",
             "n_sigma": 3.0},
        ],
        "output": {"trajectories": True,
                   "marginals": {"coordinates": ["x1", "x2"],
                                 "times": [0.0, "end"], "bins": 60}},
    }
    plane = {
        "schema_version": SCHEMA_VERSION,
        "name": "plane-wave-grid",
        "description": "Plane-wave pair on a user-style grid of starts: x "
                       "coordinates must stay constant",
        "model": {"variant": "plane_wave", "kx": 1.0, "ky": 1.0},
        "constants": {"hbar": 1.0, "mass": 1.0},
        "initial_points": {"type": "grid",
                           "x1": {"min": -1.2, "max": 1.2, "n": 10},
                           "x2": {"min": -1.25, "max": 1.15, "n": 10},
                           "y1": 0.0, "y2": 0.0},
        "integrator": {},
        "time_grid": {"t_start": 0.0, "t_end": 2.0, "n_times": 21},
        "regions": {},
        "checks": [
            {"type": "x_constancy", "threshold": 1e-9},
        ],
        "output": {"trajectories": True, "marginals": None},
    }
    oscillator = {
        "schema_version": SCHEMA_VERSION,
        "name": "oscillator-pair",
        "description": "Antiphase oscillator packets over one period: "
                       "non-crossing and center-of-mass conservation",
        "model": {"variant": "oscillator", "omega": 50.0, "a": 1.0},
        "constants": {"hbar": 1.0, "mass": 1.0},
        "sampler": {"n_samples": 1000, "seed": 424242},
        "integrator": {},
        "time_grid": {"t_start": 0.0, "t_end": 2.0 * np.pi / 50.0, "n_times": 41},
        "regions": {"right": [[0.0, None]]},
        "checks": [
            {"type": "noncrossing"},
            {"type": "constraint_residual", "threshold": 1e-6, "min_fraction": 1.0},
            {"type": "same_side_fraction", "time": 0.0, "plane": 0.0,
             "max_fraction": 1e-3},
            {"type": "marginal_ks", "coordinates": ["x1"], "times": [0.0],
             "alpha": 0.01},
        ],
        "output": {"trajectories": True,
                   "marginals": {"coordinates": ["x1"], "times": [0.0, "end"],
                                 "bins": 60}},
    }
    return {c["name"]: c for c in (gaussian, product, plane, oscillator)}


# -- configuration loading and validation --------------------------------------


def load_config(source) -> dict:
    """Load a scenario config from a built-in name, a JSON path, or a dict."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    name = str(source)
    builtins = builtin_scenarios()
    if name in builtins:
        return copy.deepcopy(builtins[name])
    path = Path(name)
    if not path.exists():
        raise ConfigError(
            f"config: '{name}' is neither a built-in scenario nor an existing file")
    try:
        with path.open("r", encoding="utf-8") as handle:
            cfg = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config: top-level JSON value must be an object")
    return cfg


def _expect(condition: bool, field_name: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{field_name}: {message}")


def _number(cfg: dict, field_name: str, key: str, default=None, positive=False,
            nonnegative=False):
    value = cfg.get(key, default)
    _expect(value is not None, f"{field_name}.{key}", "is required")
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool),
            f"{field_name}.{key}", "must be a number")
    if positive:
        _expect(value > 0, f"{field_name}.{key}", "must be > 0")
    if nonnegative:
        _expect(value >= 0, f"{field_name}.{key}", "must be >= 0")
    return float(value)


def validate_config(cfg: dict) -> dict:
    """Normalize and validate a scenario config; raises ConfigError naming the
    offending field."""
    cfg = copy.deepcopy(cfg)
    _expect(cfg.get("schema_version") == SCHEMA_VERSION, "schema_version",
            f"must be {SCHEMA_VERSION}")
    _expect(isinstance(cfg.get("name"), str) and cfg["name"], "name",
            "must be a nonempty string")

    constants = cfg.setdefault("constants", {})
    constants["hbar"] = _number(constants, "constants", "hbar", 1.0, positive=True)
    constants["mass"] = _number(constants, "constants", "mass", 1.0, positive=True)

    model = cfg.get("model")
    _expect(isinstance(model, dict), "model", "must be an object")
    variant = model.get("variant")
    _expect(variant in _VARIANTS, "model.variant", f"must be one of {_VARIANTS}")
    if variant == "plane_wave":
        model["kx"] = _number(model, "model", "kx", 1.0)
        model["ky"] = _number(model, "model", "ky", 0.0)
    elif variant == "oscillator":
        model["omega"] = _number(model, "model", "omega", positive=True)
        model["a"] = _number(model, "model", "a", positive=True)
    else:
        model["sigma0"] = _number(model, "model", "sigma0", positive=True)
        model["a"] = _number(model, "model", "a", positive=True)
        model["kx"] = _number(model, "model", "kx", 0.0)
        model["ky"] = _number(model, "model", "ky", 0.0)
        composition = model.setdefault("composition", "symmetrized")
        _expect(composition in ("symmetrized", "product"), "model.composition",
                "must be 'symmetrized' or 'product'")

    sampler = cfg.get("sampler")
    points = cfg.get("initial_points")
    if variant == "plane_wave":
        _expect(points is not None, "initial_points",
                "plane waves have no normalizable density; initial points are required")
    else:
        _expect((sampler is None) != (points is None), "sampler",
                "exactly one of sampler and initial_points must be given")
    if sampler is not None:
        _expect(isinstance(sampler, dict), "sampler", "must be an object")
        sampler["n_samples"] = int(_number(sampler, "sampler", "n_samples", positive=True))
        sampler["seed"] = int(_number(sampler, "sampler", "seed", 0))
        sampler["burn_in"] = int(_number(sampler, "sampler", "burn_in", 5000,
                                         nonnegative=True))
        sampler["thinning"] = int(_number(sampler, "sampler", "thinning", 20,
                                          positive=True))
        sampler["samples_per_chain"] = int(_number(sampler, "sampler",
                                                   "samples_per_chain", 8,
                                                   positive=True))
        if sampler.get("proposal_scale") is not None:
            sampler["proposal_scale"] = _number(sampler, "sampler",
                                                "proposal_scale", positive=True)
        else:
            sampler["proposal_scale"] = None
    if points is not None:
        _validate_points(points, variant)

    integrator = cfg.setdefault("integrator", {})
    integrator["rel_tol"] = _number(integrator, "integrator", "rel_tol", 1e-9,
                                    positive=True)
    integrator["abs_tol"] = _number(integrator, "integrator", "abs_tol", 1e-11,
                                    positive=True)
    integrator["node_epsilon"] = _number(integrator, "integrator", "node_epsilon",
                                         1e-12, positive=True)
    integrator["max_steps"] = int(_number(integrator, "integrator", "max_steps",
                                          10_000_000, positive=True))

    grid = cfg.get("time_grid")
    _expect(isinstance(grid, dict), "time_grid", "must be an object")
    grid["t_start"] = _number(grid, "time_grid", "t_start", 0.0)
    grid["t_end"] = _number(grid, "time_grid", "t_end")
    _expect(grid["t_end"] > grid["t_start"], "time_grid.t_end",
            "must exceed t_start")
    grid["n_times"] = int(_number(grid, "time_grid", "n_times", 2))
    _expect(grid["n_times"] >= 2, "time_grid.n_times", "must be at least 2")

    dim = 1 if variant == "oscillator" else 2
    regions = cfg.setdefault("regions", {})
    _expect(isinstance(regions, dict), "regions", "must be an object")
    for rname, bounds in regions.items():
        _expect(isinstance(bounds, list) and len(bounds) == dim,
                f"regions.{rname}", f"must list {dim} [low, high] pairs")
        for i, pair in enumerate(bounds):
            _expect(isinstance(pair, list) and len(pair) == 2,
                    f"regions.{rname}[{i}]", "must be a [low, high] pair")
            lo, hi = pair
            for v, side in ((lo, "low"), (hi, "high")):
                _expect(v is None or isinstance(v, (int, float)),
                        f"regions.{rname}[{i}].{side}", "must be a number or null")
            if lo is not None and hi is not None:
                _expect(lo < hi, f"regions.{rname}[{i}]", "low must be below high")

    t_grid = np.linspace(grid["t_start"], grid["t_end"], grid["n_times"])

    def _on_grid(value, field_name):
        if value in ("start", "end"):
            return
        _expect(isinstance(value, (int, float)), field_name,
                "must be a number, 'start' or 'end'")
        _expect(bool(np.any(np.isclose(t_grid, value, rtol=0.0, atol=1e-12))),
                field_name, f"time {value} is not on the configured time grid")

    checks = cfg.setdefault("checks", [])
    _expect(isinstance(checks, list), "checks", "must be a list")
    for i, check in enumerate(checks):
        where = f"checks[{i}]"
        _expect(isinstance(check, dict), where, "must be an object")
        ctype = check.get("type")
        _expect(ctype in _CHECK_TYPES, f"{where}.type",
                f"must be one of {_CHECK_TYPES}")
        if ctype == "marginal_ks":
            coords = check.setdefault("coordinates", ["x1", "x2", "x1+x2"])
            _expect(isinstance(coords, list) and coords
                    and all(c in _COORDS for c in coords),
                    f"{where}.coordinates", f"must be drawn from {_COORDS}")
            times = check.setdefault("times", [grid["t_start"], "end"])
            _expect(isinstance(times, list) and times, f"{where}.times",
                    "must be a nonempty list")
            for tv in times:
                _on_grid(tv, f"{where}.times")
        if ctype in ("detection_agreement", "same_side_fraction"):
            _on_grid(check.get("time"), f"{where}.time")
        if ctype == "detection_agreement":
            has_single = "region" in check
            has_pair = "region1" in check and "region2" in check
            _expect(has_single or has_pair, f"{where}.region",
                    "name a region (or region1/region2)")
            names = [check["region"]] * 2 if has_single else [check["region1"],
                                                              check["region2"]]
            for rname in names:
                _expect(rname in regions, f"{where}.region",
                        f"unknown region '{rname}'")
            check["_regions"] = names
            expect = check.setdefault("expect", None)
            _expect(expect in (None, "near_zero", "positive"), f"{where}.expect",
                    "must be null, 'near_zero' or 'positive'")

    output = cfg.setdefault("output", {})
    _expect(isinstance(output, dict), "output", "must be an object")
    output.setdefault("directory", f"runs/{cfg['name']}")
    output.setdefault("trajectories", True)
    marg = output.setdefault("marginals", None)
    if marg is not None:
        _expect(isinstance(marg, dict), "output.marginals", "must be an object or null")
        coords = marg.setdefault("coordinates", ["x1", "x2", "x1+x2"])
        _expect(all(c in _COORDS for c in coords), "output.marginals.coordinates",
                f"must be drawn from {_COORDS}")
        marg.setdefault("times", [grid["t_start"], "end"])
        for tv in marg["times"]:
            _on_grid(tv, "output.marginals.times")
        marg["bins"] = int(_number(marg, "output.marginals", "bins", 60, positive=True))
    cfg.pop("description", None)
    return cfg


def _validate_points(points: dict, variant: str) -> None:
    _expect(isinstance(points, dict), "initial_points", "must be an object")
    kind = points.get("type")
    _expect(kind in ("grid", "explicit"), "initial_points.type",
            "must be 'grid' or 'explicit'")
    width = 2 if variant == "oscillator" else 4
    if kind == "explicit":
        rows = points.get("points")
        _expect(isinstance(rows, list) and rows, "initial_points.points",
                "must be a nonempty list of coordinate rows")
        for i, row in enumerate(rows):
            _expect(isinstance(row, list) and len(row) == width
                    and all(isinstance(v, (int, float)) for v in row),
                    f"initial_points.points[{i}]",
                    f"must be {width} numbers"
                    + (" (x1, x2)" if width == 2 else " (x1, y1, x2, y2)"))
    else:
        for axis in ("x1", "x2"):
            spec = points.get(axis)
            _expect(isinstance(spec, dict), f"initial_points.{axis}",
                    "must be an object with min, max, n")
            _number(spec, f"initial_points.{axis}", "min")
            _number(spec, f"initial_points.{axis}", "max")
            n = _number(spec, f"initial_points.{axis}", "n", positive=True)
            _expect(float(n).is_integer(), f"initial_points.{axis}.n",
                    "must be an integer")
        if variant != "oscillator":
            _number(points, "initial_points", "y1", 0.0)
            _number(points, "initial_points", "y2", 0.0)


# -- model and pipeline construction -------------------------------------------


def build_model(cfg: dict) -> WaveModel:
    constants = PhysicalConstants(hbar=cfg["constants"]["hbar"],
                                  mass=cfg["constants"]["mass"])
    m = cfg["model"]
    if m["variant"] == "plane_wave":
        return PlaneWavePair(kx=m["kx"], ky=m["ky"], constants=constants)
    if m["variant"] == "oscillator":
        return OscillatorPair(omega=m["omega"], a=m["a"], constants=constants)
    return GaussianSlit(sigma0=m["sigma0"], a=m["a"], kx=m["kx"], ky=m["ky"],
                        composition=Composition(m["composition"]),
                        constants=constants)


def _build_region(bounds: list) -> Region:
    return Region(tuple((lo, hi) for lo, hi in bounds))


def _initial_state_array(cfg: dict, model: WaveModel) -> np.ndarray:
    points = cfg["initial_points"]
    if points["type"] == "explicit":
        return np.asarray(points["points"], dtype=float)
    g1 = points["x1"]
    g2 = points["x2"]
    x1 = np.linspace(g1["min"], g1["max"], int(g1["n"]))
    x2 = np.linspace(g2["min"], g2["max"], int(g2["n"]))
    rows = []
    for a in x1:
        for b in x2:
            if model.dim == 1:
                rows.append([a, b])
            else:
                rows.append([a, points.get("y1", 0.0), b, points.get("y2", 0.0)])
    return np.asarray(rows, dtype=float)


def _resolve_time(value, cfg: dict) -> float:
    if value == "end":
        return cfg["time_grid"]["t_end"]
    if value == "start":
        return cfg["time_grid"]["t_start"]
    return float(value)


def run_scenario(cfg: dict, out_dir=None, seed_override: int | None = None,
                 threads: int = 1) -> tuple[RunReport, Path]:
    """Execute a validated scenario config and write its output files."""
    model = build_model(cfg)
    grid = cfg["time_grid"]
    t_eval = np.linspace(grid["t_start"], grid["t_end"], grid["n_times"])
    integrator = IntegratorSettings(**cfg["integrator"])
    timings: dict[str, float] = {}
    diagnostics: dict = {"n_times": grid["n_times"]}

    tic = time.perf_counter()
    if cfg.get("sampler") is not None:
        sampler_cfg = dict(cfg["sampler"])
        if seed_override is not None:
            sampler_cfg["seed"] = int(seed_override)
        settings = SamplerSettings(**sampler_cfg)
        sample = sample_positions(model, settings)
        r1, r2 = model.embed_x(sample.x[:, 0], sample.x[:, 1])
        y0 = np.concatenate([np.atleast_2d(r1), np.atleast_2d(r2)], axis=1)
        diagnostics["acceptance_rate"] = sample.acceptance_rate
        diagnostics["n_chains"] = sample.n_chains
        diagnostics["seed"] = settings.seed
    else:
        y0 = _initial_state_array(cfg, model)
        diagnostics["seed"] = seed_override
    timings["sample"] = time.perf_counter() - tic
    diagnostics["n_pairs"] = int(len(y0))

    tic = time.perf_counter()
    ens = propagate(model, y0, grid["t_end"], settings=integrator,
                    t_eval=t_eval, seed=diagnostics.get("seed"), threads=threads)
    timings["propagate"] = time.perf_counter() - tic
    diagnostics["aborted_count"] = ens.aborted_count

    regions = {name: _build_region(bounds)
               for name, bounds in cfg["regions"].items()}

    tic = time.perf_counter()
    results = [_run_check(check, cfg, model, ens, regions)
               for check in cfg["checks"]]
    timings["checks"] = time.perf_counter() - tic

    marginal_reports = []
    out_cfg = cfg["output"]
    if out_cfg.get("marginals"):
        spec = out_cfg["marginals"]
        for coord in spec["coordinates"]:
            for tv in spec["times"]:
                marginal_reports.append(
                    marginal_histogram(ens, coord, _resolve_time(tv, cfg),
                                       bins=spec["bins"]))

    report = RunReport(name=cfg["name"], checks=results,
                       diagnostics=diagnostics, config=cfg, timings=timings)

    out_path = Path(out_dir) if out_dir is not None else Path(out_cfg["directory"])
    out_path.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()
    if out_cfg.get("trajectories", True):
        _write_trajectories(out_path / "trajectories.csv", ens)
    _write_marginals(out_path / "marginals.csv", marginal_reports)
    (out_path / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    timings["write"] = time.perf_counter() - tic
    return report, out_path


# -- ensemble checks -----------------------------------------------------------


def _run_check(check: dict, cfg: dict, model, ens, regions) -> CheckResult:
    ctype = check["type"]
    handler = _CHECK_HANDLERS[ctype]
    return handler(check, cfg, model, ens, regions)


def _completed(ens):
    return [tr for tr in ens.trajectories if tr.completed]


def _check_constraint_residual(check, cfg, model, ens, regions) -> CheckResult:
    threshold = check.get("threshold", 1e-6)
    min_fraction = check.get("min_fraction", 0.99)
    residuals = np.array([constraint_residual(model, tr) for tr in _completed(ens)])
    fraction = float(np.mean(residuals < threshold)) if residuals.size else 0.0
    return CheckResult(
        name="constraint_residual", passed=fraction >= min_fraction,
        measured=fraction, threshold=min_fraction,
        detail=f"max residual {residuals.max():.3e} over {residuals.size} pairs"
               if residuals.size else "no completed pairs")


def _check_x_constancy(check, cfg, model, ens, regions) -> CheckResult:
    threshold = check.get("threshold", 1e-9)
    worst = 0.0
    for tr in _completed(ens):
        worst = max(worst,
                    float(np.max(np.abs(tr.positions1[:, 0] - tr.positions1[0, 0]))),
                    float(np.max(np.abs(tr.positions2[:, 0] - tr.positions2[0, 0]))))
    return CheckResult(name="x_constancy", passed=worst < threshold,
                       measured=worst, threshold=threshold,
                       detail=f"{len(_completed(ens))} completed pairs")


def _check_marginal_ks(check, cfg, model, ens, regions) -> CheckResult:
    alpha = check.get("alpha", 0.01)
    worst_ratio = 0.0
    parts = []
    for coord in check["coordinates"]:
        for tv in check["times"]:
            t = _resolve_time(tv, cfg)
            rep = marginal_histogram(ens, coord, t, alpha=alpha)
            ratio = rep.ks_distance / rep.ks_critical
            worst_ratio = max(worst_ratio, ratio)
            parts.append(f"{coord}@t={t:g}: D={rep.ks_distance:.5f}"
                         f" (crit {rep.ks_critical:.5f})")
    return CheckResult(name="marginal_ks", passed=worst_ratio < 1.0,
                       measured=worst_ratio, threshold=1.0,
                       detail="; ".join(parts))


def _check_detection_agreement(check, cfg, model, ens, regions) -> CheckResult:
    r1 = regions[check["_regions"][0]]
    r2 = regions[check["_regions"][1]]
    t = _resolve_time(check["time"], cfg)
    n_sigma = check.get("n_sigma", 3.0)
    quantum_tiny = check.get("quantum_tiny", 1e-4)
    rep = bohmian_detection(ens, r1, r2, t)
    diff = abs(rep.bohmian_fraction - rep.quantum_probability)
    expect = check.get("expect")
    if expect == "near_zero":
        bound = quantum_tiny + n_sigma * np.sqrt(quantum_tiny / max(rep.n_effective, 1))
        passed = (rep.quantum_probability <= quantum_tiny
                  and rep.bohmian_fraction <= bound)
        threshold = quantum_tiny
    else:
        tol = n_sigma * rep.mc_standard_error
        passed = diff <= tol
        threshold = tol
        if expect == "positive":
            passed = passed and rep.quantum_probability > 0 and rep.bohmian_fraction > 0
    return CheckResult(
        name=f"detection_agreement[t={t:g}]", passed=bool(passed),
        measured=diff, threshold=float(threshold),
        detail=f"quantum={rep.quantum_probability:.6g} "
               f"bohmian={rep.bohmian_fraction:.6g} se={rep.mc_standard_error:.3g} "
               f"n={rep.n_effective}")


def _check_noncrossing(check, cfg, model, ens, regions) -> CheckResult:
    swaps = 0
    for tr in _completed(ens):
        diff = tr.positions1[:, 0] - tr.positions2[:, 0]
        if np.any(np.sign(diff) != np.sign(diff[0])):
            swaps += 1
    return CheckResult(name="noncrossing", passed=swaps == 0, measured=swaps,
                       threshold=0.0,
                       detail=f"{len(_completed(ens))} completed pairs")


def _check_same_side_fraction(check, cfg, model, ens, regions) -> CheckResult:
    t = _resolve_time(check["time"], cfg)
    plane = check.get("plane", 0.0)
    max_fraction = check.get("max_fraction", 1e-3)
    p1, p2 = ens.positions_at(t)
    same = (p1[:, 0] - plane) * (p2[:, 0] - plane) > 0
    fraction = float(np.mean(same))
    return CheckResult(name=f"same_side_fraction[t={t:g}]",
                       passed=fraction <= max_fraction, measured=fraction,
                       threshold=max_fraction, detail=f"n={len(same)}")


def _check_midpoint_band(check, cfg, model, ens, regions) -> CheckResult:
    band_sigma = check.get("band_sigma", 3.0)
    min_fraction = check.get("min_fraction", 0.99)
    summary = crossing_statistics(ens)
    half_width = band_sigma * model.packet_width(0.0)
    fraction = summary.midpoint_fraction_within(half_width)
    return CheckResult(name="midpoint_band", passed=fraction >= min_fraction,
                       measured=fraction, threshold=min_fraction,
                       detail=f"half width {half_width:g}, n={summary.n_pairs}")


_CHECK_HANDLERS = {
    "constraint_residual": _check_constraint_residual,
    "x_constancy": _check_x_constancy,
    "marginal_ks": _check_marginal_ks,
    "detection_agreement": _check_detection_agreement,
    "noncrossing": _check_noncrossing,
    "same_side_fraction": _check_same_side_fraction,
    "midpoint_band": _check_midpoint_band,
}


# -- file emission ---------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_trajectories(path: Path, ens) -> None:
    lines = ["pair_id,t,x1,y1,x2,y2,status"]
    for i, tr in enumerate(ens.trajectories):
        status = tr.status.value
        two_d = tr.positions1.shape[1] == 2
        for j, t in enumerate(tr.times):
            x1 = tr.positions1[j, 0]
            x2 = tr.positions2[j, 0]
            y1 = tr.positions1[j, 1] if two_d else 0.0
            y2 = tr.positions2[j, 1] if two_d else 0.0
            lines.append(f"{i},{_fmt(t)},{_fmt(x1)},{_fmt(y1)},"
                         f"{_fmt(x2)},{_fmt(y2)},{status}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_marginals(path: Path, reports) -> None:
    lines = ["coordinate,t,bin_low,bin_high,count,quantum_density"]
    for rep in reports:
        for i in range(len(rep.counts)):
            lines.append(f"{rep.coordinate},{_fmt(rep.t)},{_fmt(rep.bin_edges[i])},"
                         f"{_fmt(rep.bin_edges[i + 1])},{int(rep.counts[i])},"
                         f"{_fmt(rep.quantum_bin_density[i])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- ensemble-free property suites ----------------------------------------------


def _suite_models() -> dict[str, WaveModel]:
    return {
        "plane_wave": PlaneWavePair(kx=1.1, ky=0.7),
        "oscillator": OscillatorPair(omega=1.3, a=1.0),
        "gaussian_symmetrized": GaussianSlit(sigma0=1.0, a=3.0, kx=0.6, ky=0.9),
        "gaussian_product": GaussianSlit(sigma0=1.0, a=3.0, kx=0.6, ky=0.9,
                                         composition=Composition.PRODUCT),
    }


def _random_configs(model: WaveModel, n: int, rng: np.random.Generator,
                    min_density: float = 1e-8):
    """Random non-node configuration points inside the packets' support."""
    d = model.dim
    if isinstance(model, PlaneWavePair):
        box, t_hi = 3.0, 2.0
    elif isinstance(model, OscillatorPair):
        box = model.a + 4.0 * model.packet_width(0.0)
        t_hi = 2.0 * np.pi / model.omega
    else:
        box, t_hi = model.a + 4.0 * model.sigma0, 2.0
    r1 = np.empty((0, d))
    r2 = np.empty((0, d))
    ts = np.empty(0)
    while len(ts) < n:
        k = 4 * n
        c1 = rng.uniform(-box, box, (k, d))
        c2 = rng.uniform(-box, box, (k, d))
        t = rng.uniform(0.0, t_hi, k)
        dens = model.density(c1, c2, t)
        scale = np.array([model.density_scale(tv) for tv in t])
        keep = dens > min_density * scale
        r1 = np.concatenate([r1, c1[keep]])
        r2 = np.concatenate([r2, c2[keep]])
        ts = np.concatenate([ts, t[keep]])
    return r1[:n], r2[:n], ts[:n]


def _suite_gradient_fd(n_points: int, rng) -> CheckResult:
    worst = 0.0
    for name, model in _suite_models().items():
        r1, r2, ts = _random_configs(model, n_points, rng)
        _, g1, g2 = model.amplitude_and_gradients(r1, r2, ts)
        for which, grads in ((0, g1), (1, g2)):
            fd = np.empty_like(grads)
            for j in range(model.dim):
                base = r1 if which == 0 else r2
                h = 1e-5 * np.maximum(1.0, np.abs(base[:, j]))
                up = base.copy()
                up[:, j] += h
                dn = base.copy()
                dn[:, j] -= h
                if which == 0:
                    fp = model.amplitude(up, r2, ts)
                    fm = model.amplitude(dn, r2, ts)
                else:
                    fp = model.amplitude(r1, up, ts)
                    fm = model.amplitude(r1, dn, ts)
                fd[:, j] = (fp - fm) / (2.0 * h)
            num = np.linalg.norm(grads - fd, axis=1)
            den = np.linalg.norm(grads, axis=1) + np.linalg.norm(fd, axis=1)
            worst = max(worst, float(np.max(num / den)))
    return CheckResult(name="gradient_vs_finite_difference",
                       passed=worst < 1e-6, measured=worst, threshold=1e-6,
                       detail=f"{n_points} points per variant")


def _suite_mirror_antisymmetry(n_points: int, rng) -> CheckResult:
    worst = 0.0
    for name, model in _suite_models().items():
        r1, r2, ts = _random_configs(model, n_points, rng, min_density=1e-4)
        v1, v2, _ = dynamics.velocity_field(model, r1, r2, ts)
        m1 = r1.copy()
        m2 = r2.copy()
        m1[:, 0] *= -1
        m2[:, 0] *= -1
        w1, w2, _ = dynamics.velocity_field(model, m1, m2, ts)
        scale = 1.0 + np.abs(v1[:, 0]) + np.abs(v2[:, 0])
        worst = max(worst,
                    float(np.max(np.abs(v1[:, 0] + w1[:, 0]) / scale)),
                    float(np.max(np.abs(v2[:, 0] + w2[:, 0]) / scale)))
    return CheckResult(name="mirror_antisymmetry", passed=worst < 1e-10,
                       measured=worst, threshold=1e-10,
                       detail=f"{n_points} points per variant")


def _suite_exchange_covariance(n_points: int, rng) -> CheckResult:
    worst = 0.0
    for name, model in _suite_models().items():
        r1, r2, ts = _random_configs(model, n_points, rng, min_density=1e-4)
        v1, v2, _ = dynamics.velocity_field(model, r1, r2, ts)
        w1, w2, _ = dynamics.velocity_field(model, r2, r1, ts)
        scale = 1.0 + np.abs(v1) + np.abs(v2)
        worst = max(worst, float(np.max(np.abs(v1 - w2) / scale)),
                    float(np.max(np.abs(v2 - w1) / scale)))
    return CheckResult(name="exchange_covariance", passed=worst < 1e-10,
                       measured=worst, threshold=1e-10,
                       detail=f"{n_points} points per variant")


def _suite_symmetry_plane_pinning(n_points: int, rng) -> CheckResult:
    worst = 0.0
    for name, model in _suite_models().items():
        d = model.dim
        r1 = np.zeros((n_points, d))
        r2 = np.zeros((n_points, d))
        if d == 2:
            r1[:, 1] = rng.uniform(-2, 2, n_points)
            r2[:, 1] = rng.uniform(-2, 2, n_points)
        ts = rng.uniform(0.0, 2.0, n_points)
        v1, v2, _ = dynamics.velocity_field(model, r1, r2, ts)
        worst = max(worst, float(np.max(np.abs(v1[:, 0]))),
                    float(np.max(np.abs(v2[:, 0]))))
    return CheckResult(name="symmetry_plane_pinning", passed=worst < 1e-10,
                       measured=worst, threshold=1e-10,
                       detail="both particles pinned on x = 0")


def _suite_velocity_sum_identity(n_points: int, rng) -> CheckResult:
    worst = 0.0
    for comp in (Composition.SYMMETRIZED, Composition.PRODUCT):
        model = GaussianSlit(sigma0=1.0, a=3.0, kx=0.7, ky=0.4, composition=comp)
        v_scale = model.constants.hbar / (model.constants.mass * model.sigma0)
        count = 0
        while count < n_points:
            r1, r2, ts = _random_configs(model, n_points, rng)
            v1, v2, _ = dynamics.velocity_field(model, r1, r2, ts)
            direct = v1[:, 0] + v2[:, 0]
            for i in range(len(ts)):
                if count >= n_points:
                    break
                if abs(direct[i]) < 1e-6 * v_scale:
                    continue
                closed = dynamics.velocity_sum_x(
                    model, ConfigPoint(r1[i], r2[i], ts[i]))
                rel = abs(direct[i] - closed) / max(abs(direct[i]), abs(closed))
                worst = max(worst, rel)
                count += 1
    return CheckResult(name="velocity_sum_identity", passed=worst < 1e-8,
                       measured=worst, threshold=1e-8,
                       detail="both compositions, interference term included")


def _suite_gauge_invariance(n_points: int, rng) -> CheckResult:
    worst = 0.0
    factor = 0.37 - 1.9j
    for name, model in _suite_models().items():
        scaled = ScaledModel(model, factor)
        r1, r2, ts = _random_configs(model, n_points, rng, min_density=1e-4)
        v1, v2, _ = dynamics.velocity_field(model, r1, r2, ts)
        w1, w2, _ = dynamics.velocity_field(scaled, r1, r2, ts)
        scale = 1.0 + np.abs(v1) + np.abs(v2)
        worst = max(worst, float(np.max(np.abs(v1 - w1) / scale)),
                    float(np.max(np.abs(v2 - w2) / scale)))
    return CheckResult(name="gauge_invariance", passed=worst < 1e-10,
                       measured=worst, threshold=1e-10,
                       detail=f"amplitude rescaled by {factor}")


PROPERTY_SUITES = {
    "gradient_vs_finite_difference": _suite_gradient_fd,
    "mirror_antisymmetry": _suite_mirror_antisymmetry,
    "exchange_covariance": _suite_exchange_covariance,
    "symmetry_plane_pinning": _suite_symmetry_plane_pinning,
    "velocity_sum_identity": _suite_velocity_sum_identity,
    "gauge_invariance": _suite_gauge_invariance,
}


def run_property_checks(n_points: int = 1000, seed: int = 20260809,
                        suites: list[str] | None = None) -> list[CheckResult]:
    """Run the ensemble-free verification suites on the default model zoo."""
    if suites is None:
        suites = list(PROPERTY_SUITES)
    unknown = [s for s in suites if s not in PROPERTY_SUITES]
    if unknown:
        raise ConfigError(f"checks: unknown suite names {unknown}")
    suite_ids = {name: i for i, name in enumerate(PROPERTY_SUITES)}
    results = []
    for name in suites:
        rng = np.random.default_rng([seed, suite_ids[name]])
        results.append(PROPERTY_SUITES[name](n_points, rng))
    return results
