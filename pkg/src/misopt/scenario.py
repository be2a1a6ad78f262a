"""Scenario configuration: schema, defaults, validation and instance building.

A scenario is one structured config (YAML or JSON) describing the layout,
the channel statistics, solver settings, one sweep axis and the seed list.
Validation is fail-fast: every violated invariant is reported by field name
before any computation starts.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bcd import BcdConfig
from .benchmarks import PsoConfig, QuantizedSearchConfig
from .channel import build_stats, even_user_angles, random_user_angles
from .geometry import bare_pattern, build_layout, enumerate_patterns
from .manifold import RcgConfig


class ConfigError(ValueError):
    """A scenario config field is missing, malformed or inconsistent."""


SWEEP_AXES = ("power_dbm", "users", "m_cols", "rician_db", "allocation", "ms2_size")
SCHEMES = ("bcd", "rcg", "rcg-elementwise", "pso", "qsearch", "single", "dynamic")
OBJECTIVES = ("min_rate", "throughput")
ROBUSTNESS_FAMILIES = ("location_gaussian", "location_bounded", "csi_mix",
                       "csi_bounded", "phase_gaussian", "phase_bounded")

_DEFAULTS = {
    "layout": {
        "m_rows": 6, "m_cols": 6, "n_rows": 4, "n_cols": 4,
        "spacing_m": 0.025, "wavelength_m": 0.1,
        "bs_antennas": 4, "bs_spacing_m": None,
    },
    "channel": {
        "users": 6,
        "elevation_rad": -np.pi / 4,
        "azimuth_range_rad": [0.0, np.pi / 3],
        "placement": "even",
        "distance_m": 30.0,
        "rician_db": 10.0,
        "gamma_ref": 0.05,
        "power_dbm": 30.0,
        "power_ref_dbm": 30.0,
        "total_time_s": 100.0,
    },
    "solver": {
        "objective": "min_rate",
        "schemes": ["bcd"],
        "bcd": {}, "rcg": {}, "pso": {}, "qsearch": {}, "dynamic": {"starts": 5},
    },
    "sweep": {"axis": "power_dbm", "values": [30.0]},
    "seeds": [0],
    "robustness": {
        "family": "csi_mix",
        "magnitudes": [0.0, 0.1, 0.2],
        "trials": 200,
        "scheme": "rcg",
    },
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in (override or {}).items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(defaults[key], dict) and not isinstance(value, dict):
            raise ConfigError(f"config key {path + key!r} must be a mapping")
        if isinstance(defaults[key], dict) and defaults[key]:
            out[key] = _merge(defaults[key], value, path + key + ".")
        else:
            # empty-dict defaults are open sections (per-solver options),
            # validated when the corresponding config dataclass is built
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class Scenario:
    """Resolved scenario config; every default the user did not set is filled in."""

    raw: dict = field(repr=False)

    @property
    def layout_cfg(self) -> dict:
        return self.raw["layout"]

    @property
    def channel_cfg(self) -> dict:
        return self.raw["channel"]

    @property
    def solver_cfg(self) -> dict:
        return self.raw["solver"]

    @property
    def sweep_axis(self) -> str:
        return self.raw["sweep"]["axis"]

    @property
    def sweep_values(self) -> list:
        return list(self.raw["sweep"]["values"])

    @property
    def seeds(self) -> list:
        return list(self.raw["seeds"])

    @property
    def objective(self) -> str:
        return self.raw["solver"]["objective"]

    @property
    def schemes(self) -> list:
        return list(self.raw["solver"]["schemes"])

    @property
    def total_time(self) -> float:
        return float(self.raw["channel"]["total_time_s"])

    def resolved(self) -> dict:
        return copy.deepcopy(self.raw)

    def bcd_config(self) -> BcdConfig:
        return _build_cfg(BcdConfig, self.solver_cfg["bcd"], "solver.bcd")

    def rcg_config(self) -> RcgConfig:
        return _build_cfg(RcgConfig, self.solver_cfg["rcg"], "solver.rcg")

    def pso_config(self, seed: int) -> PsoConfig:
        kw = dict(self.solver_cfg["pso"])
        kw.setdefault("seed", seed)
        kw["objective"] = self.objective
        return _build_cfg(PsoConfig, kw, "solver.pso")

    def qsearch_config(self) -> QuantizedSearchConfig:
        kw = dict(self.solver_cfg["qsearch"])
        kw["objective"] = self.objective
        return _build_cfg(QuantizedSearchConfig, kw, "solver.qsearch")


def _build_cfg(cls, kwargs: dict, section: str):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad {section} options: {err}") from err


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse config file {path}: {err}") from err
    return make_scenario(data)


def make_scenario(data: dict) -> Scenario:
    scn = Scenario(raw=_merge(_DEFAULTS, data))
    validate_scenario(scn)
    return scn


def validate_scenario(scn: Scenario) -> None:
    lay = scn.layout_cfg
    for name in ("m_rows", "m_cols", "n_rows", "n_cols", "bs_antennas"):
        v = lay[name]
        if int(v) != v or v < 1:
            raise ConfigError(f"layout.{name} must be a positive integer, got {v}")
    if lay["n_rows"] > lay["m_rows"]:
        raise ConfigError("layout.n_rows exceeds layout.m_rows")
    if lay["n_cols"] > lay["m_cols"]:
        raise ConfigError("layout.n_cols exceeds layout.m_cols")
    for name in ("spacing_m", "wavelength_m"):
        if lay[name] <= 0:
            raise ConfigError(f"layout.{name} must be positive")

    ch = scn.channel_cfg
    if int(ch["users"]) != ch["users"] or ch["users"] < 1:
        raise ConfigError("channel.users must be a positive integer")
    if ch["gamma_ref"] <= 0:
        raise ConfigError("channel.gamma_ref must be positive")
    if ch["total_time_s"] <= 0:
        raise ConfigError("channel.total_time_s must be positive")
    if ch["placement"] not in ("even", "random"):
        raise ConfigError("channel.placement must be 'even' or 'random'")
    lo, hi = ch["azimuth_range_rad"]
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise ConfigError("channel.azimuth_range_rad must be a finite [lo, hi]")
    if abs(ch["elevation_rad"]) > np.pi / 2:
        raise ConfigError("channel.elevation_rad must lie in [-pi/2, pi/2]")
    rician = ch["rician_db"]
    if isinstance(rician, dict):
        extra = set(rician) - {"bs_mis", "mis_user"}
        if extra:
            raise ConfigError(f"channel.rician_db has unknown keys {sorted(extra)}")

    sv = scn.solver_cfg
    if sv["objective"] not in OBJECTIVES:
        raise ConfigError(f"solver.objective must be one of {OBJECTIVES}")
    if not sv["schemes"]:
        raise ConfigError("solver.schemes must not be empty")
    for s in sv["schemes"]:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; valid: {SCHEMES}")
        if s in ("rcg", "rcg-elementwise") and sv["objective"] != "throughput":
            raise ConfigError(f"scheme {s!r} requires solver.objective=throughput")
    scn.bcd_config()
    scn.rcg_config()
    scn.qsearch_config()

    sw = scn.raw["sweep"]
    if sw["axis"] not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}")
    if not sw["values"]:
        raise ConfigError("sweep.values must not be empty")
    if not scn.raw["seeds"]:
        raise ConfigError("seeds must not be empty")

    rb = scn.raw["robustness"]
    if rb["family"] not in ROBUSTNESS_FAMILIES:
        raise ConfigError(f"robustness.family must be one of {ROBUSTNESS_FAMILIES}")
    if any(m < 0 for m in rb["magnitudes"]):
        raise ConfigError("robustness.magnitudes must be nonnegative")
    if rb["trials"] < 1:
        raise ConfigError("robustness.trials must be >= 1")
    if rb["scheme"] not in ("bcd", "rcg"):
        raise ConfigError("robustness.scheme must be 'bcd' or 'rcg'")

    for value in sw["values"]:
        _apply_axis(scn, value, check_only=True)


def _rician_linear(ch: dict) -> tuple[float, float]:
    r = ch["rician_db"]
    if isinstance(r, dict):
        b1 = 10.0 ** (r.get("bs_mis", 10.0) / 10.0)
        b2 = 10.0 ** (r.get("mis_user", 10.0) / 10.0)
    else:
        b1 = b2 = 10.0 ** (r / 10.0)
    return b1, b2


def _apply_axis(scn: Scenario, value, check_only: bool = False):
    """Layout/channel dicts with the sweep value applied to its axis."""
    lay = dict(scn.layout_cfg)
    ch = dict(scn.channel_cfg)
    axis = scn.sweep_axis
    if axis == "power_dbm":
        ch["power_dbm"] = float(value)
    elif axis == "users":
        if int(value) != value or value < 1:
            raise ConfigError(f"sweep users value {value} is not a positive integer")
        ch["users"] = int(value)
    elif axis == "m_cols":
        if int(value) != value or value < lay["n_cols"]:
            raise ConfigError(f"sweep m_cols value {value} must be an integer >= n_cols")
        lay["m_cols"] = int(value)
    elif axis == "rician_db":
        ch["rician_db"] = float(value)
    elif axis == "ms2_size":
        if int(value) != value or value < 0:
            raise ConfigError(f"sweep ms2_size value {value} must be a nonnegative integer")
        lay["n_rows"] = lay["n_cols"] = int(value)
        if value > min(lay["m_rows"], lay["m_cols"]):
            raise ConfigError(f"ms2_size {value} exceeds the MS1 dimensions")
    elif axis == "allocation":
        # value = number of MS2 columns; MS1 columns and MS2 rows stay fixed
        # and rows migrate between the layers at a fixed total element count.
        if int(value) != value or value < 0:
            raise ConfigError(f"allocation value {value} must be a nonnegative integer")
        total = lay["m_rows"] * lay["m_cols"] + lay["n_rows"] * lay["n_cols"]
        n = lay["n_rows"] * int(value)
        m = total - n
        if m <= 0 or m % lay["m_cols"] != 0:
            raise ConfigError(
                f"allocation value {value} leaves {m} MS1 elements, not a multiple of "
                f"m_cols={lay['m_cols']}")
        lay["n_cols"] = int(value)
        lay["m_rows"] = m // lay["m_cols"]
        if lay["n_cols"] and (lay["n_rows"] > lay["m_rows"] or lay["n_cols"] > lay["m_cols"]):
            raise ConfigError(f"allocation value {value} makes MS2 exceed MS1")
    if check_only:
        return None
    return lay, ch


def build_instance(scn: Scenario, sweep_value, seed: int = 0):
    """(layout, stats, patterns) for one sweep point.

    With zero MS2 elements (allocation/ms2_size endpoint) the pattern list
    holds the single bare pattern and every scheme degenerates to its
    single-layer behavior.
    """
    lay_cfg, ch_cfg = _apply_axis(scn, sweep_value)
    no_ms2 = lay_cfg["n_rows"] == 0 or lay_cfg["n_cols"] == 0
    layout = build_layout(
        lay_cfg["m_rows"], lay_cfg["m_cols"],
        max(lay_cfg["n_rows"], 1), max(lay_cfg["n_cols"], 1),
        lay_cfg["spacing_m"], lay_cfg["wavelength_m"],
        bs_antennas=lay_cfg["bs_antennas"], bs_spacing=lay_cfg["bs_spacing_m"],
    )
    k = int(ch_cfg["users"])
    lo, hi = ch_cfg["azimuth_range_rad"]
    if ch_cfg["placement"] == "even":
        geo = even_user_angles(k, ch_cfg["elevation_rad"], lo, hi)
    else:
        geo = random_user_angles(k, np.random.default_rng(seed), ch_cfg["elevation_rad"], lo, hi)
    geo = dataclasses.replace(geo, distances=np.full(k, float(ch_cfg["distance_m"])))
    beta1, beta2 = _rician_linear(ch_cfg)
    iota = ch_cfg["gamma_ref"] * 10.0 ** ((ch_cfg["power_dbm"] - ch_cfg["power_ref_dbm"]) / 10.0)
    stats = build_stats(layout, geo, beta1=beta1, beta2=beta2, iota=iota)
    patterns = [bare_pattern(layout.num_ms1)] if no_ms2 else enumerate_patterns(layout)
    return layout, stats, patterns
