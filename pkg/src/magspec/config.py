"""Experiment configuration: sectioned key=value files, presets, sizing rules.

Config files are UTF-8 text with optional [section] headers (the headers are
organizational; keys form one flat namespace), ``key = value`` lines, and
``#`` comments.  Unknown keys are rejected by name, syntax errors carry line
numbers.  Three experiments ship as presets:

    torus_constant   flat torus, constant field with integer total flux;
                     exact lowest-cluster multiplicity counts
    radial_dip       Dirichlet plane, field dip 1 - 0.3 exp(-|x|^2);
                     interval clustering and its rate across p
    potential_bump   Dirichlet plane, unit field plus a Gaussian potential
                     bump; annular interface with gap edge states

Lattice sizes follow the resolution rule h sqrt(p b_max) <= 0.25 (standard)
or 0.1 (high-accuracy), so the magnetic length spans at least 4 (resp. 10)
cells at every requested p; plane domains follow the truncation rule
half-width >= r_K + 6 / sqrt(p b_min).
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import FieldSpec
from .lattice import RECTANGLE, TORUS

RESOLUTION_RULES = {"standard": 0.25, "high-accuracy": 0.1}

TWO_PI = 2 * math.pi


@dataclass
class PotentialSpec:
    kind: str = "none"            # none | bump | const | file
    height: float = 1.0
    width: float = 1.0
    matrix: tuple | None = None   # row-major entries for "const"
    rank: int = 1
    path: str | None = None


@dataclass
class ExperimentConfig:
    experiment: str
    field_spec: FieldSpec
    potential: PotentialSpec
    lattice_kind: str
    p_list: list
    window: tuple | None
    window_margin: float = 0.05
    cutoff: float | None = None
    resolution: str = "standard"
    extent: float | None = None   # fixed side length; None = auto per p
    nx: int | None = None         # fixed grid; None = resolution rule
    tol: float | None = None
    max_sites: int = 2_000_000
    seed: int = 0
    out_dir: str = "magspec_out"
    trials: int = 100
    trials_p: list = field(default_factory=list)
    c_min: float | None = None
    c_cap: float = 10.0
    c1: int = 1                   # torus Chern number


_PRESETS = {
    "torus_constant": dict(
        lattice_kind=TORUS,
        field=lambda raw: FieldSpec.constant(raw.get("c1", 1) / TWO_PI),
        potential=PotentialSpec(kind="none"),
        p_list=[4, 8, 16],
        window=None,
        cutoff=None,
        extent=TWO_PI,
        resolution="high-accuracy",
    ),
    "radial_dip": dict(
        lattice_kind=RECTANGLE,
        field=lambda raw: FieldSpec.radial_dip(
            raw.get("b_inf", 1.0), raw.get("depth", 0.3), raw.get("width", 1.0)),
        potential=PotentialSpec(kind="none"),
        p_list=[8, 16, 32, 64],
        window=(1.6, 2.4),
        cutoff=2.0,
        extent=None,
        resolution="high-accuracy",
    ),
    "potential_bump": dict(
        lattice_kind=RECTANGLE,
        field=lambda raw: FieldSpec.constant(raw.get("b", 1.0)),
        potential=PotentialSpec(kind="bump", height=1.0, width=1.0),
        p_list=[16, 32, 64],
        window=(1.3, 1.7),
        cutoff=4.0,
        extent=None,
        resolution="standard",
        trials_p=[8, 16, 32],
    ),
}

_KNOWN_KEYS = {
    "experiment", "p", "seed", "out", "resolution", "nx", "extent", "cutoff",
    "window", "window_margin", "tol", "max_sites", "trials", "trials_p",
    "c_min", "c_cap", "field", "b", "b_inf", "depth", "height", "width",
    "b_minus", "b_plus", "c1", "potential", "v_height", "v_width", "v_matrix",
    "v_rank", "v_file",
}

_INT_LIST_KEYS = {"p", "trials_p"}
_FLOAT_KEYS = {"extent", "cutoff", "window_margin", "tol", "c_min", "c_cap",
               "b", "b_inf", "depth", "height", "width", "b_minus", "b_plus",
               "v_height", "v_width"}
_INT_KEYS = {"seed", "nx", "max_sites", "trials", "c1", "v_rank"}


def _parse_scalar(key, value, lineno):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {value!r}") \
            from exc
    return value


def _parse_list(value, cast, key, lineno):
    body = value.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    items = [s for s in re.split(r"[,\s]+", body.strip()) if s]
    try:
        return [cast(s) for s in items]
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {value!r}") \
            from exc


def parse_config(text):
    """Parse and validate a config file body into an ExperimentConfig."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            continue  # sections are organizational only
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got "
                              f"{line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_LIST_KEYS:
            raw[key] = _parse_list(value, int, key, lineno)
        elif key == "window":
            vals = _parse_list(value, float, key, lineno)
            if len(vals) != 2:
                raise ConfigError(f"line {lineno}: window needs two values")
            raw[key] = tuple(vals)
        elif key == "v_matrix":
            raw[key] = tuple(_parse_list(value, float, key, lineno))
        else:
            raw[key] = _parse_scalar(key, value, lineno)
    return build_config(raw)


def build_config(raw):
    """Fill preset defaults, then validate the combined settings."""
    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    name = raw["experiment"]
    if name not in _PRESETS:
        raise ConfigError(f"unknown experiment {name!r}; choose from "
                          f"{sorted(_PRESETS)}")
    preset = _PRESETS[name]

    field_spec = _field_from(raw) if "field" in raw else preset["field"](raw)
    potential = _potential_from(raw) if "potential" in raw \
        else preset["potential"]

    cfg = ExperimentConfig(
        experiment=name,
        field_spec=field_spec,
        potential=potential,
        lattice_kind=preset["lattice_kind"],
        p_list=list(raw.get("p", preset["p_list"])),
        window=raw.get("window", preset["window"]),
        window_margin=raw.get("window_margin", 0.05),
        cutoff=raw.get("cutoff", preset["cutoff"]),
        resolution=raw.get("resolution", preset["resolution"]),
        extent=raw.get("extent", preset["extent"]),
        nx=raw.get("nx"),
        tol=raw.get("tol"),
        max_sites=raw.get("max_sites", 2_000_000),
        seed=raw.get("seed", 0),
        out_dir=raw.get("out", "magspec_out"),
        trials=raw.get("trials", 100),
        trials_p=list(raw.get("trials_p", preset.get("trials_p", []))),
        c_min=raw.get("c_min"),
        c_cap=raw.get("c_cap", 10.0),
        c1=raw.get("c1", 1),
    )
    validate_config(cfg)
    return cfg


def _field_from(raw):
    kind = raw["field"]
    if kind == "constant":
        return FieldSpec.constant(raw.get("b", 1.0))
    if kind == "radial_dip":
        return FieldSpec.radial_dip(raw.get("b_inf", 1.0),
                                    raw.get("depth", 0.3),
                                    raw.get("width", 1.0))
    if kind == "radial_bump":
        return FieldSpec.radial_bump(raw.get("b_inf", 1.0),
                                     raw.get("height", 0.3),
                                     raw.get("width", 1.0))
    if kind == "transition":
        return FieldSpec.transition(raw.get("b_minus", 1.0),
                                    raw.get("b_plus", 2.0),
                                    raw.get("width", 1.0))
    raise ConfigError(f"unknown field preset {kind!r}")


def _potential_from(raw):
    kind = raw["potential"]
    if kind == "none":
        return PotentialSpec(kind="none")
    if kind == "bump":
        return PotentialSpec(kind="bump", height=raw.get("v_height", 1.0),
                             width=raw.get("v_width", 1.0),
                             rank=raw.get("v_rank", 1))
    if kind == "const":
        if "v_matrix" not in raw:
            raise ConfigError("potential = const requires v_matrix")
        rank = raw.get("v_rank", 1)
        if len(raw["v_matrix"]) != rank * rank:
            raise ConfigError(f"v_matrix needs rank^2 = {rank * rank} entries")
        return PotentialSpec(kind="const", matrix=raw["v_matrix"], rank=rank)
    if kind == "file":
        if "v_file" not in raw:
            raise ConfigError("potential = file requires v_file")
        return PotentialSpec(kind="file", path=raw["v_file"])
    raise ConfigError(f"unknown potential kind {kind!r}")


def validate_config(cfg):
    if not cfg.p_list:
        raise ConfigError("p list must be non-empty")
    if any(p < 1 for p in cfg.p_list):
        raise ConfigError("all p must be >= 1")
    if list(cfg.p_list) != sorted(set(cfg.p_list)):
        raise ConfigError("p list must be strictly ascending")
    if cfg.window is not None and not cfg.window[0] < cfg.window[1]:
        raise ConfigError(f"window {cfg.window} is empty")
    if cfg.resolution not in RESOLUTION_RULES:
        raise ConfigError(f"resolution must be one of "
                          f"{sorted(RESOLUTION_RULES)}")
    # the resolution rule must be satisfiable at the largest p
    plan = plan_geometry(cfg, max(cfg.p_list))
    if plan["n_sites"] > cfg.max_sites:
        raise ConfigError(
            f"resolution rule needs nx = {plan['nx']} "
            f"({plan['n_sites']} sites) at p = {max(cfg.p_list)}, above "
            f"max_sites = {cfg.max_sites}; raise max_sites or reduce p")


def interface_radius(cfg, r_max=None, samples=4001):
    """Outermost radius where some local level meets the window (radial data).

    Solved on a fine 1D radial grid; 0 when the window set is empty.
    """
    if cfg.window is None:
        return 0.0
    spec = cfg.field_spec
    if not spec.is_radial:
        raise ConfigError(f"auto-sizing needs a radial field; give an "
                          f"explicit extent for preset {spec.preset}")
    width = dict(spec.params).get("width", 1.0)
    if r_max is None:
        r_max = 8.0 * max(width, cfg.potential.width, 1.0)
    r = np.linspace(0.0, r_max, samples)
    b = spec.intensity(r, np.zeros_like(r))
    v = np.zeros_like(r)
    if cfg.potential.kind == "bump":
        v = cfg.potential.height * np.exp(-(r / cfg.potential.width) ** 2)
    a_win, b_win = cfg.window
    k_lo = np.maximum(np.ceil((a_win - v - b) / (2.0 * b)), 0.0)
    hit = (2.0 * k_lo + 1.0) * b + v <= b_win
    return float(r[hit].max()) if hit.any() else 0.0


def plan_geometry(cfg, p):
    """Lattice parameters for one sweep entry under the sizing rules."""
    rule = RESOLUTION_RULES[cfg.resolution]
    b_max = cfg.field_spec.max_intensity()
    b_min = cfg.field_spec.min_intensity()
    if cfg.lattice_kind == TORUS:
        extent = cfg.extent if cfg.extent is not None else TWO_PI
    else:
        if cfg.extent is not None:
            extent = cfg.extent
        else:
            r_k = interface_radius(cfg)
            extent = 2.0 * (r_k + 6.0 / math.sqrt(p * b_min))
    nx = cfg.nx if cfg.nx is not None \
        else max(int(math.ceil(extent * math.sqrt(p * b_max) / rule)), 2)
    if cfg.lattice_kind == RECTANGLE:
        n_sites = (nx - 1) ** 2
    else:
        n_sites = nx ** 2
    return dict(kind=cfg.lattice_kind, extent=extent, nx=nx,
                h=extent / nx, n_sites=n_sites, p=p)
