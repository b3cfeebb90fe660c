"""Experiment configuration: INI text in, validated :class:`AlpConfig` out.

Every section and key is optional except ``[problem] kind``, ``[mesh] kind``
and ``[initial] kind``; unknown sections or keys are rejected so typos do not
pass silently.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MeshError
from .mesh import (DIRICHLET, NEUMANN, FemSpace, Mesh, build_interval_mesh,
                   build_rect_union_mesh, build_structured_rect_mesh, read_mesh_files)
from .problems import (FKPP, KDV, T_DOMAIN_RECTS, ProblemSpec, SolitonData, THREE_SOLITON_DATA,
                       exact_multi_soliton, exact_one_soliton, fkpp1d_initial, fkpp_reference_solve,
                       gaussian_2d)
from .propagation import EIGENVALUE_VARIANTS, CHI_SCALED

MODE_STEPS = ("taylor", "exact")
INITIAL_RECONSTRUCTIONS = ("auto", "scsa", "alpha")

_SCHEMA = {
    "problem": {"kind", "alpha", "boundary"},
    "mesh": {"kind", "bounds", "n_elements", "x_range", "y_range", "nx", "ny", "cells_per_unit",
             "rects", "node_file", "element_file"},
    "initial": {"kind", "beta", "x0", "t0", "c", "k", "width", "centers", "center",
                "pre_steps", "pre_dt"},
    "alp": {"chi", "epsilon0", "chi_initial", "chi_max", "n_modes", "dt", "t_final",
            "eigenvalue_variant", "mode_step", "reorthonormalize", "reorthonormalize_threshold",
            "promotion", "initial_reconstruction"},
    "diagnostics": {"track_errors", "reference_dt", "frobenius_truncation"},
    "output": {"snapshot_stride", "trajectory", "summary", "snapshots"},
}

# Short names accepted by ``sweep --param``.
PARAM_ALIASES = {
    "n_modes_M": ("alp", "n_modes"),
    "n_modes": ("alp", "n_modes"),
    "dt": ("alp", "dt"),
    "chi": ("alp", "chi"),
    "t_final": ("alp", "t_final"),
    "epsilon0": ("alp", "epsilon0"),
}


def _float(raw, name):
    try:
        v = float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected a number, got {raw!r}") from exc
    if math.isnan(v):
        raise ConfigError(f"{name}: NaN is not allowed")
    return v


def _int(raw, name):
    try:
        v = float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected an integer, got {raw!r}") from exc
    if not v.is_integer():
        raise ConfigError(f"{name}: expected an integer, got {raw!r}")
    return int(v)


def _bool(raw, name):
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {raw!r}")


def _floats(raw, name, count=None):
    parts = [p for p in str(raw).replace(",", " ").split() if p]
    vals = [_float(p, name) for p in parts]
    if count is not None and len(vals) != count:
        raise ConfigError(f"{name}: expected {count} numbers, got {len(vals)}")
    return tuple(vals)


@dataclass(frozen=True)
class MeshSpec:
    kind: str
    bc: str
    bounds: tuple = (0.0, 1.0)
    n_elements: int = 100
    x_range: tuple = (0.0, 1.0)
    y_range: tuple = (0.0, 1.0)
    nx: int = 10
    ny: int = 10
    cells_per_unit: int = 8
    rects: tuple = T_DOMAIN_RECTS
    node_file: str = ""
    element_file: str = ""

    def build(self) -> Mesh:
        try:
            if self.kind == "interval":
                return build_interval_mesh(*self.bounds, self.n_elements, self.bc)
            if self.kind == "rect":
                return build_structured_rect_mesh(self.x_range, self.y_range, self.nx, self.ny, self.bc)
            if self.kind in ("t_domain", "rect_union"):
                return build_rect_union_mesh(self.rects, self.cells_per_unit, self.bc)
            if self.kind == "file":
                return read_mesh_files(self.node_file, self.element_file, self.bc)
        except OSError as exc:
            raise ConfigError(f"cannot read mesh files: {exc}") from exc
        except MeshError as exc:
            raise ConfigError(f"invalid mesh: {exc}") from exc
        raise ConfigError(f"unknown mesh kind {self.kind!r}")


@dataclass(frozen=True)
class InitialSpec:
    """Initial datum and, where one exists, the matching exact or reference solution."""

    kind: str
    beta: float = 4.0
    x0: float = 0.0
    t0: float = 0.0
    solitons: SolitonData = THREE_SOLITON_DATA
    width: float = 100.0
    centers: tuple = (0.25, 0.75)
    center: tuple = (2.5, 0.5)
    pre_steps: int = 0
    pre_dt: float = 2.5e-4

    def evaluate(self, fem: FemSpace, problem: ProblemSpec) -> np.ndarray:
        nodes = fem.mesh.nodes
        if self.kind == "one_soliton":
            u = exact_one_soliton(nodes[:, 0], self.t0, self.beta, self.x0)
        elif self.kind == "multi_soliton":
            u = exact_multi_soliton(nodes[:, 0], self.t0, self.solitons)
        elif self.kind == "bumps":
            u = fkpp1d_initial(nodes[:, 0], self.width, self.centers)
        elif self.kind == "gaussian":
            u = gaussian_2d(nodes, self.center, self.width)
        else:
            raise ConfigError(f"unknown initial kind {self.kind!r}")
        u = np.array(u, dtype=float)
        if fem.mesh.boundary_kind == DIRICHLET:
            u[fem.mesh.boundary_nodes] = 0.0
        if self.pre_steps:
            if problem.kind != FKPP:
                raise ConfigError("pre_steps only applies to FKPP problems")
            u = fkpp_reference_solve(fem, u, problem.alpha, self.pre_dt, self.pre_steps)[-1]
        return u

    def exact(self, x, t):
        """Exact KdV solution at ALP time ``t``, or ``None`` if none is known."""
        if self.kind == "one_soliton":
            return exact_one_soliton(x, self.t0 + t, self.beta, self.x0)
        if self.kind == "multi_soliton":
            return exact_multi_soliton(x, self.t0 + t, self.solitons)
        return None


@dataclass(frozen=True)
class AlpConfig:
    problem: ProblemSpec
    mesh: MeshSpec
    initial: InitialSpec
    chi: float | None = 1.0
    epsilon0: float = 1e-3
    chi_initial: float = 1.0
    chi_max: float = 1e5
    n_modes_M: int = 20
    dt: float = 1e-3
    t_final: float = 1.0
    eigenvalue_chi_variant: str = CHI_SCALED
    mode_step: str = "taylor"
    reorthonormalize: bool = False
    reorthonormalize_threshold: float = 1e-6
    promotion: bool = True
    initial_reconstruction: str = "auto"
    track_errors: bool = True
    reference_dt: float | None = None
    frobenius_truncation: int | None = None
    snapshot_stride: int | None = None
    trajectory_file: str = "trajectory.csv"
    summary_file: str = "summary.json"
    write_snapshots: bool = True
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ConfigError("t_final must be positive")
        if self.n_modes_M < 1:
            raise ConfigError("n_modes must be at least 1")
        if not self.epsilon0 > 0:
            raise ConfigError("epsilon0 must be positive")
        if self.chi is not None and not (self.chi > 0 and math.isfinite(self.chi)):
            raise ConfigError("chi must be positive or 'auto'")
        if not 0 < self.chi_initial <= self.chi_max:
            raise ConfigError("need 0 < chi_initial <= chi_max")
        if self.eigenvalue_chi_variant not in EIGENVALUE_VARIANTS:
            raise ConfigError(f"eigenvalue_variant must be one of {EIGENVALUE_VARIANTS}")
        if self.mode_step not in MODE_STEPS:
            raise ConfigError(f"mode_step must be one of {MODE_STEPS}")
        if self.initial_reconstruction not in INITIAL_RECONSTRUCTIONS:
            raise ConfigError(f"initial_reconstruction must be one of {INITIAL_RECONSTRUCTIONS}")
        if self.problem.kind == KDV and self.mesh.kind != "interval":
            raise ConfigError("KdV runs need a 1D interval mesh")
        if self.reference_dt is not None and not self.reference_dt > 0:
            raise ConfigError("reference_dt must be positive")
        if self.frobenius_truncation is not None and not 1 <= self.frobenius_truncation <= self.n_modes_M:
            raise ConfigError("frobenius_truncation must lie in [1, n_modes]")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be positive")

    @property
    def n_steps(self) -> int:
        """Number of uniform steps of size dt needed to reach t_final."""
        return max(1, math.ceil(self.t_final / self.dt - 1e-9))

    def with_override(self, param: str, value) -> "AlpConfig":
        """Copy with one raw ``section.key`` (or alias) replaced, re-validated."""
        section, key = _resolve_param(param)
        raw = {s: dict(v) for s, v in self.source.items()}
        raw.setdefault(section, {})[key] = str(value)
        return config_from_dict(raw, base_dir=raw.get("__base_dir__", {}).get("path"))


def _resolve_param(param):
    if param in PARAM_ALIASES:
        return PARAM_ALIASES[param]
    if "." in param:
        section, key = param.split(".", 1)
        if section in _SCHEMA and key in _SCHEMA[section]:
            return section, key
    raise ConfigError(f"unknown parameter {param!r}")


def config_from_dict(raw: dict, base_dir=None) -> AlpConfig:
    """Build a config from ``{section: {key: text}}``."""
    raw = {s: {k: str(v) for k, v in vals.items()} for s, vals in raw.items() if s != "__base_dir__"}
    for section, vals in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(vals) - _SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    base = Path(base_dir) if base_dir else Path.cwd()

    p = raw.get("problem", {})
    if "kind" not in p:
        raise ConfigError("[problem] kind is required")
    kind = p["kind"].strip().lower()
    default_bc = DIRICHLET if kind == KDV else NEUMANN
    bc = p.get("boundary", default_bc).strip().lower()
    if bc not in (DIRICHLET, NEUMANN):
        raise ConfigError(f"unknown boundary {bc!r}")
    problem = ProblemSpec(kind, _float(p.get("alpha", 0.0), "alpha"), bc)

    m = raw.get("mesh", {})
    if "kind" not in m:
        raise ConfigError("[mesh] kind is required")
    mkw = {"kind": m["kind"].strip().lower(), "bc": bc}
    if "bounds" in m:
        mkw["bounds"] = _floats(m["bounds"], "bounds", 2)
    for key in ("n_elements", "nx", "ny", "cells_per_unit"):
        if key in m:
            mkw[key] = _int(m[key], key)
    for key in ("x_range", "y_range"):
        if key in m:
            mkw[key] = _floats(m[key], key, 2)
    if "rects" in m:
        mkw["rects"] = tuple(_floats(r, "rects", 4) for r in m["rects"].split(";") if r.strip())
    for key in ("node_file", "element_file"):
        if key in m:
            mkw[key] = str((base / m[key].strip()).resolve())
    mesh = MeshSpec(**mkw)

    i = raw.get("initial", {})
    if "kind" not in i:
        raise ConfigError("[initial] kind is required")
    ikw = {"kind": i["kind"].strip().lower()}
    for key in ("beta", "x0", "t0", "width", "pre_dt"):
        if key in i:
            ikw[key] = _float(i[key], key)
    if "pre_steps" in i:
        ikw["pre_steps"] = _int(i["pre_steps"], "pre_steps")
    if "centers" in i:
        ikw["centers"] = _floats(i["centers"], "centers")
    if "center" in i:
        ikw["center"] = _floats(i["center"], "center", 2)
    if "c" in i or "k" in i:
        try:
            ikw["solitons"] = SolitonData(_floats(i.get("c", ""), "c"), _floats(i.get("k", ""), "k"))
        except ValueError as exc:
            raise ConfigError(f"soliton data: {exc}") from exc
    initial = InitialSpec(**ikw)

    a = raw.get("alp", {})
    chi_raw = a.get("chi", "1").strip().lower()
    kw = {
        "chi": None if chi_raw == "auto" else _float(chi_raw, "chi"),
        "epsilon0": _float(a.get("epsilon0", "1e-3"), "epsilon0"),
        "chi_initial": _float(a.get("chi_initial", "1"), "chi_initial"),
        "chi_max": _float(a.get("chi_max", "1e5"), "chi_max"),
        "n_modes_M": _int(a.get("n_modes", "20"), "n_modes"),
        "dt": _float(a.get("dt", "1e-3"), "dt"),
        "t_final": _float(a.get("t_final", "1"), "t_final"),
        "eigenvalue_chi_variant": a.get("eigenvalue_variant", CHI_SCALED).strip().lower(),
        "mode_step": a.get("mode_step", "taylor").strip().lower(),
        "reorthonormalize": _bool(a.get("reorthonormalize", "false"), "reorthonormalize"),
        "reorthonormalize_threshold": _float(a.get("reorthonormalize_threshold", "1e-6"),
                                             "reorthonormalize_threshold"),
        "promotion": _bool(a.get("promotion", "true"), "promotion"),
        "initial_reconstruction": a.get("initial_reconstruction", "auto").strip().lower(),
    }
    d = raw.get("diagnostics", {})
    kw["track_errors"] = _bool(d.get("track_errors", "true"), "track_errors")
    if "reference_dt" in d:
        kw["reference_dt"] = _float(d["reference_dt"], "reference_dt")
    if "frobenius_truncation" in d:
        kw["frobenius_truncation"] = _int(d["frobenius_truncation"], "frobenius_truncation")
    o = raw.get("output", {})
    if "snapshot_stride" in o:
        kw["snapshot_stride"] = _int(o["snapshot_stride"], "snapshot_stride")
    kw["trajectory_file"] = o.get("trajectory", "trajectory.csv").strip()
    kw["summary_file"] = o.get("summary", "summary.json").strip()
    kw["write_snapshots"] = _bool(o.get("snapshots", "true"), "snapshots")

    source = {s: dict(v) for s, v in raw.items()}
    source["__base_dir__"] = {"path": str(base)}
    return AlpConfig(problem=problem, mesh=mesh, initial=initial, source=source, **kw)


def parse_config(text: str, base_dir=None) -> AlpConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return config_from_dict(raw, base_dir)


def load_config(path) -> AlpConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package (``one_soliton``, ``fkpp1d`` ...)."""
    here = Path(__file__).parent / "configs"
    path = here / (name if name.endswith(".ini") else name + ".ini")
    if not path.exists():
        available = sorted(p.stem for p in here.glob("*.ini"))
        raise ConfigError(f"no bundled config {name!r}; available: {available}")
    return path


def echo(config: AlpConfig) -> dict:
    """Config as plain sections for the summary file."""
    return {s: dict(v) for s, v in config.source.items() if s != "__base_dir__"}
