"""YAML model specifications and CSV inputs.

A model file looks like::

    model:
      type: max-linear          # max-linear | log-gaussian | moving-max
      grid: [0.0, 1.0, 2.0]     # scalars (1-d) or [x, y] pairs (2-d)
      weights: [1, 1, 1]
      profiles: [[1, 0.2, 0.3], [0.2, 1, 0.3], [0.5, 0.5, 1]]
      normalize: true
    observations:               # optional
      sites: [0, 1]
      values: [1.3, 0.7]
    held_out: 2                 # optional query site used by validation

Schema errors carry the line of the offending node.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from maxcond.errors import ConfigError, ModelError
from maxcond.grid import ObservationSet, SiteVector, make_grid
from maxcond.models import (SpectralModel, gaussian_kernel, indicator_kernel, make_log_gaussian_model,
                            make_max_linear_model, make_moving_max_model, power_variogram)

MODEL_TYPES = ("max-linear", "log-gaussian", "moving-max")


class _Node:
    """Plain value plus the source line of each mapping key (1-based)."""

    def __init__(self, node: yaml.Node, path: str):
        self.node = node
        self.path = path

    @property
    def line(self) -> int:
        return self.node.start_mark.line + 1

    def fail(self, msg: str):
        raise ConfigError(msg, self.line, self.path)

    def get(self, key: str, required: bool = True):
        if not isinstance(self.node, yaml.MappingNode):
            self.fail("expected a mapping")
        for k, v in self.node.value:
            if k.value == key:
                return _Node(v, self.path)
        if required:
            self.fail(f"missing key '{key}'")
        return None

    def keys(self) -> list[str]:
        return [k.value for k, _ in self.node.value]

    @property
    def value(self):
        return yaml.safe_load(yaml.serialize(self.node))

    def number(self, positive: bool = False) -> float:
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"expected a number, got {v!r}")
        if positive and not v > 0:
            self.fail(f"expected a positive number, got {v!r}")
        return float(v)

    def array(self, ndim: int | None = None) -> np.ndarray:
        v = self.value
        try:
            a = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            self.fail(f"expected a numeric array, got {v!r}")
        if ndim is not None and a.ndim != ndim:
            self.fail(f"expected a {ndim}-d array")
        if not np.all(np.isfinite(a)):
            self.fail("array entries must be finite")
        return a


@dataclass
class ModelSpec:
    model: SpectralModel
    obs: ObservationSet | None
    held_out: int | None
    raw: dict
    path: str
    text: str

    @property
    def hash(self) -> str:
        return config_hash(self.text)


def config_hash(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
    return h.hexdigest()[:16]


def _build_model(m: _Node) -> SpectralModel:
    allowed = {"type", "grid", "weights", "profiles", "normalize", "variogram", "kernel", "window", "label"}
    for k, v in m.node.value:
        if k.value not in allowed:
            raise ConfigError(f"unknown model key '{k.value}'", k.start_mark.line + 1, m.path)
    tnode = m.get("type")
    mtype = tnode.value
    if mtype not in MODEL_TYPES:
        tnode.fail(f"model type must be one of {', '.join(MODEL_TYPES)}")
    gnode = m.get("grid")
    coords = gnode.array()
    if coords.ndim not in (1, 2) or coords.shape[0] == 0:
        gnode.fail("grid must be a nonempty list of scalars or [x, y] pairs")
    try:
        grid = make_grid(coords)
    except ValueError as exc:
        gnode.fail(str(exc))
    try:
        if mtype == "max-linear":
            pnode = m.get("profiles")
            profiles = pnode.array(ndim=2)
            if profiles.shape[1] != len(grid):
                pnode.fail(f"profiles need {len(grid)} columns (one per site)")
            wnode = m.get("weights", required=False)
            weights = np.ones(profiles.shape[0]) if wnode is None else wnode.array(ndim=1)
            nnode = m.get("normalize", required=False)
            normalize = bool(nnode.value) if nnode is not None else False
            lnode = m.get("label", required=False)
            return make_max_linear_model(grid, weights, profiles, normalize=normalize,
                                         label=lnode.value if lnode else "max-linear")
        if mtype == "log-gaussian":
            vnode = m.get("variogram")
            vt = vnode.get("type").value
            if vt != "power":
                vnode.fail("only the power variogram is supported")
            scale = vnode.get("scale").number(positive=True)
            expo = vnode.get("exponent").number(positive=True)
            return make_log_gaussian_model(grid, power_variogram(scale, expo))
        knode = m.get("kernel")
        kt = knode.get("type").value
        if kt == "gaussian":
            sd = knode.get("radius_sd", required=False)
            kernel = gaussian_kernel(knode.get("scale").number(positive=True),
                                     sd.number(positive=True) if sd else 4.0)
        elif kt == "indicator":
            kernel = indicator_kernel(knode.get("half_width").number(positive=True))
        else:
            knode.fail("kernel type must be gaussian or indicator")
        wnode = m.get("window", required=False)
        window = None if wnode is None else wnode.array(ndim=1)
        return make_moving_max_model(grid, kernel, window)
    except ModelError as exc:
        m.fail(str(exc))


def load_model_spec(path) -> ModelSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found", 0, str(path))
    text = path.read_text()
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else 0, str(path)) from None
    if root is None or not isinstance(root, yaml.MappingNode):
        raise ConfigError("top level must be a mapping", 1, str(path))
    top = _Node(root, str(path))
    for k in top.keys():
        if k not in ("model", "observations", "held_out"):
            top.get(k).fail(f"unknown top-level key '{k}'")
    model = _build_model(top.get("model"))
    obs = None
    onode = top.get("observations", required=False)
    if onode is not None:
        sites = onode.get("sites").array(ndim=1).astype(int)
        vnode = onode.get("values")
        values = vnode.array(ndim=1)
        try:
            obs = ObservationSet.on(model.grid, sites, values)
        except (ValueError, KeyError) as exc:
            onode.fail(str(exc))
    hnode = top.get("held_out", required=False)
    held = None
    if hnode is not None:
        held = int(hnode.number())
        if not 0 <= held < model.m:
            hnode.fail(f"held_out site {held} outside grid")
    return ModelSpec(model, obs, held, yaml.safe_load(text), str(path), text)


def _data_rows(path: Path):
    """Non-comment CSV rows with their 1-based line numbers."""
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, next(csv.reader([line]))


def read_observations(path, grid: SiteVector) -> ObservationSet:
    """CSV with columns site_id,value (header optional)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("observation file not found", 0, str(path))
    ids, vals = [], []
    for lineno, row in _data_rows(path):
        if row[0].strip() == "site_id":
            continue
        if len(row) != 2:
            raise ConfigError("expected 'site_id,value'", lineno, str(path))
        try:
            ids.append(int(row[0]))
            vals.append(float(row[1]))
        except ValueError:
            raise ConfigError(f"cannot parse {row}", lineno, str(path)) from None
    if not ids:
        raise ConfigError("no observations", 1, str(path))
    try:
        return ObservationSet.on(grid, ids, vals)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc), 1, str(path)) from None


def read_points(path, grid: SiteVector) -> list[tuple[int, float]]:
    """CSV of query points: site coordinates followed by z (x,z or x,y,z)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("points file not found", 0, str(path))
    out = []
    for lineno, row in _data_rows(path):
        if row[0].strip() in ("x", "site_id"):
            continue
        if len(row) != grid.dim + 1:
            raise ConfigError(f"expected {grid.dim} coordinate(s) and z", lineno, str(path))
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ConfigError(f"cannot parse {row}", lineno, str(path)) from None
        try:
            site = grid.find(vals[:-1])
        except KeyError as exc:
            raise ConfigError(str(exc), lineno, str(path)) from None
        if vals[-1] <= 0:
            raise ConfigError("z must be positive", lineno, str(path))
        out.append((site.id, vals[-1]))
    return out
