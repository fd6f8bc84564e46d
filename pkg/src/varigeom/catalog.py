"""Declarative catalog of analytic test surfaces.

The catalog is a YAML file shipped with the package. Each entry names a
surface kind, its parameters, the ambient curvature, a base point for
point-based verifiers, the default theorems and closed-form reference values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import surfaces as S
from .immersion import QuadratureSpec
from .inequalities import THEOREMS
from .model_space import ModelSpace
from .varifold import SampledVarifold

KINDS = (
    "round_sphere", "geodesic_sphere", "clifford_torus", "torus_of_revolution",
    "flat_disk", "great_sphere", "tangent_sphere_pair", "geodesic_circle",
)


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class KnownValue:
    value: object
    provenance: str


@dataclass
class SurfaceCatalogEntry:
    name: str
    kind: str
    parameters: dict
    b: float = 0.0
    n: int = 3
    base_point: dict = field(default_factory=lambda: {"param": [0.0, 0.0]})
    theorems: tuple = ()
    options: dict = field(default_factory=dict)
    known: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CatalogError(f"{self.name}: unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        self.b = float(self.b)
        self.n = int(self.n)
        self.parameters = {k: float(v) for k, v in (self.parameters or {}).items()}
        self.theorems = tuple(self.theorems)
        bad = [t for t in self.theorems if t not in THEOREMS]
        if bad:
            raise CatalogError(f"{self.name}: unknown theorems {bad}")
        for key, kv in list(self.known.items()):
            if not isinstance(kv, KnownValue):
                if not isinstance(kv, dict) or "value" not in kv or not str(kv.get("provenance", "")).strip():
                    raise CatalogError(f"{self.name}: known value {key!r} needs a value and a provenance note")
                self.known[key] = KnownValue(kv["value"], str(kv["provenance"]))
        _validate(self)

    @property
    def space(self) -> ModelSpace:
        return ModelSpace(self.n, self.b)

    def immersions(self) -> list:
        """The parametric pieces of the surface."""
        P, b = self.parameters, self.b
        kind = self.kind
        if kind == "round_sphere":
            return [S.round_sphere(P["R"], name=self.name)]
        if kind == "geodesic_sphere":
            return [S.geodesic_sphere(self.space, P["rho"], name=self.name)]
        if kind == "clifford_torus":
            return [S.clifford_torus(b, name=self.name)]
        if kind == "great_sphere":
            return [S.great_sphere(b, name=self.name)]
        if kind == "torus_of_revolution":
            return [S.torus_of_revolution(P["R"], P["r"], name=self.name)]
        if kind == "flat_disk":
            return [S.geodesic_disk(self.space, P["a"], name=self.name)]
        if kind == "tangent_sphere_pair":
            return S.tangent_sphere_pair(P["R"], name=self.name)
        return [S.geodesic_circle(self.space, P["rho"], name=self.name)]

    def build(self, resolution: int) -> SampledVarifold:
        pieces = [imm.sample_varifold(QuadratureSpec(int(resolution))) for imm in self.immersions()]
        V = pieces[0]
        for other in pieces[1:]:
            V = V.union(other)
        V.metadata["catalog_name"] = self.name
        return V

    def point(self) -> np.ndarray:
        """Base point in ambient coordinates."""
        bp = self.base_point
        if bp.get("origin"):
            return self.space.origin.copy()
        if bp.get("contact"):
            meta = self.immersions()[0].metadata
            if "contact" not in meta:
                raise CatalogError(f"{self.name}: surface declares no contact point")
            return np.asarray(meta["contact"], float)
        if "param" in bp:
            return np.asarray(self.immersions()[0].point(np.asarray(bp["param"], float)), float)
        raise CatalogError(f"{self.name}: base_point needs one of param, origin, contact")

    def summary(self) -> dict:
        return {
            "name": self.name, "kind": self.kind, "parameters": dict(self.parameters),
            "b": self.b, "n": self.n, "theorems": list(self.theorems),
            "known": {k: {"value": v.value, "provenance": v.provenance} for k, v in self.known.items()},
        }


def _need(entry, *names):
    missing = [k for k in names if k not in entry.parameters]
    if missing:
        raise CatalogError(f"{entry.name}: kind {entry.kind} needs parameters {missing}")
    for k in names:
        if not math.isfinite(entry.parameters[k]) or entry.parameters[k] <= 0:
            raise CatalogError(f"{entry.name}: parameter {k} must be positive")


def _validate(e: SurfaceCatalogEntry):
    b, P = e.b, e.parameters
    if not math.isfinite(b):
        raise CatalogError(f"{e.name}: b must be finite")
    dims = {"geodesic_circle": 2}
    if e.n != dims.get(e.kind, 3):
        raise CatalogError(f"{e.name}: kind {e.kind} lives in dimension {dims.get(e.kind, 3)}, got n={e.n}")
    flat_only = ("round_sphere", "torus_of_revolution", "tangent_sphere_pair")
    if e.kind in flat_only and b != 0:
        raise CatalogError(f"{e.name}: kind {e.kind} requires b = 0")
    if e.kind in ("clifford_torus", "great_sphere") and b <= 0:
        raise CatalogError(f"{e.name}: kind {e.kind} requires b > 0")
    if e.kind in ("round_sphere", "tangent_sphere_pair"):
        _need(e, "R")
    elif e.kind == "torus_of_revolution":
        _need(e, "R", "r")
        if not P["r"] < P["R"]:
            raise CatalogError(f"{e.name}: torus needs r < R")
    elif e.kind in ("geodesic_sphere", "geodesic_circle"):
        _need(e, "rho")
        if b > 0 and P["rho"] >= math.pi / math.sqrt(b):
            raise CatalogError(f"{e.name}: rho must stay below pi/sqrt(b)")
    elif e.kind == "flat_disk":
        _need(e, "a")
        if b > 0 and P["a"] >= math.pi / (2 * math.sqrt(b)):
            raise CatalogError(f"{e.name}: disk radius must stay below pi/(2 sqrt(b))")


def _read(path=None) -> dict:
    if path is None:
        text = resources.files("varigeom").joinpath("data/catalog.yaml").read_text()
    else:
        text = Path(path).read_text()
    data = yaml.safe_load(text)
    if not isinstance(data, dict) or not isinstance(data.get("surfaces"), list):
        raise CatalogError("catalog must be a mapping with a 'surfaces' list")
    return data


def load_catalog(path=None) -> dict:
    """Entries of the catalog file keyed by name, in file order."""
    out = {}
    for raw in _read(path)["surfaces"]:
        if not isinstance(raw, dict) or "name" not in raw or "kind" not in raw:
            raise CatalogError(f"catalog entry needs a name and a kind: {raw!r}")
        if raw["name"] in out:
            raise CatalogError(f"duplicate catalog name {raw['name']!r}")
        out[raw["name"]] = SurfaceCatalogEntry(**raw)
    return out


_DEFAULT: Optional[dict] = None


def _default():
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT


def catalog_list(path=None) -> list:
    """All catalog entries in file order."""
    return list((_default() if path is None else load_catalog(path)).values())


def catalog_entry(name: str, path=None) -> SurfaceCatalogEntry:
    entries = _default() if path is None else load_catalog(path)
    if name not in entries:
        raise CatalogError(f"unknown surface {name!r}; available: {', '.join(entries)}")
    return entries[name]


def catalog_build(name: str, resolution: int = 64, path=None) -> SampledVarifold:
    """Sampled varifold of a catalog surface at the given nodes per axis."""
    if int(resolution) < 2:
        raise CatalogError("resolution must be at least 2")
    return catalog_entry(name, path).build(resolution)
