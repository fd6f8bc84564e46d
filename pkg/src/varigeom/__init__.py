"""Numerical geometry of varifolds in constant-curvature model spaces."""

from .model_space import (
    CutLocusError,
    GeometryError,
    Isometry,
    ModelSpace,
    euclidean,
    hyperbolic,
    sphere,
)
from .immersion import (
    DegenerateImmersionError,
    ParameterDomain,
    ParametricImmersion,
    QuadratureSpec,
    multiplicity_at,
)
from .varifold import DensityEstimate, ResolutionError, SampledVarifold
from .inequalities import InequalityReport
from .catalog import CatalogError, SurfaceCatalogEntry, catalog_build, catalog_list

__all__ = [
    "CatalogError",
    "CutLocusError",
    "DegenerateImmersionError",
    "DensityEstimate",
    "GeometryError",
    "InequalityReport",
    "Isometry",
    "ModelSpace",
    "ParameterDomain",
    "ParametricImmersion",
    "QuadratureSpec",
    "ResolutionError",
    "SampledVarifold",
    "SurfaceCatalogEntry",
    "catalog_build",
    "catalog_list",
    "euclidean",
    "hyperbolic",
    "multiplicity_at",
    "sphere",
]
