"""Seeder efficiency analysis and diffusion scheme synthesis for P2P live streaming."""

from seedplan.errors import SeedplanError
from seedplan.model import (
    DiffusionScheme,
    EfficiencyReport,
    Population,
    SeederSpec,
    StreamParams,
    edge_cost,
    measure_efficiency,
    validate_scheme,
)

__all__ = [
    "DiffusionScheme",
    "EfficiencyReport",
    "Population",
    "SeederSpec",
    "SeedplanError",
    "StreamParams",
    "edge_cost",
    "measure_efficiency",
    "validate_scheme",
]

__version__ = "0.1.0"
