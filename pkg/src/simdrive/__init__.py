"""Desk-scale toolkit for hard-case driving data.

Generates synthetic driving episodes with a privileged rule-based teacher,
aligns them to a real-world coordinate convention, curates balanced
datasets, renders scenario-aware training prompts, embeds camera geometry,
and evaluates planners with open-loop metrics sliced by difficulty.
"""

__version__ = "0.1.0"

from . import curation, evaluation, geometry, i2e, planners, prompts, reporting, simworld
from .errors import (
    QuotaShortfallError,
    RecordParseError,
    RegistryError,
    SchemaError,
    ToolkitError,
)

__all__ = [
    "QuotaShortfallError",
    "RecordParseError",
    "RegistryError",
    "SchemaError",
    "ToolkitError",
    "__version__",
    "curation",
    "evaluation",
    "geometry",
    "i2e",
    "planners",
    "prompts",
    "reporting",
    "simworld",
]
