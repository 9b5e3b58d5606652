"""Prompt templates for grid-cell and text-only georeferencing."""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum


class PromptTemplate(str, Enum):
    ZERO_SHOT = "zero_shot"
    AUTO_COT = "auto_cot"
    LOGICAL_COT = "logical_cot"
    LOGICAL_COT_GRID = "logical_cot_grid"
    PERSONA_LOGICAL_COT_GRID = "persona_logical_cot_grid"
    BASELINE_TEXT = "baseline_text"
    BASELINE_TEXT_REGION = "baseline_text_region"

    @property
    def gridded(self) -> bool:
        return self in GRIDDED

    @property
    def needs_grid_size(self) -> bool:
        return self in (PromptTemplate.LOGICAL_COT_GRID, PromptTemplate.PERSONA_LOGICAL_COT_GRID)


GRIDDED = frozenset(
    {
        PromptTemplate.ZERO_SHOT,
        PromptTemplate.AUTO_COT,
        PromptTemplate.LOGICAL_COT,
        PromptTemplate.LOGICAL_COT_GRID,
        PromptTemplate.PERSONA_LOGICAL_COT_GRID,
    }
)
BASELINES = frozenset({PromptTemplate.BASELINE_TEXT, PromptTemplate.BASELINE_TEXT_REGION})
DEFAULT_TEMPLATE = PromptTemplate.LOGICAL_COT_GRID

_QUESTION = "what grid cell/cells represent the following location description?"
_ON_MAP = f"Based on the gridded map given, {_QUESTION}"
_GRID_SIZE = "Each grid cell is {size} × {size}."
_GRID_STEPS = (
    "Think step by step. Identify the locations mentioned. If a distance is mentioned in "
    "the description, use the grid sizes to calculate the relative distances."
)
_GEO_PERSONA = "You are a language and geography expert."
_GEO_TASK = "Georeference the following location description. Answer with coordinates in decimal degrees."

# paragraphs are separated by a blank line; {size}, {region}, {country} are placeholders
TEMPLATES: dict[PromptTemplate, str] = {
    PromptTemplate.ZERO_SHOT: "What grid cell/cells represent the following location description?",
    PromptTemplate.AUTO_COT: f"{_ON_MAP} Think step by step.",
    PromptTemplate.LOGICAL_COT: (
        f"{_ON_MAP}\n\nThink step by step. Identify the locations mentioned and use the "
        "relative spatial relations mentioned in the description."
    ),
    PromptTemplate.LOGICAL_COT_GRID: f"{_ON_MAP}\n\n{_GRID_SIZE}\n\n{_GRID_STEPS}",
    PromptTemplate.PERSONA_LOGICAL_COT_GRID: (
        f"You are a language and cartography expert.\n{_ON_MAP}\n\n{_GRID_SIZE}\n\n{_GRID_STEPS}"
    ),
    PromptTemplate.BASELINE_TEXT: f"{_GEO_PERSONA}\n\n{_GEO_TASK}",
    PromptTemplate.BASELINE_TEXT_REGION: (
        f"{_GEO_PERSONA}\n\n{_GEO_TASK} The country and the district of the location are "
        "provided.\n\nThis location is in {region}, {country}."
    ),
}


class PromptError(ValueError):
    pass


def _round_sig(x: float, digits: int = 2) -> tuple[float, int]:
    """``x`` rounded to ``digits`` significant figures, plus the decimals to show."""
    # half-up on the shortest decimal repr, so 1.25 reads as 1.3 not 1.2
    d = Decimal(repr(x))
    exp = d.adjusted()
    r = d.quantize(Decimal(1).scaleb(exp - digits + 1), rounding=ROUND_HALF_UP)
    # rounding can carry into the next power of ten (0.996 -> 1.0)
    if r.adjusted() != exp:
        r = d.quantize(Decimal(1).scaleb(exp - digits + 2), rounding=ROUND_HALF_UP)
    return float(r), max(-r.as_tuple().exponent, 0)


def format_grid_size(cell_km: float) -> str:
    """Cell side at 2 significant figures: ``1.88 -> "1.9 km"``, ``0.45 -> "450 m"``."""
    if not (cell_km > 0 and math.isfinite(cell_km)):
        raise PromptError(f"grid size must be a positive number, got {cell_km!r}")
    km, dec = _round_sig(cell_km)
    if km >= 1.0:
        return f"{km:.{dec}f} km"
    m, dec = _round_sig(cell_km * 1000.0)
    return f"{m:.{dec}f} m"


def build_prompt(
    template: PromptTemplate | str,
    description: str,
    cell_km: float | None = None,
    region: str | None = None,
    country: str | None = None,
) -> str:
    """Fill ``template`` and append the locality description."""
    template = PromptTemplate(template)
    if not description or not description.strip():
        raise PromptError("description must be non-empty")
    values = {}
    if template.needs_grid_size:
        if cell_km is None:
            raise PromptError(f"template {template.value} needs the grid cell size")
        values["size"] = format_grid_size(cell_km)
    if template is PromptTemplate.BASELINE_TEXT_REGION:
        if not region or not country:
            raise PromptError(f"template {template.value} needs region and country")
        values.update(region=region, country=country)
    head = TEMPLATES[template].format(**values)
    return f"{head}\n\nLocation Description: {description}"
