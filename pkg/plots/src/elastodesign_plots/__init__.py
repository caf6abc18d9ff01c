"""Figure rendering for design-run artifacts (trace and boundary outline)."""

from .render import (
    ArtifactError,
    FigureSpec,
    Outline,
    Trace,
    design_markers,
    parse_outline,
    parse_trace,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "FigureSpec",
    "Outline",
    "Trace",
    "design_markers",
    "parse_outline",
    "parse_trace",
    "render",
    "__version__",
]
