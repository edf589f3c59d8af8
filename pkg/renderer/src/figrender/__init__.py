"""Render lagbias fig-data JSON files into publication-style images."""
from .render import (FigDataError, load_fig_data, render_directory,
                     render_payload, validate_payload)

__version__ = "0.1.0"

__all__ = [
    "FigDataError",
    "load_fig_data",
    "render_directory",
    "render_payload",
    "validate_payload",
]
