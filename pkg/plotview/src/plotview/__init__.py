"""Render run-directory CSV artifacts as figures: 1D density profiles with
target overlay, torus heatmap snapshot strips, and cost-history curves."""

from .figures import KINDS, FigureRequest, PlotDataError, render

__version__ = "0.1.0"

__all__ = ["FigureRequest", "PlotDataError", "render", "KINDS", "__version__"]
