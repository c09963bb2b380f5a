"""Offline figure generation from gittins experiment CSVs."""

from .render import FIGURE_KINDS, FigureSpec, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "render"]
__version__ = "0.1.0"
