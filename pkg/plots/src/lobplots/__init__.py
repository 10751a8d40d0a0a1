"""Deterministic figure rendering for lobplace experiment CSVs."""

from .render import FIGURE_KINDS, FigureSpec, SpecError, build_figure, load_spec, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "SpecError", "build_figure", "load_spec", "render"]
