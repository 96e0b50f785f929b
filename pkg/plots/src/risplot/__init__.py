"""Batch figure rendering for network-optimizer sweep and solve outputs."""

from .figures import (CSV_COLUMNS, FIGURE_KINDS, FigureSpec, figure_for,
                      render, render_convergence_figure, render_sweep_figures)

__all__ = [
    "CSV_COLUMNS",
    "FIGURE_KINDS",
    "FigureSpec",
    "figure_for",
    "render",
    "render_convergence_figure",
    "render_sweep_figures",
]
