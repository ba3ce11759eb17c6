"""Renewal functions of heavy-tailed step laws and their second-order remainder."""

from .gridconv import Grid, GridFn, expansion_terms, gbar
from .renewal import renewal_grid, renewal_lattice, theorem1_report
from .tailmodel import Exponential, Lattice, LogPareto, Pareto, model_from_config

__version__ = "0.1.0"

__all__ = [
    "Exponential", "Grid", "GridFn", "Lattice", "LogPareto", "Pareto", "expansion_terms",
    "gbar", "model_from_config", "renewal_grid", "renewal_lattice", "theorem1_report",
]
