"""Numerical lab for the stationary Prandtl boundary layer in von Mises variables."""

from .blasius import BlasiusTable, default_table, eval_f, inverse_f, solve_blasius
from .march import MarchConfig, run
from .vonmises import Field, Grid, blasius_w

__all__ = ["BlasiusTable", "Field", "Grid", "MarchConfig", "blasius_w", "default_table",
           "eval_f", "inverse_f", "run", "solve_blasius"]
__version__ = "0.1.0"
