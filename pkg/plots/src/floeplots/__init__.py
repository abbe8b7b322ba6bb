"""Offline figure regeneration from simulator run artifacts."""

__version__ = "0.1.0"

from .figures import PlotSpec, plot_comparison, plot_moments, plot_trajectories
from .io import SchemaError
