"""Offline figure generation for formation-control trajectory logs.

Consumes only the documented CSV/JSON run artifacts; never recomputes
control quantities."""

from .errorplots import plot_errors
from .runlog import RunLog, RunLogError, load_run
from .trajectories import plot_trajectories

__all__ = ["RunLog", "RunLogError", "load_run", "plot_errors", "plot_trajectories"]
__version__ = "0.1.0"
