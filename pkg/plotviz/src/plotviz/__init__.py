"""Figure rendering for greedy-surrogate run outputs."""

from .figures import FIGURES, ReportSpec, render_report
from .io import SchemaError

__version__ = "0.1.0"
