"""Belief-evolution plots from simulator trace CSVs.

Consumes only the public CSV contract (tick,agent,wake,y,belief_0..); no
linkage to the simulator's internals.
"""

from .reader import EmptyTraceError, SchemaError, TraceData, read_trace_csv
from .render import PlotSpec, render

__all__ = [
    "EmptyTraceError",
    "SchemaError",
    "TraceData",
    "read_trace_csv",
    "PlotSpec",
    "render",
]

__version__ = "0.1.0"
