"""Publication-style figure rendering for quench-simulation CSV artifacts.

The package is coupled to the simulation component only through files:
it reads the CLI's comment-headed CSV tables and writes image files.
"""

from .render import (
    KINDS,
    FigureSpec,
    render_occupancy,
    render_phase_plane,
    render_scaling,
    save_figure,
)
from .tables import SCHEMAS, SchemaError, classify, floats, read_table

__all__ = [
    "KINDS",
    "FigureSpec",
    "SCHEMAS",
    "SchemaError",
    "classify",
    "floats",
    "read_table",
    "render_occupancy",
    "render_phase_plane",
    "render_scaling",
    "save_figure",
]

__version__ = "0.1.0"
