"""Figure rendering for the solver's CSV outputs."""

__version__ = "0.1.0"

from .csvio import (
    ERROR_COLUMNS,
    FieldGrid,
    LadderTable,
    TrackingTable,
    read_eoc,
    read_field,
    read_tracking,
)
from .errors import PlotError
from .figures import (
    FIELD_RANGE,
    FieldFigure,
    LadderFigure,
    TrackingFigure,
    observed_slopes,
    plot_eoc,
    plot_field,
    plot_tracking,
)

__all__ = [
    "__version__",
    "PlotError",
    "ERROR_COLUMNS",
    "FieldGrid",
    "LadderTable",
    "TrackingTable",
    "read_eoc",
    "read_field",
    "read_tracking",
    "FIELD_RANGE",
    "FieldFigure",
    "LadderFigure",
    "TrackingFigure",
    "observed_slopes",
    "plot_eoc",
    "plot_field",
    "plot_tracking",
]
