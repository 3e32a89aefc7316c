"""posturekit: sitting/standing/stepping classification for hip-worn
triaxial accelerometer streams, plus a ground-truthed simulator.

Pipeline: changepoint segmentation -> random-forest step detection ->
local mean-shift testing for sit vs stand -> bout-length correction.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    DailyFile,
    DataError,
    Event,
    EventLog,
    PostureLabel,
    Segment,
    TriaxialSeries,
    labels_to_grid,
    vector_magnitude,
)
