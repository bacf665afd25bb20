"""gazebox: detect looked-at objects and regress their bounding boxes
from gaze data alone, using normalized spatial heatmaps over temporal
windows as the only feature."""

__version__ = "0.1.0"
