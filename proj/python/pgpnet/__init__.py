"""Python access to the pgp core: graph builders, metrics and the commands."""

import json

from ._core import ConfigError, ValidationError, co_graph, condense, iou, run_command, size_graph
from ._core import map_report_json as _map_report_json

__all__ = [
    "ConfigError",
    "ValidationError",
    "co_graph",
    "condense",
    "iou",
    "map_report",
    "run_command",
    "size_graph",
]


def map_report(detections, truth, num_classes):
    """COCO-style report as a dict.

    detections: (image, (x, y, w, h), label, confidence) tuples.
    truth: (image, (x, y, w, h), label) tuples.
    """
    return json.loads(_map_report_json(detections, truth, num_classes))
