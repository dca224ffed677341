"""Find live-coding screencasts among videos."""
import json

from ._castscan import (
    DEFAULT_DUPLICATE_THRESHOLD,
    FRAME_SIDE,
    DecodeError,
    Error,
    ParameterError,
    all_positive_baseline,
    confusion,
    decide,
    load_frame,
    mark_duplicates,
    metrics,
    nrmse,
    random_baseline,
    sample_schedule,
    scan_jsonl,
)

__version__ = "0.1.0"


def scan(manifest, **config):
    """Scan every video in a manifest; returns the report records as dicts.

    Keyword arguments are configuration keys, e.g. ``classifier="marker_oracle"``.
    """
    text = scan_jsonl(str(manifest), json.dumps(config))
    return [json.loads(line) for line in text.splitlines() if line]


__all__ = [
    "DEFAULT_DUPLICATE_THRESHOLD",
    "FRAME_SIDE",
    "DecodeError",
    "Error",
    "ParameterError",
    "all_positive_baseline",
    "confusion",
    "decide",
    "load_frame",
    "mark_duplicates",
    "metrics",
    "nrmse",
    "random_baseline",
    "sample_schedule",
    "scan",
    "scan_jsonl",
]
