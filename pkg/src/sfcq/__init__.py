"""Locality measures for space-filling curves.

The common entry points are re-exported here; the submodules hold the rest.
"""
from sfcq.curves import BUILTIN_NAMES, ScanningOrder, builtin, parse_curve_file, polyline, validate
from sfcq.measures import AVERAGE, WORST_CASE, MeasureId
from sfcq.packer import pack_blocks, simulate_queries, sort_points
from sfcq.probe import MeasureInterval, compute_worst, grid_oracle, supported_measures
from sfcq.sampling import AverageEstimate, estimate_average, estimate_averages

__all__ = [
    "AVERAGE",
    "AverageEstimate",
    "BUILTIN_NAMES",
    "MeasureId",
    "MeasureInterval",
    "ScanningOrder",
    "WORST_CASE",
    "builtin",
    "compute_worst",
    "estimate_average",
    "estimate_averages",
    "grid_oracle",
    "pack_blocks",
    "parse_curve_file",
    "polyline",
    "simulate_queries",
    "sort_points",
    "supported_measures",
    "validate",
]
