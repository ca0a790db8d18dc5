"""TSP instance parsing and feature extraction."""

from .features import FEATURE_NAMES, FeatureRow, extract_all, stats3
from .instance import TspInstance, parse_coord_csv, parse_tsplib, read_instance

__all__ = ["FEATURE_NAMES", "FeatureRow", "TspInstance", "extract_all", "parse_coord_csv",
           "parse_tsplib", "read_instance", "stats3"]
