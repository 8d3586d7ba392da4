"""Static packing detection for PE files: parsing, features, labeling, classifiers and drift economics."""

from packscope.errors import PackscopeError
from packscope.features import N_FEATURES, FeatureVector, extract_all
from packscope.pe import PeFile, parse_pe

__version__ = "0.1.0"

__all__ = ["N_FEATURES", "FeatureVector", "PackscopeError", "PeFile", "__version__", "extract_all", "parse_pe"]
