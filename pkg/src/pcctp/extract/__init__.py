"""Stochastic graph extraction from water-probability rasters."""
from .edges import PINCH, WINDY, CandidateEdge, ExtractionError
from .pipeline import ExtractConfig, ExtractionResult, extract_graph, prune_and_assemble
from .raster import (RasterFormatError, WaterMaskRaster, classify_pixels, format_raster,
                     parse_raster, read_raster)

__all__ = ["PINCH", "WINDY", "CandidateEdge", "ExtractionError", "ExtractConfig",
           "ExtractionResult", "extract_graph", "prune_and_assemble", "RasterFormatError",
           "WaterMaskRaster", "classify_pixels", "format_raster", "parse_raster", "read_raster"]
