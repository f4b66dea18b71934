"""Lossy transmission of a bivariate Gaussian source over a Gaussian MAC.

Closed-form rate-distortion and scheme distortions, converse and benchmark
bounds, a sequence-level Monte Carlo simulator, and a CSV-emitting CLI.
"""

from .errors import GaussMacError
from .model import DistortionPair, MacChannel, RatePair, SourceParams

__all__ = ["DistortionPair", "GaussMacError", "MacChannel", "RatePair", "SourceParams"]
__version__ = "0.1.0"
