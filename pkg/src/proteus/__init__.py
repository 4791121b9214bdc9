"""
Proteus - semi-synthetic financial data streams with known regime changes.

MIT License

Copyright (c) 2025 Daniel Park

Permission is hereby granted, free of charge, to any person obtaining a copy
of this software and associated documentation files (the "Software"), to deal
in the Software without restriction, including without limitation the rights
to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
copies of the Software, and to permit persons to whom the Software is
furnished to do so, subject to the following conditions:

The above copyright notice and this permission notice shall be included in all
copies or substantial portions of the Software.
"""

__version__ = "0.1.0"

from .econometrics import ArmaParams, GarchParams, RegimeModel
from .errors import ProteusError
from .features import featurize
from .model_fitting import FitReport, GridConfig, fit
from .stream_simulation import GroundTruthLog, SimulatedStream, simulate_batch, simulate_stream
from .transition_map import StreamConfig, TransitionEvent, TransitionMap, generate_map

__all__ = [
    "ArmaParams",
    "FitReport",
    "GarchParams",
    "GridConfig",
    "GroundTruthLog",
    "ProteusError",
    "RegimeModel",
    "SimulatedStream",
    "StreamConfig",
    "TransitionEvent",
    "TransitionMap",
    "featurize",
    "fit",
    "generate_map",
    "simulate_batch",
    "simulate_stream",
]
