"""Cascaded appearance/spatial tracking over per-frame detections.

The package is organized as small, independently usable layers:

- ``lapsolver``  — exact linear sum assignment with forbidden pairs
- ``geometry``   — pinhole bird's-eye-view projection and distances
- ``tracker``    — the two-stage association cascade itself
- ``depthops``   — instance-depth normalization and loss formulas
- ``metrics``    — PQ / VPQ / depth-aware VPQ / STQ evaluators
- ``simulator``  — deterministic synthetic scenes with ground-truth tracks
- ``io``         — text/binary serialization of every artifact
- ``cli``        — ``casctrack track|evaluate|simulate|profile``
"""

__version__ = "0.1.0"

from . import cli, depthops, geometry, io, lapsolver, metrics, simulator, tracker

__all__ = [
    "cli",
    "depthops",
    "geometry",
    "io",
    "lapsolver",
    "metrics",
    "simulator",
    "tracker",
    "__version__",
]
