"""Rateless set reconciliation with guaranteed decoding.

Layers, bottom up: ``matrix`` (deterministic mapping-matrix constructions),
``iblt`` (sketches and peeling), ``sync`` (the two-party protocol),
``reduce`` (universe reduction for huge identifier spaces) and ``bench``
(experiment harness and CLI).
"""

from .errors import *  # noqa: F401,F403
from .iblt import Cell, PeelResult, PeelStatus, Sketch, encode_signed, peel, subtract
from .matrix import (
    ConstructionSpec,
    Family,
    chunk_schedule,
    decodability_profile,
    materialize,
    rows_for_element,
    stopping_distance,
)
from .reduce import universe_reduce_sync
from .sync import reconcile_in_memory

__version__ = "0.1.0"
