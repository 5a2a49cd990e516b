"""Two-party CertainSync protocol: messages, party state machines, transports."""

from .messages import (
    Abort,
    AbortReason,
    ChunkData,
    Continue,
    DiffPayload,
    DigestExchange,
    Hello,
    Kind,
    OriginalsRequest,
    OriginalsResponse,
    ReducedHello,
    SizeHandshake,
    Stop,
    frame,
    unframe,
)
from .protocol import (
    ReceiverState,
    ReconOutcome,
    ReconStatus,
    SenderState,
    receiver_on_chunk,
    reconcile_in_memory,
    sender_next,
)
from .transport import InMemoryChannel

__all__ = [
    "Abort", "AbortReason", "ChunkData", "Continue", "DiffPayload", "DigestExchange", "Hello",
    "InMemoryChannel", "Kind", "OriginalsRequest", "OriginalsResponse", "ReceiverState",
    "ReconOutcome", "ReconStatus", "ReducedHello", "SenderState", "SizeHandshake", "Stop",
    "frame", "receiver_on_chunk", "reconcile_in_memory", "sender_next", "unframe",
]
