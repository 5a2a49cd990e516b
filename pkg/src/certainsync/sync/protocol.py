"""Sender (P1) and receiver (P2) state machines of the rateless protocol.

The sender streams chunks of its sketch in schedule order. After each chunk
the receiver encodes the same chunk of its own set, subtracts, and tries to
peel the accumulated difference. A failed peel means "send more"; a
successful one ends the session, after which the receiver returns the
elements only it holds so both parties end with the union.

Neither party ever estimates the size of the difference.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .. import matrix
from ..errors import ChunkGap, ExhaustedBeforeDecode, SessionNotEstablished, SpecMismatch
from ..iblt import ElementBatch, Sketch, cell_bytes, encode_chunk_arrays, peel, subtract
from ..matrix import ConstructionSpec
from .messages import Abort, AbortReason, ChunkData, Continue, DiffPayload, Hello, Stop
from .transport import InMemoryChannel


class ReconStatus(str, enum.Enum):
    DONE = "Done"
    EXHAUSTED = "Exhausted"


@dataclass
class ReconOutcome:
    delta_receiver_only: frozenset
    delta_sender_only: frozenset
    chunks_used: int
    cells_used: int
    bits_on_wire: int
    status: ReconStatus
    # Frame bytes beyond the cell payload (headers, control and diff messages).
    control_bytes: int = 0
    wire_bytes: int = 0
    sender_final: frozenset | None = None
    receiver_final: frozenset | None = None

    @property
    def delta(self) -> frozenset:
        return self.delta_receiver_only | self.delta_sender_only


def cell_bits(spec: ConstructionSpec) -> int:
    return 8 * cell_bytes(spec.element_bytes == 32)


def _hello_matches(spec: ConstructionSpec, hello: Hello) -> bool:
    return (hello.family == spec.family and hello.n == spec.n
            and hello.element_bytes == spec.element_bytes)


@dataclass
class SenderState:
    """Party P1: owns ``elements`` and streams their sketch."""

    spec: ConstructionSpec
    elements: set
    session_id: int = 1
    next_chunk: int = 1
    established: bool = False
    finished: bool = False
    exhausted: bool = False
    _batch: ElementBatch | None = field(default=None, repr=False)

    def batch(self) -> ElementBatch:
        if self._batch is None:
            self._batch = ElementBatch.for_spec(self.elements, self.spec)
        return self._batch

    def hello(self) -> Hello:
        return Hello(self.session_id, self.spec.family, self.spec.n, self.spec.element_bytes)

    def handle(self, msg) -> list:
        """React to one incoming message; returns the messages to send."""
        if isinstance(msg, Hello):
            if not _hello_matches(self.spec, msg):
                self.finished = True
                return [Abort(self.session_id, AbortReason.SPEC_MISMATCH)]
            self.established = True
            return self._next()
        if isinstance(msg, Continue):
            return self._next()
        if isinstance(msg, Stop):
            return []
        if isinstance(msg, DiffPayload):
            self.elements |= set(msg.elements)
            self._batch = None
            self.finished = True
            return []
        if isinstance(msg, Abort):
            self.finished = True
            return []
        raise SessionNotEstablished(f"sender cannot handle {type(msg).__name__}")

    def _next(self) -> list:
        chunk = sender_next(self)
        if chunk is None:
            self.finished = True
            return [Abort(self.session_id, AbortReason.EXHAUSTED)]
        return [chunk]


def sender_next(state: SenderState) -> ChunkData | None:
    """Emit the next chunk of the sender's sketch, or ``None`` when exhausted."""
    if not state.established:
        raise SessionNotEstablished("Hello has not been exchanged")
    if not matrix.has_chunk(state.spec, state.next_chunk):
        state.exhausted = True
        return None
    arrays = encode_chunk_arrays(state.batch(), state.spec, state.next_chunk)
    part = Sketch(state.spec, *arrays, chunks_present=1)
    msg = ChunkData(state.session_id, state.next_chunk, tuple(part.cells))
    state.next_chunk += 1
    return msg


@dataclass
class ReceiverState:
    """Party P2: accumulates the sender's chunks and decodes the difference."""

    spec: ConstructionSpec
    elements: set
    session_id: int = 1
    established: bool = False
    local: Sketch | None = None
    remote: Sketch | None = None
    outcome: ReconOutcome | None = None
    _batch: ElementBatch | None = field(default=None, repr=False)

    def __post_init__(self):
        self.local = Sketch(self.spec)
        self.remote = Sketch(self.spec)

    def batch(self) -> ElementBatch:
        if self._batch is None:
            self._batch = ElementBatch.for_spec(self.elements, self.spec)
        return self._batch

    @property
    def expected_chunk(self) -> int:
        return self.remote.chunks_present + 1

    def handle(self, msg) -> list:
        if isinstance(msg, Hello):
            if not _hello_matches(self.spec, msg):
                self.outcome = self._result(frozenset(), frozenset(), ReconStatus.EXHAUSTED)
                return [Abort(msg.session_id, AbortReason.SPEC_MISMATCH)]
            self.session_id = msg.session_id
            self.established = True
            return [Hello(self.session_id, self.spec.family, self.spec.n, self.spec.element_bytes)]
        if isinstance(msg, ChunkData):
            try:
                reply = receiver_on_chunk(self, msg)
            except ChunkGap:
                self.outcome = self._result(frozenset(), frozenset(), ReconStatus.EXHAUSTED)
                return [Abort(self.session_id, AbortReason.CHUNK_GAP)]
            if isinstance(reply, Continue):
                return [reply]
            self.elements |= set(reply.delta_sender_only)
            self._batch = None
            return [Stop(self.session_id),
                    DiffPayload(self.session_id, tuple(sorted(reply.delta_receiver_only)))]
        if isinstance(msg, Abort):
            if self.outcome is None:
                self.outcome = self._result(frozenset(), frozenset(), ReconStatus.EXHAUSTED)
            return []
        raise SessionNotEstablished(f"receiver cannot handle {type(msg).__name__}")

    def _result(self, receiver_only, sender_only, status) -> ReconOutcome:
        cells = len(self.remote)
        return ReconOutcome(receiver_only, sender_only, self.remote.chunks_present, cells,
                            cells * cell_bits(self.spec), status)


def receiver_on_chunk(state: ReceiverState, msg: ChunkData) -> Continue | ReconOutcome:
    """Absorb one chunk, attempt a decode, and say whether to continue."""
    if not state.established:
        raise SessionNotEstablished("Hello has not been exchanged")
    if msg.session_id != state.session_id:
        raise SpecMismatch(f"chunk for session {msg.session_id}, expected {state.session_id}")
    if msg.chunk_index != state.expected_chunk:
        raise ChunkGap(f"got chunk {msg.chunk_index}, expected {state.expected_chunk}")
    state.remote.append_cells(list(msg.cells))
    state.local.append_chunk(*encode_chunk_arrays(state.batch(), state.spec, msg.chunk_index))
    result = peel(subtract(state.local, state.remote))
    if not result.ok:
        return Continue(state.session_id)
    state.outcome = state._result(result.receiver_only, result.sender_only, ReconStatus.DONE)
    return state.outcome


def run_session(sender: SenderState, receiver: ReceiverState, channel: InMemoryChannel) -> ReconOutcome:
    """Pump messages between the two parties until both are finished."""
    s_end, r_end = channel.a, channel.b
    s_end.send(sender.hello())
    cell_payload = 0
    while True:
        progressed = False
        while r_end.pending():
            progressed = True
            msg = r_end.recv()
            if isinstance(msg, ChunkData):
                cell_payload += len(msg.cells) * cell_bytes(channel.a.raw)
            for out in receiver.handle(msg):
                r_end.send(out)
        while s_end.pending():
            progressed = True
            for out in sender.handle(s_end.recv()):
                s_end.send(out)
        if not progressed:
            break
    outcome = receiver.outcome
    if outcome is None:
        outcome = receiver._result(frozenset(), frozenset(), ReconStatus.EXHAUSTED)
    outcome.wire_bytes = channel.bytes_sent
    outcome.control_bytes = channel.bytes_sent - cell_payload
    outcome.sender_final = frozenset(sender.elements)
    outcome.receiver_final = frozenset(receiver.elements)
    return outcome


def reconcile_in_memory(s1, s2, spec: ConstructionSpec, session_id: int = 1) -> ReconOutcome:
    """Run a complete session between a sender holding ``s1`` and a receiver holding ``s2``.

    Raises ``ExhaustedBeforeDecode`` when the construction runs out of chunks
    before the difference peels; the partial outcome rides on the exception.
    """
    sender = SenderState(spec, set(s1), session_id)
    receiver = ReceiverState(spec, set(s2), session_id)
    # Validate both sets up front so a bad element surfaces as an error, not an abort.
    sender.batch()
    receiver.batch()
    outcome = run_session(sender, receiver, InMemoryChannel(raw=spec.element_bytes == 32))
    if outcome.status is ReconStatus.EXHAUSTED:
        raise ExhaustedBeforeDecode(
            f"{spec} ran out of chunks after {outcome.cells_used} cells without decoding", outcome)
    return outcome
