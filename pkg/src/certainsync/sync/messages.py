"""Protocol messages and their binary frames.

Frame layout (all big-endian)::

    u32 length | u8 kind | u64 session_id | body

``length`` counts everything after itself, so a bodiless message (Continue,
Stop) is a 13-byte frame. Cell and element widths in a body are not
self-describing; both ends learn them from the Hello exchange and pass
``raw=True`` for 256-bit identifier sessions.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from ..errors import MalformedFrame
from ..iblt import Cell, cell_bytes, deserialize_cells, serialize_cells
from ..matrix import Family

HEADER = struct.Struct(">IBQ")
ORIGINAL_BYTES = 32

_FAMILY_CODES = {Family.EGH: 1, Family.OLS: 2, Family.EXTENDED_HAMMING: 3}
_FAMILY_BY_CODE = {v: k for k, v in _FAMILY_CODES.items()}


class Kind(enum.IntEnum):
    HELLO = 1
    CHUNK_DATA = 2
    CONTINUE = 3
    STOP = 4
    DIFF_PAYLOAD = 5
    ABORT = 6
    SIZE_HANDSHAKE = 7
    REDUCED_HELLO = 8
    ORIGINALS_REQUEST = 9
    ORIGINALS_RESPONSE = 10
    DIGEST_EXCHANGE = 11


class AbortReason(enum.IntEnum):
    SPEC_MISMATCH = 1
    EXHAUSTED = 2
    CHUNK_GAP = 3
    PROTOCOL_ERROR = 4
    ROUND_LIMIT = 5


@dataclass(frozen=True)
class Hello:
    session_id: int
    family: Family
    n: int
    element_bytes: int = 8
    kind = Kind.HELLO


@dataclass(frozen=True)
class ChunkData:
    session_id: int
    chunk_index: int
    cells: tuple[Cell, ...]
    kind = Kind.CHUNK_DATA


@dataclass(frozen=True)
class Continue:
    session_id: int
    kind = Kind.CONTINUE


@dataclass(frozen=True)
class Stop:
    session_id: int
    kind = Kind.STOP


@dataclass(frozen=True)
class DiffPayload:
    session_id: int
    elements: tuple[int, ...]
    kind = Kind.DIFF_PAYLOAD


@dataclass(frozen=True)
class Abort:
    session_id: int
    reason: AbortReason
    kind = Kind.ABORT


@dataclass(frozen=True)
class SizeHandshake:
    session_id: int
    set_size: int
    kind = Kind.SIZE_HANDSHAKE


@dataclass(frozen=True)
class ReducedHello:
    session_id: int
    round: int
    n_r: int
    delta: int
    kind = Kind.REDUCED_HELLO


@dataclass(frozen=True)
class OriginalsRequest:
    session_id: int
    reduced_values: tuple[int, ...]
    kind = Kind.ORIGINALS_REQUEST


@dataclass(frozen=True)
class OriginalsResponse:
    session_id: int
    groups: tuple[tuple[int, tuple[int, ...]], ...]
    kind = Kind.ORIGINALS_RESPONSE


@dataclass(frozen=True)
class DigestExchange:
    session_id: int
    cardinality: int
    xor_of_hashes: int
    kind = Kind.DIGEST_EXCHANGE


Message = (Hello | ChunkData | Continue | Stop | DiffPayload | Abort | SizeHandshake
           | ReducedHello | OriginalsRequest | OriginalsResponse | DigestExchange)


def _body(msg, raw: bool) -> bytes:
    width = 32 if raw else 8
    if isinstance(msg, Hello):
        nbytes = max(1, (msg.n.bit_length() + 7) // 8)
        return (struct.pack(">BBB", _FAMILY_CODES[Family(msg.family)], msg.element_bytes, nbytes)
                + msg.n.to_bytes(nbytes, "big"))
    if isinstance(msg, ChunkData):
        return struct.pack(">I", msg.chunk_index) + serialize_cells(msg.cells, raw=raw)
    if isinstance(msg, (Continue, Stop)):
        return b""
    if isinstance(msg, DiffPayload):
        return struct.pack(">I", len(msg.elements)) + b"".join(e.to_bytes(width, "big") for e in msg.elements)
    if isinstance(msg, Abort):
        return struct.pack(">B", msg.reason)
    if isinstance(msg, SizeHandshake):
        return struct.pack(">Q", msg.set_size)
    if isinstance(msg, ReducedHello):
        return struct.pack(">IQQ", msg.round, msg.n_r, msg.delta)
    if isinstance(msg, OriginalsRequest):
        return struct.pack(f">I{len(msg.reduced_values)}Q", len(msg.reduced_values), *msg.reduced_values)
    if isinstance(msg, OriginalsResponse):
        parts = [struct.pack(">I", len(msg.groups))]
        for value, originals in msg.groups:
            parts.append(struct.pack(">QI", value, len(originals)))
            parts.extend(o.to_bytes(ORIGINAL_BYTES, "big") for o in originals)
        return b"".join(parts)
    if isinstance(msg, DigestExchange):
        return struct.pack(">QQ", msg.cardinality, msg.xor_of_hashes)
    raise TypeError(f"not a protocol message: {msg!r}")


def frame(msg: Message, raw: bool = False) -> bytes:
    """Encode ``msg`` as one length-prefixed frame."""
    try:
        body = _body(msg, raw)
    except (struct.error, OverflowError) as exc:
        raise MalformedFrame(f"cannot encode {type(msg).__name__}: {exc}") from exc
    return HEADER.pack(1 + 8 + len(body), msg.kind, msg.session_id) + body


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise MalformedFrame("frame body truncated")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def done(self):
        if self.pos != len(self.data):
            raise MalformedFrame(f"{len(self.data) - self.pos} trailing bytes in frame")


def unframe(data: bytes, raw: bool = False) -> Message:
    """Decode exactly one frame; the inverse of ``frame``."""
    if len(data) < HEADER.size:
        raise MalformedFrame("frame shorter than its header")
    length, kind_code, session = HEADER.unpack_from(data)
    if length != len(data) - 4:
        raise MalformedFrame(f"length prefix {length} does not match {len(data) - 4} bytes")
    try:
        kind = Kind(kind_code)
    except ValueError:
        raise MalformedFrame(f"unknown message kind {kind_code}") from None
    rd = _Reader(data, HEADER.size)
    width = 32 if raw else 8

    if kind is Kind.HELLO:
        code, element_bytes, nbytes = rd.unpack(">BBB")
        if code not in _FAMILY_BY_CODE:
            raise MalformedFrame(f"unknown construction code {code}")
        msg = Hello(session, _FAMILY_BY_CODE[code], int.from_bytes(rd.take(nbytes), "big"), element_bytes)
    elif kind is Kind.CHUNK_DATA:
        (index,) = rd.unpack(">I")
        payload = rd.take(len(data) - rd.pos)
        if len(payload) % cell_bytes(raw):
            raise MalformedFrame("chunk payload is not a whole number of cells")
        msg = ChunkData(session, index, tuple(deserialize_cells(payload, raw=raw)))
    elif kind is Kind.CONTINUE:
        msg = Continue(session)
    elif kind is Kind.STOP:
        msg = Stop(session)
    elif kind is Kind.DIFF_PAYLOAD:
        (count,) = rd.unpack(">I")
        msg = DiffPayload(session, tuple(int.from_bytes(rd.take(width), "big") for _ in range(count)))
    elif kind is Kind.ABORT:
        (reason,) = rd.unpack(">B")
        try:
            msg = Abort(session, AbortReason(reason))
        except ValueError:
            raise MalformedFrame(f"unknown abort reason {reason}") from None
    elif kind is Kind.SIZE_HANDSHAKE:
        msg = SizeHandshake(session, *rd.unpack(">Q"))
    elif kind is Kind.REDUCED_HELLO:
        msg = ReducedHello(session, *rd.unpack(">IQQ"))
    elif kind is Kind.ORIGINALS_REQUEST:
        (count,) = rd.unpack(">I")
        msg = OriginalsRequest(session, tuple(rd.unpack(f">{count}Q")))
    elif kind is Kind.ORIGINALS_RESPONSE:
        (ngroups,) = rd.unpack(">I")
        groups = []
        for _ in range(ngroups):
            value, count = rd.unpack(">QI")
            groups.append((value, tuple(int.from_bytes(rd.take(ORIGINAL_BYTES), "big") for _ in range(count))))
        msg = OriginalsResponse(session, tuple(groups))
    else:
        msg = DigestExchange(session, *rd.unpack(">QQ"))
    rd.done()
    return msg

