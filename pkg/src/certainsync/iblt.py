"""IBLT cells and sketches built from a rateless mapping matrix.

A sketch is three parallel arrays (signed count, xorSum words, checkSum)
aligned with the matrix rows of the chunks received so far. Elements are
handled as ``(N, W)`` arrays of big-endian uint64 words, ``W`` being 1 for
universes that fit in 64 bits and 4 for 256-bit identifiers.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import matrix
from .errors import ElementOutOfUniverse, MalformedFrame, SketchShapeMismatch
from .hashing import MASK64, checksum_hash, checksum_hash_words, from_words
from .matrix import ConstructionSpec

NATIVE_CELL_BYTES = 24
RAW_CELL_BYTES = 72


@dataclass(frozen=True)
class Cell:
    count: int = 0
    xor_sum: int = 0
    check_sum: int = 0

    @property
    def is_empty(self) -> bool:
        return self.count == 0 and self.xor_sum == 0 and self.check_sum == 0

    @property
    def is_pure(self) -> bool:
        return abs(self.count) == 1 and self.check_sum == checksum_hash(self.xor_sum)


def words_array(values, nwords: int) -> np.ndarray:
    """``(N, nwords)`` uint64 array of big-endian words for Python ints."""
    return np.array(
        [[(v >> (64 * (nwords - 1 - j))) & MASK64 for j in range(nwords)] for v in values],
        dtype=np.uint64,
    ).reshape(len(values), nwords)


class ElementBatch:
    """A set of elements pre-split into words, with cached checksums."""

    def __init__(self, elements: Iterable[int], nwords: int = 1):
        self._values = None
        if nwords == 1:
            try:
                if isinstance(elements, np.ndarray):
                    if elements.size and elements.min() < 0:
                        raise OverflowError
                    arr = elements.astype(np.uint64).ravel()
                else:
                    arr = np.fromiter((int(e) for e in elements), dtype=np.uint64)
            except OverflowError as exc:
                raise ElementOutOfUniverse("element does not fit in 64 bits") from exc
            self.words = np.unique(arr)[:, None]
        else:
            self._values = sorted({int(e) for e in elements})
            if self._values and (self._values[0] < 0 or self._values[-1] >> (64 * nwords)):
                raise ElementOutOfUniverse(f"element does not fit in {8 * nwords} bytes")
            self.words = words_array(self._values, nwords)
        self.hashes = checksum_hash_words(self.words)

    @classmethod
    def for_spec(cls, elements: Iterable[int], spec: ConstructionSpec) -> "ElementBatch":
        batch = cls(elements, spec.element_words)
        batch.check_universe(spec)
        return batch

    def __len__(self):
        return self.words.shape[0]

    def values(self) -> list[int]:
        if self.words.shape[1] == 1:
            return self.words[:, 0].tolist()
        return list(self._values)

    def check_universe(self, spec: ConstructionSpec) -> None:
        if not len(self):
            return
        if self.words.shape[1] == 1:
            lo, hi = int(self.words[0, 0]), int(self.words[-1, 0])
        else:
            lo, hi = self._values[0], self._values[-1]
        if lo < 1 or hi > spec.n:
            bad = lo if lo < 1 else hi
            raise ElementOutOfUniverse(f"element {bad} outside [1, {spec.n}]")


def _as_batch(elements, spec: ConstructionSpec) -> ElementBatch:
    if isinstance(elements, ElementBatch):
        if elements.words.shape[1] != spec.element_words:
            raise SketchShapeMismatch("element batch width does not match the construction")
        return elements
    return ElementBatch.for_spec(elements, spec)


def encode_chunk_arrays(batch: ElementBatch, spec: ConstructionSpec, chunk_index: int,
                        signs: np.ndarray | None = None):
    """Cell arrays ``(count, xor, chk)`` of one chunk for a batch of elements."""
    size = matrix.chunk_size(spec, chunk_index)
    nw = spec.element_words
    count = np.zeros(size, dtype=np.int64)
    xor = np.zeros((size, nw), dtype=np.uint64)
    chk = np.zeros(size, dtype=np.uint64)
    if not len(batch):
        return count, xor, chk
    idx, rows = matrix.chunk_incidence(spec, chunk_index, batch.words)
    if signs is None:
        count += np.bincount(rows, minlength=size).astype(np.int64)
    else:
        np.add.at(count, rows, signs[idx])
    for j in range(nw):
        col = np.zeros(size, dtype=np.uint64)
        np.bitwise_xor.at(col, rows, batch.words[idx, j])
        xor[:, j] = col
    np.bitwise_xor.at(chk, rows, batch.hashes[idx])
    return count, xor, chk


def _cells_from_arrays(count, xor, chk) -> list[Cell]:
    xs = [from_words(row) for row in xor.tolist()]
    return [Cell(c, x, h) for c, x, h in zip(count.tolist(), xs, chk.tolist())]


def encode_chunk(elements, spec: ConstructionSpec, chunk_index: int) -> list[Cell]:
    """Cells of chunk ``chunk_index`` for the given element set."""
    batch = _as_batch(elements, spec)
    return _cells_from_arrays(*encode_chunk_arrays(batch, spec, chunk_index))


class Sketch:
    """Cells of the first ``chunks_present`` chunks of a construction."""

    def __init__(self, spec: ConstructionSpec, count=None, xor=None, chk=None, chunks_present=0):
        self.spec = spec
        nw = spec.element_words
        self.count = np.zeros(0, dtype=np.int64) if count is None else count
        self.xor = np.zeros((0, nw), dtype=np.uint64) if xor is None else xor
        self.chk = np.zeros(0, dtype=np.uint64) if chk is None else chk
        self.chunks_present = chunks_present

    @classmethod
    def encode(cls, elements, spec: ConstructionSpec, chunks: int) -> "Sketch":
        batch = _as_batch(elements, spec)
        sketch = cls(spec)
        for j in range(1, chunks + 1):
            sketch.append_chunk(*encode_chunk_arrays(batch, spec, j))
        return sketch

    @classmethod
    def from_cells(cls, spec: ConstructionSpec, cells: list[Cell], chunks_present: int) -> "Sketch":
        nw = spec.element_words
        count = np.array([c.count for c in cells], dtype=np.int64)
        xor = words_array([c.xor_sum for c in cells], nw)
        chk = np.array([c.check_sum for c in cells], dtype=np.uint64)
        sketch = cls(spec, count, xor, chk, chunks_present)
        sketch._check_length()
        return sketch

    def _check_length(self):
        expected = matrix.chunk_offset(self.spec, self.chunks_present + 1)
        if len(self.count) != expected:
            raise SketchShapeMismatch(
                f"{len(self.count)} cells but {self.chunks_present} chunks of {self.spec} need {expected}")

    def append_chunk(self, count, xor, chk) -> None:
        expected = matrix.chunk_size(self.spec, self.chunks_present + 1)
        if len(count) != expected:
            raise SketchShapeMismatch(f"chunk {self.chunks_present + 1} needs {expected} cells, got {len(count)}")
        self.count = np.concatenate([self.count, count])
        self.xor = np.concatenate([self.xor, xor.reshape(len(count), self.spec.element_words)])
        self.chk = np.concatenate([self.chk, chk])
        self.chunks_present += 1

    def append_cells(self, cells: list[Cell]) -> None:
        self.append_chunk(
            np.array([c.count for c in cells], dtype=np.int64),
            words_array([c.xor_sum for c in cells], self.spec.element_words),
            np.array([c.check_sum for c in cells], dtype=np.uint64),
        )

    @property
    def cells(self) -> list[Cell]:
        return _cells_from_arrays(self.count, self.xor, self.chk)

    def __len__(self):
        return len(self.count)

    def is_empty(self) -> bool:
        return not (self.count.any() or self.xor.any() or self.chk.any())

    def copy(self) -> "Sketch":
        return Sketch(self.spec, self.count.copy(), self.xor.copy(), self.chk.copy(), self.chunks_present)

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return (self.spec == other.spec and self.chunks_present == other.chunks_present
                and np.array_equal(self.count, other.count)
                and np.array_equal(self.xor, other.xor)
                and np.array_equal(self.chk, other.chk))

    __hash__ = None

    def __add__(self, other: "Sketch") -> "Sketch":
        _check_compatible(self, other)
        return Sketch(self.spec, self.count + other.count, self.xor ^ other.xor,
                      self.chk ^ other.chk, self.chunks_present)

    def __sub__(self, other: "Sketch") -> "Sketch":
        return subtract(self, other)

    def __repr__(self):
        return f"Sketch({self.spec}, chunks={self.chunks_present}, cells={len(self)})"


def _check_compatible(a: Sketch, b: Sketch) -> None:
    if a.spec != b.spec or a.chunks_present != b.chunks_present or len(a) != len(b):
        raise SketchShapeMismatch(f"cannot combine {a!r} with {b!r}")


def subtract(a: Sketch, b: Sketch) -> Sketch:
    """Cell-wise ``a - b``: counts subtract, xorSum and checkSum XOR."""
    _check_compatible(a, b)
    return Sketch(a.spec, a.count - b.count, a.xor ^ b.xor, a.chk ^ b.chk, a.chunks_present)


def encode_signed(signed: dict[int, int], spec: ConstructionSpec, chunks: int) -> Sketch:
    """Sketch of a signed multiset: element -> count contribution (+1 / -1)."""
    items = sorted(signed.items())
    batch = _as_batch([e for e, _ in items], spec)
    order = {e: s for e, s in items}
    signs = np.array([order[e] for e in batch.values()], dtype=np.int64)
    sketch = Sketch(spec)
    for j in range(1, chunks + 1):
        sketch.append_chunk(*encode_chunk_arrays(batch, spec, j, signs=signs))
    return sketch


# -- peeling -----------------------------------------------------------------

class PeelStatus(str, enum.Enum):
    SUCCESS = "Success"
    FAIL = "Fail"


@dataclass(frozen=True)
class PeelResult:
    receiver_only: frozenset
    sender_only: frozenset
    status: PeelStatus

    @property
    def ok(self) -> bool:
        return self.status is PeelStatus.SUCCESS

    @property
    def delta(self) -> frozenset:
        return self.receiver_only | self.sender_only


def peel(diff: Sketch) -> PeelResult:
    """Decode a difference sketch by peeling pure cells.

    A cell is used only if its recovered value lies in the universe and the
    matrix actually maps that value to the cell's row. Success additionally
    requires that re-encoding the recovered signed elements reproduces
    ``diff`` exactly, so a checksum collision can only cause a Fail.
    """
    spec, chunks = diff.spec, diff.chunks_present
    nw = spec.element_words

    if nw == 1:
        xs = diff.xor[:, 0].tolist()
    else:
        xs = [from_words(row) for row in diff.xor.tolist()]
    count = diff.count.tolist()
    chk = diff.chk.tolist()

    candidates = (np.abs(diff.count) == 1) & (diff.chk == checksum_hash_words(diff.xor))
    stack = np.flatnonzero(candidates).tolist()
    recovered: dict[int, int] = {}

    while stack:
        r = stack.pop()
        sign = count[r]
        if sign not in (1, -1):
            continue
        e = xs[r]
        if not 1 <= e <= spec.n:
            continue
        h = checksum_hash(e)
        if chk[r] != h:
            continue
        rows = matrix.global_rows(spec, chunks, e)
        if r not in rows:
            continue
        for rr in rows:
            count[rr] -= sign
            xs[rr] ^= e
            chk[rr] ^= h
            if count[rr] in (1, -1):
                stack.append(rr)
        total = recovered.get(e, 0) + sign
        if total:
            recovered[e] = total
        else:
            recovered.pop(e, None)

    residual = any(count) or any(xs) or any(chk)
    ok = not residual and all(v in (1, -1) for v in recovered.values())
    if ok and recovered:
        ok = encode_signed(recovered, spec, chunks) == diff
    receiver = frozenset(e for e, s in recovered.items() if s > 0)
    sender = frozenset(e for e, s in recovered.items() if s < 0)
    return PeelResult(receiver, sender, PeelStatus.SUCCESS if ok else PeelStatus.FAIL)


# -- wire encoding -------------------------------------------------------------

def cell_bytes(raw: bool) -> int:
    return RAW_CELL_BYTES if raw else NATIVE_CELL_BYTES


def serialize_cells(cells: Iterable[Cell], raw: bool = False) -> bytes:
    """Fixed-width big-endian cells: 8+8+8 bytes native, 8+32+32 raw."""
    out = bytearray()
    xw = 32 if raw else 8
    for c in cells:
        try:
            out += struct.pack(">q", c.count)
            out += c.xor_sum.to_bytes(xw, "big")
            out += c.check_sum.to_bytes(xw, "big")
        except (struct.error, OverflowError) as exc:
            raise MalformedFrame(f"cell {c} does not fit the {'raw' if raw else 'native'} layout") from exc
    return bytes(out)


def deserialize_cells(data: bytes, spec: ConstructionSpec | None = None, raw: bool | None = None) -> list[Cell]:
    if raw is None:
        raw = spec is not None and spec.element_bytes == 32
    width = cell_bytes(raw)
    if len(data) % width:
        raise MalformedFrame(f"{len(data)} bytes is not a multiple of the {width}-byte cell size")
    xw = 32 if raw else 8
    cells = []
    for off in range(0, len(data), width):
        (count,) = struct.unpack_from(">q", data, off)
        xor_sum = int.from_bytes(data[off + 8:off + 8 + xw], "big")
        check_sum = int.from_bytes(data[off + 8 + xw:off + width], "big")
        if check_sum > MASK64:
            raise MalformedFrame("checkSum wider than 64 bits")
        cells.append(Cell(count, xor_sum, check_sum))
    return cells
