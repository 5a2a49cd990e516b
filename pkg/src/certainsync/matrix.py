"""Rateless mapping-matrix constructions (EGH, OLS, Extended Hamming).

The matrices are used implicitly: ``rows_for_element`` maps an element of the
universe ``[1, n]`` to the rows it occupies inside one transmission chunk.
``materialize`` builds the dense form for small universes so the oracle in
``stopping_distance`` can check decodability by brute force.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np

from .errors import (
    ChunkLimitExceeded,
    DiffSizeUnsupported,
    ElementOutOfUniverse,
    InvalidConstruction,
    TooLargeForOracle,
    TooLargeToMaterialize,
)

MATERIALIZE_MAX_ROWS = 10_000
MATERIALIZE_MAX_COLS = 1_000_000
ORACLE_MAX_COLS = 24


class Family(str, enum.Enum):
    EGH = "EGH"
    OLS = "OLS"
    EXTENDED_HAMMING = "ExtendedHamming"

    @classmethod
    def parse(cls, text: str) -> "Family":
        key = text.strip().lower().replace("-", "").replace("_", "")
        aliases = {"egh": cls.EGH, "ols": cls.OLS, "extendedhamming": cls.EXTENDED_HAMMING,
                   "eh": cls.EXTENDED_HAMMING, "hamming": cls.EXTENDED_HAMMING}
        try:
            return aliases[key]
        except KeyError:
            raise InvalidConstruction(f"unknown construction family {text!r}") from None


# -- primes -----------------------------------------------------------------

class _PrimeTable:
    """Growable table of the first primes and their prefix sums/products."""

    def __init__(self):
        self.primes: list[int] = []
        self.sums: list[int] = [0]
        self.products: list[int] = [1]
        self._limit = 1

    def _grow(self, limit):
        sieve = np.ones(limit + 1, dtype=bool)
        sieve[:2] = False
        for p in range(2, math.isqrt(limit) + 1):
            if sieve[p]:
                sieve[p * p::p] = False
        found = np.flatnonzero(sieve)
        for p in found[len(self.primes):].tolist():
            self.primes.append(p)
            self.sums.append(self.sums[-1] + p)
        self._limit = limit

    def ensure(self, count: int) -> None:
        while len(self.primes) < count:
            self._grow(max(64, self._limit * 2))

    def prime(self, j: int) -> int:
        """The j-th prime, 1-based (p_1 = 2)."""
        self.ensure(j)
        return self.primes[j - 1]

    def prefix_sum(self, k: int) -> int:
        self.ensure(k)
        return self.sums[k]

    def product(self, k: int) -> int:
        """Exact product of the first k primes."""
        self.ensure(k)
        while len(self.products) <= k:
            self.products.append(self.products[-1] * self.primes[len(self.products) - 1])
        return self.products[k]


PRIMES = _PrimeTable()


def nth_prime(j: int) -> int:
    return PRIMES.prime(j)


def is_prime(x: int) -> bool:
    return x >= 2 and bool(gmpy2.is_prime(x, 50))


def next_prime_at_least(x: int) -> int:
    if x <= 2:
        return 2
    return x if is_prime(x) else int(gmpy2.next_prime(x))


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length() if n > 1 else 0


def ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def smallest_prime_count(n: int, i: int) -> int:
    """Smallest k such that the product of the first k primes is >= n**i.

    Uses exact integer arithmetic; no logarithms decide the boundary.
    """
    if n < 2 or i < 1:
        raise ValueError("smallest_prime_count needs n >= 2 and i >= 1")
    target = n ** i
    k = 0
    while PRIMES.product(k) < target:
        k += 1
    return k


def _power_level(n: int, value: int) -> int:
    """Largest i >= 0 with n**i <= value (n >= 2)."""
    i = max(0, int(math.log2(value) / math.log2(n)) - 1) if value > 1 else 0
    while n ** (i + 1) <= value:
        i += 1
    while i > 0 and n ** i > value:
        i -= 1
    return i


# -- construction spec ------------------------------------------------------

@dataclass(frozen=True)
class ConstructionSpec:
    """Mapping-matrix family plus universe size; elements live in [1, n]."""

    family: Family
    n: int
    s: int = 0

    def __post_init__(self):
        family = self.family if isinstance(self.family, Family) else Family.parse(str(self.family))
        object.__setattr__(self, "family", family)
        if self.n < 1:
            raise InvalidConstruction("universe size n must be >= 1")
        if family is Family.EXTENDED_HAMMING and self.n < 8:
            raise InvalidConstruction("the Extended Hamming construction needs n >= 8")
        if family is Family.OLS:
            s = self.s or next_prime_at_least(ceil_sqrt(self.n))
            if not is_prime(s):
                raise InvalidConstruction(f"OLS order s={s} is not prime")
            if s * s < self.n:
                raise InvalidConstruction(f"OLS order s={s} too small: s^2 < n={self.n}")
            object.__setattr__(self, "s", s)
        elif self.s:
            raise InvalidConstruction("s only applies to the OLS construction")

    @classmethod
    def egh(cls, n: int) -> "ConstructionSpec":
        return cls(Family.EGH, n)

    @classmethod
    def ols(cls, n: int, s: int = 0) -> "ConstructionSpec":
        return cls(Family.OLS, n, s)

    @classmethod
    def extended_hamming(cls, n: int) -> "ConstructionSpec":
        return cls(Family.EXTENDED_HAMMING, n)

    @property
    def element_bytes(self) -> int:
        """Width of the xorSum field: 8 bytes when n fits in 64 bits, else 32."""
        return 8 if self.n < (1 << 64) else 32

    @property
    def element_words(self) -> int:
        return self.element_bytes // 8

    @property
    def hamming_bits(self) -> int:
        return ceil_log2(self.n)

    def __str__(self):
        extra = f", s={self.s}" if self.family is Family.OLS else ""
        return f"{self.family.value}(n={self.n}{extra})"


@dataclass(frozen=True)
class ChunkSchedule:
    chunk_sizes: tuple[int, ...]

    @property
    def cumulative(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate(self.chunk_sizes))

    def __len__(self):
        return len(self.chunk_sizes)


@dataclass(frozen=True)
class DecodabilityProfile:
    """Cumulative row counts (m_1, ..., m_d); ``dmax`` is the family's ceiling."""

    levels: tuple[int, ...]
    dmax: int

    def rows_for(self, d: int) -> int:
        return self.levels[d - 1]


def max_diff_size(spec: ConstructionSpec) -> int:
    if spec.family is Family.EGH:
        return spec.n
    if spec.family is Family.OLS:
        return spec.s
    return 3


def egh_level(n: int, chunks: int) -> int:
    """Guaranteed diff size after the first ``chunks`` EGH prime blocks.

    Follows the published profile, where level 1 is only claimed together
    with level 2 (m_1 = m_2).
    """
    if n == 1:
        return 1 if chunks >= 1 else 0
    level = _power_level(n, PRIMES.product(chunks))
    return min(level, n) if level >= 2 else 0


def max_chunks(spec: ConstructionSpec) -> int | None:
    """Number of chunks the construction can emit, ``None`` if only bounded by n.

    EGH is capped at the chunk where the guaranteed level reaches n; that
    cap is only evaluated lazily by ``has_chunk``.
    """
    if spec.family is Family.OLS:
        return spec.s
    if spec.family is Family.EXTENDED_HAMMING:
        return 3
    return None


def has_chunk(spec: ConstructionSpec, chunk_index: int) -> bool:
    if chunk_index < 1:
        return False
    limit = max_chunks(spec)
    if limit is not None:
        return chunk_index <= limit
    return chunk_index == 1 or egh_level(spec.n, chunk_index - 1) < spec.n


def _check_chunk(spec: ConstructionSpec, chunk_index: int) -> None:
    if not has_chunk(spec, chunk_index):
        raise ChunkLimitExceeded(f"{spec} has no chunk {chunk_index}")


def chunk_size(spec: ConstructionSpec, chunk_index: int) -> int:
    _check_chunk(spec, chunk_index)
    if spec.family is Family.EGH:
        return nth_prime(chunk_index)
    if spec.family is Family.OLS:
        return spec.s
    return 1 if chunk_index == 1 else spec.hamming_bits


def chunk_offset(spec: ConstructionSpec, chunk_index: int) -> int:
    """Global row index of the first row of ``chunk_index``."""
    if spec.family is Family.EGH:
        return PRIMES.prefix_sum(chunk_index - 1)
    if spec.family is Family.OLS:
        return (chunk_index - 1) * spec.s
    return 0 if chunk_index == 1 else 1 + (chunk_index - 2) * spec.hamming_bits


def chunk_schedule(spec: ConstructionSpec, max_chunks: int) -> ChunkSchedule:
    if max_chunks < 1:
        raise ValueError("max_chunks must be >= 1")
    return ChunkSchedule(tuple(chunk_size(spec, j) for j in range(1, max_chunks + 1)))


def decodability_profile(spec: ConstructionSpec, up_to_d: int) -> DecodabilityProfile:
    dmax = max_diff_size(spec)
    if up_to_d < 1 or up_to_d > dmax:
        raise DiffSizeUnsupported(f"{spec} guarantees diff sizes 1..{dmax}, asked for {up_to_d}")
    if spec.family is Family.EGH:
        if spec.n == 1:
            levels = [PRIMES.prefix_sum(1)]
        else:
            levels = [PRIMES.prefix_sum(smallest_prime_count(spec.n, max(i, 2)))
                      for i in range(1, up_to_d + 1)]
    elif spec.family is Family.OLS:
        levels = [i * spec.s for i in range(1, up_to_d + 1)]
    else:
        m = spec.hamming_bits
        levels = [1, m + 1, 2 * m + 1][:up_to_d]
    return DecodabilityProfile(tuple(levels), dmax)


def chunks_for_level(spec: ConstructionSpec, d: int) -> int:
    """Number of chunks whose cumulative rows reach the profile value m_d."""
    target = decodability_profile(spec, d).rows_for(d)
    j, total = 0, 0
    while total < target:
        j += 1
        total += chunk_size(spec, j)
    return j


def guaranteed_level(spec: ConstructionSpec, chunks: int) -> int:
    """Largest i whose profile value m_i is covered by the first ``chunks`` chunks."""
    if spec.family is Family.EGH:
        return egh_level(spec.n, chunks)
    if spec.family is Family.OLS:
        return min(chunks, spec.s)
    return min(chunks, 3)


def egh_rows_upper_bound(n: int, i: int) -> float:
    """Closed-form upper bound on m(n, i) for the EGH matrix."""
    t = math.ceil(2 * i * math.log(n))
    return t * t / (2 * math.log(t)) * (1 + 1.2762 / math.log(t))


# -- element -> rows --------------------------------------------------------

def _check_element(spec: ConstructionSpec, element: int) -> None:
    if not 1 <= element <= spec.n:
        raise ElementOutOfUniverse(f"element {element} outside [1, {spec.n}]")


def rows_for_element(spec: ConstructionSpec, chunk_index: int, element: int) -> frozenset[int]:
    """Row offsets (within the chunk) where ``element`` has a 1."""
    _check_element(spec, element)
    _check_chunk(spec, chunk_index)
    return frozenset(_rows_unchecked(spec, chunk_index, element))


def _rows_unchecked(spec: ConstructionSpec, chunk_index: int, element: int):
    if spec.family is Family.EGH:
        return (element % nth_prime(chunk_index),)
    k = element - 1
    if spec.family is Family.OLS:
        s = spec.s
        x, y = divmod(k, s)
        a = chunk_index - 1
        return (x if a == 0 else (a * x + y) % s,)
    if chunk_index == 1:
        return (0,)
    m = spec.hamming_bits
    want = 1 if chunk_index == 2 else 0
    return tuple(b for b in range(m) if (k >> (m - 1 - b)) & 1 == want)


def global_rows(spec: ConstructionSpec, chunks: int, element: int) -> list[int]:
    """Global row indices of ``element`` across the first ``chunks`` chunks."""
    out = []
    for j in range(1, chunks + 1):
        base = chunk_offset(spec, j)
        out.extend(base + r for r in _rows_unchecked(spec, j, element))
    return out


def chunk_incidence(spec: ConstructionSpec, chunk_index: int, words: np.ndarray):
    """Vectorised incidence of a batch of elements with one chunk.

    ``words`` is an ``(N, W)`` uint64 array of big-endian element words.
    Returns ``(element_index, row_offset)`` arrays listing every 1 entry.
    """
    _check_chunk(spec, chunk_index)
    words = np.asarray(words, dtype=np.uint64)
    count = words.shape[0]
    idx_all = np.arange(count, dtype=np.int64)
    if spec.family is Family.EGH:
        p = nth_prime(chunk_index)
        if words.shape[1] == 1:
            return idx_all, (words[:, 0] % np.uint64(p)).astype(np.int64)
        if p < (1 << 31):
            # Horner over 64-bit words: r = (r * 2^64 + w) mod p.
            base = np.uint64((1 << 64) % p)
            r = np.zeros(count, dtype=np.uint64)
            for j in range(words.shape[1]):
                r = (r * base + words[:, j] % np.uint64(p)) % np.uint64(p)
            return idx_all, r.astype(np.int64)
    elif spec.family is Family.OLS and words.shape[1] == 1 and spec.s < (1 << 31):
        s = np.uint64(spec.s)
        k = words[:, 0] - np.uint64(1)
        x, y = k // s, k % s
        a = chunk_index - 1
        rows = x if a == 0 else (np.uint64(a) * x + y) % s
        return idx_all, rows.astype(np.int64)
    elif spec.family is Family.EXTENDED_HAMMING and words.shape[1] == 1:
        if chunk_index == 1:
            return idx_all, np.zeros(count, dtype=np.int64)
        m = spec.hamming_bits
        k = words[:, 0] - np.uint64(1)
        want = np.uint64(1 if chunk_index == 2 else 0)
        idx_parts, row_parts = [], []
        for b in range(m):
            hit = ((k >> np.uint64(m - 1 - b)) & np.uint64(1)) == want
            sel = np.flatnonzero(hit)
            idx_parts.append(sel)
            row_parts.append(np.full(sel.size, b, dtype=np.int64))
        if not idx_parts:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(idx_parts), np.concatenate(row_parts)
    # Generic path for very large universes.
    idx, rows = [], []
    nw = words.shape[1]
    for i in range(count):
        element = 0
        for j in range(nw):
            element = (element << 64) | int(words[i, j])
        for r in _rows_unchecked(spec, chunk_index, element):
            idx.append(i)
            rows.append(r)
    return np.asarray(idx, dtype=np.int64), np.asarray(rows, dtype=np.int64)


# -- dense form and oracle --------------------------------------------------

@dataclass(frozen=True)
class BinaryMatrix:
    rows: int
    cols: int
    bits: np.ndarray  # (rows, cols) uint8, row-major

    @classmethod
    def from_rows(cls, rows) -> "BinaryMatrix":
        arr = np.asarray(rows, dtype=np.uint8)
        if arr.ndim != 2 or not np.isin(arr, (0, 1)).all():
            raise ValueError("binary matrix must be a 2-D array of 0/1")
        return cls(arr.shape[0], arr.shape[1], arr)

    def head(self, rows: int) -> "BinaryMatrix":
        return BinaryMatrix(rows, self.cols, self.bits[:rows])

    def __eq__(self, other):
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool((self.bits == other.bits).all())

    __hash__ = None


def materialize(spec: ConstructionSpec, chunks: int) -> BinaryMatrix:
    sizes = chunk_schedule(spec, chunks).chunk_sizes
    total = sum(sizes)
    if total > MATERIALIZE_MAX_ROWS or spec.n > MATERIALIZE_MAX_COLS:
        raise TooLargeToMaterialize(f"{spec} with {chunks} chunks is {total}x{spec.n}")
    bits = np.zeros((total, spec.n), dtype=np.uint8)
    base = 0
    for j, size in enumerate(sizes, start=1):
        for e in range(1, spec.n + 1):
            for r in _rows_unchecked(spec, j, e):
                bits[base + r, e - 1] = 1
        base += size
    return BinaryMatrix(total, spec.n, bits)


def stopping_distance(m: BinaryMatrix) -> int:
    """Size of the smallest stopping set (cols + 1 when none exists).

    A stopping set is a non-empty column subset whose submatrix has no row of
    weight exactly one. Exhaustive search, so limited to small matrices.
    """
    if m.cols > ORACLE_MAX_COLS:
        raise TooLargeForOracle(f"{m.cols} columns exceeds the oracle limit of {ORACLE_MAX_COLS}")
    masks = []
    for c in range(m.cols):
        mask = 0
        for r in np.flatnonzero(m.bits[:, c]).tolist():
            mask |= 1 << r
        masks.append(mask)

    def search(start, left, once, multi):
        # once: rows hit exactly once so far; multi: rows hit two or more times
        for c in range(start, m.cols - left + 1):
            col = masks[c]
            new_multi = multi | (once & col)
            new_once = (once | col) & ~new_multi
            if left == 1:
                if new_once == 0:
                    return True
            elif search(c + 1, left - 1, new_once, new_multi):
                return True
        return False

    for size in range(1, m.cols + 1):
        if search(0, size, 0, 0):
            return size
    return m.cols + 1


@lru_cache(maxsize=None)
def is_decodable(spec: ConstructionSpec, chunks: int, d: int) -> bool:
    """Oracle check: the first ``chunks`` chunks form a d-decodable matrix."""
    return stopping_distance(materialize(spec, chunks)) >= d + 1
