"""Keyed 64-bit hashing shared by both parties.

Every element is hashed over its canonical 32-byte big-endian encoding, taken
as four 64-bit words, so a value hashes the same whether it travels in a
native (64-bit) or a raw-identifier (256-bit) cell. The chain is

    h = key
    for w in words: h = mix64(h ^ w)

where ``mix64`` is the splitmix64 finalizer. The key constants below are part
of the interoperability contract; changing them breaks compatibility with
peers running an older build.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
ELEMENT_WORDS = 4
MAX_ELEMENT = (1 << (64 * ELEMENT_WORDS)) - 1

CHECKSUM_KEY = 0x43455254_53594E43  # "CERTSYNC"
SALT_KEY = 0x52454455_43455359  # "REDUCESY"
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_M1_NP = np.uint64(_M1)
_M2_NP = np.uint64(_M2)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _M1_NP
    z ^= z >> np.uint64(27)
    z *= _M2_NP
    z ^= z >> np.uint64(31)
    return z


def to_words(value: int, nwords: int = ELEMENT_WORDS) -> tuple[int, ...]:
    """Big-endian 64-bit words of ``value`` (most significant word first)."""
    return tuple((value >> (64 * (nwords - 1 - i))) & MASK64 for i in range(nwords))


def from_words(words) -> int:
    value = 0
    for w in words:
        value = (value << 64) | int(w)
    return value


def keyed_hash(value: int, key: int) -> int:
    if value < 0 or value > MAX_ELEMENT:
        raise ValueError(f"value {value} does not fit in {ELEMENT_WORDS * 8} bytes")
    h = key
    for w in to_words(value):
        h = mix64(h ^ w)
    return h


def _prefix_state(key: int, leading_zero_words: int) -> int:
    h = key
    for _ in range(leading_zero_words):
        h = mix64(h)
    return h


def keyed_hash_words(words: np.ndarray, key: int) -> np.ndarray:
    """Vectorised ``keyed_hash`` over rows of a ``(N, W)`` uint64 word array.

    ``W`` may be smaller than four; missing leading words are zero.
    """
    words = np.asarray(words, dtype=np.uint64)
    if words.ndim == 1:
        words = words[:, None]
    nw = words.shape[1]
    h = np.full(words.shape[0], _prefix_state(key, ELEMENT_WORDS - nw), dtype=np.uint64)
    for j in range(nw):
        h = mix64_array(h ^ words[:, j])
    return h


def checksum_hash(element: int) -> int:
    """64-bit checksum used in the checkSum field of IBLT cells."""
    return keyed_hash(element, CHECKSUM_KEY)


def checksum_hash_words(words: np.ndarray) -> np.ndarray:
    return keyed_hash_words(words, CHECKSUM_KEY)


def salted_key(salt: int) -> int:
    return mix64(SALT_KEY ^ mix64((salt + GOLDEN_GAMMA) & MASK64))


def salted_hash(element: int, salt: int) -> int:
    return keyed_hash(element, salted_key(salt))


def salted_hash_words(words: np.ndarray, salt: int) -> np.ndarray:
    return keyed_hash_words(words, salted_key(salt))


def splitmix64(seed: int, index: int) -> int:
    """``index``-th output (1-based) of a splitmix64 stream seeded with ``seed``."""
    if index < 1:
        raise ValueError("index starts at 1")
    return mix64((seed + index * GOLDEN_GAMMA) & MASK64)
