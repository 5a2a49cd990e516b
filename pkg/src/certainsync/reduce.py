"""Universe reduction for large identifier spaces (UniverseReduceSync).

Each round hashes both sets into a small universe ``[1, n_r]`` with a salt
both parties derive from a shared seed, reconciles the reduced sets with the
rateless protocol, maps the decoded reduced values back to original
identifiers, and compares set digests. A digest mismatch (a collision hid
part of the difference) starts another round with a fresh salt.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import matrix
from .errors import InvalidConstruction, RoundLimitExceeded
from .hashing import MASK64, checksum_hash, checksum_hash_words, salted_hash, salted_hash_words, splitmix64
from .iblt import RAW_CELL_BYTES, words_array
from .matrix import ConstructionSpec, Family
from .sync.messages import (
    DigestExchange,
    OriginalsRequest,
    OriginalsResponse,
    ReducedHello,
    SizeHandshake,
)
from .sync.protocol import ReceiverState, ReconStatus, SenderState, run_session
from .sync.transport import InMemoryChannel

DEFAULT_ROUND_CAP = 16
# Per-cell size reported for this scheme (8-byte count, 32-byte xorSum and checkSum).
REPORTED_CELL_BITS = 8 * RAW_CELL_BYTES


def reduced_universe_size(m: int, delta: int) -> int:
    """Smallest reduced universe keeping expected collisions within ``delta``."""
    if m < 1 or delta < 1:
        raise ValueError("m and delta must be >= 1")
    return max(1 << matrix.ceil_log2(m), -(-m * (m - 1) // (2 * delta)))


def expected_collisions(m: int, n_r: int) -> Fraction:
    """Expected number of colliding pairs among ``m`` uniformly hashed elements."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    return Fraction(m * (m - 1), 2 * n_r)


def salt_for_round(seed: int, i: int) -> int:
    return splitmix64(seed, i)


@dataclass(frozen=True)
class ReducePlan:
    delta: int
    seed: int
    round: int
    n_r: int

    @classmethod
    def for_round(cls, delta: int, seed: int, i: int, m: int) -> "ReducePlan":
        return cls(delta, seed, i, reduced_universe_size(m, delta))

    @property
    def salt(self) -> int:
        return salt_for_round(self.seed, self.round)


@dataclass
class ReducedMapping:
    reduced_set: frozenset
    phi: dict[int, set]

    def colliding_pairs(self) -> int:
        return sum(len(v) * (len(v) - 1) // 2 for v in self.phi.values())


def reduce_values(elements, salt: int, n_r: int) -> list[int]:
    """Reduced value ``(H(e, salt) mod n_r) + 1`` for each element, in input order."""
    elements = list(elements)
    if not elements:
        return []
    if max(elements) <= MASK64 and min(elements) >= 0:
        hashes = salted_hash_words(np.asarray(elements, dtype=np.uint64)[:, None], salt)
    else:
        hashes = salted_hash_words(words_array(elements, 4), salt)
    return ((hashes % np.uint64(n_r)) + np.uint64(1)).tolist()


def certain_mapping(elements, salt: int, n_r: int) -> ReducedMapping:
    """Map a set into ``[1, n_r]`` and keep the reverse map of originals."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    elements = list(elements)
    phi: dict[int, set] = defaultdict(set)
    for e, r in zip(elements, reduce_values(elements, salt, n_r)):
        phi[r].add(e)
    return ReducedMapping(frozenset(phi), dict(phi))


def scalar_reduce(element: int, salt: int, n_r: int) -> int:
    return salted_hash(element, salt) % n_r + 1


@dataclass(frozen=True)
class SyncDigest:
    cardinality: int
    xor_of_hashes: int


def digest(elements) -> SyncDigest:
    elements = list(elements)
    acc = 0
    if elements and max(elements) <= MASK64 and min(elements) >= 0:
        hs = checksum_hash_words(np.asarray(elements, dtype=np.uint64)[:, None])
        acc = int(np.bitwise_xor.reduce(hs)) if len(hs) else 0
    else:
        for e in elements:
            acc ^= checksum_hash(e)
    return SyncDigest(len(elements), acc)


@dataclass
class RoundRecord:
    round: int
    n_r: int
    salt: int
    chunks: int
    cells: int
    receiver_recovered: int
    sender_recovered: int
    digests_equal: bool


@dataclass
class ReduceOutcome:
    receiver_only: frozenset
    sender_only: frozenset
    rounds: int
    cells: int
    # Cell bits at the per-scheme reported width (576 bits per cell).
    bits_on_wire: int
    # Every frame byte actually exchanged, native reduced cells included.
    wire_bytes: int
    sender_final: frozenset
    receiver_final: frozenset
    history: list[RoundRecord] = field(default_factory=list)

    @property
    def delta(self) -> frozenset:
        return self.receiver_only | self.sender_only


def _reduced_spec(family: Family, n_r: int) -> ConstructionSpec:
    if family is Family.EXTENDED_HAMMING:
        raise InvalidConstruction("universe reduction supports the EGH and OLS constructions only")
    return ConstructionSpec(family, n_r)


def universe_reduce_sync(s1, s2, delta: int = 1, family: Family | str = Family.EGH, seed: int = 0,
                         round_cap: int = DEFAULT_ROUND_CAP, session_id: int = 1) -> ReduceOutcome:
    """Reconcile ``s1`` (sender) and ``s2`` (receiver) through reduced universes.

    Raises ``RoundLimitExceeded`` if the digests still differ after
    ``round_cap`` rounds.
    """
    family = family if isinstance(family, Family) else Family.parse(family)
    _reduced_spec(family, 2)
    sender_set, receiver_set = set(s1), set(s2)
    learned_by_sender: set = set()
    learned_by_receiver: set = set()
    channel = InMemoryChannel()
    s_end, r_end = channel.a, channel.b
    history: list[RoundRecord] = []
    total_cells = 0

    for i in range(1, round_cap + 1):
        # (1) size handshake; both sides derive the same plan
        s_end.send(SizeHandshake(session_id, len(sender_set)))
        r_end.send(SizeHandshake(session_id, len(receiver_set)))
        size_at_receiver = r_end.recv().set_size
        size_at_sender = s_end.recv().set_size
        m = len(sender_set) + size_at_sender
        plan = ReducePlan.for_round(delta, seed, i, max(m, 1))
        receiver_plan = ReducePlan.for_round(delta, seed, i, max(size_at_receiver + len(receiver_set), 1))
        s_end.send(ReducedHello(session_id, i, plan.n_r, delta))
        hello = r_end.recv()
        if (hello.round, hello.n_r) != (receiver_plan.round, receiver_plan.n_r):
            raise InvalidConstruction("parties disagree on the reduction plan")

        # (2)-(3) salted mapping on each side
        salt = plan.salt
        map1 = certain_mapping(sender_set, salt, plan.n_r)
        map2 = certain_mapping(receiver_set, salt, plan.n_r)

        # (4) rateless reconciliation of the reduced sets
        spec = _reduced_spec(family, plan.n_r)
        sender = SenderState(spec, set(map1.reduced_set), session_id)
        receiver = ReceiverState(spec, set(map2.reduced_set), session_id)
        outcome = run_session(sender, receiver, channel)
        if outcome.status is not ReconStatus.DONE:
            raise RoundLimitExceeded(f"round {i}: reduced reconciliation exhausted {spec}")
        total_cells += outcome.cells_used

        # (5) map back: receiver side locally, sender side by request
        r_end.send(OriginalsRequest(session_id, tuple(sorted(outcome.delta_sender_only))))
        request = s_end.recv()
        s_end.send(OriginalsResponse(session_id, tuple(
            (v, tuple(sorted(map1.phi.get(v, ())))) for v in request.reduced_values)))
        from_sender = {e for _, group in r_end.recv().groups for e in group}
        from_receiver_groups = tuple(
            (v, tuple(sorted(map2.phi.get(v, ())))) for v in sorted(outcome.delta_receiver_only))
        r_end.send(OriginalsResponse(session_id, from_receiver_groups))
        from_receiver = {e for _, group in s_end.recv().groups for e in group}

        # (6) apply
        sender_set |= from_receiver
        receiver_set |= from_sender
        learned_by_sender |= from_receiver
        learned_by_receiver |= from_sender

        # (7) digest check
        d1, d2 = digest(sender_set), digest(receiver_set)
        s_end.send(DigestExchange(session_id, d1.cardinality, d1.xor_of_hashes))
        r_end.send(DigestExchange(session_id, d2.cardinality, d2.xor_of_hashes))
        theirs = r_end.recv()
        s_end.recv()
        equal = (theirs.cardinality, theirs.xor_of_hashes) == (d2.cardinality, d2.xor_of_hashes)
        history.append(RoundRecord(i, plan.n_r, salt, outcome.chunks_used, outcome.cells_used,
                                   len(from_receiver), len(from_sender), equal))
        if equal:
            return ReduceOutcome(
                receiver_only=frozenset(learned_by_sender),
                sender_only=frozenset(learned_by_receiver),
                rounds=i,
                cells=total_cells,
                bits_on_wire=total_cells * REPORTED_CELL_BITS,
                wire_bytes=channel.bytes_sent,
                sender_final=frozenset(sender_set),
                receiver_final=frozenset(receiver_set),
                history=history,
            )
    raise RoundLimitExceeded(f"digests still differ after {round_cap} rounds")


def single_round_floor(diff_size: int, delta: int) -> float:
    """Lower bound on the first-round full-sync probability under an ideal hash."""
    if diff_size <= 0:
        return 1.0
    return max(0, diff_size - 2 * delta) / diff_size


def binomial_margin(p: float, trials: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(max(p * (1 - p), 0.0) / trials)
