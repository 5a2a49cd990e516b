"""Transaction-pool snapshots: file format and a seeded synthetic generator.

File format, one snapshot per line::

    node_id,minute,hex_id[;hex_id...]

where every ``hex_id`` is a 64-character (256-bit) transaction hash. The
generator mimics two nodes watching the same testnet: around 5000 pending
plus roughly 1000 queued transactions, block inclusion removing a slice of the
pool every minute, and each node missing a small random fraction of the
transactions it could have seen.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from ..errors import MalformedDataset

ID_HEX_CHARS = 64


@dataclass(frozen=True)
class TxPoolSnapshot:
    node_id: str
    minute: int
    ids: frozenset

    def __len__(self):
        return len(self.ids)


def format_snapshot(snap: TxPoolSnapshot) -> str:
    ids = ";".join(f"{i:064x}" for i in sorted(snap.ids))
    return f"{snap.node_id},{snap.minute},{ids}"


def write_txpool_dataset(path, snapshots) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for snap in snapshots:
            fh.write(format_snapshot(snap) + "\n")


def _parse_line(line: str, lineno: int) -> TxPoolSnapshot:
    parts = line.split(",")
    if len(parts) != 3:
        raise MalformedDataset(f"line {lineno}: expected node_id,minute,ids")
    node_id, minute_text, ids_text = parts
    if not node_id:
        raise MalformedDataset(f"line {lineno}: empty node id")
    try:
        minute = int(minute_text)
    except ValueError:
        raise MalformedDataset(f"line {lineno}: bad minute {minute_text!r}") from None
    ids = []
    for token in filter(None, ids_text.split(";")):
        if len(token) != ID_HEX_CHARS:
            raise MalformedDataset(f"line {lineno}: identifier {token[:16]}... is not 64 hex chars")
        try:
            ids.append(int(token, 16))
        except ValueError:
            raise MalformedDataset(f"line {lineno}: identifier is not hex") from None
    unique = frozenset(ids)
    if len(unique) != len(ids):
        raise MalformedDataset(f"line {lineno}: duplicate identifiers in one snapshot")
    return TxPoolSnapshot(node_id, minute, unique)


def load_txpool_dataset(path) -> list[TxPoolSnapshot]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedDataset(f"cannot read dataset {path}: {exc}") from exc
    snapshots = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            snapshots.append(_parse_line(line.strip(), lineno))
    return snapshots


def pair_by_minute(snapshots) -> list[tuple[int, TxPoolSnapshot, TxPoolSnapshot]]:
    """Group snapshots into ``(minute, first node, second node)`` triples."""
    by_minute: dict[int, dict[str, TxPoolSnapshot]] = {}
    for snap in snapshots:
        by_minute.setdefault(snap.minute, {})[snap.node_id] = snap
    pairs = []
    for minute in sorted(by_minute):
        nodes = by_minute[minute]
        if len(nodes) != 2:
            raise MalformedDataset(f"minute {minute} has {len(nodes)} node snapshots, expected 2")
        a, b = (nodes[k] for k in sorted(nodes))
        pairs.append((minute, a, b))
    return pairs


def generate_txpool_dataset(minutes: int = 60, seed: int = 0, pending: int = 5000, queued: int = 1024,
                            block_fraction: float = 0.08, miss_rate: float = 0.015,
                            nodes: tuple[str, str] = ("node1", "node2")) -> list[TxPoolSnapshot]:
    """Seeded two-node pool history with per-minute snapshots."""
    rng = random.Random(seed)

    def new_tx():
        while True:
            tx = rng.getrandbits(256)
            if tx:
                return tx

    # Every transaction carries a fixed per-node visibility drawn at arrival.
    pool: dict[int, tuple[bool, bool]] = {}

    def admit(count):
        for _ in range(count):
            pool[new_tx()] = (rng.random() >= miss_rate, rng.random() >= miss_rate)

    admit(pending + queued)
    target = pending + queued
    snapshots = []
    for minute in range(minutes):
        ordered = list(pool)
        included = rng.sample(ordered, int(len(ordered) * block_fraction * rng.uniform(0.5, 1.5)))
        for tx in included:
            del pool[tx]
        drift = rng.randint(-150, 150)
        admit(max(0, target + drift - len(pool)))
        for k, node in enumerate(nodes):
            snapshots.append(TxPoolSnapshot(node, minute, frozenset(t for t, seen in pool.items() if seen[k])))
    return snapshots
