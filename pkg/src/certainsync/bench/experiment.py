"""Trial orchestration, bit accounting and CSV output for the benchmark CLI."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import matrix
from ..errors import CertainSyncError, DiffSizeUnsupported, ExhaustedBeforeDecode, RoundLimitExceeded
from ..iblt import encode_signed, peel
from ..matrix import ConstructionSpec, Family
from ..reduce import REPORTED_CELL_BITS as REDUCE_CELL_BITS
from ..reduce import universe_reduce_sync
from ..sync.protocol import reconcile_in_memory
from .scenarios import gen_general_scenario, gen_superset_scenario
from .txpool import pair_by_minute

# Reported cell width for the direct scheme: 64-bit count, xorSum and checkSum.
DIRECT_CELL_BITS = 192
# Raw 256-bit identifiers are used directly as elements of [1, 2^256 - 1].
TXID_UNIVERSE = (1 << 256) - 1

CSV_HEADER = ("scheme", "n", "diff", "trial", "chunks", "cells", "bits", "success", "rounds", "ms",
              "wire_bits")
CURVE_HEADER = ("scheme", "n", "diff", "cells", "bits", "success_rate")
TXPOOL_HEADER = ("minute", "scheme", "diff", "cells", "bits", "wire_bits", "rounds", "success")


class Scheme(str, enum.Enum):
    CS_EGH = "CertainSync-EGH"
    CS_OLS = "CertainSync-OLS"
    CS_EH = "CertainSync-EH"
    URS_EGH = "UniverseReduceSync-EGH"
    URS_OLS = "UniverseReduceSync-OLS"

    @property
    def family(self) -> Family:
        return {"EGH": Family.EGH, "OLS": Family.OLS, "EH": Family.EXTENDED_HAMMING}[self.value.split("-")[1]]

    @property
    def reduces(self) -> bool:
        return self.value.startswith("UniverseReduce")

    @property
    def cell_bits(self) -> int:
        return REDUCE_CELL_BITS if self.reduces else DIRECT_CELL_BITS


class Scenario(str, enum.Enum):
    SUPERSET = "Superset"
    GENERAL = "General"


def _parse_enum(cls, text):
    if isinstance(text, cls):
        return text
    for member in cls:
        if member.value.lower() == str(text).lower() or member.name.lower() == str(text).lower():
            return member
    raise ValueError(f"unknown {cls.__name__.lower()} {text!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: Scheme
    n: int
    diffs: tuple[int, ...]
    trials: int = 10
    scenario: Scenario = Scenario.SUPERSET
    delta: int = 1
    seed: int = 0
    timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", _parse_enum(Scheme, self.scheme))
        object.__setattr__(self, "scenario", _parse_enum(Scenario, self.scenario))
        object.__setattr__(self, "diffs", tuple(int(d) for d in self.diffs))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if not self.diffs or min(self.diffs) < 0:
            raise ValueError("diff sizes must be non-negative and non-empty")
        if max(self.diffs) > self.n:
            raise DiffSizeUnsupported(f"diff size {max(self.diffs)} exceeds the universe size {self.n}")
        if not self.scheme.reduces:
            limit = matrix.max_diff_size(self.spec)
            if max(self.diffs) > limit:
                raise DiffSizeUnsupported(f"{self.spec} guarantees at most {limit} differences")

    @property
    def spec(self) -> ConstructionSpec:
        return ConstructionSpec(self.scheme.family, self.n)


@dataclass
class TrialRecord:
    scheme: str
    n: int
    diff: int
    trial: int
    chunks: int
    cells: int
    bits: int
    success: bool
    rounds: int
    ms: float
    wire_bits: int

    def row(self) -> list:
        return [self.scheme, self.n, self.diff, self.trial, self.chunks, self.cells, self.bits,
                int(self.success), self.rounds, f"{self.ms:.3f}", self.wire_bits]


def trial_rng(seed: int, diff: int, trial: int) -> np.random.Generator:
    """Independent stream per (diff, trial) so parallel runs match serial ones."""
    return np.random.default_rng([seed & ((1 << 64) - 1), diff, trial])


def make_sets(config: ExperimentConfig, diff: int, rng: np.random.Generator):
    if config.scenario is Scenario.SUPERSET:
        return gen_superset_scenario(config.n, diff, rng)
    a_only = diff // 2
    return gen_general_scenario(config.n, a_only, diff - a_only, (config.n - diff) // 2, rng)


def reconcile_pair(scheme: Scheme, s1, s2, n: int, delta: int = 1, seed: int = 0):
    """Run one scheme on a set pair.

    Returns ``(success, chunks, cells, rounds, wire_bytes, recovered_delta)``;
    a scheme that gives up reports ``success=False`` with its partial cost.
    """
    if scheme.reduces:
        try:
            out = universe_reduce_sync(s1, s2, delta=delta, family=scheme.family, seed=seed)
        except RoundLimitExceeded:
            return False, 0, 0, 0, 0, frozenset()
        chunks = sum(r.chunks for r in out.history)
        return True, chunks, out.cells, out.rounds, out.wire_bytes, out.delta
    spec = ConstructionSpec(scheme.family, n)
    try:
        out = reconcile_in_memory(s1, s2, spec)
    except ExhaustedBeforeDecode as exc:
        o = exc.outcome
        return False, o.chunks_used, o.cells_used, 1, o.wire_bytes, frozenset()
    return True, out.chunks_used, out.cells_used, 1, out.wire_bytes, out.delta


def run_trial(config: ExperimentConfig, diff: int, trial: int) -> TrialRecord:
    rng = trial_rng(config.seed, diff, trial)
    s1, s2 = make_sets(config, diff, rng)
    s1_set, s2_set = set(s1.tolist()), set(s2.tolist())
    truth = s1_set ^ s2_set
    assert len(truth) == diff
    start = time.perf_counter()
    try:
        ok, chunks, cells, rounds, wire_bytes, got = reconcile_pair(
            config.scheme, s1_set, s2_set, config.n, config.delta, config.seed + trial)
    except CertainSyncError:
        ok, chunks, cells, rounds, wire_bytes, got = False, 0, 0, 0, 0, frozenset()
    ms = (time.perf_counter() - start) * 1e3 if config.timing else 0.0
    return TrialRecord(config.scheme.value, config.n, diff, trial, chunks, cells,
                       cells * config.scheme.cell_bits, ok and got == truth, rounds, ms, wire_bytes * 8)


def _run_one(args):
    return run_trial(*args)


def run_trials(config: ExperimentConfig, jobs: int = 1) -> list[TrialRecord]:
    tasks = [(config, d, t) for d in config.diffs for t in range(config.trials)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def _mean(values) -> str:
    return f"{sum(values) / len(values):.3f}"


def mean_row(records: list[TrialRecord]) -> list:
    r0 = records[0]
    return [r0.scheme, r0.n, r0.diff, "mean",
            _mean([r.chunks for r in records]), _mean([r.cells for r in records]),
            _mean([r.bits for r in records]), _mean([int(r.success) for r in records]),
            _mean([r.rounds for r in records]), _mean([r.ms for r in records]),
            _mean([r.wire_bits for r in records])]


def experiment_rows(records: list[TrialRecord]) -> list[list]:
    """Per-trial rows, each diff size followed by its mean row."""
    rows = []
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.n, rec.diff), []).append(rec)
    for group in groups.values():
        rows.extend(r.row() for r in group)
        rows.append(mean_row(group))
    return rows


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[list]:
    return experiment_rows(run_trials(config, jobs))


def success_curve(records: list[TrialRecord], cell_bits: int) -> list[list]:
    """Empirical fraction of trials decoded within each observed cell budget."""
    rows = []
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.scheme, rec.n, rec.diff), []).append(rec)
    for (scheme, n, diff), group in groups.items():
        done = sorted(r.cells for r in group if r.success)
        for c in sorted(set(done)):
            rate = sum(1 for x in done if x <= c) / len(group)
            rows.append([scheme, n, diff, c, c * cell_bits, f"{rate:.3f}"])
    return rows


def first_success_chunks(spec: ConstructionSpec, diff: dict[int, int]) -> int | None:
    """Fewest chunks after which the signed difference ``diff`` peels."""
    j = 1
    while matrix.has_chunk(spec, j):
        if peel(encode_signed(diff, spec, j)).ok:
            return j
        j += 1
    return None


def find_late_decode(spec: ConstructionSpec, d: int, pool, limit: int = 20000) -> frozenset | None:
    """Search ``d``-subsets of ``pool`` for one that first peels at the guaranteed level.

    Returns ``None`` when no candidate among the first ``limit`` subsets
    needs all of the level-``d`` chunks, in which case only the upper bound
    is observable for this configuration.
    """
    need = matrix.chunks_for_level(spec, d)
    for k, combo in enumerate(itertools.combinations(sorted(e for e in pool if 1 <= e <= spec.n), d)):
        if k >= limit:
            break
        if first_success_chunks(spec, {e: 1 for e in combo}) == need:
            return frozenset(combo)
    return None


@dataclass
class TxPoolRecord:
    minute: int
    scheme: str
    diff: int
    cells: int
    bits: int
    wire_bits: int
    rounds: int
    success: bool

    def row(self) -> list:
        return [self.minute, self.scheme, self.diff, self.cells, self.bits, self.wire_bits,
                self.rounds, int(self.success)]


DEFAULT_TXPOOL_SCHEMES = (Scheme.CS_EGH, Scheme.URS_EGH, Scheme.URS_OLS)


def run_txpool(snapshots, schemes=DEFAULT_TXPOOL_SCHEMES, delta: int = 1, seed: int = 0) -> list[TxPoolRecord]:
    """Reconcile the two nodes' pools at every minute with each scheme.

    Direct schemes treat the 256-bit identifiers as elements of
    ``[1, 2^256 - 1]``; reduction schemes hash them down each round.
    """
    records = []
    for minute, a, b in pair_by_minute(snapshots):
        truth = a.ids ^ b.ids
        for scheme in schemes:
            scheme = _parse_enum(Scheme, scheme)
            ok, _, cells, rounds, wire_bytes, got = reconcile_pair(
                scheme, a.ids, b.ids, TXID_UNIVERSE, delta, seed + minute)
            records.append(TxPoolRecord(minute, scheme.value, len(truth), cells, cells * scheme.cell_bits,
                                        wire_bytes * 8, rounds, ok and got == truth))
    return records


@dataclass
class CsvTable:
    header: tuple
    rows: list = field(default_factory=list)

    def to_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_text())
