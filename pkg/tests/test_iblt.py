import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certainsync import matrix
from certainsync.errors import ElementOutOfUniverse, MalformedFrame, SketchShapeMismatch
from certainsync.hashing import checksum_hash as H
from certainsync.iblt import (
    Cell,
    PeelStatus,
    Sketch,
    deserialize_cells,
    encode_chunk,
    encode_signed,
    peel,
    serialize_cells,
    subtract,
)
from certainsync.matrix import ConstructionSpec

EGH5 = ConstructionSpec.egh(5)


def test_encode_chunk_examples():
    assert encode_chunk({1}, EGH5, 1) == [Cell(0, 0, 0), Cell(1, 1, H(1))]
    assert encode_chunk({1, 2, 4}, EGH5, 1) == [Cell(2, 2 ^ 4, H(2) ^ H(4)), Cell(1, 1, H(1))]
    assert encode_chunk(set(), EGH5, 3) == [Cell()] * 5
    assert all(c.is_empty for c in encode_chunk([], ConstructionSpec.ols(100), 2))


def test_encode_rejects_out_of_universe():
    with pytest.raises(ElementOutOfUniverse):
        encode_chunk({6}, EGH5, 1)
    with pytest.raises(ElementOutOfUniverse):
        encode_chunk({0}, EGH5, 1)
    with pytest.raises(ElementOutOfUniverse):
        Sketch.encode([-3], EGH5, 1)


def test_worked_example_diff_and_peel():
    local = Sketch.encode({1, 2, 4}, EGH5, 2)
    remote = Sketch.encode({1}, EGH5, 2)
    diff = subtract(local, remote)
    assert diff.count.tolist() == [2, 0, 0, 1, 1]
    assert [c.xor_sum for c in diff.cells] == [2 ^ 4, 0, 0, 4, 2]
    result = peel(diff)
    assert result.status is PeelStatus.SUCCESS
    assert result.receiver_only == {2, 4} and result.sender_only == frozenset()


def test_worked_example_fails_after_first_chunk():
    diff = subtract(Sketch.encode({1, 2, 4}, EGH5, 1), Sketch.encode({1}, EGH5, 1))
    assert diff.cells == [Cell(2, 2 ^ 4, H(2) ^ H(4)), Cell()]
    assert peel(diff).status is PeelStatus.FAIL


def test_empty_diff_peels():
    result = peel(Sketch.encode([], EGH5, 2))
    assert result.ok and result.delta == frozenset()


def test_self_subtraction_is_zero():
    s = Sketch.encode({1, 3, 5}, EGH5, 3)
    assert subtract(s, s).is_empty()


def test_shape_mismatch():
    with pytest.raises(SketchShapeMismatch):
        subtract(Sketch.encode({1}, EGH5, 1), Sketch.encode({1}, EGH5, 2))
    with pytest.raises(SketchShapeMismatch):
        subtract(Sketch.encode({1}, EGH5, 1), Sketch.encode({1}, ConstructionSpec.egh(6), 1))


@given(st.sets(st.integers(1, 500), max_size=60), st.sets(st.integers(1, 500), max_size=60))
@settings(max_examples=60, deadline=None)
def test_linearity(a, b):
    spec = ConstructionSpec.egh(500)
    b = b - a
    assert Sketch.encode(a | b, spec, 4) == Sketch.encode(a, spec, 4) + Sketch.encode(b, spec, 4)


def test_diff_locality_random_pairs():
    rnd = random.Random(3)
    for spec in (ConstructionSpec.egh(2000), ConstructionSpec.ols(2000), ConstructionSpec.extended_hamming(2000)):
        chunks = 3
        for _ in range(100 // 3 + 1):
            s1 = set(rnd.sample(range(1, 2001), rnd.randint(0, 80)))
            s2 = set(rnd.sample(range(1, 2001), rnd.randint(0, 80)))
            full = subtract(Sketch.encode(s2, spec, chunks), Sketch.encode(s1, spec, chunks))
            only = subtract(Sketch.encode(s2 - s1, spec, chunks), Sketch.encode(s1 - s2, spec, chunks))
            assert full == only


def _check_guaranteed(spec, levels, delta_iter, rnd):
    for delta in delta_iter:
        k = len(delta)
        for i in levels:
            if i < k or i > matrix.max_diff_size(spec):
                continue
            signed = {e: rnd.choice((1, -1)) for e in delta}
            chunks = matrix.chunks_for_level(spec, i)
            result = peel(encode_signed(signed, spec, chunks))
            assert result.ok, (spec, delta, i)
            assert result.receiver_only == {e for e, s in signed.items() if s > 0}
            assert result.sender_only == {e for e, s in signed.items() if s < 0}


@pytest.mark.parametrize("n", range(8, 13))
def test_guaranteed_decode_exhaustive_small_n(n):
    rnd = random.Random(n)
    for spec in (ConstructionSpec.egh(n), ConstructionSpec.ols(n), ConstructionSpec.extended_hamming(n)):
        levels = range(1, min(matrix.max_diff_size(spec), 4) + 1)
        subsets = (set(c) for k in range(0, 5) for c in itertools.combinations(range(1, n + 1), k))
        _check_guaranteed(spec, levels, subsets, rnd)


@pytest.mark.parametrize("spec", [ConstructionSpec.egh(10**4), ConstructionSpec.ols(10**4),
                                  ConstructionSpec.extended_hamming(10**4)])
def test_guaranteed_decode_randomised(spec):
    rnd = random.Random(11)
    top = min(matrix.max_diff_size(spec), 12)
    deltas = (set(rnd.sample(range(1, spec.n + 1), rnd.randint(1, top))) for _ in range(1000))
    _check_guaranteed(spec, range(1, top + 1), deltas, rnd)


@given(st.sets(st.integers(1, 1000), max_size=40), st.sets(st.integers(1, 1000), max_size=40))
@settings(max_examples=60, deadline=None)
def test_sign_swap(a, b):
    spec = ConstructionSpec.egh(1000)
    chunks = matrix.chunks_for_level(spec, max(2, len(a ^ b)))
    sa, sb = Sketch.encode(a, spec, chunks), Sketch.encode(b, spec, chunks)
    forward, backward = peel(subtract(sa, sb)), peel(subtract(sb, sa))
    assert forward.ok and backward.ok
    assert forward.receiver_only == backward.sender_only == a - b
    assert forward.sender_only == backward.receiver_only == b - a


@given(st.dictionaries(st.integers(1, 300), st.sampled_from([1, -1]), max_size=12))
@settings(max_examples=60, deadline=None)
def test_peel_idempotent_on_success(signed):
    spec = ConstructionSpec.egh(300)
    diff = encode_signed(signed, spec, matrix.chunks_for_level(spec, max(2, len(signed))))
    result = peel(diff)
    assert result.ok
    recovered = {e: 1 for e in result.receiver_only} | {e: -1 for e in result.sender_only}
    assert encode_signed(recovered, spec, diff.chunks_present) == diff


def test_forged_pure_cell_is_rejected():
    # a cell that looks pure but whose value does not map to that row must not be peeled
    spec = ConstructionSpec.egh(100)
    diff = encode_signed({}, spec, 2)
    diff.count[0] = 1
    diff.xor[0, 0] = 3  # 3 mod 2 = 1, so it belongs in row 1, not row 0
    diff.chk[0] = H(3)
    assert peel(diff).status is PeelStatus.FAIL


def test_wide_elements_round_trip_through_peel():
    spec = ConstructionSpec.egh(2**256 - 1)
    rnd = random.Random(5)
    shared = {rnd.getrandbits(256) | 1 for _ in range(200)}
    a_only = {rnd.getrandbits(256) | 1 for _ in range(6)}
    b_only = {rnd.getrandbits(256) | 1 for _ in range(4)}
    chunks = matrix.chunks_for_level(spec, 10)
    result = peel(subtract(Sketch.encode(shared | b_only, spec, chunks), Sketch.encode(shared | a_only, spec, chunks)))
    assert result.ok
    assert result.receiver_only == b_only and result.sender_only == a_only


# -- serialization -----------------------------------------------------------

def test_cell_sizes():
    assert serialize_cells([Cell()]) == bytes(24)
    assert len(serialize_cells([Cell()], raw=True)) == 72


cells_native = st.builds(Cell, st.integers(-2**63, 2**63 - 1), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
cells_raw = st.builds(Cell, st.integers(-2**63, 2**63 - 1), st.integers(0, 2**256 - 1), st.integers(0, 2**64 - 1))


@given(st.lists(cells_native, max_size=40))
def test_native_round_trip(cells):
    data = serialize_cells(cells)
    assert len(data) == 24 * len(cells)
    assert deserialize_cells(data) == cells
    assert serialize_cells(deserialize_cells(data)) == data


@given(st.lists(cells_raw, max_size=40))
def test_raw_round_trip(cells):
    data = serialize_cells(cells, raw=True)
    assert deserialize_cells(data, raw=True) == cells


def test_round_trip_thousand_random_cells():
    rnd = random.Random(1)
    cells = [Cell(rnd.randint(-2**63, 2**63 - 1), rnd.getrandbits(64), rnd.getrandbits(64)) for _ in range(1000)]
    assert deserialize_cells(serialize_cells(cells)) == cells


def test_deserialize_errors():
    with pytest.raises(MalformedFrame):
        deserialize_cells(bytes(23))
    bad = bytes(8) + bytes(32) + (1 << 64).to_bytes(32, "big")
    with pytest.raises(MalformedFrame):
        deserialize_cells(bad, raw=True)
    with pytest.raises(MalformedFrame):
        serialize_cells([Cell(0, 1 << 64, 0)])


def test_sketch_cells_round_trip():
    spec = ConstructionSpec.ols(50)
    s = Sketch.encode(set(range(1, 40, 3)), spec, 3)
    assert Sketch.from_cells(spec, s.cells, 3) == s
    with pytest.raises(SketchShapeMismatch):
        Sketch.from_cells(spec, s.cells[:-1], 3)


def test_vectorised_encode_matches_scalar_definition():
    rnd = random.Random(9)
    for spec in (ConstructionSpec.egh(10**5), ConstructionSpec.ols(10**5), ConstructionSpec.extended_hamming(10**5)):
        elements = set(rnd.sample(range(1, 10**5 + 1), 300))
        for j in range(1, 4):
            expected = [[0, 0, 0] for _ in range(matrix.chunk_size(spec, j))]
            for e in elements:
                for r in matrix.rows_for_element(spec, j, e):
                    expected[r][0] += 1
                    expected[r][1] ^= e
                    expected[r][2] ^= H(e)
            assert encode_chunk(elements, spec, j) == [Cell(*c) for c in expected]


def test_numpy_input_equals_set_input():
    spec = ConstructionSpec.egh(1000)
    arr = np.array([5, 17, 999, 3], dtype=np.int64)
    assert Sketch.encode(arr, spec, 3) == Sketch.encode({5, 17, 999, 3}, spec, 3)
