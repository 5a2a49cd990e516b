import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certainsync import matrix
from certainsync.bench import cli
from certainsync.bench.experiment import (
    CSV_HEADER,
    CsvTable,
    ExperimentConfig,
    Scheme,
    find_late_decode,
    first_success_chunks,
    reconcile_pair,
    run_experiment,
    run_trials,
    run_txpool,
    success_curve,
)
from certainsync.bench.scenarios import gen_general_scenario, gen_superset_scenario
from certainsync.bench.txpool import (
    TxPoolSnapshot,
    generate_txpool_dataset,
    load_txpool_dataset,
    pair_by_minute,
    write_txpool_dataset,
)
from certainsync.errors import DiffSizeUnsupported, MalformedDataset, SizesExceedUniverse
from certainsync.matrix import ConstructionSpec
from certainsync.sync import reconcile_in_memory


# -- scenarios ---------------------------------------------------------------

def test_superset_scenario(rng):
    s1, s2 = gen_superset_scenario(10, 10, rng)
    assert s1.size == 0 and s2.tolist() == list(range(1, 11))
    s1, s2 = gen_superset_scenario(10**6, 3, rng)
    assert s1.size == 10**6 - 3 and len(set(s2.tolist()) ^ set(s1.tolist())) == 3
    s1, s2 = gen_superset_scenario(50, 0, rng)
    assert np.array_equal(s1, s2)
    with pytest.raises(SizesExceedUniverse):
        gen_superset_scenario(5, 6, rng)


def test_general_scenario(rng):
    a, b = gen_general_scenario(100, 0, 0, 30, rng)
    assert np.array_equal(a, b) and a.size == 30
    a, b = gen_general_scenario(100, 2, 2, 0, rng)
    assert not set(a.tolist()) & set(b.tolist())
    a, b = gen_general_scenario(10**5, 50, 70, 1000, rng)
    sa, sb = set(a.tolist()), set(b.tolist())
    assert len(sa ^ sb) == 120 and len(sa - sb) == 50 and len(sb - sa) == 70 and len(sa & sb) == 1000
    assert min(a.min(), b.min()) >= 1 and max(a.max(), b.max()) <= 10**5
    with pytest.raises(SizesExceedUniverse):
        gen_general_scenario(10, 5, 5, 1, rng)


# -- experiments -------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("CertainSync-EGH", 100, (1,), trials=0)
    with pytest.raises(DiffSizeUnsupported):
        ExperimentConfig("CertainSync-EH", 100, (4,))
    with pytest.raises(DiffSizeUnsupported):
        ExperimentConfig("CertainSync-OLS", 100, (12,))
    with pytest.raises(ValueError):
        ExperimentConfig("Nope", 100, (1,))
    assert ExperimentConfig("certainsync-egh", 100, (1,), scenario="general").scheme is Scheme.CS_EGH


def test_egh_rows_all_succeed_within_profile():
    rows = run_experiment(ExperimentConfig("CertainSync-EGH", 1000, (2,), trials=10))
    trials, mean = rows[:-1], rows[-1]
    assert len(trials) == 10 and mean[3] == "mean"
    assert all(r[7] == 1 for r in trials)
    bound = matrix.decodability_profile(ConstructionSpec.egh(1000), 2).rows_for(2)
    assert all(r[5] <= bound for r in trials)
    assert all(r[6] == r[5] * 192 for r in trials)


def test_adversarial_diff_gives_identical_cells():
    # with a fixed late-decoding diff the cell count no longer depends on the shared part
    spec = ConstructionSpec.ols(1000)
    delta = find_late_decode(spec, 2, range(1, 40))
    assert delta is not None and first_success_chunks(spec, {e: 1 for e in delta}) == 2
    counts = set()
    for shift in range(5):
        base = set(range(100 + 37 * shift, 600)) - delta
        counts.add(reconcile_in_memory(base, base | delta, spec).cells_used)
    assert counts == {2 * spec.s}


def test_extended_hamming_closed_form_end_to_end():
    spec = ConstructionSpec.extended_hamming(10**6)
    delta = find_late_decode(spec, 3, range(1, 12))
    assert delta is not None
    s2 = set(range(1, 5001)) | set(delta)
    out = reconcile_in_memory(s2 - set(delta), s2, spec)
    assert out.cells_used == 2 * 20 + 1 == 41
    assert out.cells_used * 192 == 7872


def test_ols_closed_form_end_to_end():
    spec = ConstructionSpec.ols(10**6)
    delta = find_late_decode(spec, 2, range(1, 30))
    out = reconcile_in_memory(set(range(100, 3000)) - set(delta), set(range(100, 3000)) | set(delta), spec)
    assert out.cells_used == 2 * 1009


def test_egh_has_no_late_decode_in_small_search():
    # the published EGH profile is conservative: d-sets already peel one level early
    for n in (8, 12, 20):
        assert find_late_decode(ConstructionSpec.egh(n), 2, range(1, n + 1)) is None


def test_run_experiment_is_deterministic():
    cfg = ExperimentConfig("CertainSync-OLS", 5000, (1, 5), trials=3, scenario="General", seed=9)
    a = CsvTable(CSV_HEADER, run_experiment(cfg)).to_text()
    b = CsvTable(CSV_HEADER, run_experiment(cfg)).to_text()
    assert a == b
    assert a.startswith("scheme,n,diff,trial,chunks,cells,bits,success,rounds,ms,wire_bits\n")
    assert "\r" not in a


def test_parallel_matches_serial():
    cfg = ExperimentConfig("UniverseReduceSync-EGH", 3000, (4, 10), trials=3, seed=1)
    assert run_trials(cfg, jobs=1) == run_trials(cfg, jobs=2)


def test_reduction_scheme_rows():
    rows = run_experiment(ExperimentConfig("UniverseReduceSync-OLS", 2000, (6,), trials=3, scenario="General"))
    assert all(r[7] == 1 and r[6] == r[5] * 576 for r in rows[:-1])


def test_extended_hamming_within_max_always_succeeds():
    cfg = ExperimentConfig("CertainSync-EH", 8, (1, 2, 3), trials=20)
    assert all(r[7] == 1 for r in run_experiment(cfg) if r[3] != "mean")


def test_exhaustion_reported_not_raised():
    ok, chunks, cells, _, _, got = reconcile_pair(Scheme.CS_EH, set(), {1, 2, 3, 4}, 1024)
    assert not ok and chunks == 3 and cells == 21 and got == frozenset()


def test_success_curve_is_cdf():
    records = run_trials(ExperimentConfig("CertainSync-EGH", 1000, (5,), trials=30))
    rows = success_curve(records, 192)
    rates = [float(r[5]) for r in rows]
    assert rates == sorted(rates) and rates[-1] == 1.0
    assert [r[3] for r in rows] == sorted(r[3] for r in rows)


# -- txpool ------------------------------------------------------------------

def test_empty_dataset(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert load_txpool_dataset(p) == []


def test_synthetic_pool_sizes():
    snaps = generate_txpool_dataset(minutes=20, seed=3)
    assert len(snaps) == 40
    assert all(4000 <= len(s) <= 6500 for s in snaps)
    assert all(0 < i < 2**256 for s in snaps for i in s.ids)


@given(st.integers(0, 2**32), st.integers(1, 3))
@settings(max_examples=5, deadline=None)
def test_dataset_round_trip(tmp_path_factory, seed, minutes):
    snaps = generate_txpool_dataset(minutes=minutes, seed=seed)
    p = tmp_path_factory.mktemp("tx") / "pool.csv"
    write_txpool_dataset(p, snaps)
    assert load_txpool_dataset(p) == snaps


@pytest.mark.parametrize("text", [
    "node1,0\n",
    "node1,x,00\n",
    "node1,0,abc\n",
    "node1,0," + "g" * 64 + "\n",
    "node1,0," + "1" * 64 + ";" + "1" * 64 + "\n",
    ",0," + "1" * 64 + "\n",
])
def test_malformed_dataset(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(MalformedDataset):
        load_txpool_dataset(p)


def test_pairing_requires_two_nodes():
    with pytest.raises(MalformedDataset):
        pair_by_minute([TxPoolSnapshot("a", 0, frozenset({1}))])


def test_txpool_run_small():
    snaps = generate_txpool_dataset(minutes=2, seed=1)
    records = run_txpool(snaps, ("CertainSync-EGH", "UniverseReduceSync-EGH"))
    assert len(records) == 4 and all(r.success for r in records)
    for r in records:
        assert r.bits == r.cells * (576 if r.scheme.startswith("Universe") else 192)


# -- CLI -------------------------------------------------------------------------

def test_cli_sweep_diff(tmp_path, capsys):
    out = tmp_path / "a.csv"
    assert cli.run(["sweep-diff", "--scheme", "CertainSync-EH", "--n", "1000", "--diff", "1,2,3",
                    "--trials", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 1 + 3 * 3


def test_cli_is_byte_identical(tmp_path):
    args = ["sweep-universe", "--n", "500,2000", "--diff", "3", "--trials", "2", "--seed", "4", "--out"]
    cli.run(args + [str(tmp_path / "x.csv")])
    cli.run(args + [str(tmp_path / "y.csv")])
    assert (tmp_path / "x.csv").read_bytes() == (tmp_path / "y.csv").read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.run(["sweep-diff", "--scheme", "CertainSync-EH", "--n", "100", "--diff", "9"]) == 2
    assert cli.run(["sweep-diff", "--n", "100,200", "--diff", "1"]) == 2
    assert cli.run(["txpool", "--dataset", str(tmp_path / "missing.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("n,0,zz\n")
    assert cli.run(["txpool", "--dataset", str(bad)]) == 3
    with pytest.raises(SystemExit) as exc:
        cli.run(["sweep-diff"])
    assert exc.value.code == 2


def test_cli_txpool_and_curve(tmp_path, capsys):
    ds = tmp_path / "pool.csv"
    assert cli.run(["txpool", "--minutes", "1", "--save-dataset", str(ds), "--scheme", "CertainSync-EGH"]) == 0
    assert len(load_txpool_dataset(ds)) == 2
    assert cli.run(["txpool", "--dataset", str(ds), "--scheme", "UniverseReduceSync-EGH"]) == 0
    assert cli.run(["success-curve", "--n", "1000", "--diff", "4", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert "success_rate" in out and "UniverseReduceSync-EGH" in out
