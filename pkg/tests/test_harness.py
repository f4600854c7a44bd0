import csv
import json

import numpy as np
import pytest

from conftest import ref_hash64
from freesketch.cli import main
from freesketch.errors import InvalidArgument
from freesketch.harness import (ExperimentConfig, bench_runtime, checkpoint_positions, run_analysis,
                                run_experiment, run_trials)
from freesketch.hashing import derive_seed, key_digest
from freesketch.shared import CseArray, VhllArray
from freesketch.stream import StreamSpec, encode, generate_stream, write_edges
from freesketch.base import HllSketch, LpcSketch
from freesketch.tracking import build_tracker, hll_size_for, method_seed

TEN = [("a", "1"), ("b", "1"), ("a", "2"), ("a", "1"), ("c", "9"),
       ("b", "3"), ("a", "4"), ("c", "9"), ("b", "5"), ("a", "6")]


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_checkpoint_positions():
    assert checkpoint_positions(10, 0) == [0]
    assert checkpoint_positions(4, 100) == [25, 50, 75, 100]
    assert checkpoint_positions(5, 3) == [1, 2, 3]
    assert checkpoint_positions((7, 200, 3), 50) == [3, 7, 50]


def test_config_validation():
    bad = [dict(methods=("Foo",)), dict(methods=()), dict(delta=0.0), dict(m=0), dict(register_width=9),
           dict(memory_bits=100, m=200, methods=("CSE",)), dict(memory_bits=500, m=100, methods=("vHLL",)),
           dict(checkpoints=0), dict(trials=0)]
    for kw in bad:
        with pytest.raises(InvalidArgument):
            ExperimentConfig(**kw).validate()


def test_empty_stream(tmp_path):
    (tmp_path / "empty.tsv").write_text("")
    cfg = ExperimentConfig(input=str(tmp_path / "empty.tsv"), out_dir=str(tmp_path / "out"),
                           methods=("FreeBS", "FreeRS", "CSE", "vHLL", "LPC", "HLL"), memory_bits=4096, m=16)
    res = run_experiment(cfg)
    assert res.checkpoints == [0]
    assert all(est.size == 0 for est in res.estimates.values())
    assert all(row[2] == 0.0 and row[3] == 0.0 for row in res.detection)
    assert _read(tmp_path / "out" / "FreeBS" / "t_0" / "rse.csv") == [["n", "count", "rse"]]


def test_freebs_hand_trace(tmp_path):
    write_edges(tmp_path / "ten.tsv", TEN)
    M, seed = 16, 5
    cfg = ExperimentConfig(input=str(tmp_path / "ten.tsv"), out_dir=str(tmp_path / "out"), methods=("FreeBS",),
                           memory_bits=M, seed=seed, checkpoints=1)
    run_experiment(cfg)
    # Algorithm 1 by hand: a pair flips a zero bit -> add M/m0 with m0 before the flip
    s = derive_seed(seed, "FreeBS")
    bits, m0, expect = set(), M, {}
    for u, d in TEN:
        h = ref_hash64(key_digest(d), ref_hash64(key_digest(u), s))
        pos = ((h >> 32) * M) >> 32
        if pos not in bits:
            expect[u] = expect.get(u, 0.0) + M / m0
            bits.add(pos)
            m0 -= 1
    rows = _read(tmp_path / "out" / "FreeBS" / "t_10" / "estimates.csv")[1:]
    assert {u: float(e) for u, e in rows} == {u: expect.get(u, 0.0) for u in "abc"}


def test_replay_determinism_and_manifest(tmp_path):
    cfg = dict(input="zipf:users=200,exponent=1.3,max=300,dup=1.5,seed=2", memory_bits=1 << 14, m=64,
               methods=("FreeBS", "FreeRS", "CSE", "vHLL", "LPC", "HLL"), checkpoints=3)
    run_experiment(ExperimentConfig(out_dir=str(tmp_path), **cfg))
    a = _tree(tmp_path)
    for path in tmp_path.rglob("*.csv"):
        path.unlink()
    run_experiment(ExperimentConfig(out_dir=str(tmp_path), **cfg))
    b = _tree(tmp_path)
    assert a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    manifest = json.loads(a["run.json"])
    assert manifest["config"]["m"] == 64
    assert manifest["input"]["distinct_pairs"] > 0
    assert "time" not in json.dumps(manifest).lower()
    assert {"detection.csv", "FreeBS/t_{}/rse.csv".format(manifest["checkpoints"][-1])} <= a.keys()


def test_method_isolation(tmp_path):
    cfg = dict(input="zipf:users=150,exponent=1.3,max=200,seed=5", memory_bits=1 << 14, m=64, checkpoints=2)
    run_experiment(ExperimentConfig(out_dir=str(tmp_path / "all"), methods=("FreeBS", "FreeRS", "CSE", "vHLL"),
                                    **cfg))
    run_experiment(ExperimentConfig(out_dir=str(tmp_path / "one"), methods=("vHLL",), **cfg))
    full, solo = _tree(tmp_path / "all"), _tree(tmp_path / "one")
    for key, blob in solo.items():
        if key.startswith("vHLL/"):
            assert full[key] == blob


def test_counter_tracking_equivalence():
    s = generate_stream(StreamSpec(40, 1.3, 60, duplicate_factor=1.5, seed=8))
    e = encode(s)
    last = {}
    for t, u in enumerate(e.uidx.tolist()):
        last[u] = t
    for name, cls, extra in (("CSE", CseArray, ()), ("vHLL", VhllArray, (5,))):
        tr = build_tracker(name, memory_bits=1 << 12, m=32, w=5, n_users=e.n_users, seed=3)
        tr.feed(e, 0, len(e))
        # the counter is the fresh estimate taken right after the user's final arrival
        for u, t in last.items():
            arr = cls(tr.state.M, 32, *extra, seed=tr.state.seed)
            arr.update_many(e.ukeys[: t + 1], e.ikeys[: t + 1])
            assert tr.counters[u] == arr.estimate(int(e.ukeys[t]))
        final_user = int(e.uidx[-1])
        assert tr.counters[final_user] == tr.state.estimate(int(e.ukeys[-1]))


def test_per_user_trackers_match_sketch_classes():
    s = generate_stream(StreamSpec(30, 1.3, 300, seed=4))
    e = encode(s)
    lpc = build_tracker("LPC", memory_bits=30 * 128, m=1, w=5, n_users=e.n_users, seed=9)
    hll = build_tracker("HLL", memory_bits=30 * 128 * 5, m=1, w=5, n_users=e.n_users, seed=9)
    lpc.feed(e, 0, len(e))
    hll.feed(e, 0, len(e))
    for u in range(e.n_users):
        mask = e.uidx == u
        ukey = int(e.ukeys[mask][0])
        seed_l = int(ref_hash64(ukey, method_seed(9, "LPC")))
        seed_h = int(ref_hash64(ukey, method_seed(9, "HLL")))
        assert lpc.counters[u] == LpcSketch(lpc.m, seed_l).insert_many(e.ikeys[mask]).estimate()
        assert hll.counters[u] == HllSketch(hll.m, 5, seed_h).insert_many(e.ikeys[mask]).estimate()


def test_hll_size_rounding_and_skip(tmp_path):
    assert [hll_size_for(b) for b in (5, 16, 40, 100, 128, 300)] == [0, 16, 32, 64, 128, 300]
    cfg = ExperimentConfig(input="zipf:users=500,max=50,seed=1", memory_bits=20_000, methods=("FreeBS", "HLL"),
                           out_dir=str(tmp_path), checkpoints=1)
    res = run_experiment(cfg)
    assert "HLL" in res.skipped and "HLL" not in res.estimates
    assert "HLL" in json.loads((tmp_path / "run.json").read_text())["skipped"]


def test_clamp_applies_to_rse_only():
    cfg = dict(input="zipf:users=300,exponent=1.2,max=50,seed=3", memory_bits=4096, m=256, methods=("CSE",),
               checkpoints=1, out_dir=None)
    raw = run_experiment(ExperimentConfig(**cfg))
    clamped = run_experiment(ExperimentConfig(clamp=True, **cfg))
    assert (raw.estimates["CSE"] < 0).any()
    assert raw.detection == clamped.detection
    assert not np.array_equal(raw.final_rse("CSE")[2], clamped.final_rse("CSE")[2])


def test_trials_write_separate_dirs(tmp_path):
    cfg = ExperimentConfig(input="zipf:users=50,max=40,seed=1", memory_bits=4096, m=32, trials=2, workers=2,
                           out_dir=str(tmp_path), checkpoints=1)
    res = run_trials(cfg)
    assert len(res) == 2 and (tmp_path / "trial_0" / "run.json").exists() and (tmp_path / "trial_1").exists()
    assert not np.array_equal(res[0].estimates["FreeBS"], res[1].estimates["FreeBS"])


def test_bench_rows(tmp_path):
    e = encode(generate_stream(StreamSpec(100, 1.2, 200, seed=1)))
    cfg = ExperimentConfig(methods=("FreeBS", "vHLL", "LPC"), memory_bits=1 << 14, out_dir=str(tmp_path))
    rows = bench_runtime(cfg, [16, 64], edges=e, repeats=1, warmup_edges=100)
    assert [(r[0], r[1]) for r in rows] == [("FreeBS", ""), ("vHLL", 16), ("vHLL", 64), ("LPC", 16), ("LPC", 64)]
    assert all(r[2] > 0 and r[3] == len(e) for r in rows)
    assert _read(tmp_path / "timing.csv")[0] == ["method", "m", "ns_per_edge", "edges"]


def test_analysis_table(tmp_path):
    cfg = ExperimentConfig(input="zipf:users=100,exponent=1.5,max=400,seed=2", memory_bits=4096, m=64,
                           trials=20, out_dir=str(tmp_path))
    rows = run_analysis(cfg, (10, 100))
    assert len(rows) == 8
    header = _read(tmp_path / "analysis.csv")[0]
    assert header == ["method", "M", "m", "w", "n", "n_s", "theory_var", "empirical_var", "theory_E_inv_q",
                      "empirical_E_inv_q"]
    bs = [r for r in rows if r[0] == "FreeBS"]
    assert bs[0][1] == 4096 and bs[0][5] == 10 and bs[0][6] > 0 and bs[0][8] >= 1


def test_cli_generate_run_analyze(tmp_path, capsys):
    edges = tmp_path / "e.tsv.gz"
    assert main(["generate", "--users", "50", "--max-cardinality", "40", "--duplicates", "2", "--out",
                 str(edges)]) == 0
    assert main(["run", "--input", str(edges), "--memory-bits", "8192", "--m", "32", "--methods",
                 "FreeBS,FreeRS,CSE,vHLL", "--checkpoints", "2", "--out-dir", str(tmp_path / "r"),
                 "--figures"]) == 0
    assert (tmp_path / "r" / "run.json").exists() and (tmp_path / "r" / "rse.png").exists()
    assert main(["analyze", "--input", "zipf:users=40,max=60,seed=1", "--memory-bits", "4096", "--m", "32",
                 "--trials", "5", "--targets", "10", "--out-dir", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "analysis.csv").exists()
    assert main(["bench", "--input", str(edges), "--methods", "FreeBS", "--m-values", "32", "--repeats", "1",
                 "--out-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "timing.csv").exists()


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--input", str(tmp_path / "missing.tsv"), "--out-dir", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["run", "--methods", "Nope", "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_vhll_global_saturation_is_flagged():
    e = encode(generate_stream(StreamSpec(3, 1.0, 5, seed=1)))
    tr = build_tracker("vHLL", memory_bits=256 * 5, m=16, w=5, n_users=e.n_users, seed=2)
    st = tr.state
    st.registers[:] = 1
    st.global_sum, st.global_zeros = st.M / 2.0, 0
    tr.feed(e, 0, len(e))
    assert tr.saturation_events == len(e)
    assert np.isfinite(tr.counters[: e.n_users]).all()
