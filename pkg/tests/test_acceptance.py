"""Acceptance gate: one test per criterion, each tagged with ``criterion``.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
"""

import json
import math
import os
import subprocess
import sys
import time
from datetime import date, timedelta
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trendminer.cli import main
from trendminer.corpus import Corpus
from trendminer.formats import read_table
from trendminer.miner import MiningConfig, Threshold, apriori, brute_force_frequent
from trendminer.rules import generate_rules
from trendminer.temporal import (
    FLAT,
    ON_EVENT,
    PERIODIC,
    POST_EVENT,
    PRE_EVENT_EARLY,
    PRE_EVENT_LATE,
    DailySeries,
    bucket_daily,
    classify_peak,
    detect_markers,
    series_support,
)

from conftest import DAY, DEC_10, corpora

EVENT = date(2012, 12, 21)
SPAN_START = date(2012, 12, 10)
SPAN_DAYS = 27  # Dec 10 .. Jan 5


def random_case(rng):
    n_items = int(rng.integers(1, 13))
    n_tx = int(rng.integers(1, 65))
    density = rng.uniform(0.05, 0.6)
    letters = [f"i{k:02d}" for k in range(n_items)]
    baskets = []
    for _ in range(n_tx):
        mask = rng.random(n_items) < density
        if not mask.any():
            mask[rng.integers(n_items)] = True
        baskets.append([w for w, m in zip(letters, mask) if m])
    corpus = Corpus.from_baskets(baskets)
    if rng.random() < 0.5:
        threshold = Threshold.count(int(rng.integers(0, n_tx + 1)))
    else:
        threshold = Threshold.fraction(Fraction(int(rng.integers(0, 100)), 100))
    return corpus, MiningConfig(threshold, inclusive=bool(rng.random() < 0.5))


@pytest.fixture(scope="module")
def oracle_runs():
    rng = np.random.default_rng(20121221)
    cases = [random_case(rng) for _ in range(500)]
    start = time.perf_counter()
    runs = [(corpus, config, apriori(corpus, config), brute_force_frequent(corpus, config)) for corpus, config in cases]
    return runs, time.perf_counter() - start


@pytest.mark.criterion(1, "oracle equivalence over 500 random corpora")
def test_oracle_equivalence(oracle_runs):
    runs, elapsed = oracle_runs
    mismatches = [i for i, (_, _, fast, slow) in enumerate(runs) if fast != slow]
    kinds = {(c.min_support.kind, c.inclusive) for _, c, _, _ in runs}
    print(f"\n{len(runs)} corpora, {sum(len(r[2]) for r in runs)} frequent sets, {elapsed:.1f} s")
    assert len(runs) >= 500
    assert kinds == {("count", False), ("count", True), ("fraction", False), ("fraction", True)}
    assert all(c.total <= 64 and len(c.vocabulary) <= 12 for c, _, _, _ in runs)
    assert mismatches == []
    assert elapsed < 30


@pytest.mark.criterion(2, "antimonotonicity of mined sets")
def test_antimonotonicity(oracle_runs):
    violations = checked = 0
    for corpus, _, frequent, _ in oracle_runs[0]:
        memo = {}
        for f in frequent:
            for k in range(1, f.size):
                for sub in combinations(f.items, k):
                    if sub not in memo:
                        memo[sub] = corpus.count(sub)
                    checked += 1
                    violations += memo[sub] < f.count
    print(f"\n{checked} subset checks")
    assert violations == 0


@pytest.mark.criterion(3, "exact rule identities and shared support")
def test_rule_identities(oracle_runs):
    n_rules = 0
    for corpus, _, frequent, _ in oracle_runs[0]:
        shared = {}
        for r in generate_rules(corpus, frequent):
            n_rules += 1
            assert r.conf_fwd * r.count_x == r.count_f
            assert r.conf_bwd * r.count_y == r.count_f
            assert shared.setdefault(r.parent, r.support) == r.support
            assert r.support == Fraction(corpus.count(r.parent), corpus.total)
    print(f"\n{n_rules} rules")
    assert n_rules > 0


def write_mayans_fixture(path, n=1_000_000, f=700, x_only=13_272, y_only=30_690):
    """Messages all carry the keywords; 700 hold X and Y, 13,272 only X, 30,690 only Y."""
    texts = (
        ["21st december mayans end of the world"] * f
        + ["21st december end of the world"] * x_only
        + ["mayans end of the world"] * y_only
        + ["end of the world"] * (n - f - x_only - y_only)
    )
    rng = np.random.default_rng(7)
    order = rng.permutation(n)
    stamps = DEC_10 + np.sort(rng.integers(0, SPAN_DAYS * DAY, n))
    with open(path, "w", encoding="utf-8") as fh:
        for i, k in enumerate(order):
            created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(stamps[i])))
            fh.write(json.dumps({"id": str(i), "created_at": created, "text": texts[k]}) + "\n")


@pytest.mark.slow
@pytest.mark.criterion(4, "21st december / mayans rule reproduced through the pipeline")
def test_mayans_rule_fixture(tmp_path):
    src = tmp_path / "mayans.jsonl"
    write_mayans_fixture(src)
    out = str(tmp_path / "run")
    start = time.perf_counter()
    assert main(["ingest", str(src), "-o", out]) == 0
    assert main(["mine", "--min-support", "300", "-o", out]) == 0
    assert main(["rules", "--antecedent", "21st december", "--exact", "-o", out]) == 0
    elapsed = time.perf_counter() - start
    columns, rows = read_table(Path(out) / "rules.tsv")
    table = [dict(zip(columns, r)) for r in rows]
    (row,) = [r for r in table if r["consequent"] == "mayans"]
    print(f"\n{row} in {elapsed:.1f} s")
    assert (int(row["count_F"]), int(row["count_X"]), int(row["count_Y"])) == (700, 13_972, 31_390)
    assert Fraction(row["support"]) == Fraction("0.000700")
    assert abs(Fraction(row["conf_fwd"]) - Fraction("0.0501")) <= Fraction("0.0001")
    assert abs(Fraction(row["conf_bwd"]) - Fraction("0.0223")) <= Fraction("0.0001")
    assert elapsed < 60


def gaussian(center, width=1.5):
    return [Fraction(0.001 + 0.01 * math.exp(-(((d - center) / width) ** 2))).limit_denominator(10**9)
            for d in range(SPAN_DAYS)]


def event_offset(lead):
    return (EVENT - SPAN_START).days - lead


@pytest.mark.criterion(5, "peak classification ground truth 6/6")
def test_peak_classification():
    two_cycles = [Fraction(1 + math.sin(2 * math.pi * d / 13)).limit_denominator(10**6) / 100 for d in range(SPAN_DAYS)]
    cases = [
        (gaussian(event_offset(7)), PRE_EVENT_EARLY, 7),
        (gaussian(event_offset(3)), PRE_EVENT_LATE, 3),
        (gaussian(event_offset(0)), ON_EVENT, 0),
        (gaussian(event_offset(-2)), POST_EVENT, -2),
        ([Fraction(3, 1000)] * SPAN_DAYS, FLAT, None),
        (two_cycles, PERIODIC, None),
    ]
    got = []
    for values, expected, lead in cases:
        profile = classify_peak(DailySeries.from_values(values, SPAN_START), EVENT)
        got.append((profile.peak_class, profile.lead_days if lead is not None else None))
    expected = [(c, lead) for _, c, lead in cases]
    print(f"\n{sum(g == e for g, e in zip(got, expected))}/6 correct")
    assert got == expected


def check_conservation(corpus, itemsets):
    buckets = bucket_daily(corpus)
    assert int(buckets.counts.sum()) == corpus.total
    for items in itemsets:
        series = series_support(buckets, corpus, items)
        assert sum(int(c) for c in series.numerators) == corpus.count(items)
        weighted = sum(int(n) * v for n, v in zip(buckets.counts, series.values) if v is not None)
        assert Fraction(weighted, corpus.total) == Fraction(corpus.count(items), corpus.total)


@settings(max_examples=200, deadline=None)
@given(corpora(max_items=10, max_transactions=60, max_days=12), st.data())
def check_random_conservation(corpus, data):
    v = len(corpus.vocabulary)
    itemsets = data.draw(st.lists(st.sets(st.integers(0, v - 1), min_size=1, max_size=3), min_size=1, max_size=4))
    check_conservation(corpus, [tuple(sorted(s)) for s in itemsets])


@pytest.mark.criterion(6, "bucket conservation in exact arithmetic")
def test_conservation():
    from trendminer.synthetic import zipf_corpus

    check_random_conservation()
    corpus = zipf_corpus(50_000, 500, seed=3)
    check_conservation(corpus, [(0,), (0, 1), (1, 2, 3), (499,)])


def write_synthetic_messages(path, n=100_000, vocab=400, seed=11):
    rng = np.random.default_rng(seed)
    words = [f"w{i:03d}" for i in range(vocab)]
    weights = 1.0 / np.arange(1, vocab + 1)
    weights /= weights.sum()
    sizes = np.maximum(rng.poisson(5, n), 1)
    drawn = rng.choice(vocab, size=int(sizes.sum()), p=weights)
    stamps = DEC_10 + np.sort(rng.integers(0, SPAN_DAYS * DAY, n))
    pos = 0
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            body = " ".join(words[k] for k in drawn[pos:pos + sizes[i]])
            pos += sizes[i]
            text = f"the end of the world {body}" if i % 10 else f"world {body}"
            created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(stamps[i])))
            fh.write(json.dumps({"id": f"m{i}", "created_at": created, "text": text}) + "\n")


def run_pipeline(src, out, threads, monkeypatch):
    monkeypatch.setenv("TRENDMINER_THREADS", str(threads))
    out = str(out)
    assert main(["ingest", str(src), "-o", out]) == 0
    assert main(["mine", "--min-support", "0.01f", "--max-size", "3", "-o", out]) == 0
    assert main(["rules", "--min-confidence", "0.2", "-o", out]) == 0
    assert main(["trends", "-o", out]) == 0
    assert main(["markers", "--threshold", "0.05", "-o", out]) == 0


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


@pytest.mark.slow
@pytest.mark.criterion(7, "byte-identical output trees across runs and thread caps")
def test_determinism(tmp_path, monkeypatch):
    src = tmp_path / "synthetic.jsonl"
    write_synthetic_messages(src)
    trees = []
    for name, threads in (("t1", 1), ("t8", 8), ("t1_again", 1)):
        run_pipeline(src, tmp_path / name, threads, monkeypatch)
        trees.append(tree(tmp_path / name))
    print(f"\n{len(trees[0])} files per tree")
    assert len(trees[0]) > 5
    assert trees[0] == trees[1] == trees[2]


PERF_SCRIPT = """
import resource, time, json
from trendminer.synthetic import zipf_corpus
from trendminer.miner import MiningConfig, Threshold, apriori
corpus = zipf_corpus(1_000_000, 50_000, mean_basket=8, seed=0)
start = time.perf_counter()
frequent = apriori(corpus, MiningConfig(Threshold.count(100)))
elapsed = time.perf_counter() - start
rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
print(json.dumps({"seconds": elapsed, "rss": rss, "sets": len(frequent), "max_size": max(f.size for f in frequent)}))
"""


@pytest.mark.slow
@pytest.mark.criterion(8, "1M-transaction mining under 120 s and 2 GB")
def test_desk_scale_performance():
    env = dict(os.environ, TRENDMINER_THREADS="0")
    proc = subprocess.run([sys.executable, "-c", PERF_SCRIPT], capture_output=True, text=True, env=env, timeout=600)
    assert proc.returncode == 0, proc.stderr
    stats = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"\n{stats['sets']} sets up to size {stats['max_size']} in {stats['seconds']:.1f} s, "
          f"peak RSS {stats['rss'] / 2**30:.2f} GiB")
    assert stats["seconds"] < 120
    assert stats["rss"] < 2 * 10**9


@pytest.mark.criterion(9, "marker boundary at the threshold")
def test_marker_boundary():
    values = gaussian(event_offset(7))
    profile = classify_peak(DailySeries.from_values(values, SPAN_START), EVENT)
    top = max(values)
    (at_top,) = detect_markers([("s", profile)], top, EVENT)
    assert not at_top.exceeded and at_top.window is None
    epsilon = Fraction(1, 10**12)
    (below,) = detect_markers([("s", profile)], top - epsilon, EVENT)
    assert below.exceeded
    assert below.window == (EVENT - timedelta(days=7), EVENT)
    assert below.window_days == 7
