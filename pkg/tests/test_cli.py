import json
import subprocess
import sys

import pytest

from trendminer.cli import main
from trendminer.corpus import Corpus
from trendminer.formats import load_corpus, read_table, save_corpus
from trendminer.miner import MiningConfig, Threshold, brute_force_frequent

from conftest import DAY, DEC_10


def write_jsonl(path, texts, day_of=lambda i: i % 5):
    with open(path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(texts):
            stamp = DEC_10 + day_of(i) * DAY + 3600
            created = f"2012-12-{10 + (stamp - DEC_10) // DAY:02d}T01:00:00Z"
            fh.write(json.dumps({"id": str(i), "created_at": created, "text": text}) + "\n")


TEN = [
    "The end of the world is near",
    "end of the world mayans",
    "hello world",
    "the end",
    "mayan calendar end world",
    "world cup tonight",
    "it is the END, the World ends",
    "nothing to see",
    "worlds end",
    "world world",
]


def test_ingest_keeps_keyword_messages(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    write_jsonl(src, TEN)
    assert main(["ingest", str(src), "-o", str(tmp_path / "out"), "--min-df", "1"]) == 0
    corpus, meta = load_corpus(tmp_path / "out" / "corpus.tmc")
    assert corpus.total == 4
    assert meta["report"]["keyword_retained"] == 4
    assert "keyword_retained\t4" in capsys.readouterr().out
    header = (tmp_path / "out" / "ingest_report.tsv").read_text().splitlines()
    assert header[0] == "# trendminer ingest"
    assert "# keywords: end,world" in header


def test_ingest_all_malformed_fails(tmp_path, capsys):
    src = tmp_path / "bad.jsonl"
    src.write_text("{oops\nnot json\n[]\n", encoding="utf-8")
    assert main(["ingest", str(src), "-o", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err
    assert "trendminer: error:" in err and "3 malformed" in err


def test_ingest_missing_file_fails(tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "nope.jsonl"), "-o", str(tmp_path / "out")]) == 1
    assert "trendminer: error:" in capsys.readouterr().err


def test_ingest_is_byte_identical(tmp_path):
    src = tmp_path / "in.jsonl"
    write_jsonl(src, TEN)
    for name in ("a", "b"):
        assert main(["ingest", str(src), "-o", str(tmp_path / name), "--min-df", "1"]) == 0
    assert (tmp_path / "a" / "corpus.tmc").read_bytes() == (tmp_path / "b" / "corpus.tmc").read_bytes()


def test_mine_matches_oracle(tmp_path, toy):
    save_corpus(toy, tmp_path / "corpus.tmc")
    assert main(["mine", "--min-support", "0.5f", "-o", str(tmp_path)]) == 0
    columns, rows = read_table(tmp_path / "frequent.tsv")
    assert columns == ["items", "size", "count", "support"]
    oracle = brute_force_frequent(toy, MiningConfig(Threshold.fraction("0.5")))
    assert [(r[0], int(r[2])) for r in rows] == [(toy.vocabulary.label(f.items), f.count) for f in oracle]
    assert rows == [["a", "1", "3", "0.75"], ["b", "1", "3", "0.75"]]
    text = (tmp_path / "frequent.tsv").read_text()
    assert "# min_support: 0.5f\n" in text and "# comparison: strict\n" in text


def test_mine_rejects_bad_threshold(tmp_path, toy, capsys):
    save_corpus(toy, tmp_path / "corpus.tmc")
    assert main(["mine", "--min-support", "0.5", "-o", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("trendminer: error:")


def test_missing_cache_fails(tmp_path, capsys):
    assert main(["mine", "-o", str(tmp_path)]) == 1
    assert "trendminer: error:" in capsys.readouterr().err


def demo(tmp_path):
    baskets = [["mayan", "calendar", "doom"], ["mayan", "calendar"], ["mayan"], ["calendar", "doom"]] * 6
    stamps = [DEC_10 + (i % 12) * DAY + 60 for i in range(len(baskets))]
    save_corpus(Corpus.from_baskets(baskets, timestamps=stamps), tmp_path / "corpus.tmc")
    assert main(["mine", "--min-support", "0", "-o", str(tmp_path)]) == 0


def test_rules_carry_upstream_header(tmp_path):
    demo(tmp_path)
    assert main(["rules", "--antecedent", "mayan", "--exact", "-o", str(tmp_path)]) == 0
    text = (tmp_path / "rules.tsv").read_text()
    assert "# min_support: 0\n" in text and "# antecedents: mayan\n" in text
    _, rows = read_table(tmp_path / "rules.tsv")
    assert {r[0] for r in rows} == {"mayan"}
    by = {r[1]: r for r in rows}
    assert by["calendar"][2:] == ["1/2", "2/3", "2/3", "12", "18", "18"]


def test_trends_warns_outside_span_and_markers_threshold_one(tmp_path, capsys):
    demo(tmp_path)
    assert main(["trends", "--event-date", "2013-03-01", "-o", str(tmp_path)]) == 0
    assert "outside the corpus span" in capsys.readouterr().err
    _, profiles = read_table(tmp_path / "profiles.tsv")
    assert profiles and all(p[2] in ("pre_event_early", "periodic", "flat") for p in profiles)
    series = sorted((tmp_path / "series").iterdir())
    assert len(series) == len(profiles)
    assert series[0].read_text().splitlines()[0] == "# trendminer trends"
    assert main(["markers", "--threshold", "1", "-o", str(tmp_path)]) == 0
    _, reports = read_table(tmp_path / "markers.tsv")
    assert reports and all(r[6] == "false" for r in reports)


def test_markers_thematic_field(tmp_path):
    demo(tmp_path)
    field = tmp_path / "field.txt"
    field.write_text("mayan\ncalendar\n", encoding="utf-8")
    assert main(["trends", "-o", str(tmp_path)]) == 0
    assert main(["markers", "--threshold", "0", "--thematic-field", str(field), "-o", str(tmp_path)]) == 0
    _, kept = read_table(tmp_path / "markers.tsv")
    _, dropped = read_table(tmp_path / "markers_discarded.tsv")
    assert {r[0] for r in kept} == {"calendar", "mayan", "calendar mayan"}
    assert {r[0] for r in dropped} == {"doom", "calendar doom", "doom mayan", "calendar doom mayan"}
    assert all(r[6] == "true" for r in kept)


def test_markers_need_trends(tmp_path, capsys):
    demo(tmp_path)
    assert main(["markers", "--threshold", "0.1", "-o", str(tmp_path)]) == 1
    assert "run `trendminer trends` first" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "trendminer", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("trendminer ")
