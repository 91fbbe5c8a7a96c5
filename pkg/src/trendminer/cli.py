"""``trendminer`` command line: ingest -> mine -> rules -> trends -> markers.

Every stage reads and writes files in one output directory, so mining at
several thresholds reuses a single ingest.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from fractions import Fraction
from pathlib import Path

from . import __version__
from .corpus import Corpus, default_stop_list, ingest, read_jsonl, read_term_file
from .errors import ConfigError, InputError, TrendminerError
from .formats import (
    FREQUENT_COLUMNS,
    PROFILE_COLUMNS,
    RULE_ARROW,
    RULE_COLUMNS,
    SERIES_COLUMNS,
    config_header,
    frequent_rows,
    load_corpus,
    parse_frequent,
    parse_subjects,
    profile_row,
    rule_rows,
    save_corpus,
    series_rows,
    write_table,
)
from .miner import MiningConfig, Threshold, apriori, parallel_map, resolve_threads
from .rules import DIRECTIONS, RuleConfig, generate_rules, make_rule
from .temporal import (
    PeakConfig,
    bucket_daily,
    classify_peak,
    detect_markers,
    series_confidence,
    series_support,
    thematic_filter,
)

CORPUS_FILE = "corpus.tmc"
REPORT_FILE = "ingest_report.tsv"
FREQUENT_FILE = "frequent.tsv"
RULES_FILE = "rules.tsv"
PROFILES_FILE = "profiles.tsv"
TRENDS_STATE = "trends.json"
MARKERS_FILE = "markers.tsv"
DISCARDED_FILE = "markers_discarded.tsv"
SERIES_DIR = "series"

DEFAULT_KEYWORDS = "end,world"
DEFAULT_EVENT_DATE = "2012-12-21"


def warn(message: str) -> None:
    print(f"trendminer: warning: {message}", file=sys.stderr)


def _fraction(text: str, name: str, lo: Fraction = Fraction(0), hi: Fraction | None = None) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name} must be a number, got {text!r}") from None
    if value < lo or (hi is not None and value > hi):
        raise ConfigError(f"{name} must lie in [{lo}, {hi if hi is not None else 'inf'}], got {text}")
    return value


def _window(text: str, name: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition("-")
        return int(lo), int(hi or lo)
    except ValueError:
        raise ConfigError(f"{name} must look like LO-HI, got {text!r}") from None


def _date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"event date must be an ISO date (YYYY-MM-DD), got {text!r}") from None


def _upstream_header(path: Path) -> list[str]:
    """Comment lines of an upstream output, minus its command line."""
    lines = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.startswith("#"):
            break
        if not line.startswith("# trendminer "):
            lines.append(line)
    return lines


def _load(out: Path, corpus_path: str | None) -> tuple[Corpus, dict]:
    return load_corpus(Path(corpus_path) if corpus_path else out / CORPUS_FILE)


def _ingest_echo(meta: dict) -> list[tuple[str, object]]:
    return [(key, meta[key]) for key in ("keywords", "min_df", "stop_list", "inputs") if key in meta]


def cmd_ingest(args) -> int:
    keywords = [k for k in args.keywords.split(",") if k.strip()]
    if args.keywords_file:
        keywords += read_term_file(args.keywords_file)
    if args.no_stopwords:
        stop, stop_name = frozenset(), "none"
    elif args.stopwords:
        stop, stop_name = frozenset(read_term_file(args.stopwords)), args.stopwords
    else:
        stop, stop_name = default_stop_list(), "builtin"

    messages, malformed = [], 0
    for path in args.inputs:
        found, bad = read_jsonl(path)
        messages.extend(found)
        malformed += bad
    if malformed:
        print(f"trendminer: skipped {malformed} malformed line(s)", file=sys.stderr)
    if not messages:
        raise InputError(f"no valid messages in input ({malformed} malformed line(s) skipped)")

    corpus, report = ingest(messages, keywords, args.min_df, stop, malformed)
    meta = {
        "keywords": sorted(corpus.keywords),
        "min_df": args.min_df,
        "stop_list": stop_name,
        "inputs": list(args.inputs),
        "report": dict(report.as_pairs()),
    }
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out / CORPUS_FILE, meta)
    header = config_header("ingest", _ingest_echo(meta))
    write_table(out / REPORT_FILE, header, ("quantity", "value"), report.as_pairs())
    for key, value in report.as_pairs():
        print(f"{key}\t{value}")
    return 0


def cmd_mine(args) -> int:
    out = Path(args.output)
    corpus, meta = _load(out, args.corpus)
    config = MiningConfig(Threshold.parse(args.min_support), args.max_size, args.inclusive)
    frequent = apriori(corpus, config, threads=resolve_threads())
    header = config_header(
        "mine",
        _ingest_echo(meta)
        + [
            ("transactions", corpus.total),
            ("min_support", args.min_support),
            ("comparison", "inclusive" if config.inclusive else "strict"),
            ("max_size", config.max_size or "unbounded"),
        ],
    )
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / FREQUENT_FILE, header, FREQUENT_COLUMNS, frequent_rows(frequent, corpus.vocabulary, args.exact))
    print(f"{len(frequent)} frequent sets -> {out / FREQUENT_FILE}", file=sys.stderr)
    return 0


def cmd_rules(args) -> int:
    out = Path(args.output)
    corpus, _ = _load(out, args.corpus)
    source = Path(args.frequent) if args.frequent else out / FREQUENT_FILE
    frequent = parse_frequent(source, corpus)
    antecedents = None
    if args.antecedent:
        antecedents = tuple(corpus.vocabulary.encode(a.split()) for a in args.antecedent)
    config = RuleConfig(
        _fraction(args.min_confidence, "min-confidence", hi=Fraction(1)),
        antecedents,
        args.direction,
        args.include_keywords,
    )
    rules = generate_rules(corpus, frequent, config)
    header = ["# trendminer rules"] + _upstream_header(source) + config_header("rules", [
        ("min_confidence", args.min_confidence),
        ("direction", config.direction),
        ("antecedents", "; ".join(args.antecedent) if args.antecedent else "all"),
        ("include_keywords", config.include_keywords),
    ])[1:]
    write_table(out / RULES_FILE, header, RULE_COLUMNS, rule_rows(rules, corpus.vocabulary, args.exact))
    print(f"{len(rules)} rules -> {out / RULES_FILE}", file=sys.stderr)
    return 0


def _subject_label(corpus: Corpus, subject) -> str:
    vocab = corpus.vocabulary
    if isinstance(subject[0], tuple):
        return f"{vocab.label(subject[0])} {RULE_ARROW} {vocab.label(subject[1])}"
    return vocab.label(subject)


def _compute_series(corpus: Corpus, state: dict, threads: int):
    """(label, subject items, series) for every subject and metric in ``state``."""
    vocab = corpus.vocabulary
    buckets = bucket_daily(corpus)
    jobs = []
    for entry in state["subjects"]:
        if RULE_ARROW in entry:
            left, _, right = entry.partition(RULE_ARROW)
            jobs.append((vocab.encode(left.split()), vocab.encode(right.split())))
        else:
            jobs.append(vocab.encode(entry.split()))

    def run(subject):
        label = _subject_label(corpus, subject)
        if isinstance(subject[0], tuple):
            rule = make_rule(corpus, subject[0], subject[1])
            return [
                (label, rule.parent, series_support(buckets, corpus, rule.parent, state["global_denominator"])),
                (label, rule.parent, series_confidence(buckets, corpus, rule, "fwd")),
                (label, rule.parent, series_confidence(buckets, corpus, rule, "bwd")),
            ]
        return [(label, subject, series_support(buckets, corpus, subject, state["global_denominator"]))]

    return buckets, [row for rows in parallel_map(run, jobs, threads) for row in rows]


def _peak_config(state: dict) -> PeakConfig:
    return PeakConfig(
        early_window=tuple(state["early_window"]),
        late_window=tuple(state["late_window"]),
        acf_threshold=float(Fraction(state["acf_threshold"])),
        peak_tolerance=Fraction(state["peak_tolerance"]),
    )


def _classify_all(series_rows_, event: date, peak_config: PeakConfig):
    profiles = []
    for label, items, series in series_rows_:
        if not series.defined.any():
            warn(f"{label} [{series.metric}] has no defined day; skipped")
            continue
        profiles.append((label, items, series, classify_peak(series, event, peak_config)))
    return profiles


def _state_echo(state: dict) -> list[tuple[str, object]]:
    return [
        ("event_date", state["event_date"]),
        ("denominator", "global" if state["global_denominator"] else "daily"),
        ("early_window", "-".join(map(str, state["early_window"]))),
        ("late_window", "-".join(map(str, state["late_window"]))),
        ("acf_threshold", state["acf_threshold"]),
        ("peak_tolerance", state["peak_tolerance"]),
    ]


def cmd_trends(args) -> int:
    out = Path(args.output)
    corpus, meta = _load(out, args.corpus)
    event = _date(args.event_date)
    source = Path(args.subjects) if args.subjects else out / FREQUENT_FILE
    subjects = parse_subjects(source, corpus)
    state = {
        "event_date": event.isoformat(),
        "subjects": [_subject_label(corpus, s) for s in subjects],
        "global_denominator": args.global_denominator,
        "early_window": list(_window(args.early_window, "early-window")),
        "late_window": list(_window(args.late_window, "late-window")),
        "acf_threshold": args.acf_threshold,
        "peak_tolerance": args.peak_tolerance,
    }
    peak_config = _peak_config(state)
    buckets, computed = _compute_series(corpus, state, resolve_threads())
    if not buckets.contains(event):
        warn(f"event date {event} lies outside the corpus span {buckets.start}..{buckets.end}")
    profiles = _classify_all(computed, event, peak_config)

    echo = _ingest_echo(meta) + _state_echo(state)
    series_dir = out / SERIES_DIR
    series_dir.mkdir(parents=True, exist_ok=True)
    for index, (label, _, series) in enumerate(computed):
        header = config_header("trends", [("subject", label), ("metric", series.metric)] + echo)
        write_table(series_dir / f"{index:05d}_{series.metric}.csv", header, SERIES_COLUMNS, series_rows(series), sep=",")
    write_table(
        out / PROFILES_FILE,
        config_header("trends", echo),
        PROFILE_COLUMNS,
        (profile_row(label, s.metric, p) for label, _, s, p in profiles),
    )
    (out / TRENDS_STATE).write_text(json.dumps(state, sort_keys=True, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"{len(computed)} series -> {series_dir}", file=sys.stderr)
    return 0


def cmd_markers(args) -> int:
    out = Path(args.output)
    corpus, meta = _load(out, args.corpus)
    try:
        state = json.loads((out / TRENDS_STATE).read_text(encoding="utf-8"))
    except OSError:
        raise InputError(f"{out / TRENDS_STATE} not found; run `trendminer trends` first") from None
    threshold = _fraction(args.threshold, "threshold")
    event = _date(state["event_date"])
    _, computed = _compute_series(corpus, state, resolve_threads())
    profiles = _classify_all(computed, event, _peak_config(state))

    discarded = []
    field_name = "none"
    if args.thematic_field:
        field = set(read_term_file(args.thematic_field)) | set(corpus.keywords)
        retained_items, discarded_items = thematic_filter(
            [items for _, items, _, _ in profiles], field, corpus.vocabulary
        )
        keep = set(map(tuple, retained_items))
        discarded = sorted({label for label, items, _, _ in profiles if tuple(items) not in keep})
        profiles = [p for p in profiles if tuple(p[1]) in keep]
        field_name = args.thematic_field

    reports = detect_markers((((label, s.metric), p) for label, _, s, p in profiles), threshold, event)
    echo = _ingest_echo(meta) + _state_echo(state) + [("threshold", args.threshold), ("thematic_field", field_name)]
    write_table(
        out / MARKERS_FILE,
        config_header("markers", echo),
        PROFILE_COLUMNS,
        (profile_row(r.subject[0], r.subject[1], r.profile, r) for r in reports),
    )
    write_table(out / DISCARDED_FILE, config_header("markers", echo), ("subject",), ((d,) for d in discarded))
    flagged = sum(r.exceeded for r in reports)
    print(f"{flagged} of {len(reports)} series exceed {args.threshold} -> {out / MARKERS_FILE}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trendminer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"trendminer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage(name, help_text, func):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-o", "--output", required=True, metavar="DIR", help="pipeline directory")
        if name != "ingest":
            p.add_argument("--corpus", metavar="FILE", help=f"corpus cache (default DIR/{CORPUS_FILE})")
        p.set_defaults(func=func)
        return p

    p = stage("ingest", "build a corpus cache from JSON-Lines archives", cmd_ingest)
    p.add_argument("inputs", nargs="+", metavar="INPUT")
    p.add_argument("--keywords", default=DEFAULT_KEYWORDS, help="comma-separated required keywords")
    p.add_argument("--keywords-file", metavar="FILE")
    p.add_argument("--stopwords", metavar="FILE", help="stop-word file (default: built-in English list)")
    p.add_argument("--no-stopwords", action="store_true")
    p.add_argument("--min-df", type=int, default=10, help="minimum document frequency (default 10)")

    p = stage("mine", "frequent itemsets by Apriori", cmd_mine)
    p.add_argument("--min-support", default="300", help="count (300) or fraction with f suffix (0.0005f)")
    p.add_argument("--inclusive", action="store_true", help="support >= threshold instead of >")
    p.add_argument("--max-size", type=int)
    p.add_argument("--exact", action="store_true", help="render support as count/N")

    p = stage("rules", "association rules from frequent sets", cmd_rules)
    p.add_argument("--frequent", metavar="FILE", help=f"frequent-set table (default DIR/{FREQUENT_FILE})")
    p.add_argument("--min-confidence", default="0")
    p.add_argument("--antecedent", action="append", metavar="TERMS", help="allowed antecedent, repeatable")
    p.add_argument("--direction", choices=DIRECTIONS, default="fwd")
    p.add_argument("--include-keywords", action="store_true")
    p.add_argument("--exact", action="store_true", help="render ratios as p/q")

    p = stage("trends", "daily series and peak classification", cmd_trends)
    p.add_argument("--event-date", default=DEFAULT_EVENT_DATE)
    p.add_argument("--subjects", metavar="FILE", help=f"sets/rules to track (default DIR/{FREQUENT_FILE})")
    p.add_argument("--global-denominator", action="store_true", help="divide daily counts by N")
    p.add_argument("--early-window", default="6-8")
    p.add_argument("--late-window", default="1-5")
    p.add_argument("--acf-threshold", default="0.5")
    p.add_argument("--peak-tolerance", default="0.25")

    p = stage("markers", "threshold peak maxima into predictive markers", cmd_markers)
    p.add_argument("--threshold", required=True)
    p.add_argument("--thematic-field", metavar="FILE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TrendminerError, ValueError) as exc:
        print(f"trendminer: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
