"""On-disk formats: TSV/CSV outputs with an echoed config header, the binary
corpus cache, and subject lists for trend computation.

Corpus cache layout (all integers little-endian)::

    8 bytes   magic b"TMCORPUS"
    4 bytes   uint32 format version (currently 1)
    8 bytes   uint64 length H of the JSON header
    H bytes   UTF-8 JSON header (sorted keys): vocabulary terms, document
              frequencies, min_df, stop list, keywords, source ids, dropped
              count, transaction/entry counts, free-form ingest metadata
    8(N+1)    int64 indptr
    4M        int32 indices (M = indptr[N])
    8N        int64 timestamps, UTC epoch seconds
"""

from __future__ import annotations

import json
import struct
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .corpus import Corpus, ItemSet, Vocabulary
from .errors import CacheFormatError, InputError, InvalidItemsetError
from .miner import FrequentSet
from .rules import AssociationRule
from .temporal import DailySeries, MarkerReport, PeakProfile

CACHE_MAGIC = b"TMCORPUS"
CACHE_VERSION = 1
RULE_ARROW = "=>"


def decimal(value: Fraction | int, digits: int = 6) -> str:
    """Correctly rounded decimal with ``digits`` significant digits, no exponent,
    trailing zeros dropped."""
    value = Fraction(value)
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(value.numerator) / Decimal(value.denominator)
    return f"{d.normalize():f}"


def fraction_text(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def config_header(command: str, config: Sequence[tuple[str, Any]]) -> list[str]:
    lines = [f"# trendminer {command}"]
    for key, value in config:
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, (list, tuple, set, frozenset)):
            value = ",".join(str(v) for v in value)
        lines.append(f"# {key}: {value}")
    return lines


def write_table(path: Path, header_lines: list[str], columns: Sequence[str], rows: Iterable[Sequence[Any]],
                sep: str = "\t") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        fh.write(sep.join(columns) + "\n")
        for row in rows:
            fh.write(sep.join("" if v is None else str(v) for v in row) + "\n")


def read_table(path: Path, sep: str = "\t") -> tuple[list[str], list[list[str]]]:
    """Columns and rows of a file written by :func:`write_table` (comments skipped)."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    body = [line for line in lines if line and not line.startswith("#")]
    if not body:
        raise InputError(f"{path} has no header row")
    return body[0].split(sep), [line.split(sep) for line in body[1:]]


FREQUENT_COLUMNS = ("items", "size", "count", "support")
RULE_COLUMNS = ("antecedent", "consequent", "support", "conf_fwd", "conf_bwd", "count_F", "count_X", "count_Y")
SERIES_COLUMNS = ("date", "value", "defined")
PROFILE_COLUMNS = (
    "subject", "metric", "class", "max_date", "max_value", "lead_days",
    "exceeded", "window_start", "window_end", "period",
)


def _ratio(value: Fraction, exact: bool) -> str:
    return fraction_text(value) if exact else decimal(value)


def frequent_rows(frequent: Iterable[FrequentSet], vocab: Vocabulary, exact: bool = False):
    for f in frequent:
        yield vocab.label(f.items), f.size, f.count, _ratio(f.support, exact)


def rule_rows(rules: Iterable[AssociationRule], vocab: Vocabulary, exact: bool = False):
    for r in rules:
        yield (
            vocab.label(r.antecedent), vocab.label(r.consequent),
            _ratio(r.support, exact), _ratio(r.conf_fwd, exact), _ratio(r.conf_bwd, exact),
            r.count_f, r.count_x, r.count_y,
        )


def series_rows(series: DailySeries):
    for day, value in zip(series.dates, series.values):
        yield day.isoformat(), "" if value is None else decimal(value), "1" if value is not None else "0"


def profile_row(label: str, metric: str, profile: PeakProfile, report: MarkerReport | None = None):
    exceeded = window_start = window_end = ""
    if report is not None:
        exceeded = "true" if report.exceeded else "false"
        if report.window:
            window_start, window_end = (d.isoformat() for d in report.window)
    return (
        label, metric, profile.peak_class, profile.max_date.isoformat(), decimal(profile.max_value),
        profile.lead_days, exceeded, window_start, window_end, profile.period if profile.period else "",
    )


def parse_frequent(path: Path, corpus: Corpus) -> list[FrequentSet]:
    """Frequent sets from a ``frequent.tsv``; counts are taken from the file."""
    columns, rows = read_table(path)
    if tuple(columns) != FREQUENT_COLUMNS:
        raise InputError(f"{path} is not a frequent-set table")
    return [FrequentSet(corpus.vocabulary.encode(r[0].split()), int(r[2]), corpus.total) for r in rows]


def parse_subjects(path: Path, corpus: Corpus) -> list[ItemSet | tuple[ItemSet, ItemSet]]:
    """Subjects for trend computation.

    Accepts a ``frequent.tsv`` or ``rules.tsv`` written by trendminer, or a
    plain list with one subject per line: ``a b c`` for an itemset,
    ``a b => c`` for a rule. Blank and ``#`` lines are ignored. Rules are
    returned as ``(antecedent, consequent)`` pairs.
    """
    vocab = corpus.vocabulary
    try:
        lines = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    lines = [line for line in lines if line and not line.startswith("#")]
    if lines and tuple(lines[0].split("\t")) == FREQUENT_COLUMNS:
        return [vocab.encode(line.split("\t")[0].split()) for line in lines[1:]]
    if lines and tuple(lines[0].split("\t")) == RULE_COLUMNS:
        out = []
        for line in lines[1:]:
            cells = line.split("\t")
            out.append((vocab.encode(cells[0].split()), vocab.encode(cells[1].split())))
        return out
    subjects = []
    for line in lines:
        if RULE_ARROW in line:
            left, _, right = line.partition(RULE_ARROW)
            x, y = vocab.encode(left.split()), vocab.encode(right.split())
            if set(x) & set(y):
                raise InvalidItemsetError(f"rule sides overlap: {line!r}")
            subjects.append((x, y))
        else:
            subjects.append(vocab.encode(line.split()))
    return subjects


def save_corpus(corpus: Corpus, path: Path, meta: dict | None = None) -> None:
    vocab = corpus.vocabulary
    header = {
        "format": "trendminer-corpus",
        "version": CACHE_VERSION,
        "terms": list(vocab.terms),
        "doc_freq": list(vocab.doc_freq),
        "min_df": vocab.min_df,
        "stop_list": sorted(vocab.stop_list),
        "keywords": sorted(corpus.keywords),
        "source_ids": list(corpus.source_ids),
        "dropped": corpus.dropped,
        "transactions": corpus.total,
        "entries": int(len(corpus.indices)),
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IQ", CACHE_VERSION, len(blob)))
        fh.write(blob)
        fh.write(corpus.indptr.astype("<i8").tobytes())
        fh.write(corpus.indices.astype("<i4").tobytes())
        fh.write(corpus.timestamps.astype("<i8").tobytes())


def load_corpus(path: Path) -> tuple[Corpus, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read corpus cache {path}: {exc.strerror or exc}") from exc
    if data[:8] != CACHE_MAGIC or len(data) < 20:
        raise CacheFormatError(f"{path} is not a trendminer corpus cache")
    version, length = struct.unpack_from("<IQ", data, 8)
    if version != CACHE_VERSION:
        raise CacheFormatError(f"{path}: unsupported cache version {version}")
    offset = 20 + length
    try:
        header = json.loads(data[20:offset].decode("utf-8"))
        n, m = header["transactions"], header["entries"]
        expected = offset + 8 * (n + 1) + 4 * m + 8 * n
        if len(data) != expected:
            raise ValueError(f"size {len(data)} != {expected}")
        indptr = np.frombuffer(data, "<i8", n + 1, offset).astype(np.int64)
        indices = np.frombuffer(data, "<i4", m, offset + 8 * (n + 1)).astype(np.int32)
        timestamps = np.frombuffer(data, "<i8", n, offset + 8 * (n + 1) + 4 * m).astype(np.int64)
        vocab = Vocabulary(
            tuple(header["terms"]), tuple(header["doc_freq"]), header["min_df"], frozenset(header["stop_list"])
        )
        corpus = Corpus(
            vocabulary=vocab,
            indptr=indptr,
            indices=indices,
            timestamps=timestamps,
            source_ids=tuple(header["source_ids"]),
            keywords=frozenset(header["keywords"]),
            dropped=header["dropped"],
        )
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CacheFormatError(f"{path}: corrupt corpus cache ({exc})") from exc
    return corpus, header["meta"]
