"""Message ingestion: tokenization, keyword filtering, vocabulary pruning and
conversion of messages into transactions (baskets of term ids).
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, EmptyCorpusError, InputError, InvalidItemsetError

logger = logging.getLogger(__name__)

ItemSet = tuple[int, ...]

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
SECONDS_PER_DAY = 86400

_URL = re.compile(r"^[^\w@#]*[A-Za-z][A-Za-z0-9+.\-]*://")
_MENTION = re.compile(r"^[^\w@#]*@")
# letter/digit runs; \w minus underscore
_TERM = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Split a message into lowercase terms.

    Terms are maximal runs of Unicode letters and digits. Whitespace-separated
    tokens that are URLs (scheme-prefixed) or @-mentions are removed whole; a
    hashtag keeps its body as a term. Order and repeats are preserved.
    """
    terms: list[str] = []
    for raw in text.split():
        if _URL.match(raw) or _MENTION.match(raw):
            continue
        terms.extend(m.lower() for m in _TERM.findall(raw))
    return terms


def parse_timestamp(value: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime (second resolution).

    Timestamps without an offset are taken to be UTC.
    """
    if not isinstance(value, str) or not value:
        raise ValueError(f"not a timestamp: {value!r}")
    text = value.strip()
    if text[-1:] in ("Z", "z"):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


def to_epoch(ts: datetime) -> int:
    return int((ts - EPOCH) // timedelta(seconds=1))


def from_epoch(seconds: int) -> datetime:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc)


def epoch_day(seconds: int) -> date:
    return date.fromordinal(EPOCH.date().toordinal() + int(seconds) // SECONDS_PER_DAY)


@dataclass(frozen=True)
class RawMessage:
    id: str
    timestamp: datetime
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("message id must be non-empty")

    @cached_property
    def tokens(self) -> list[str]:
        return tokenize(self.text)


def read_jsonl(path: str | Path) -> tuple[list[RawMessage], int]:
    """Read messages from a JSON-Lines archive.

    Each line must be an object with string fields ``id``, ``created_at``
    (RFC 3339) and ``text``; other fields are ignored. Blank lines are skipped
    silently, anything else that does not parse is counted as malformed.

    Returns:
        The messages in file order and the number of malformed lines.
    """
    messages: list[RawMessage] = []
    malformed = 0
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                text = obj["text"]
                if not isinstance(text, str) or not isinstance(obj["id"], str):
                    raise TypeError
                messages.append(RawMessage(obj["id"], parse_timestamp(obj["created_at"]), text))
            except (ValueError, KeyError, TypeError, AttributeError):
                malformed += 1
    return messages, malformed


def read_term_file(path: str | Path) -> list[str]:
    """Read a one-term-per-line file; blank and ``#`` comment lines are ignored."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    terms = []
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            terms.append(line.lower())
    return terms


def default_stop_list() -> frozenset[str]:
    """The small English stop-word list shipped with the package."""
    text = resources.files("trendminer").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


@dataclass(frozen=True)
class Vocabulary:
    """Retained terms with dense ids in ascending lexicographic order."""

    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    min_df: int = 1
    stop_list: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.terms) != len(self.doc_freq):
            raise ValueError("terms and doc_freq lengths differ")
        if any(a >= b for a, b in zip(self.terms, self.terms[1:])):
            raise ValueError("vocabulary terms must be strictly increasing")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.ids

    @cached_property
    def ids(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def id_of(self, term: str) -> int:
        try:
            return self.ids[term]
        except KeyError:
            raise InvalidItemsetError(f"term not in vocabulary: {term!r}") from None

    def encode(self, terms: Iterable[str]) -> ItemSet:
        """Terms to a sorted itemset; unknown terms raise InvalidItemsetError."""
        items = tuple(sorted({self.id_of(t) for t in terms}))
        if not items:
            raise InvalidItemsetError("empty itemset")
        return items

    def decode(self, items: Iterable[int]) -> tuple[str, ...]:
        return tuple(self.terms[i] for i in items)

    def label(self, items: Iterable[int]) -> str:
        return " ".join(self.decode(items))


@dataclass(frozen=True)
class Transaction:
    items: ItemSet
    timestamp: datetime
    source_id: str


@dataclass(frozen=True, eq=False)
class Corpus:
    """An immutable transaction collection in compressed sparse row layout.

    Row ``r`` holds the strictly increasing term ids
    ``indices[indptr[r]:indptr[r + 1]]``. Rows keep input order.
    """

    vocabulary: Vocabulary
    indptr: np.ndarray
    indices: np.ndarray
    timestamps: np.ndarray
    source_ids: tuple[str, ...]
    keywords: frozenset[str] = frozenset()
    dropped: int = 0

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int32)
        timestamps = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        n = len(indptr) - 1
        if n < 0 or indptr[0] != 0 or indptr[-1] != len(indices) or np.any(np.diff(indptr) < 0):
            raise ValueError("malformed indptr")
        if len(timestamps) != n or len(self.source_ids) != n:
            raise ValueError("timestamps/source_ids must have one entry per transaction")
        if len(indices):
            if indices.min() < 0 or indices.max() >= len(self.vocabulary):
                raise ValueError("item id outside vocabulary")
            step = np.diff(indices)
            inner = np.ones(len(step), dtype=bool)
            starts = indptr[1:-1]
            inner[starts[(starts > 0) & (starts < len(indices))] - 1] = False
            if np.any(step[inner] <= 0):
                raise ValueError("transaction items must be strictly increasing")
        for arr in (indptr, indices, timestamps):
            arr.flags.writeable = False
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "keywords", frozenset(self.keywords))

    @property
    def total(self) -> int:
        return len(self.indptr) - 1

    def __len__(self) -> int:
        return self.total

    def items_of(self, row: int) -> ItemSet:
        return tuple(int(i) for i in self.indices[self.indptr[row]:self.indptr[row + 1]])

    def transaction(self, row: int) -> Transaction:
        return Transaction(self.items_of(row), from_epoch(self.timestamps[row]), self.source_ids[row])

    def __iter__(self) -> Iterator[Transaction]:
        return (self.transaction(r) for r in range(self.total))

    @property
    def transactions(self) -> list[Transaction]:
        return list(self)

    @cached_property
    def keyword_ids(self) -> frozenset[int]:
        return frozenset(self.vocabulary.ids[k] for k in self.keywords if k in self.vocabulary)

    @cached_property
    def item_counts(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=len(self.vocabulary))

    @cached_property
    def _postings(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.total, dtype=np.int32), np.diff(self.indptr))
        order = np.argsort(self.indices, kind="stable")
        ptr = np.zeros(len(self.vocabulary) + 1, dtype=np.int64)
        np.cumsum(self.item_counts, out=ptr[1:])
        return ptr, rows[order]

    def check_itemset(self, items: Sequence[int]) -> ItemSet:
        items = tuple(int(i) for i in items)
        if not items:
            raise InvalidItemsetError("empty itemset")
        if any(a >= b for a, b in zip(items, items[1:])):
            raise InvalidItemsetError(f"itemset not strictly increasing: {items}")
        if items[0] < 0 or items[-1] >= len(self.vocabulary):
            raise InvalidItemsetError(f"itemset references ids outside 0..{len(self.vocabulary) - 1}: {items}")
        return items

    def rows_containing(self, items: Sequence[int]) -> np.ndarray:
        """Sorted row numbers of the transactions that contain every item."""
        items = self.check_itemset(items)
        ptr, rows = self._postings
        lists = sorted((rows[ptr[i]:ptr[i + 1]] for i in items), key=len)
        hit = lists[0]
        for other in lists[1:]:
            if not len(hit):
                break
            hit = np.intersect1d(hit, other, assume_unique=True)
        return hit

    def count(self, items: Sequence[int]) -> int:
        return int(len(self.rows_containing(items)))

    @classmethod
    def from_baskets(
        cls,
        baskets: Sequence[Iterable[str]],
        timestamps: Sequence[datetime | int] | None = None,
        keywords: Iterable[str] = (),
        source_ids: Sequence[str] | None = None,
    ) -> Corpus:
        """Build a corpus straight from term baskets, keeping every term.

        Empty baskets are dropped and counted, as in :func:`to_transactions`.
        Timestamps default to the epoch; source ids default to row numbers.
        """
        sets = [frozenset(b) for b in baskets]
        df = Counter(t for s in sets for t in s)
        terms = tuple(sorted(df))
        vocab = Vocabulary(terms, tuple(df[t] for t in terms))
        if timestamps is None:
            timestamps = [0] * len(sets)
        if source_ids is None:
            source_ids = [str(i) for i in range(len(sets))]
        stamps = [t if isinstance(t, (int, np.integer)) else to_epoch(t) for t in timestamps]
        return _assemble(vocab, [sorted(vocab.ids[t] for t in s) for s in sets], stamps, source_ids, keywords)


def _assemble(vocab, item_lists, stamps, source_ids, keywords) -> Corpus:
    keep = [i for i, items in enumerate(item_lists) if items]
    lengths = np.array([len(item_lists[i]) for i in keep], dtype=np.int64)
    indptr = np.zeros(len(keep) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    flat = [x for i in keep for x in item_lists[i]]
    return Corpus(
        vocabulary=vocab,
        indptr=indptr,
        indices=np.array(flat, dtype=np.int32),
        timestamps=np.array([stamps[i] for i in keep], dtype=np.int64),
        source_ids=tuple(source_ids[i] for i in keep),
        keywords=frozenset(keywords),
        dropped=len(item_lists) - len(keep),
    )


def _normalize_keywords(keywords: Iterable[str]) -> frozenset[str]:
    kw = frozenset(k.strip().lower() for k in keywords if k.strip())
    if not kw:
        raise ConfigError("keyword set must be non-empty")
    return kw


def filter_keywords(messages: Iterable[RawMessage], keywords: Iterable[str]) -> list[RawMessage]:
    """Messages whose token set contains every keyword, in input order."""
    kw = _normalize_keywords(keywords)
    return [m for m in messages if kw.issubset(m.tokens)]


def build_vocabulary(messages: Iterable[RawMessage], min_df: int = 10, stop_list: Iterable[str] = ()) -> Vocabulary:
    """Count document frequencies and keep terms with df >= min_df not in the stop list."""
    if min_df < 1:
        raise ConfigError(f"min_df must be >= 1, got {min_df}")
    stop = frozenset(stop_list)
    df: Counter[str] = Counter()
    for m in messages:
        df.update(set(m.tokens))
    terms = tuple(sorted(t for t, n in df.items() if n >= min_df and t not in stop))
    return Vocabulary(terms, tuple(df[t] for t in terms), min_df, stop)


def to_transactions(messages: Sequence[RawMessage], vocab: Vocabulary, keywords: Iterable[str] = ()) -> Corpus:
    """Reduce each message to the sorted set of its in-vocabulary term ids.

    Messages left with no items are dropped; ``Corpus.dropped`` counts them.
    """
    ids = vocab.ids
    item_lists = [sorted({ids[t] for t in m.tokens if t in ids}) for m in messages]
    return _assemble(
        vocab,
        item_lists,
        [to_epoch(m.timestamp) for m in messages],
        [m.id for m in messages],
        keywords,
    )


@dataclass
class IngestReport:
    read: int = 0
    malformed: int = 0
    retained: int = 0
    dropped_empty: int = 0
    vocabulary_size: int = 0
    transactions: int = 0

    def as_pairs(self) -> list[tuple[str, int]]:
        return [
            ("messages_read", self.read),
            ("malformed_skipped", self.malformed),
            ("keyword_retained", self.retained),
            ("empty_dropped", self.dropped_empty),
            ("vocabulary_size", self.vocabulary_size),
            ("transactions", self.transactions),
        ]


def ingest(
    messages: Sequence[RawMessage],
    keywords: Iterable[str],
    min_df: int = 10,
    stop_list: Iterable[str] = (),
    malformed: int = 0,
) -> tuple[Corpus, IngestReport]:
    """Filter by keywords, prune the vocabulary and build the corpus in one pass."""
    kw = _normalize_keywords(keywords)
    report = IngestReport(read=len(messages) + malformed, malformed=malformed)
    kept = filter_keywords(messages, kw)
    report.retained = len(kept)
    if not kept:
        raise InputError(f"no message contains all keywords {sorted(kw)}")
    vocab = build_vocabulary(kept, min_df, stop_list)
    corpus = to_transactions(kept, vocab, kw)
    report.dropped_empty = corpus.dropped
    report.vocabulary_size = len(vocab)
    report.transactions = corpus.total
    if corpus.total == 0:
        raise EmptyCorpusError("every retained message became an empty transaction")
    return corpus, report
