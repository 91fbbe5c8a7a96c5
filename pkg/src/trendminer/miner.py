"""Frequent itemset mining: level-wise Apriori plus a brute-force oracle.

Inclusion is decided on integer counts only. A threshold in either form (an
absolute count or a fraction of N) is first reduced to the smallest count
that passes, so no floating point takes part in deciding what is frequent.
"""

from __future__ import annotations

import os
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import ceil, floor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .corpus import Corpus, ItemSet
from .errors import ConfigError, EmptyCorpusError, OracleRefusedError

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_PARTITION_SIZE = 1 << 16
DEFAULT_ORACLE_GUARD = 20


@dataclass(frozen=True)
class Threshold:
    """Minimum support, as an absolute transaction count or a fraction of N."""

    value: Fraction
    kind: str

    def __post_init__(self):
        if self.kind == "count":
            if self.value < 0 or self.value.denominator != 1:
                raise ConfigError(f"count threshold must be a non-negative integer, got {self.value}")
        elif self.kind == "fraction":
            if not 0 <= self.value < 1:
                raise ConfigError(f"fraction threshold must lie in [0, 1), got {self.value}")
        else:
            raise ConfigError(f"unknown threshold kind {self.kind!r}")

    @classmethod
    def count(cls, n: int) -> Threshold:
        return cls(Fraction(n), "count")

    @classmethod
    def fraction(cls, f: Fraction | float | str) -> Threshold:
        return cls(Fraction(f), "fraction")

    @classmethod
    def parse(cls, text: str) -> Threshold:
        """``"300"`` is a count, ``"0.0005f"`` a fraction."""
        text = text.strip()
        try:
            if text.lower().endswith("f"):
                return cls.fraction(Fraction(text[:-1]))
            if not re.fullmatch(r"\d+", text):
                raise ValueError
            return cls.count(int(text))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(
                f"bad min-support {text!r}: use an integer count (300) or a fraction with an f suffix (0.0005f)"
            ) from None

    def min_count(self, total: int, inclusive: bool = False) -> int:
        """Smallest transaction count that passes against ``total`` transactions.

        Never below 1: an itemset that occurs nowhere is not reported.
        """
        bound = self.value if self.kind == "count" else self.value * total
        need = ceil(bound) if inclusive else floor(bound) + 1
        return max(need, 1)

    def __str__(self) -> str:
        if self.kind == "count":
            return str(self.value.numerator)
        return f"{self.value}f" if self.value.denominator != 1 else f"{self.value.numerator}f"


@dataclass(frozen=True)
class MiningConfig:
    min_support: Threshold
    max_size: int | None = None
    inclusive: bool = False

    def __post_init__(self):
        if self.max_size is not None and self.max_size < 1:
            raise ConfigError(f"max_size must be >= 1, got {self.max_size}")


@dataclass(frozen=True)
class FrequentSet:
    items: ItemSet
    count: int
    total: int

    @property
    def size(self) -> int:
        return len(self.items)

    @property
    def support(self) -> Fraction:
        return Fraction(self.count, self.total)

    def sort_key(self) -> tuple[int, ItemSet]:
        return (len(self.items), self.items)


def support(corpus: Corpus, itemset: Sequence[int]) -> Fraction:
    """Fraction of transactions containing every item of ``itemset``."""
    if corpus.total < 1:
        raise EmptyCorpusError("support is undefined on an empty corpus")
    return Fraction(corpus.count(itemset), corpus.total)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count from an explicit value or ``TRENDMINER_THREADS`` (0 = all CPUs)."""
    if threads is None:
        raw = os.environ.get("TRENDMINER_THREADS", "1").strip() or "1"
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"TRENDMINER_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ConfigError(f"thread count must be >= 0, got {threads}")
    return threads or os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Ordered map, threaded when ``threads > 1``."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


class _Partition:
    """A horizontal slice of the corpus, restricted to frequent items.

    Items are relabelled to their rank among frequent items. ``occ_*`` lists
    every (row, frequent set id, position of its last item) found at the
    current level; the next level extends each occurrence by the row's later
    items, so only candidates actually contained in a row are ever touched.
    """

    def __init__(self, corpus: Corpus, lo: int, hi: int, rank: np.ndarray):
        base = corpus.indptr[lo]
        r = rank[corpus.indices[base:corpus.indptr[hi]]]
        rows = np.repeat(np.arange(hi - lo, dtype=np.int32), np.diff(corpus.indptr[lo:hi + 1]))
        keep = r >= 0
        r, rows = r[keep], rows[keep]
        lens = np.bincount(rows, minlength=hi - lo)
        self.start = np.zeros(hi - lo + 1, dtype=np.int64)
        np.cumsum(lens, out=self.start[1:])
        self.lens = lens
        self.ranks = r
        self.occ_row = rows
        self.occ_id = r.astype(np.int64)
        self.occ_pos = (np.arange(len(r)) - self.start[rows]).astype(np.int32)

    def extend(self, width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Every one-item extension of the current occurrences, keyed by
        ``set_id * width + last_item``."""
        ext = self.lens[self.occ_row] - self.occ_pos - 1
        has = ext > 0
        ext = ext[has]
        src = np.repeat(np.flatnonzero(has), ext)
        offset = np.arange(len(src)) - np.repeat(np.cumsum(ext) - ext, ext)
        pos = (self.occ_pos[src] + 1 + offset).astype(np.int32)
        row = self.occ_row[src]
        keys = self.occ_id[src] * width + self.ranks[self.start[row] + pos]
        return row, pos, keys

    def advance(self, row: np.ndarray, pos: np.ndarray, new_id: np.ndarray) -> None:
        keep = new_id >= 0
        self.occ_row = row[keep]
        self.occ_pos = pos[keep]
        self.occ_id = new_id[keep]


def _match(sorted_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Index of each key in ``sorted_keys``, -1 where absent."""
    if not len(sorted_keys):
        return np.full(len(keys), -1, dtype=np.int64)
    idx = np.searchsorted(sorted_keys, keys)
    idx[idx >= len(sorted_keys)] = 0
    return np.where(sorted_keys[idx] == keys, idx, -1)


def _lookup(level_keys: list[np.ndarray], sets: np.ndarray, width: int) -> np.ndarray:
    """Id of each row of ``sets`` among the frequent sets of its size, or -1.

    ``level_keys[j]`` holds the sorted keys of the frequent (j+1)-sets, where
    a set's key is ``id(prefix) * width + last``; singleton ids are ranks.
    """
    ids = sets[:, 0].astype(np.int64)
    for col in range(1, sets.shape[1]):
        found = _match(level_keys[col], ids * width + sets[:, col])
        ids = np.where(ids >= 0, found, -1)
    return ids


def _join_block(level: np.ndarray, partners: np.ndarray, lo: int, hi: int, width: int) -> np.ndarray:
    counts = partners[lo:hi]
    left = np.repeat(np.arange(lo, hi, dtype=np.int64), counts)
    right = left + 1 + np.arange(len(left)) - np.repeat(np.cumsum(counts) - counts, counts)
    return left * width + level[right, -1]


def generate_candidates(
    level: np.ndarray, level_keys: list[np.ndarray], width: int, block: int = 1 << 21
) -> np.ndarray:
    """Apriori join and prune for k >= 3.

    Joins lexicographically sorted frequent (k-1)-sets that share their first
    k-2 items, then drops any candidate with an infrequent (k-1)-subset.
    Candidate ``level[i] + (j,)`` is returned as the key ``i * width + j``;
    keys come out sorted, which is lexicographic order of the candidates.
    """
    m, size = level.shape
    if m < 2:
        return np.empty(0, dtype=np.int64)
    prefix = level[:, :-1]
    new_group = np.ones(m, dtype=bool)
    new_group[1:] = np.any(prefix[1:] != prefix[:-1], axis=1)
    last_of_group = np.flatnonzero(np.append(new_group[1:], True))
    partners = last_of_group[np.cumsum(new_group) - 1] - np.arange(m)
    # bounded blocks of joined pairs keep the prune step's temporaries small
    cuts = np.searchsorted(np.cumsum(partners), np.arange(block, int(partners.sum()), block), side="right")
    bounds = [0, *sorted(set(int(c) for c in cuts) - {0, m}), m]
    kept = []
    for lo, hi in zip(bounds, bounds[1:]):
        keys = _join_block(level, partners, lo, hi, width)
        if not len(keys):
            continue
        cand = np.concatenate([level[keys // width], (keys % width)[:, None]], axis=1)
        ok = np.ones(len(keys), dtype=bool)
        for drop in range(size - 1):
            ok &= _lookup(level_keys, np.delete(cand, drop, axis=1), width) >= 0
        kept.append(keys[ok])
    return np.concatenate(kept) if kept else np.empty(0, dtype=np.int64)


def _reduce_counts(parts, fn, size: int, threads: int) -> np.ndarray:
    """Sum sparse per-partition counts into a dense vector, ``threads`` partitions at a time."""
    total = np.zeros(size, dtype=np.int64)
    step = max(threads, 1)
    for i in range(0, len(parts), step):
        for idx, cnt in parallel_map(fn, parts[i:i + step], threads):
            total[idx] += cnt
    return total


def apriori(
    corpus: Corpus,
    config: MiningConfig,
    threads: int = 1,
    partition_size: int = DEFAULT_PARTITION_SIZE,
) -> list[FrequentSet]:
    """All itemsets passing ``config.min_support``, sorted by (size, items).

    Transactions are split into fixed-size partitions whose counts are summed,
    so the result does not depend on ``threads``.
    """
    n = corpus.total
    if n < 1:
        raise EmptyCorpusError("cannot mine an empty corpus")
    need = config.min_support.min_count(n, config.inclusive)
    max_size = config.max_size or np.iinfo(np.int32).max

    counts1 = corpus.item_counts
    frequent_items = np.flatnonzero(counts1 >= need)
    result = [FrequentSet((int(i),), int(counts1[i]), n) for i in frequent_items]
    width = len(frequent_items)
    if max_size < 2 or width < 2:
        return result

    rank = np.full(len(corpus.vocabulary), -1, dtype=np.int64)
    rank[frequent_items] = np.arange(width)
    bounds = list(range(0, n, partition_size)) + [n]
    parts = parallel_map(
        lambda span: _Partition(corpus, span[0], span[1], rank), list(zip(bounds, bounds[1:])), threads
    )

    level_keys = [np.arange(width, dtype=np.int64)]
    level = np.arange(width, dtype=np.int32)[:, None]
    for k in range(2, max_size + 1):
        if k == 2:
            # every pair of frequent items is a candidate; count the ones that occur
            partial = [np.unique(p.extend(width)[2], return_counts=True) for p in parts]
            cand_keys, inverse = np.unique(np.concatenate([p[0] for p in partial]), return_inverse=True)
            counts = np.zeros(len(cand_keys), dtype=np.int64)
            np.add.at(counts, inverse, np.concatenate([p[1] for p in partial]))
            del partial, inverse
        else:
            cand_keys = generate_candidates(level, level_keys, width)
            if not len(cand_keys):
                break

            def count_candidates(part):
                idx = _match(cand_keys, part.extend(width)[2])
                return np.unique(idx[idx >= 0], return_counts=True)

            counts = _reduce_counts(parts, count_candidates, len(cand_keys), threads)

        passed = counts >= need
        if not passed.any():
            break
        keys = cand_keys[passed]
        level = np.concatenate([level[keys // width], (keys % width)[:, None]], axis=1).astype(np.int32)
        level_keys.append(keys)
        result.extend(
            FrequentSet(tuple(int(x) for x in frequent_items[row]), int(c), n)
            for row, c in zip(level, counts[passed])
        )
        if k == max_size:
            break

        def advance(part):
            row, pos, ext_keys = part.extend(width)
            part.advance(row, pos, _match(keys, ext_keys))

        parallel_map(advance, parts, threads)
    return result


def _passes(count: int, total: int, threshold: Threshold, inclusive: bool) -> bool:
    value = Fraction(count) if threshold.kind == "count" else Fraction(count, total)
    return value >= threshold.value if inclusive else value > threshold.value


def brute_force_frequent(
    corpus: Corpus, config: MiningConfig, guard: int = DEFAULT_ORACLE_GUARD
) -> list[FrequentSet]:
    """Exhaustive reference miner for small corpora.

    Counts every non-empty subset of every transaction and keeps those whose
    support passes the threshold. Shares no candidate logic with
    :func:`apriori`.
    """
    n = corpus.total
    if n < 1:
        raise EmptyCorpusError("cannot mine an empty corpus")
    distinct = len(set(int(i) for i in corpus.indices))
    if distinct > guard:
        raise OracleRefusedError(f"{distinct} distinct items exceeds the oracle guard of {guard}")
    max_size = config.max_size or distinct
    seen: Counter[ItemSet] = Counter()
    for row in range(n):
        items = corpus.items_of(row)
        for size in range(1, min(len(items), max_size) + 1):
            seen.update(combinations(items, size))
    found = [
        FrequentSet(items, c, n)
        for items, c in seen.items()
        if _passes(c, n, config.min_support, config.inclusive)
    ]
    return sorted(found, key=FrequentSet.sort_key)


def index_counts(frequent: Iterable[FrequentSet]) -> dict[ItemSet, int]:
    return {f.items: f.count for f in frequent}
