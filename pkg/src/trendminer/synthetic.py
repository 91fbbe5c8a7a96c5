"""Synthetic corpora for benchmarks and fixtures."""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, Vocabulary


def term_names(n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"t{i:0{width}d}" for i in range(n))


def zipf_corpus(
    n_transactions: int,
    vocab_size: int,
    mean_basket: float = 8.0,
    exponent: float = 1.0,
    seed: int = 0,
    start: int = 1355097600,
    days: int = 27,
) -> Corpus:
    """Random baskets with Zipf-distributed term popularity.

    Basket sizes are Poisson(mean_basket) (at least 1) before duplicate terms
    collapse. Timestamps are spread uniformly over ``days`` days from
    ``start`` (epoch seconds; the default is 2012-12-10T00:00Z).
    """
    rng = np.random.default_rng(seed)
    sizes = np.maximum(rng.poisson(mean_basket, n_transactions), 1)
    weights = 1.0 / np.arange(1, vocab_size + 1) ** exponent
    cdf = np.cumsum(weights / weights.sum())
    items = np.searchsorted(cdf, rng.random(int(sizes.sum())), side="right").astype(np.int32)
    np.minimum(items, vocab_size - 1, out=items)
    rows = np.repeat(np.arange(n_transactions, dtype=np.int32), sizes)
    del sizes
    order = np.lexsort((items, rows))
    items, rows = items[order], rows[order]
    del order
    keep = np.ones(len(items), dtype=bool)
    keep[1:] = (items[1:] != items[:-1]) | (rows[1:] != rows[:-1])
    items, rows = items[keep], rows[keep]
    indptr = np.zeros(n_transactions + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_transactions), out=indptr[1:])
    del rows
    df = np.bincount(items, minlength=vocab_size)
    timestamps = start + np.sort(rng.integers(0, days * 86400, n_transactions))
    return Corpus(
        vocabulary=Vocabulary(term_names(vocab_size), tuple(int(x) for x in df)),
        indptr=indptr,
        indices=items,
        timestamps=timestamps,
        source_ids=tuple(str(i) for i in range(n_transactions)),
    )
