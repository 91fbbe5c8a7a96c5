"""Daily dynamics of support and confidence, peak timing against an event date,
periodicity, predictive markers and thematic-field filtering.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .corpus import SECONDS_PER_DAY, Corpus, ItemSet, Vocabulary, epoch_day
from .errors import ConfigError, EmptyCorpusError, InvalidItemsetError, SeriesTooShortError
from .miner import FrequentSet
from .rules import AssociationRule

PRE_EVENT_EARLY = "pre_event_early"
PRE_EVENT_LATE = "pre_event_late"
ON_EVENT = "on_event"
POST_EVENT = "post_event"
PERIODIC = "periodic"
FLAT = "flat"
PEAK_CLASSES = (PRE_EVENT_EARLY, PRE_EVENT_LATE, ON_EVENT, POST_EVENT, PERIODIC, FLAT)
PRE_EVENT = (PRE_EVENT_EARLY, PRE_EVENT_LATE)

METRICS = ("support", "conf_fwd", "conf_bwd")


@dataclass(frozen=True, eq=False)
class DailyBuckets:
    """Contiguous UTC calendar days from the first to the last transaction.

    ``counts[d]`` is the number of transactions on day ``d`` (empty days
    included); ``day_of[r]`` is the day index of transaction row ``r``.
    """

    start: date
    counts: np.ndarray
    day_of: np.ndarray

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def end(self) -> date:
        return self.start + timedelta(days=len(self.counts) - 1)

    @property
    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(len(self.counts))]

    def contains(self, day: date) -> bool:
        return self.start <= day <= self.end


def bucket_daily(corpus: Corpus) -> DailyBuckets:
    if corpus.total < 1:
        raise EmptyCorpusError("cannot bucket an empty corpus")
    days = corpus.timestamps // SECONDS_PER_DAY
    first = int(days.min())
    day_of = (days - first).astype(np.int32)
    counts = np.bincount(day_of, minlength=int(days.max()) - first + 1)
    return DailyBuckets(epoch_day(first * SECONDS_PER_DAY), counts.astype(np.int64), day_of)


@dataclass(frozen=True, eq=False)
class DailySeries:
    """One exact value per day, ``numerators[d] / denominators[d]``.

    Days with a zero denominator are undefined and carry no value.
    """

    subject: Any
    metric: str
    start: date
    numerators: np.ndarray
    denominators: np.ndarray

    def __len__(self) -> int:
        return len(self.numerators)

    @property
    def defined(self) -> np.ndarray:
        return np.asarray(self.denominators != 0, dtype=bool)

    @property
    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(len(self))]

    @property
    def values(self) -> list[Fraction | None]:
        return [Fraction(int(n), int(d)) if d else None for n, d in zip(self.numerators, self.denominators)]

    @classmethod
    def from_values(cls, values: Sequence[Fraction | float | None], start: date, subject: Any = None,
                    metric: str = "support") -> DailySeries:
        """Series from explicit values (None = undefined); floats are taken exactly."""
        num, den = [], []
        for v in values:
            if v is None:
                num.append(0)
                den.append(0)
            else:
                f = Fraction(v)
                num.append(f.numerator)
                den.append(f.denominator)
        return cls(subject, metric, start, np.array(num, dtype=object), np.array(den, dtype=object))


def _day_counts(buckets: DailyBuckets, corpus: Corpus, items: Sequence[int]) -> np.ndarray:
    rows = corpus.rows_containing(items)
    return np.bincount(buckets.day_of[rows], minlength=len(buckets)).astype(np.int64)


def series_support(
    buckets: DailyBuckets, corpus: Corpus, itemset: Sequence[int], global_denominator: bool = False
) -> DailySeries:
    """Per-day support of ``itemset``: that day's containing transactions over
    that day's transactions (or over N with ``global_denominator``)."""
    items = corpus.check_itemset(itemset)
    num = _day_counts(buckets, corpus, items)
    den = np.full(len(buckets), corpus.total, dtype=np.int64) if global_denominator else buckets.counts.copy()
    return DailySeries(items, "support", buckets.start, num, den)


def series_confidence(
    buckets: DailyBuckets, corpus: Corpus, rule: AssociationRule, direction: str = "fwd"
) -> DailySeries:
    """Per-day confidence of ``rule``; days without the antecedent are undefined.

    ``direction="bwd"`` gives the confidence of consequent -> antecedent.
    """
    if direction not in ("fwd", "bwd"):
        raise ConfigError(f"direction must be 'fwd' or 'bwd', got {direction!r}")
    x = corpus.check_itemset(rule.antecedent)
    y = corpus.check_itemset(rule.consequent)
    if set(x) & set(y):
        raise InvalidItemsetError(f"antecedent and consequent overlap: {x} / {y}")
    num = _day_counts(buckets, corpus, tuple(sorted(x + y)))
    den = _day_counts(buckets, corpus, x if direction == "fwd" else y)
    return DailySeries(rule, "conf_" + direction, buckets.start, num, den)


@dataclass(frozen=True)
class PeakConfig:
    """Classification windows (lead days, inclusive) and periodicity thresholds."""

    early_window: tuple[int, int] = (6, 8)
    late_window: tuple[int, int] = (1, 5)
    acf_threshold: float = 0.5
    peak_tolerance: Fraction = Fraction(1, 4)
    min_periodic_values: int = 8

    def __post_init__(self):
        (el, eh), (ll, lh) = self.early_window, self.late_window
        if not (1 <= ll <= lh < el <= eh):
            raise ConfigError(
                f"windows must satisfy 1 <= late <= early with late before early, got late={ll}-{lh} early={el}-{eh}"
            )
        if not -1 <= self.acf_threshold < 1:
            raise ConfigError(f"acf_threshold must lie in [-1, 1), got {self.acf_threshold}")
        object.__setattr__(self, "peak_tolerance", Fraction(self.peak_tolerance))
        if not 0 <= self.peak_tolerance < 1:
            raise ConfigError(f"peak_tolerance must lie in [0, 1), got {self.peak_tolerance}")
        if self.min_periodic_values < 4:
            raise ConfigError("min_periodic_values must be >= 4")


@dataclass(frozen=True)
class Periodicity:
    periodic: bool
    period: int | None
    strength: float


@dataclass(frozen=True)
class PeakProfile:
    peak_class: str
    max_date: date
    max_value: Fraction
    lead_days: int
    secondary_peaks: tuple[tuple[date, Fraction], ...] = ()
    period: int | None = None
    note: str = ""


def local_maxima(values: Sequence[Fraction | None]) -> list[int]:
    """Start index of every plateau of defined values higher than its defined
    neighbours. A plateau at either end needs only its inner neighbour lower;
    a series that is one plateau has no maximum."""
    points = [(i, v) for i, v in enumerate(values) if v is not None]
    peaks = []
    j = 0
    while j < len(points):
        k = j
        while k + 1 < len(points) and points[k + 1][1] == points[j][1]:
            k += 1
        value = points[j][1]
        left = points[j - 1][1] if j > 0 else None
        right = points[k + 1][1] if k + 1 < len(points) else None
        if (left is not None or right is not None) and (left is None or left < value) and (
            right is None or right < value
        ):
            peaks.append(points[j][0])
        j = k + 1
    return peaks


def _comparable_peaks(values: Sequence[Fraction | None], top: Fraction, tolerance: Fraction) -> list[int]:
    floor = (1 - tolerance) * top
    return [i for i in local_maxima(values) if values[i] >= floor]


def circular_autocorrelation(values: Sequence[Fraction | None]) -> np.ndarray:
    """Normalised circular autocorrelation at every lag of the mean-removed series.

    Undefined days contribute nothing: they are zero after centering and are
    excluded from every lagged product. Entry 0 is 1; all entries are 0 for a
    series without variance.
    """
    mask = np.array([v is not None for v in values])
    x = np.array([float(v) if v is not None else 0.0 for v in values])
    if mask.any():
        x[mask] -= x[mask].mean()
    x[~mask] = 0.0
    energy = float(np.dot(x, x))
    n = len(x)
    if energy <= 1e-12 * max(n, 1):
        return np.zeros(n)
    return np.array([np.dot(x, np.roll(x, -lag)) for lag in range(n)]) / energy


def detect_periodicity(series: DailySeries, config: PeakConfig = PeakConfig()) -> Periodicity:
    """Periodic when autocorrelation at some lag in 2..len/2 exceeds
    ``config.acf_threshold`` and there are two or more local maxima within
    ``config.peak_tolerance`` of the global maximum. The period is the
    earliest lag attaining the highest autocorrelation."""
    values = series.values
    defined = [v for v in values if v is not None]
    if len(defined) < config.min_periodic_values:
        raise SeriesTooShortError(
            f"periodicity needs {config.min_periodic_values} defined values, got {len(defined)}"
        )
    acf = circular_autocorrelation(values)
    lags = np.arange(2, len(values) // 2 + 1)
    if not len(lags):
        return Periodicity(False, None, 0.0)
    best = int(lags[np.argmax(acf[lags])])
    strength = float(acf[best])
    peaks = _comparable_peaks(values, max(defined), config.peak_tolerance)
    if strength > config.acf_threshold and len(peaks) >= 2:
        return Periodicity(True, best, strength)
    return Periodicity(False, None, strength)


def classify_peak(series: DailySeries, event_date: date, config: PeakConfig = PeakConfig()) -> PeakProfile:
    """Locate the global maximum (earliest day on ties) and classify its timing.

    Periodic series are recognised first, then flat ones; otherwise the class
    follows from the lead time ``event_date - max_date``.
    """
    values = series.values
    defined = [(i, v) for i, v in enumerate(values) if v is not None]
    if not defined:
        raise SeriesTooShortError("series has no defined values")
    top = max(v for _, v in defined)
    top_index = next(i for i, v in defined if v == top)
    max_date = series.start + timedelta(days=top_index)
    lead = (event_date - max_date).days
    secondary = tuple(
        (series.start + timedelta(days=i), values[i])
        for i in _comparable_peaks(values, top, config.peak_tolerance)
        if i != top_index
    )

    period = None
    note = ""
    if len(defined) >= config.min_periodic_values:
        result = detect_periodicity(series, config)
        if result.periodic:
            return PeakProfile(PERIODIC, max_date, top, lead, secondary, result.period)
    if top == min(v for _, v in defined):
        peak_class = FLAT
    elif lead == 0:
        peak_class = ON_EVENT
    elif lead < 0:
        peak_class = POST_EVENT
    else:
        (early_lo, early_hi), (late_lo, late_hi) = config.early_window, config.late_window
        peak_class = PRE_EVENT_LATE if lead < early_lo else PRE_EVENT_EARLY
        lo, hi = (late_lo, late_hi) if peak_class == PRE_EVENT_LATE else (early_lo, early_hi)
        if not lo <= lead <= hi:
            note = f"lead {lead} outside {peak_class} window {lo}-{hi}"
    return PeakProfile(peak_class, max_date, top, lead, secondary, period, note)


@dataclass(frozen=True)
class MarkerReport:
    subject: Any
    profile: PeakProfile
    threshold: Fraction
    exceeded: bool
    window: tuple[date, date] | None

    @property
    def window_days(self) -> int:
        return (self.window[1] - self.window[0]).days if self.window else 0


def detect_markers(
    profiles: Iterable[tuple[Any, PeakProfile]], threshold: Fraction | int | str, event_date: date
) -> list[MarkerReport]:
    """Flag subjects whose maximum strictly exceeds ``threshold``.

    A flagged subject with a pre-event peak gets the reaction window
    ``[max_date, event_date]``. Reports are sorted by descending maximum;
    equal maxima keep input order.
    """
    threshold = Fraction(threshold)
    if threshold < 0:
        raise ConfigError(f"marker threshold must be >= 0, got {threshold}")
    reports = []
    for subject, profile in profiles:
        exceeded = profile.max_value > threshold
        window = None
        if exceeded and profile.peak_class in PRE_EVENT and profile.lead_days > 0:
            window = (profile.max_date, event_date)
        reports.append(MarkerReport(subject, profile, threshold, exceeded, window))
    reports.sort(key=lambda r: r.profile.max_value, reverse=True)
    return reports


def subject_items(subject: Any) -> ItemSet:
    """Every item a set, rule or series refers to."""
    if isinstance(subject, DailySeries):
        return subject_items(subject.subject)
    if isinstance(subject, FrequentSet):
        return subject.items
    if isinstance(subject, AssociationRule):
        return subject.parent
    return tuple(subject)


def thematic_filter(
    subjects: Iterable[Any], field: Iterable[str], vocab: Vocabulary
) -> tuple[list[Any], list[Any]]:
    """Split subjects into those whose terms all lie in ``field`` and the rest."""
    field = frozenset(field)
    if not field:
        raise ConfigError("thematic field must contain at least one term")
    retained, discarded = [], []
    for subject in subjects:
        terms = vocab.decode(subject_items(subject))
        (retained if field.issuperset(terms) else discarded).append(subject)
    return retained, discarded
