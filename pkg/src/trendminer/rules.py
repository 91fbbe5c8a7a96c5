"""Association rules X -> Y built from frequent sets, with confidence in both directions."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .corpus import Corpus, ItemSet
from .errors import ConfigError, InvalidItemsetError, UndefinedConfidenceError
from .miner import FrequentSet

DIRECTIONS = ("fwd", "bwd", "both")


@dataclass(frozen=True)
class AssociationRule:
    """Rule ``antecedent -> consequent`` over the parent set ``antecedent | consequent``.

    All quantities are exact: support is ``count_f / total``, forward
    confidence ``count_f / count_x`` and backward confidence ``count_f / count_y``.
    """

    antecedent: ItemSet
    consequent: ItemSet
    count_f: int
    count_x: int
    count_y: int
    total: int

    @property
    def parent(self) -> ItemSet:
        return tuple(sorted(self.antecedent + self.consequent))

    @property
    def support(self) -> Fraction:
        return Fraction(self.count_f, self.total)

    @property
    def conf_fwd(self) -> Fraction:
        return Fraction(self.count_f, self.count_x)

    @property
    def conf_bwd(self) -> Fraction:
        return Fraction(self.count_f, self.count_y)

    def reversed(self) -> AssociationRule:
        return AssociationRule(self.consequent, self.antecedent, self.count_f, self.count_y, self.count_x, self.total)

    def sort_key(self):
        parent = self.parent
        return (len(parent), parent, len(self.antecedent), self.antecedent)


@dataclass(frozen=True)
class RuleConfig:
    """Which rules to emit.

    Attributes:
        min_confidence: A rule is kept when its confidence in ``direction``
            is at least this value (``both`` requires both directions).
        antecedents: When given, only rules whose antecedent is listed.
        direction: ``fwd``, ``bwd`` or ``both``.
        include_keywords: Also build rules from sets that contain the
            corpus keywords. Off by default since every transaction of a
            keyword-filtered corpus contains them.
    """

    min_confidence: Fraction = Fraction(0)
    antecedents: tuple[ItemSet, ...] | None = None
    direction: str = "fwd"
    include_keywords: bool = False

    def __post_init__(self):
        object.__setattr__(self, "min_confidence", Fraction(self.min_confidence))
        if not 0 <= self.min_confidence <= 1:
            raise ConfigError(f"min_confidence must lie in [0, 1], got {self.min_confidence}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.antecedents is not None:
            object.__setattr__(self, "antecedents", tuple(tuple(sorted(a)) for a in self.antecedents))

    def accepts(self, rule: AssociationRule) -> bool:
        if self.direction == "fwd":
            return rule.conf_fwd >= self.min_confidence
        if self.direction == "bwd":
            return rule.conf_bwd >= self.min_confidence
        return min(rule.conf_fwd, rule.conf_bwd) >= self.min_confidence


def _check_split(corpus: Corpus, x: Sequence[int], y: Sequence[int]) -> tuple[ItemSet, ItemSet]:
    x, y = corpus.check_itemset(sorted(x)), corpus.check_itemset(sorted(y))
    if set(x) & set(y):
        raise InvalidItemsetError(f"antecedent and consequent overlap: {x} / {y}")
    return x, y


def confidence(corpus: Corpus, x: Sequence[int], y: Sequence[int]) -> Fraction:
    """count(X u Y) / count(X); raises UndefinedConfidenceError when X never occurs."""
    x, y = _check_split(corpus, x, y)
    count_x = corpus.count(x)
    if count_x == 0:
        raise UndefinedConfidenceError(f"antecedent {x} occurs in no transaction")
    return Fraction(corpus.count(tuple(sorted(x + y))), count_x)


def make_rule(corpus: Corpus, x: Sequence[int], y: Sequence[int], counts: dict[ItemSet, int] | None = None) -> AssociationRule:
    """Rule for an explicit split, counting whatever ``counts`` does not already hold."""
    x, y = _check_split(corpus, x, y)
    counts = counts if counts is not None else {}

    def count(items):
        if items not in counts:
            counts[items] = corpus.count(items)
        return counts[items]

    count_f, count_x, count_y = count(tuple(sorted(x + y))), count(x), count(y)
    if count_f == 0:
        raise UndefinedConfidenceError(f"{x} -> {y} occurs in no transaction")
    return AssociationRule(x, y, count_f, count_x, count_y, corpus.total)


def generate_rules(
    corpus: Corpus, frequent: Iterable[FrequentSet], config: RuleConfig = RuleConfig()
) -> list[AssociationRule]:
    """Every antecedent/consequent split of each frequent set of size >= 2 that
    passes ``config``, sorted by parent set and then antecedent."""
    frequent = list(frequent)
    for f in frequent:
        corpus.check_itemset(f.items)
        if f.total != corpus.total:
            raise InvalidItemsetError(f"frequent set {f.items} was mined from a corpus of {f.total}, not {corpus.total}")
    counts = {f.items: f.count for f in frequent}
    skip = frozenset() if config.include_keywords else corpus.keyword_ids
    allowed = set(config.antecedents) if config.antecedents is not None else None

    rules = []
    for f in frequent:
        if len(f.items) < 2 or skip.intersection(f.items):
            continue
        for size in range(1, len(f.items)):
            for x in combinations(f.items, size):
                if allowed is not None and x not in allowed:
                    continue
                y = tuple(i for i in f.items if i not in x)
                rule = make_rule(corpus, x, y, counts)
                if config.accepts(rule):
                    rules.append(rule)
    rules.sort(key=AssociationRule.sort_key)
    return rules
