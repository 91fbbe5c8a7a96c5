"""Exception hierarchy shared by every trendminer module."""


class TrendminerError(Exception):
    """Base class for all errors raised by trendminer."""


class ConfigError(TrendminerError, ValueError):
    """A parameter or configuration value is out of range or malformed."""


class InputError(TrendminerError):
    """Input data could not be read or produced nothing usable."""


class InvalidItemsetError(TrendminerError, ValueError):
    """An itemset is empty, unsorted, or references ids outside the vocabulary."""


class EmptyCorpusError(TrendminerError, ValueError):
    """An operation needs at least one transaction."""


class OracleRefusedError(TrendminerError):
    """The brute-force oracle refused an instance larger than its guard."""


class UndefinedConfidenceError(TrendminerError, ZeroDivisionError):
    """Confidence requested for an antecedent that occurs in no transaction."""


class SeriesTooShortError(TrendminerError, ValueError):
    """A daily series has too few defined values for the requested test."""


class CacheFormatError(TrendminerError):
    """A corpus cache file is truncated, corrupt, or of an unknown version."""
