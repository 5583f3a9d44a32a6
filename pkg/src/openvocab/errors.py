"""Exception types shared across the package."""


class OpenVocabError(Exception):
    """Base class for all package errors."""


class LoadError(OpenVocabError):
    """A data or model file exists but its content is invalid."""


class ParseError(OpenVocabError):
    """A corpus, query, run, or pool record is malformed."""


class ScoringError(OpenVocabError):
    """A predicate instance cannot be scored by the model."""


class TrainingError(OpenVocabError):
    """Training cannot proceed (empty data, diverged loss)."""


class EvaluationError(OpenVocabError):
    """A run cannot be evaluated against the judgment pool."""


class UnsupportedQueryError(OpenVocabError):
    """The logical form lies outside the executable fragment."""
