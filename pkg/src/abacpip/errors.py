"""Exception hierarchy.

Every error class carries a distinct process exit code so the CLI can map
failures without string matching.  Code 2 is left to argparse usage errors.
"""


class AbacError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class FormatError(AbacError):
    """A CSV or config file could not be parsed."""

    exit_code = 17


class ConsistencyViolation(AbacError):
    """Two grounded rules share a condition tuple but disagree on the outcome."""

    exit_code = 3


class UniverseOverflow(AbacError):
    exit_code = 4


class EmptyComplement(AbacError):
    exit_code = 5


class InvalidClusterMap(AbacError):
    exit_code = 6


class UnknownAttribute(AbacError):
    exit_code = 18


class UnknownValue(AbacError):
    """A request or rule names a value the catalog does not know.

    The catalog has to be extended (with ``extend_catalog`` or an additions
    file) before such requests can be encoded.
    """

    exit_code = 7

    def __init__(self, attribute, value):
        super().__init__(f"unknown value {value!r} for attribute {attribute!r}; "
                         "extend the catalog first")
        self.attribute = attribute
        self.value = value


class DuplicateValue(AbacError):
    exit_code = 8


class WidthMismatch(AbacError):
    exit_code = 9


class EmptyLog(AbacError):
    exit_code = 10


class MissingTruth(AbacError):
    exit_code = 11


class EmptyCounts(AbacError):
    exit_code = 12


class InfeasibleCounts(AbacError):
    exit_code = 13


class EmptyPartition(AbacError):
    exit_code = 14


class DegenerateData(AbacError):
    """Raised only on request; ``train`` normally returns a constant model."""

    exit_code = 15


class ModelFormatError(AbacError):
    exit_code = 16


EXIT_CODES = {cls.__name__: cls.exit_code for cls in (
    AbacError, FormatError, ConsistencyViolation, UniverseOverflow,
    EmptyComplement, InvalidClusterMap, UnknownAttribute, UnknownValue, DuplicateValue,
    WidthMismatch, EmptyLog, MissingTruth, EmptyCounts, InfeasibleCounts,
    EmptyPartition, DegenerateData, ModelFormatError)}
