from __future__ import annotations

from typing import Optional


class OzonecastError(Exception):
    """Base for every error the CLI reports as a user/config problem (exit 2)."""

    exit_code = 2


class ConfigError(OzonecastError):
    pass


class DataError(OzonecastError):
    pass


class ModelError(OzonecastError):
    pass


# ---------------------------------------------------------------------------
# ДАННЫЕ
# ---------------------------------------------------------------------------

class EmptyFile(DataError):
    def __init__(self, path: str):
        super().__init__(f"empty file: {path}")
        self.path = path


class MalformedHeader(DataError):
    def __init__(self, missing: list[str]):
        super().__init__(f"header is missing columns: {', '.join(missing)}")
        self.missing = missing


class UnparsableNumber(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class UnknownClassLabel(DataError):
    def __init__(self, parameter: str, label: str):
        super().__init__(f"parameter {parameter!r}: unknown class label {label!r}")
        self.parameter = parameter
        self.label = label


class UnparsableDate(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as an ISO date")
        self.row = row
        self.column = column
        self.value = value


class InvalidIntervals(DataError):
    pass


class ConstantColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} is constant on the training rows")
        self.name = name


class TooFewRows(DataError):
    pass


class NoExceedances(DataError):
    pass


class GroupTooSmall(DataError):
    pass


class TooShort(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ConstantObservations(DataError):
    pass


class NoObservedExceedances(DataError):
    pass


class AllExceedances(DataError):
    pass


class MissingFeature(DataError):
    def __init__(self, column: str, row: Optional[int] = None):
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"missing predictor {column!r}{where}")
        self.column = column
        self.row = row


class ArchiveConflict(DataError):
    def __init__(self, dates: list[str]):
        shown = ", ".join(dates[:5]) + (" ..." if len(dates) > 5 else "")
        super().__init__(f"season overlaps the training archive on {len(dates)} dates: {shown}")
        self.dates = dates


class MissingArtifact(DataError):
    def __init__(self, path: str, what: str = "file"):
        super().__init__(f"missing {what}: {path}")
        self.path = path
        self.what = what


# ---------------------------------------------------------------------------
# МОДЕЛЬ
# ---------------------------------------------------------------------------

class DimensionMismatch(ModelError):
    pass


class WrongOutputKind(ModelError):
    pass


class SingularDesign(ModelError):
    pass


class NonFiniteCost(ModelError):
    pass


class NonPositiveMse(ModelError):
    pass


class RankDeficient(ModelError):
    def __init__(self, q_effective: int, q: int):
        super().__init__(f"gradient matrix has rank {q_effective} < {q} parameters")
        self.q_effective = q_effective
        self.q = q


class DofExhausted(ModelError):
    pass


class OutOfDomain(ModelError):
    pass


class MissingRegressionContext(ModelError):
    pass


class SingleClass(ModelError):
    pass


class PerfectSeparation(ModelError):
    pass


class NoConvergence(ModelError):
    def __init__(self, iterations: int):
        super().__init__(f"no convergence after {iterations} iterations")
        self.iterations = iterations
