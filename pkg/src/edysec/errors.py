"""Exception types shared across the pipeline."""


class EdysecError(Exception):
    pass


# dataset
class MissingColumn(EdysecError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"missing column: {column}")


class BadNumeric(EdysecError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"bad numeric value {value!r} in column {column} at row {row}")


class BadLabel(EdysecError):
    def __init__(self, row, value):
        self.row = row
        self.value = value
        super().__init__(f"label must be 0 or 1, got {value!r} at row {row}")


class DuplicateId(EdysecError):
    def __init__(self, package_id):
        self.package_id = package_id
        super().__init__(f"duplicate package id: {package_id}")


class BadRatios(EdysecError):
    pass


class EmptySelection(EdysecError):
    pass


# preprocess
class WrongKind(EdysecError):
    pass


class UnknownColumn(EdysecError):
    pass


class RowMismatch(EdysecError):
    pass


# feature selection
class BadK(EdysecError):
    pass


class EmptyResult(EdysecError):
    pass


class LayoutMismatch(EdysecError):
    pass


class UnknownFeature(EdysecError):
    pass


# neural net
class WidthMismatch(EdysecError):
    pass


class ShapeMismatch(EdysecError):
    pass


class StateMissing(EdysecError):
    pass


# metrics
class LengthMismatch(EdysecError):
    pass


class SingleClass(EdysecError):
    pass


# stability
class TooFewScores(EdysecError):
    pass


# explain
class TooManyFeatures(EdysecError):
    pass


class SingularSystem(EdysecError):
    pass


class FeatureMismatch(EdysecError):
    pass


# artifact / service
class VersionMismatch(EdysecError):
    pass


class CorruptArtifact(EdysecError):
    pass


class MissingFeature(EdysecError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"record is missing feature: {column}")
