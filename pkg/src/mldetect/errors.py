"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented status codes (1 usage, 2 data, 3 training).
"""


class MldError(Exception):
    exit_code = 2


class UsageError(MldError):
    exit_code = 1


class ArgumentError(MldError, ValueError):
    exit_code = 1


class DataError(MldError):
    exit_code = 2


class InputError(DataError, FileNotFoundError):
    def __init__(self, path):
        super().__init__(f"input file not found: {path}")
        self.path = str(path)


class SchemaError(DataError):
    pass


class VocabularyError(DataError):
    pass


class EncodingError(DataError):
    def __init__(self, column, value):
        super().__init__(f"column {column!r}: value {value!r} not in fitted vocabulary")
        self.column = column
        self.value = value


class ShapeError(MldError, ValueError):
    exit_code = 2


class UnknownClassError(MldError, KeyError):
    def __init__(self, labels):
        self.labels = frozenset(labels)
        super().__init__(f"label set {sorted(self.labels)} is not registered in the codec")

    def __str__(self):
        return self.args[0]


class ClassRangeError(MldError, IndexError):
    pass


class ContractViolation(DataError):
    pass


class ComparisonError(DataError):
    pass


class TrainingError(MldError):
    exit_code = 3


class DivergedTrainingError(TrainingError):
    def __init__(self, epoch, batch, value):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class CheckpointError(MldError):
    exit_code = 2


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass
