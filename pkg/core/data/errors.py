"""
Exception hierarchy for dataset generation, storage and sampling.
"""


class DataError(Exception):
    """Base exception for dataset operations."""
    pass


class CalibrationError(DataError):
    """Behavioral policy could not be tuned into its return band."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved mean return {achieved:.1f})")
        self.achieved = achieved


class EmptyDatasetError(DataError):
    """Operation needs at least one episode."""
    pass


class ConfigMismatchError(DataError):
    """Datasets were generated under different environment configs."""
    pass


class SamplingError(DataError):
    """Requested batch or sequence cannot be drawn from the dataset."""
    pass


class MissingDatasetError(DataError):
    """A protocol cell refers to a dataset that does not exist."""

    def __init__(self, cell: str, path=None):
        where = f" at {path}" if path is not None else ""
        super().__init__(f"Missing dataset for cell {cell}{where}; rerun with --generate")
        self.cell = cell
        self.path = path


class DatasetFormatError(DataError):
    """Dataset file cannot be parsed."""
    pass


class ChecksumError(DatasetFormatError):
    """Content bytes do not match the header checksum."""
    pass


class VersionError(DatasetFormatError):
    """File was written with an unsupported format version."""
    pass


class TruncatedError(DatasetFormatError):
    """File ends before the declared content."""
    pass


class ConsistencyError(DatasetFormatError):
    """Header fields disagree with the episodes."""
    pass
