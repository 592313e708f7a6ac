class CGCNNError(Exception):
    """Base error for the CG-CNN toolkit.
    Attributes:
        detail (str): Human readable diagnostic, written to stderr by the CLI.
        exit_code (int): Process exit status used when the error reaches the CLI.
    """
    exit_code = 1

    def __init__(self, detail: str, exit_code: int = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self):
        return self.detail


class RejectedInputError(CGCNNError):
    """Shape, geometry or argument mismatch."""
    exit_code = 2


class ConfigurationError(CGCNNError):
    exit_code = 3


class DatasetError(CGCNNError):
    """Missing, undecodable or inconsistent input data."""
    exit_code = 4


class NumericalError(CGCNNError):
    exit_code = 5


class TrainingDivergedError(NumericalError):
    """A training step produced a non-finite loss; the iteration is aborted."""
    exit_code = 6


class TrainingFailedError(CGCNNError):
    exit_code = 7


class ArtifactError(CGCNNError):
    """An output artifact could not be written."""
    exit_code = 8
