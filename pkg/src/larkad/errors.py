"""Exception hierarchy shared across the package.

The CLI maps ``ContractError`` (and subclasses) to exit code 1 and
``DatasetError`` / other ``OSError`` to exit code 2.
"""


class ContractError(ValueError):
    """An operation was called with arguments violating its contract."""


class ConfigurationError(ContractError):
    """A model or block configuration is internally inconsistent."""


class UndefinedMetricError(ContractError):
    """A metric is undefined for the given labels (e.g. single-class AUROC)."""


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss; carries the offending step."""

    def __init__(self, step, loss):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss


class DatasetError(OSError):
    """A dataset directory is malformed or incomplete."""
