"""Exception hierarchy.

Every error raised by the package derives from PatientCodeError and carries
the exit code the CLI reports for it:
- 1 usage
- 2 configuration
- 3 data (parse, schema, ingestion, shape)
- 4 training divergence
"""

from typing import Optional


class PatientCodeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(PatientCodeError):
    """Unknown subcommand, missing argument or refused overwrite."""

    exit_code = 1


class ConfigError(PatientCodeError, ValueError):
    """A configuration field failed validation."""

    exit_code = 2

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class DataError(PatientCodeError, ValueError):
    """Input data could not be used."""

    exit_code = 3


class ParseError(DataError):
    """A line of an embedding or archive file is malformed."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(DataError):
    """A vector does not have the declared dimension."""

    def __init__(self, message: str, line_no: Optional[int] = None) -> None:
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)
        self.line_no = line_no


class IngestionError(DataError):
    """Duplicate identifiers, empty inputs and similar dataset-level problems."""


class ShapeError(DataError):
    """Vector or matrix shapes are inconsistent."""


class TrainingError(PatientCodeError, RuntimeError):
    """Training diverged or could not start."""

    exit_code = 4

    def __init__(self, message: str, epoch: Optional[int] = None) -> None:
        prefix = f"epoch {epoch}: " if epoch is not None else ""
        super().__init__(prefix + message)
        self.epoch = epoch
