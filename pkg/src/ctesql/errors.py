"""Exception types shared across the engine."""


class CtesqlError(Exception):
    """Base class for all engine errors."""


class ParseError(CtesqlError):
    """SQL text could not be tokenized or parsed."""


class UnsupportedStatement(CtesqlError):
    """Parsed statement is not a SELECT (e.g. INSERT, UPDATE, DDL)."""


class IrrecomposableSketch(CtesqlError):
    """Sketch bundles cannot be re-seated into an executable query."""


class ModelError(CtesqlError):
    """Model provider failed to produce a usable completion."""


class UnparsableGeneration(CtesqlError):
    """Model output did not parse as SQL even after a re-ask."""


class FormatError(CtesqlError):
    """Schema or instruction file violates the documented format."""


class UnknownElement(CtesqlError):
    """A keep-filter referenced a table or column that does not exist."""


class DuplicateExample(CtesqlError):
    """Example with identical SQL already stored under this intent."""


class InvalidExample(CtesqlError):
    """Example violates the decomposed-example invariants."""


class DuplicateId(CtesqlError):
    """Instruction id already present in the knowledge set."""


class CorruptSnapshot(CtesqlError):
    """Persisted knowledge set failed checksum or structure validation."""


class UnknownRequest(CtesqlError):
    """Feedback references a request id with no stored context."""


class InvalidCorrection(CtesqlError):
    """Corrected SQL attached to a rejection does not parse."""


class ConfigError(CtesqlError):
    """Pipeline configuration is missing or out of documented ranges."""


class ExecutionTimeout(CtesqlError):
    """Statement exceeded the configured execution timeout."""
