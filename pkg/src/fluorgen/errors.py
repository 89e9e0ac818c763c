"""Shared exception taxonomy.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and
ParseError -> 3, NumericError -> 4. Everything else is a plain bug.
"""


class ShapeError(ValueError):
    """Operand shapes are inconsistent with the operation."""


class NumericError(ArithmeticError):
    """A numeric invariant was violated (NaN/Inf, diverging loss)."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class ParseError(ValueError):
    """SMILES or pattern text could not be parsed.

    Carries the 0-based character offset of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DataError(ValueError):
    """Input data files are malformed or violate the dataset schema."""


class ConfigError(ValueError):
    """Run configuration failed schema validation."""


class CheckpointError(ValueError):
    """Checkpoint blob is corrupt, truncated, or version-incompatible."""
