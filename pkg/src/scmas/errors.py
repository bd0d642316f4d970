"""Exception types shared across the package."""


class ScmasError(Exception):
    """Base class for all library errors."""


class CapExceeded(ScmasError):
    """Exact enumeration would exceed the configured size cap."""


class CyclicAfterIntervention(ScmasError):
    """A dependency cycle survives after interventions cut incoming edges."""


class UnknownVariable(ScmasError):
    """A referenced variable is not part of the model."""


class ActionSpaceTooLarge(ScmasError):
    """Action space exceeds the exact-solver cap."""


class InvalidParams(ScmasError):
    """Generator parameters outside their documented ranges."""


class UnknownName(ScmasError):
    """Unknown synthetic game name."""


class ParseError(ScmasError):
    """Malformed QDIMACS input."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnsupportedAlternation(ScmasError):
    """Quantifier prefix deeper than one exists-forall pair of blocks."""


class TooLarge(ScmasError):
    """Instance too large for brute-force handling."""


class TypeSetTooSmall(ScmasError):
    """Fewer than two leader types supplied."""


class TypeMismatch(ScmasError):
    """Leader-type games and equilibrium profiles do not line up."""


class NoPureEquilibrium(ScmasError):
    """The induced action matrix has no pure equilibrium outcome."""
