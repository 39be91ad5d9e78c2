"""Exception types shared across the package."""


class MomentChainError(Exception):
    """Base class for all library-specific errors."""


class RegisterNameError(MomentChainError):
    """Duplicate or unknown register name."""


class DimensionCapError(MomentChainError):
    """Total Hilbert-space dimension exceeds the configured cap."""

    def __init__(self, dimension: int, cap: int):
        super().__init__(f"total dimension {dimension} exceeds cap {cap}")
        self.dimension = dimension
        self.cap = cap


class ConditioningImpossibleError(MomentChainError):
    """Every outcome history is incompatible with the requested conditioning."""


class WraparoundError(MomentChainError):
    """Pointer register too small for the declared observable spectrum."""

    def __init__(self, dimension: int, required: int):
        super().__init__(
            f"pointer dimension {dimension} risks wraparound; need at least {required}"
        )
        self.dimension = dimension
        self.required_dimension = required


class ScenarioParseError(MomentChainError):
    """Scenario text rejected; carries the offending position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.reason = message
