"""Exception types shared across the package."""


class AphmmError(Exception):
    """Base class for all package-specific errors."""


class UnknownSymbol(AphmmError):
    def __init__(self, position: int, symbol: str):
        self.position = position
        self.symbol = symbol
        super().__init__(f"symbol {symbol!r} at position {position} is not in the alphabet")


class EmptySequence(AphmmError):
    pass


class SequencePositionOutOfRange(AphmmError):
    pass


class AccumulatorStateMissing(AphmmError):
    pass


class InstanceTooLarge(AphmmError):
    pass


class ParseError(AphmmError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class MappingOutOfBounds(AphmmError):
    pass


class AlphabetMismatch(AphmmError):
    pass


class NoPathError(AphmmError):
    pass


class UnknownParameter(AphmmError):
    pass


class ValueOutOfRange(AphmmError):
    pass
