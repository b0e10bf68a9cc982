class FrogPredError(Exception):
    """Base class for errors raised by this package."""


class InvalidSpec(FrogPredError, ValueError):
    pass


class ParseError(InvalidSpec):
    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position


class InvalidArgument(FrogPredError, ValueError):
    pass


class CapacityError(FrogPredError, OverflowError):
    """A requested computation exceeds the supported integer/index range."""


class NotStronglyAccessible(FrogPredError, ValueError):
    def __init__(self, witness: int):
        super().__init__(f"bad-state set is not strongly accessible; state {witness} "
                         "is reachable from the start but cannot reach it")
        self.witness = witness
