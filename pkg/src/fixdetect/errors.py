"""Exception hierarchy shared across the package."""


class FixDetectError(Exception):
    """Base class for every error raised by fixdetect."""


class MalformedInput(FixDetectError, ValueError):
    """An input record or file does not follow its schema."""


class EmptyPopulation(FixDetectError, ValueError):
    pass


class MixedPopulation(FixDetectError, ValueError):
    pass


class InsufficientRuns(FixDetectError, ValueError):
    pass


class UndefinedRatio(FixDetectError, ArithmeticError):
    pass


class UnsupportedMeasure(FixDetectError, ValueError):
    pass


class EmptySeries(FixDetectError, ValueError):
    pass


class IndexOutOfRange(FixDetectError, IndexError):
    pass


class EmptySample(FixDetectError, ValueError):
    pass


class InvalidParameter(FixDetectError, ValueError):
    pass


class InvalidScenario(FixDetectError, ValueError):
    """Scenario validation failure; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
