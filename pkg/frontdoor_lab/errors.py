"""Exceptions raised across frontdoor_lab."""


class FrontDoorLabError(Exception):
    """Base class for every error raised by this package."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class PopulationError(FrontDoorLabError):
    """A potential-outcome operation was called outside its domain."""


class PositivityError(FrontDoorLabError):
    """P(x, m) is zero for a cell the front-door formula divides by."""

    def __init__(self, message: str, cell: tuple):
        super().__init__(message)
        self.cell = cell


class EstimationError(FrontDoorLabError):
    """A regression cannot be run on the data it was given."""


class MissingColumnError(EstimationError):
    """A column requested by role is not present in the dataset."""

    def __init__(self, column: str, available: list[str]):
        super().__init__(
            f"Column '{column}' not found. Available columns: {', '.join(available)}"
        )
        self.column = column


class ScenarioError(FrontDoorLabError):
    """A scenario configuration is invalid."""


class ConfigError(FrontDoorLabError):
    """An environment setting could not be parsed."""
