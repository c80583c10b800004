from __future__ import annotations


class ProvFusionError(ValueError):
    """Base class for every data or model error raised by provfusion."""


# ---- ingest -----------------------------------------------------------------


class ParseError(ProvFusionError):
    """A log record could not be turned into an Event."""

    def __init__(self, message: str, location: str | None = None):
        self.message = message
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)

    def at(self, location: str) -> "ParseError":
        """Return a copy of this error tagged with `path:line`."""
        return type(self)(self.message, location=location)


class MalformedRecord(ParseError):
    pass


class UnknownType(ParseError):
    pass


class NegativeTimestamp(ParseError):
    pass


class ConflictingType(ProvFusionError):
    pass


class GraphFormatError(ProvFusionError):
    pass


# ---- features / models ------------------------------------------------------


class EmptyCorpus(ProvFusionError):
    pass


class ShapeMismatch(ProvFusionError):
    pass


DimensionMismatch = ShapeMismatch


class DegenerateGraph(ProvFusionError):
    pass


class EmptyMask(ProvFusionError):
    pass


# ---- scoring / fusion / metrics ---------------------------------------------


class EmptyBank(ProvFusionError):
    pass


class EmptyBenign(ProvFusionError):
    pass


class MissingVerdict(ProvFusionError):
    pass


class NoCampaigns(ProvFusionError):
    pass


class UnknownScenario(ProvFusionError):
    pass


# ---- pipeline ---------------------------------------------------------------


class ConfigError(ProvFusionError):
    pass


class CheckpointError(ProvFusionError):
    pass
