"""Exception hierarchy for blueprint parsing and simulation setup."""

from __future__ import annotations


class ScenarioError(Exception):
    """Base class for all blueprint / scenario problems."""


class BlueprintSyntaxError(ScenarioError):
    """Unknown symbol, ragged rows, or an unparseable grid section."""


class NoExitError(ScenarioError):
    """The blueprint contains no exit cell."""


class NoSpawnError(ScenarioError):
    """The blueprint contains no spawn cell."""


class MetadataError(ScenarioError):
    """The metadata block after the grid is missing or malformed."""


class OutOfBoundsError(ScenarioError):
    """A coordinate lies outside the grid."""


class NoRoomsError(ScenarioError):
    """No room is eligible for fire ignition."""


class UnknownExitError(ScenarioError):
    """A referenced exit id does not exist on the map."""


class OvercrowdedError(ScenarioError):
    """More agents requested than distinct spawn cells available."""


class SimEndedError(Exception):
    """step() was called on a finished simulation."""


class MissingGroupError(ValueError):
    """A session record lacks the group label aggregation needs."""


class MissingTimeError(ValueError):
    """A session record lacks the player egress time aggregation needs."""


class RecordParseError(ValueError):
    """A tabular log row could not be parsed; carries the 1-based row."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class WrongPhaseError(Exception):
    """A session operation was called outside its allowed phase."""


class UnknownSessionError(KeyError):
    """No session with the given id."""
