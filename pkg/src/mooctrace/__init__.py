"""Activity-sequence graphs and dropout prediction for MOOC event logs."""

from mooctrace.events import ActivityToken, Event, RawClickEvent, RawForumEvent

__all__ = ["ActivityToken", "Event", "RawClickEvent", "RawForumEvent"]

__version__ = "0.1.0"
