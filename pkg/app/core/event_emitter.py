"""
Event emitter for simulator collision events, plus the NDJSON event-log writer
"""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)

Listener = Callable[[Any], None]


class CollisionEventEmitter:
    """
    Fan-out of collision events to registered listeners.
    A listener that raises is logged and dropped; the simulation carries on.
    """

    def __init__(self):
        self._listeners: List[Listener] = []

    @property
    def listener_count(self) -> int:
        return len(self._listeners)

    def add_listener(self, callback: Listener):
        """Add a listener function that will be called for every collision event"""
        if callback not in self._listeners:
            self._listeners.append(callback)
            logger.debug(f"Added event listener: {callback}")

    def remove_listener(self, callback: Listener):
        if callback in self._listeners:
            self._listeners.remove(callback)
            logger.debug(f"Removed event listener: {callback}")

    def emit_collision(self, event: Any):
        self._emit_event(event)

    def _emit_event(self, event: Any):
        if not self._listeners:
            return
        for listener in self._listeners[:]:  # copy, listeners may be removed below
            try:
                listener(event)
            except Exception as e:
                logger.error(f"Error sending event to listener {listener}: {e}")
                try:
                    self._listeners.remove(listener)
                except ValueError:
                    pass


def event_payload(event: Any) -> Dict[str, Any]:
    if hasattr(event, "to_dict"):
        return event.to_dict()
    return dict(event)


class NdjsonEventLog:
    """Listener writing one JSON object per line; usable as a context manager"""

    def __init__(self, path: str):
        self.path = Path(path)
        self.count = 0
        self._handle = None

    def open(self) -> "NdjsonEventLog":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8")
        return self

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None
            logger.info(f"Wrote {self.count} events to {self.path}")

    def __call__(self, event: Any):
        if self._handle is None:
            self.open()
        self._handle.write(json.dumps(event_payload(event), default=str) + "\n")
        self.count += 1

    def __enter__(self) -> "NdjsonEventLog":
        return self.open()

    def __exit__(self, exc_type, exc, tb):
        self.close()


def read_event_log(path: str) -> List[Dict[str, Any]]:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def attach_event_log(emitter: CollisionEventEmitter, path: Optional[str]) -> Optional[NdjsonEventLog]:
    if not path:
        return None
    log = NdjsonEventLog(path).open()
    emitter.add_listener(log)
    return log
