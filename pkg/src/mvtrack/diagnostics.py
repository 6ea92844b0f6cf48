"""Structured diagnostic events emitted by pipeline stages."""
from __future__ import annotations

import json
import logging
from collections import Counter

log = logging.getLogger("mvtrack")


class Diagnostics:
    """Collects events as dicts; ``verbose`` also keeps high-volume records."""

    def __init__(self, verbose=False):
        self.verbose = verbose
        self.events: list[dict] = []

    def emit(self, kind, **fields):
        event = {"kind": kind, **fields}
        self.events.append(event)
        log.debug("%s %s", kind, fields)

    def detail(self, kind, **fields):
        """Record only in verbose mode (merge audits, candidate counts)."""
        if self.verbose:
            self.emit(kind, **fields)

    def of_kind(self, kind):
        return [e for e in self.events if e["kind"] == kind]

    def counts(self) -> Counter:
        return Counter(e["kind"] for e in self.events)

    def write_jsonl(self, fh):
        for e in self.events:
            fh.write(json.dumps(e, default=_jsonable) + "\n")


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    return str(x)
