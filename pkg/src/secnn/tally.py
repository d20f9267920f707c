"""Generic labeled counters shared by protocol, transport, and compare code."""

from __future__ import annotations

import threading
from collections import defaultdict


class Tally:
    def __init__(self):
        self._lock = threading.Lock()
        self._c = defaultdict(int)

    def bump(self, key: str, by: int = 1):
        with self._lock:
            self._c[key] += by

    def get(self, key: str) -> int:
        with self._lock:
            return self._c[key]

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._c)

    def diff(self, before: dict) -> dict:
        now = self.snapshot()
        keys = set(now) | set(before)
        return {k: now.get(k, 0) - before.get(k, 0) for k in keys if now.get(k, 0) != before.get(k, 0)}
