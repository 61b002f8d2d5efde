"""Key-only cache: membership, insertion order, hit/miss counters.

The same structure backs the primary cache and every virtual cache. It
stores no payloads; ``contents`` maps item id to a monotonically increasing
insertion sequence number, which the eviction tie-break uses (oldest
insertion goes first).
"""

from __future__ import annotations

from typing import Iterable

from .errors import ConfigError
from .policies.base import Policy


class Cache:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError(f"cache capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.contents: dict[str, int] = {}
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self._next_seq = 0

    def __contains__(self, item: str) -> bool:
        return item in self.contents

    def __len__(self) -> int:
        return len(self.contents)

    def process(self, timestamp: float, item: str, policy: Policy) -> tuple[bool, str | None]:
        """Serve one request: on a miss the item is always admitted, evicting
        the policy's pick if the cache is full. Returns (hit, evicted)."""
        if item in self.contents:
            self.hits += 1
            return True, None
        self.misses += 1
        evicted = None
        if len(self.contents) >= self.capacity:
            decision = policy.pick_eviction(self.contents, timestamp)
            evicted = decision.item_id
            del self.contents[evicted]
            self.evictions += 1
        self.contents[item] = self._next_seq
        self._next_seq += 1
        return False, evicted

    def seed_contents(self, items: Iterable[str]) -> None:
        """Replace membership with ``items`` (in order); counters are kept."""
        items = list(items)
        if len(items) > self.capacity:
            raise ValueError(f"cannot seed {len(items)} items into capacity {self.capacity}")
        self.contents = {}
        for item in items:
            self.contents[item] = self._next_seq
            self._next_seq += 1

    def items_by_insertion(self) -> list[str]:
        """Current members, oldest insertion first."""
        return sorted(self.contents, key=self.contents.__getitem__)
