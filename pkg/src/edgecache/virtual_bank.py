"""Parallel key-only caches, one per ensemble policy.

The bank replays the shared request stream through every policy's own
virtual cache so their would-be hit ratios can be compared without touching
the primary cache. Hit ratios are accounted in fixed slots of (by default)
100 requests, and the last 10 completed slots per policy form the selector's
observation matrix. All virtual caches can be re-based onto the primary
cache's membership at synchronization points; per-policy score bookkeeping
and the hit-ratio windows survive a sync, only membership is overwritten.

Policies must be observed exactly once per request by the caller (or use
``step`` which does it for standalone runs).
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cache import Cache
from .errors import ConfigError
from .policies.base import Policy

SLOT_REQUESTS = 100
WINDOW_SLOTS = 10


@dataclass(frozen=True)
class VirtualOutcome:
    """What one policy's virtual cache did with a request."""

    policy_id: str
    hit: bool
    evicted: str | None


class VirtualCacheBank:
    def __init__(
        self,
        policies: Sequence[Policy],
        capacity: int,
        *,
        slot_requests: int = SLOT_REQUESTS,
        window_slots: int = WINDOW_SLOTS,
    ):
        if len(policies) < 2:
            raise ConfigError(f"an ensemble needs at least 2 policies, got {len(policies)}")
        ids = [p.policy_id for p in policies]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate policy ids in ensemble: {ids}")
        self.policies = list(policies)
        self.policy_ids = ids
        self.caches = [Cache(capacity) for _ in policies]
        self.slot_requests = slot_requests
        self.window_slots = window_slots
        self.requests_processed = 0
        self._slot_hits = [0 for _ in policies]
        self._windows = [deque(maxlen=window_slots) for _ in policies]
        self.slot_log: list[list[float]] = []  # completed slots x policies
        self.syncs = 0

    def __len__(self):
        return len(self.policies)

    def process_request(self, timestamp: float, item: str) -> list[VirtualOutcome]:
        """Run one (already observed) request through every virtual cache."""
        outcomes = []
        for k, (policy, cache) in enumerate(zip(self.policies, self.caches)):
            hit, evicted = cache.process(timestamp, item, policy)
            if hit:
                self._slot_hits[k] += 1
            outcomes.append(VirtualOutcome(policy.policy_id, hit, evicted))
        self.requests_processed += 1
        if self.requests_processed % self.slot_requests == 0:
            ratios = [h / self.slot_requests for h in self._slot_hits]
            for k, ratio in enumerate(ratios):
                self._windows[k].append(ratio)
            self.slot_log.append(ratios)
            self._slot_hits = [0 for _ in self.policies]
        return outcomes

    def step(self, timestamp: float, item: str) -> list[VirtualOutcome]:
        """Observe all policies, then process: for standalone bank use."""
        for policy in self.policies:
            policy.observe(timestamp, item)
        return self.process_request(timestamp, item)

    def sync_to_primary(self, primary_items_in_order: Iterable[str]) -> None:
        """Overwrite every virtual cache's membership with the primary's."""
        items = list(primary_items_in_order)
        for cache in self.caches:
            cache.seed_contents(items)
        self.syncs += 1

    def hit_ratio_features(self) -> np.ndarray:
        """(window_slots x ensemble) matrix of per-slot virtual hit ratios,
        oldest slot first, zero-padded before warm-up."""
        out = np.zeros((self.window_slots, len(self.policies)), dtype=np.float64)
        for k, window in enumerate(self._windows):
            vals = list(window)
            if vals:
                out[self.window_slots - len(vals) :, k] = vals
        return out

    def totals(self) -> dict[str, dict[str, int]]:
        return {
            pid: {"hits": cache.hits, "misses": cache.misses, "evictions": cache.evictions}
            for pid, cache in zip(self.policy_ids, self.caches)
        }

    def dump_slot_log(self, path) -> None:
        """Diagnostics CSV: one row per completed slot per policy."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["slot", "policy", "hit_ratio"])
            for slot_idx, ratios in enumerate(self.slot_log):
                for pid, ratio in zip(self.policy_ids, ratios):
                    writer.writerow([slot_idx, pid, repr(ratio)])
