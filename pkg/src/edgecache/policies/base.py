"""Score-based eviction policies over a shared request stream.

Every policy keeps its own per-item bookkeeping, fed by ``observe`` exactly
once per request (in stream order) regardless of how many caches consult it.
Scores follow one convention: higher means more worth keeping, and the item
with the lowest score is evicted. Ties break toward the oldest insertion
into the cache at hand, then the lexicographically smallest item id.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Mapping

from ..errors import ConfigError
from ..traces import Trace, item_history_index


@dataclass(frozen=True)
class PolicyScore:
    item_id: str
    score: float


@dataclass(frozen=True)
class EvictionDecision:
    """The chosen victim; ``scores`` holds the full snapshot when requested."""

    item_id: str
    score: float
    scores: dict[str, float] | None = None


class Policy:
    """Base interface: observe the stream, score items, pick a victim."""

    policy_id: str = "policy"

    def observe(self, timestamp: float, item: str) -> None:
        raise NotImplementedError

    def score(self, item: str, now: float) -> float:
        raise NotImplementedError

    def pick_eviction(self, contents: Mapping[str, int], now: float, *, snapshot: bool = False) -> EvictionDecision:
        """Victim among ``contents`` (item -> insertion sequence number)."""
        return evict_lowest(self.score, contents, now, snapshot=snapshot)

    def __repr__(self):
        return f"<{type(self).__name__} {self.policy_id}>"


def evict_lowest(score_fn, contents: Mapping[str, int], now: float, *, snapshot: bool = False) -> EvictionDecision:
    if not contents:
        raise ValueError("cannot pick an eviction from an empty cache")
    best_key = None
    best_item = None
    best_score = 0.0
    scores = {} if snapshot else None
    for item, seq in contents.items():
        s = score_fn(item, now)
        if scores is not None:
            scores[item] = s
        key = (s, seq, item)
        if best_key is None or key < best_key:
            best_key = key
            best_item = item
            best_score = s
    return EvictionDecision(best_item, best_score, scores)


class LfuDeltaPolicy(Policy):
    """Frequency within a sliding window of the last ``delta`` requests.

    ``delta=None`` means an unbounded window (classic LFU). The window is
    counted in global requests across all items; the current request is
    inside it. Items never seen score 0.
    """

    def __init__(self, delta: int | None = None):
        if delta is not None and delta < 1:
            raise ConfigError(f"lfu window must be >= 1 or unbounded, got {delta}")
        self.delta = delta
        self.policy_id = "lfu-inf" if delta is None else f"lfu-{delta}"
        self._counts: Counter[str] = Counter()
        self._window: deque[str] = deque()

    def observe(self, timestamp: float, item: str) -> None:
        self._counts[item] += 1
        if self.delta is not None:
            self._window.append(item)
            if len(self._window) > self.delta:
                old = self._window.popleft()
                left = self._counts[old] - 1
                if left:
                    self._counts[old] = left
                else:
                    del self._counts[old]

    def score(self, item: str, now: float) -> float:
        return float(self._counts.get(item, 0))


class LruNPolicy(Policy):
    """Negated elapsed time since the n-th most recent request of the item.

    ``n=1`` is classic LRU. Items with fewer than n past requests fall back
    to their oldest known request; items never seen score -inf and are the
    first to go.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError(f"lru depth must be >= 1, got {n}")
        self.n = n
        self.policy_id = f"lru-{n}"
        self._recent: dict[str, deque[float]] = {}

    def observe(self, timestamp: float, item: str) -> None:
        dq = self._recent.get(item)
        if dq is None:
            dq = deque(maxlen=self.n)
            self._recent[item] = dq
        dq.append(timestamp)

    def score(self, item: str, now: float) -> float:
        dq = self._recent.get(item)
        if not dq:
            return float("-inf")
        return -(now - dq[0])


class FifPolicy(Policy):
    """Farthest-in-future oracle: score = now - next arrival time.

    Needs the whole trace up front. An item with no future request scores
    -inf, so it is evicted before anything that will be requested again.
    """

    policy_id = "fif"

    def __init__(self, trace: Trace):
        self._arrivals = {item: h.arrival_times for item, h in item_history_index(trace).items()}
        self._seen: Counter[str] = Counter()

    def observe(self, timestamp: float, item: str) -> None:
        self._seen[item] += 1

    def next_arrival(self, item: str) -> float | None:
        arr = self._arrivals.get(item)
        if arr is None:
            return None
        k = self._seen[item]
        return arr[k] if k < len(arr) else None

    def score(self, item: str, now: float) -> float:
        nxt = self.next_arrival(item)
        return float("-inf") if nxt is None else now - nxt


def fif_score(next_arrival: float | None, now: float) -> float:
    """Stateless form of the oracle score for a known next arrival."""
    return float("-inf") if next_arrival is None else now - next_arrival
