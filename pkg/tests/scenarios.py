"""Synthetic workload builders for the acceptance suite.

Two engineered regimes with opposite winners:

* frequency-friendly: a stable hot set plus a stream of one-shot items.
  An unbounded-frequency policy keeps the hot set and sheds the one-shots
  (which are never requested again); a recency policy lets every one-shot
  displace a hot member.

* recency-friendly: overlapping popularity pulses. Each newborn item takes
  all of its requests within a short span and then dies. A recency policy
  keeps the live pulses and evicts the dead (never-returning) ones; an
  unbounded-frequency policy hoards dead high-count items and keeps evicting
  the newborns that are just about to be requested again.
"""

import numpy as np

from edgecache.traces import Request, Trace, build_trace


def lfu_friendly_block(rng, *, start_time, num_requests, hot_items, p_hot=0.7, rate=10.0, oneshot_prefix="x"):
    """Hot-set workload with one-shot noise; returns (requests, end_time)."""
    reqs = []
    t = start_time
    for k in range(num_requests):
        t += rng.exponential(1.0 / rate)
        if rng.random() < p_hot:
            item = hot_items[int(rng.integers(len(hot_items)))]
        else:
            item = f"{oneshot_prefix}{start_time:.0f}-{k}"
        reqs.append(Request(t, item))
    return reqs, t


def lru_friendly_block(
    rng, *, start_time, num_requests, birth_every=15, pulse_requests=15, pulse_span=120, rate=10.0, prefix="p"
):
    """Pulse workload: a new item is born every ``birth_every`` requests and
    receives ``pulse_requests`` requests within ``pulse_span``, then dies."""
    slots = []
    j = 0
    while j * birth_every < num_requests:
        base = j * birth_every
        item = f"{prefix}{j}"
        offsets = sorted(int(o) for o in rng.integers(1, pulse_span, size=pulse_requests - 1))
        slots.append((base, j, item))
        slots.extend((base + o, j, item) for o in offsets)
        j += 1
    slots.sort(key=lambda s: (s[0], s[1]))
    reqs = []
    t = start_time
    for _, _, item in slots[:num_requests]:
        t += rng.exponential(1.0 / rate)
        reqs.append(Request(t, item))
    return reqs, t


def lfu_friendly_trace(num_requests, *, num_hot=10, p_hot=0.7, rate=10.0, seed=0) -> Trace:
    rng = np.random.default_rng(seed)
    hot = [f"hot{k}" for k in range(num_hot)]
    reqs, _ = lfu_friendly_block(rng, start_time=0.0, num_requests=num_requests, hot_items=hot, p_hot=p_hot, rate=rate)
    return build_trace(reqs)


def lru_friendly_trace(num_requests, *, rate=10.0, seed=0, prefix="p") -> Trace:
    rng = np.random.default_rng(seed)
    reqs, _ = lru_friendly_block(rng, start_time=0.0, num_requests=num_requests, rate=rate, prefix=prefix)
    return build_trace(reqs)


def regime_trace(
    num_blocks,
    block_requests,
    *,
    num_hot=10,
    p_hot=0.7,
    rate=10.0,
    seed=0,
) -> Trace:
    """Alternating blocks: even blocks frequency-friendly (shared hot set),
    odd blocks recency-friendly (fresh pulse items per block)."""
    rng = np.random.default_rng(seed)
    hot = [f"hot{k}" for k in range(num_hot)]
    reqs = []
    t = 0.0
    for block in range(num_blocks):
        if block % 2 == 0:
            part, t = lfu_friendly_block(
                rng, start_time=t, num_requests=block_requests, hot_items=hot, p_hot=p_hot, rate=rate,
                oneshot_prefix=f"x{block}-",
            )
        else:
            part, t = lru_friendly_block(
                rng, start_time=t, num_requests=block_requests, rate=rate, prefix=f"w{block}-"
            )
        reqs.extend(part)
    return build_trace(reqs)


def block_hit_ratios(trace: Trace, policy, capacity, block_requests):
    """Hit ratio per contiguous block of the trace under one policy."""
    from edgecache.cache import Cache

    cache = Cache(capacity)
    ratios = []
    hits = 0
    n = 0
    for i, r in enumerate(trace):
        policy.observe(r.timestamp, r.item_id)
        hit, _ = cache.process(r.timestamp, r.item_id, policy)
        hits += hit
        n += 1
        if n == block_requests:
            ratios.append(hits / n)
            hits = 0
            n = 0
    if n:
        ratios.append(hits / n)
    return ratios
