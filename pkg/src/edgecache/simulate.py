"""End-to-end simulation runs and report assembly.

Three run modes share the same request loop: a single policy controlling the
primary cache, a trained selector switching among an ensemble (with its
virtual-cache bank), and the oracle-assisted selector that picks among the
ensemble's eviction candidates by their true next arrival. Reports carry
only deterministic content so identical seeds give byte-identical output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .agent import SelectorAgent, build_state, max_trailing_volume
from .cache import Cache
from .errors import ConfigError
from .policies import build_policies, parse_policy_id
from .policies.base import EvictionDecision, FifPolicy, Policy
from .policies.lstm_int import train_lstm_int
from .policies.lstm_req import train_lstm_req
from .traces import Trace, slice_trace
from .virtual_bank import SLOT_REQUESTS, WINDOW_SLOTS, VirtualCacheBank

DEFAULT_METRICS_SLOT = 500


class MetricsAccumulator:
    """Counts hits per fixed-size request slot, skipping a warmup prefix."""

    def __init__(self, slot_requests: int = DEFAULT_METRICS_SLOT, warmup: int = 0):
        if slot_requests < 1:
            raise ConfigError(f"metrics slot must be >= 1 request, got {slot_requests}")
        if warmup < 0:
            raise ConfigError(f"warmup must be >= 0, got {warmup}")
        self.slot_requests = slot_requests
        self.warmup = warmup
        self.seen = 0
        self.counted = 0
        self.hits = 0
        self._slot_hits = 0
        self._slot_requests = 0
        self.slots: list[dict] = []

    def record(self, hit: bool) -> None:
        self.seen += 1
        if self.seen <= self.warmup:
            return
        self.counted += 1
        self._slot_requests += 1
        if hit:
            self.hits += 1
            self._slot_hits += 1
        if self._slot_requests == self.slot_requests:
            self._close_slot()

    def _close_slot(self) -> None:
        self.slots.append(
            {
                "slot": len(self.slots),
                "requests": self._slot_requests,
                "hits": self._slot_hits,
                "hit_ratio": self._slot_hits / self._slot_requests,
            }
        )
        self._slot_hits = 0
        self._slot_requests = 0

    def finish(self) -> None:
        if self._slot_requests:
            self._close_slot()

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.counted if self.counted else 0.0


@dataclass
class SimulationReport:
    config: dict
    totals: dict
    cumulative_hit_ratio: float
    slots: list[dict]
    selection: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "totals": self.totals,
            "cumulative_hit_ratio": self.cumulative_hit_ratio,
            "slots": self.slots,
            "selection": self.selection,
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["slot", "requests", "hits", "hit_ratio"])
            for row in self.slots:
                writer.writerow([row["slot"], row["requests"], row["hits"], repr(row["hit_ratio"])])


def _report(config, metrics: MetricsAccumulator, cache: Cache, extra_totals=None, selection=None) -> SimulationReport:
    metrics.finish()
    totals = {
        "requests": metrics.seen,
        "counted_requests": metrics.counted,
        "hits": metrics.hits,
        "cache_hits": cache.hits,
        "cache_misses": cache.misses,
        "evictions": cache.evictions,
    }
    if extra_totals:
        totals.update(extra_totals)
    return SimulationReport(dict(config), totals, metrics.hit_ratio, metrics.slots, selection)


def run_policy_simulation(
    trace: Trace,
    policy: Policy,
    capacity: int,
    *,
    metrics_slot: int = DEFAULT_METRICS_SLOT,
    warmup: int = 0,
    config: Mapping | None = None,
) -> SimulationReport:
    """Replay the trace through one policy on a cold primary cache."""
    cache = Cache(capacity)
    metrics = MetricsAccumulator(metrics_slot, warmup)
    for r in trace:
        policy.observe(r.timestamp, r.item_id)
        hit, _ = cache.process(r.timestamp, r.item_id, policy)
        metrics.record(hit)
    return _report(config or {"controller": policy.policy_id}, metrics, cache)


class _FifSelectorRule(Policy):
    """Per-request composite: evict the member candidate whose next request
    is farthest away (minimum oracle score); ties by insertion age, then id."""

    policy_id = "fif-selector"

    def __init__(self, members: Sequence[Policy], oracle: FifPolicy):
        self.members = list(members)
        self.oracle = oracle

    def observe(self, timestamp: float, item: str) -> None:
        for p in self.members:
            p.observe(timestamp, item)
        self.oracle.observe(timestamp, item)

    def pick_eviction(self, contents, now, *, snapshot: bool = False) -> EvictionDecision:
        best = None
        for p in self.members:
            cand = p.pick_eviction(contents, now).item_id
            key = (self.oracle.score(cand, now), contents[cand], cand)
            if best is None or key < best:
                best = key
        return EvictionDecision(best[2], best[0])


def run_fif_selector(
    trace: Trace,
    policies: Sequence[Policy],
    capacity: int,
    *,
    metrics_slot: int = DEFAULT_METRICS_SLOT,
    warmup: int = 0,
    config: Mapping | None = None,
) -> SimulationReport:
    """Oracle-assisted upper bound: the best member candidate is evicted at
    every miss, judged by true future arrivals."""
    if not policies:
        raise ConfigError("fif-selector needs a non-empty ensemble")
    rule = _FifSelectorRule(policies, FifPolicy(trace))
    cache = Cache(capacity)
    metrics = MetricsAccumulator(metrics_slot, warmup)
    for r in trace:
        rule.observe(r.timestamp, r.item_id)
        hit, _ = cache.process(r.timestamp, r.item_id, rule)
        metrics.record(hit)
    return _report(config or {"controller": "fif-selector"}, metrics, cache)


def run_cec_simulation(
    trace: Trace,
    agent: SelectorAgent,
    policies: Sequence[Policy],
    capacity: int,
    volume_cap: int,
    *,
    metrics_slot: int = DEFAULT_METRICS_SLOT,
    warmup: int = 0,
    config: Mapping | None = None,
    dump_virtual_path=None,
) -> SimulationReport:
    """Evaluation run: greedy selection every decision window, no oracle."""
    ids = [p.policy_id for p in policies]
    if ids != agent.ensemble_ids:
        raise ConfigError(f"ensemble mismatch: agent expects {agent.ensemble_ids}, got {ids}")
    cfg = agent.config
    primary = Cache(capacity)
    bank = VirtualCacheBank(policies, capacity, slot_requests=SLOT_REQUESTS, window_slots=WINDOW_SLOTS)
    metrics = MetricsAccumulator(metrics_slot, warmup)
    item_seq = [r.item_id for r in trace.requests]
    ts_array = trace.timestamps()
    selection_counts = {pid: 0 for pid in ids}
    action = 0
    decisions = 0
    for i, r in enumerate(trace):
        if i % cfg.decision_requests == 0:
            state = build_state(bank.hit_ratio_features(), item_seq, ts_array, i, volume_cap)
            action = agent.select(state)
            selection_counts[ids[action]] += 1
            decisions += 1
        ts, item = r.timestamp, r.item_id
        for p in policies:
            p.observe(ts, item)
        hit, _ = primary.process(ts, item, policies[action])
        bank.process_request(ts, item)
        metrics.record(hit)
        if (i + 1) % cfg.sync_requests == 0:
            bank.sync_to_primary(primary.items_by_insertion())
    if dump_virtual_path is not None:
        bank.dump_slot_log(dump_virtual_path)
    selection = {
        "decisions": decisions,
        "counts": selection_counts,
        "rates": {pid: (c / decisions if decisions else 0.0) for pid, c in selection_counts.items()},
    }
    return _report(
        config or {"controller": "cec"},
        metrics,
        primary,
        extra_totals={"syncs": bank.syncs},
        selection=selection,
    )


# ---------------------------------------------------------------------------
# Model training for LSTM-backed policy ids
# ---------------------------------------------------------------------------


def train_models_for(
    policy_ids: Sequence[str],
    trace: Trace,
    *,
    train_frac: float = 0.5,
    epochs: int = 20,
    seed: int = 0,
) -> dict[str, object]:
    """Train whatever models the given policy ids need, on a leading slice
    of the trace. Returns {policy_id: model}; empty when none are needed."""
    if not 0.0 < train_frac <= 1.0:
        raise ConfigError(f"train fraction must be in (0, 1], got {train_frac}")
    models: dict[str, object] = {}
    needed = [pid for pid in policy_ids if parse_policy_id(pid)["kind"] in ("lstm-int", "lstm-req")]
    if not needed:
        return models
    cut = max(1, int(len(trace) * train_frac))
    train_trace = slice_trace(trace, 0, cut) if cut < len(trace) else trace
    for pid in needed:
        spec = parse_policy_id(pid)
        if spec["kind"] == "lstm-int":
            models[pid] = train_lstm_int(train_trace, epochs=epochs, seed=seed)
        else:
            models[pid] = train_lstm_req(train_trace, spec["slot_seconds"], epochs=epochs, seed=seed)
    return models


def make_policy_factory(policy_ids: Sequence[str], trace: Trace, models: Mapping[str, object]):
    """Closure producing fresh, stateless-restarted policy instances."""

    def factory():
        return build_policies(policy_ids, trace=trace, models=models)

    return factory


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


def compare_reports(reports: Sequence[Mapping]) -> dict:
    """Hit ratios side by side plus pairwise relative improvements (a-b)/b.

    All reports must describe the same trace and capacity.
    """
    if len(reports) < 2:
        raise ConfigError("compare needs at least two reports")
    keys = set()
    for rep in reports:
        cfg = rep.get("config", {})
        keys.add((cfg.get("trace"), cfg.get("capacity")))
    if len(keys) > 1:
        raise ConfigError(f"reports disagree on trace/capacity: {sorted(keys)}")
    labels = []
    for rep in reports:
        base = rep.get("config", {}).get("controller", "run")
        label = base
        k = 2
        while label in labels:
            label = f"{base}#{k}"
            k += 1
        labels.append(label)
    ratios = [float(rep["cumulative_hit_ratio"]) for rep in reports]
    improvements: dict[str, dict[str, float | None]] = {}
    for i, a in enumerate(labels):
        improvements[a] = {}
        for j, b in enumerate(labels):
            if i == j:
                continue
            improvements[a][b] = (ratios[i] - ratios[j]) / ratios[j] if ratios[j] > 0 else None
    return {
        "trace": reports[0].get("config", {}).get("trace"),
        "capacity": reports[0].get("config", {}).get("capacity"),
        "rows": [{"controller": lab, "hit_ratio": r} for lab, r in zip(labels, ratios)],
        "relative_improvement": improvements,
    }


def comparison_to_text(comparison: Mapping) -> str:
    """Fixed-width table for the console."""
    rows = comparison["rows"]
    width = max(len(r["controller"]) for r in rows)
    lines = [f"{'controller'.ljust(width)}  hit_ratio"]
    for r in rows:
        lines.append(f"{r['controller'].ljust(width)}  {r['hit_ratio']:.4f}")
    lines.append("")
    lines.append("relative improvement (row over column):")
    labels = [r["controller"] for r in rows]
    header = " " * (width + 2) + "  ".join(lab.rjust(9) for lab in labels)
    lines.append(header)
    for a in labels:
        cells = []
        for b in labels:
            if a == b:
                cells.append("-".rjust(9))
            else:
                val = comparison["relative_improvement"][a].get(b)
                cells.append(("n/a" if val is None else f"{100 * val:+.1f}%").rjust(9))
        lines.append(f"{a.ljust(width)}  " + "  ".join(cells))
    return "\n".join(lines) + "\n"
