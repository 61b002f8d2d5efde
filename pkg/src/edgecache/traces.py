"""Request traces: data model, CSV ingest/egress, and synthetic generators.

A trace is an ordered sequence of timestamped content requests. Synthetic
traces come from two generators: a stationary Zipf workload with Poisson
arrivals, and a non-stationary one where each item's request rate is a
pulse ``volume * shape(t - birth)`` whose shape integrates to one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, TraceFormatError
from .rng import child_seed, substream


@dataclass(frozen=True)
class Request:
    """One content request: time in seconds from trace start, opaque item id."""

    timestamp: float
    item_id: str
    watch_duration: float | None = None

    def __post_init__(self):
        if not self.item_id:
            raise ValueError("item_id must be non-empty")
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be finite and non-negative, got {self.timestamp}")


@dataclass(frozen=True)
class Trace:
    """Time-ordered requests plus the set of distinct item ids seen."""

    requests: tuple[Request, ...]
    catalog: frozenset[str]
    sort_warnings: int = 0

    def __len__(self) -> int:
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.requests], dtype=np.float64)

    def item_ids(self) -> list[str]:
        return [r.item_id for r in self.requests]


@dataclass(frozen=True)
class ItemHistory:
    """Per-item arrival times, in stream order."""

    item_id: str
    arrival_times: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.arrival_times)

    def inter_arrivals(self) -> list[float]:
        """Gaps between consecutive requests; length count-1."""
        t = self.arrival_times
        return [t[i + 1] - t[i] for i in range(len(t) - 1)]


def build_trace(requests: Iterable[Request], *, sort_warnings: int = 0) -> Trace:
    """Assemble a Trace, stable-sorting by timestamp if needed."""
    reqs = list(requests)
    warnings = sort_warnings
    for i in range(len(reqs) - 1):
        if reqs[i + 1].timestamp < reqs[i].timestamp:
            warnings += 1
    if warnings > sort_warnings:
        reqs.sort(key=lambda r: r.timestamp)  # stable: file order breaks ties
    return Trace(tuple(reqs), frozenset(r.item_id for r in reqs), warnings)


def merge_traces(traces: Sequence[Trace]) -> Trace:
    """Interleave several traces by timestamp (stable across inputs in order)."""
    merged: list[Request] = []
    for t in traces:
        merged.extend(t.requests)
    merged.sort(key=lambda r: r.timestamp)
    return Trace(tuple(merged), frozenset(r.item_id for r in merged), 0)


def slice_trace(trace: Trace, skip: int = 0, limit: int | None = None) -> Trace:
    """Contiguous request-index slice; timestamps are kept as-is."""
    reqs = trace.requests[skip : None if limit is None else skip + limit]
    return Trace(tuple(reqs), frozenset(r.item_id for r in reqs), 0)


# ---------------------------------------------------------------------------
# CSV ingest / egress
#
# Format: header `timestamp,item_id[,duration]`, decimal-second timestamps,
# UTF-8, ids must not contain commas.
# ---------------------------------------------------------------------------

_HEADERS = (["timestamp", "item_id"], ["timestamp", "item_id", "duration"])


def load_trace(path, *, rebase: bool = False) -> Trace:
    """Parse a trace CSV.

    Out-of-order rows are stable-sorted and counted in ``sort_warnings``.
    With ``rebase`` the first (sorted) timestamp is subtracted from all rows,
    which turns absolute epochs into seconds from trace start.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: line 1: missing header") from None
        header = [h.strip() for h in header]
        if header not in _HEADERS:
            raise TraceFormatError(
                f"{path}: line 1: expected header 'timestamp,item_id[,duration]', got {','.join(header)!r}"
            )
        has_duration = len(header) == 3
        requests: list[Request] = []
        warnings = 0
        prev_ts = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                ts = float(row[0])
            except ValueError:
                raise TraceFormatError(f"{path}: line {lineno}: bad timestamp {row[0]!r}") from None
            item = row[1].strip()
            duration = None
            if has_duration and row[2].strip():
                try:
                    duration = float(row[2])
                except ValueError:
                    raise TraceFormatError(f"{path}: line {lineno}: bad duration {row[2]!r}") from None
            try:
                req = Request(ts, item, duration)
            except ValueError as exc:
                raise TraceFormatError(f"{path}: line {lineno}: {exc}") from None
            if prev_ts is not None and ts < prev_ts:
                warnings += 1
            prev_ts = ts
            requests.append(req)
    if warnings:
        requests.sort(key=lambda r: r.timestamp)
    if rebase and requests:
        t0 = requests[0].timestamp
        requests = [Request(r.timestamp - t0, r.item_id, r.watch_duration) for r in requests]
    return Trace(tuple(requests), frozenset(r.item_id for r in requests), warnings)


def save_trace(trace: Trace, path) -> None:
    """Write a trace back to CSV; the duration column appears only if used."""
    has_duration = any(r.watch_duration is not None for r in trace.requests)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if has_duration:
            writer.writerow(["timestamp", "item_id", "duration"])
            for r in trace.requests:
                writer.writerow([repr(r.timestamp), r.item_id, "" if r.watch_duration is None else repr(r.watch_duration)])
        else:
            writer.writerow(["timestamp", "item_id"])
            for r in trace.requests:
                writer.writerow([repr(r.timestamp), r.item_id])


def item_history_index(trace: Trace) -> dict[str, ItemHistory]:
    """Per-item arrival-time subsequences, order-preserving."""
    times: dict[str, list[float]] = {}
    for r in trace.requests:
        times.setdefault(r.item_id, []).append(r.timestamp)
    return {item: ItemHistory(item, tuple(ts)) for item, ts in times.items()}


# ---------------------------------------------------------------------------
# Popularity pulse shapes: each integrates to 1 over its support, so a
# content with volume V yields V expected requests if the support fits
# inside the horizon.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialDecayShape:
    mean_lifespan: float

    def __post_init__(self):
        if self.mean_lifespan <= 0:
            raise ConfigError("mean_lifespan must be positive")

    def rate(self, u: float) -> float:
        return math.exp(-u / self.mean_lifespan) / self.mean_lifespan if u >= 0 else 0.0

    def peak(self) -> float:
        return 1.0 / self.mean_lifespan

    def support_end(self) -> float:
        return math.inf


@dataclass(frozen=True)
class ConstantBoxShape:
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")

    def rate(self, u: float) -> float:
        return 1.0 / self.duration if 0 <= u < self.duration else 0.0

    def peak(self) -> float:
        return 1.0 / self.duration

    def support_end(self) -> float:
        return self.duration


@dataclass(frozen=True)
class PowerLawDecayShape:
    exponent: float
    cutoff: float

    def __post_init__(self):
        if self.exponent <= 0 or self.cutoff <= 0:
            raise ConfigError("exponent and cutoff must be positive")

    def _norm(self) -> float:
        a, t = self.exponent, self.cutoff
        if abs(a - 1.0) < 1e-12:
            return math.log1p(t)
        return ((1.0 + t) ** (1.0 - a) - 1.0) / (1.0 - a)

    def rate(self, u: float) -> float:
        if not 0 <= u <= self.cutoff:
            return 0.0
        return (1.0 + u) ** (-self.exponent) / self._norm()

    def peak(self) -> float:
        return 1.0 / self._norm()

    def support_end(self) -> float:
        return self.cutoff


Shape = ExponentialDecayShape | ConstantBoxShape | PowerLawDecayShape


@dataclass(frozen=True)
class ShotNoiseContent:
    """One item's popularity pulse: born at birth_time, volume expected requests."""

    item_id: str
    birth_time: float
    volume: float
    shape: Shape

    def __post_init__(self):
        if self.volume <= 0:
            raise ConfigError(f"content {self.item_id!r}: volume must be positive")
        if self.birth_time < 0:
            raise ConfigError(f"content {self.item_id!r}: birth_time must be non-negative")


def generate_shot_noise_trace(contents: Sequence[ShotNoiseContent], horizon: float, seed: int) -> Trace:
    """Sample every content's inhomogeneous Poisson pulse and merge by time.

    Sampling uses thinning against the analytic peak rate of each shape, so
    the draw is exact and deterministic for a given seed.
    """
    if horizon <= 0:
        raise ConfigError("horizon must be positive")
    if not contents:
        raise ConfigError("contents must be non-empty")
    requests: list[Request] = []
    for idx, c in enumerate(contents):
        rng = substream(seed, f"shot-noise-{idx}")
        end = min(horizon, c.birth_time + c.shape.support_end())
        if c.birth_time >= horizon:
            continue
        max_rate = c.volume * c.shape.peak()
        t = c.birth_time
        while True:
            t += rng.exponential(1.0 / max_rate)
            if t >= end:
                break
            u = t - c.birth_time
            if rng.random() * max_rate <= c.volume * c.shape.rate(u):
                requests.append(Request(t, c.item_id))
    requests.sort(key=lambda r: r.timestamp)
    return Trace(tuple(requests), frozenset(r.item_id for r in requests), 0)


def zipf_weights(catalog_size: int, exponent: float) -> np.ndarray:
    """Normalized rank probabilities p_i proportional to 1/i^exponent."""
    ranks = np.arange(1, catalog_size + 1, dtype=np.float64)
    w = ranks ** (-exponent)
    return w / w.sum()


def generate_zipf_irm_trace(
    catalog_size: int,
    zipf_exponent: float,
    num_requests: int,
    mean_rate: float,
    seed: int,
) -> Trace:
    """Stationary workload: items i.i.d. Zipf-ranked, gaps exponential.

    Item ids are the stringified ranks, "0" being the most popular.
    """
    if catalog_size < 1:
        raise ConfigError("catalog_size must be >= 1")
    if num_requests < 0:
        raise ConfigError("num_requests must be >= 0")
    if mean_rate <= 0:
        raise ConfigError("mean_rate must be positive")
    if num_requests == 0:
        return Trace((), frozenset(), 0)
    rng = substream(seed, "zipf-irm")
    probs = zipf_weights(catalog_size, zipf_exponent)
    items = rng.choice(catalog_size, size=num_requests, p=probs)
    gaps = rng.exponential(1.0 / mean_rate, size=num_requests)
    ts = np.cumsum(gaps)
    requests = tuple(Request(float(t), str(int(i))) for t, i in zip(ts, items))
    return Trace(requests, frozenset(r.item_id for r in requests), 0)


# ---------------------------------------------------------------------------
# JSON generator configs (the `gen-trace` CLI input). Schema documented in
# the README; kinds: zipf-irm, shot-noise, mix.
# ---------------------------------------------------------------------------

_SHAPE_BUILDERS = {
    "exponential-decay": lambda p: ExponentialDecayShape(float(p["mean_lifespan"])),
    "constant-box": lambda p: ConstantBoxShape(float(p["duration"])),
    "power-law-decay": lambda p: PowerLawDecayShape(float(p["exponent"]), float(p["cutoff"])),
}


def _content_from_config(entry: Mapping, index: int) -> ShotNoiseContent:
    try:
        shape_name = entry["shape"]
        builder = _SHAPE_BUILDERS.get(shape_name)
        if builder is None:
            raise ConfigError(f"unknown shape {shape_name!r} (choices: {sorted(_SHAPE_BUILDERS)})")
        shape = builder(entry)
        return ShotNoiseContent(
            item_id=str(entry.get("id", f"sn{index}")),
            birth_time=float(entry.get("birth", 0.0)),
            volume=float(entry["volume"]),
            shape=shape,
        )
    except KeyError as exc:
        raise ConfigError(f"shot-noise content {index}: missing field {exc.args[0]!r}") from None


def generate_trace_from_config(config: Mapping, seed: int) -> Trace:
    """Build a trace from a generator config dict (see README for the schema)."""
    kind = config.get("kind")
    if kind == "zipf-irm":
        try:
            return generate_zipf_irm_trace(
                catalog_size=int(config["catalog_size"]),
                zipf_exponent=float(config["exponent"]),
                num_requests=int(config["num_requests"]),
                mean_rate=float(config["mean_rate"]),
                seed=seed,
            )
        except KeyError as exc:
            raise ConfigError(f"zipf-irm config: missing field {exc.args[0]!r}") from None
    if kind == "shot-noise":
        try:
            horizon = float(config["horizon"])
            entries = config["contents"]
        except KeyError as exc:
            raise ConfigError(f"shot-noise config: missing field {exc.args[0]!r}") from None
        contents = [_content_from_config(e, i) for i, e in enumerate(entries)]
        return generate_shot_noise_trace(contents, horizon, seed)
    if kind == "mix":
        components = config.get("components")
        if not components:
            raise ConfigError("mix config: 'components' must be a non-empty list")
        parts = [generate_trace_from_config(c, child_seed(seed, i)) for i, c in enumerate(components)]
        return merge_traces(parts)
    raise ConfigError(f"unknown generator kind {kind!r} (choices: zipf-irm, shot-noise, mix)")
