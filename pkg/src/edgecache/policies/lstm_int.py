"""Next-inter-arrival prediction policy.

Per-item request gaps are bucketed into equal-mass quantile partitions; a
small LSTM classifier predicts the partition of the next gap, and the
decoded gap turns into a caching score (time left until the predicted next
request, negated as it recedes into the future). Items the predictor cannot
speak for fall back to a windowed-frequency score and are evicted first.
"""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError
from ..nnet import Adam, LstmNetwork, softmax_cross_entropy
from ..rng import substream
from ..traces import Trace, item_history_index
from .base import EvictionDecision, LfuDeltaPolicy, Policy

DEFAULT_PARTITIONS = 16
DEFAULT_WINDOW = 2
DEFAULT_HIDDEN = 32
DEFAULT_FALLBACK_DELTA = 5000


@dataclass(frozen=True)
class QuantilePartitioner:
    """Equal-mass partition of the gap range, fit on training gaps.

    ``boundaries`` are the 1/P .. (P-1)/P empirical quantiles (strictly
    increasing after collapsing duplicates); ``representatives`` hold the
    median training gap of each of the P bins.
    """

    boundaries: tuple[float, ...]
    representatives: tuple[float, ...]

    @property
    def num_bins(self) -> int:
        return len(self.boundaries) + 1

    def bin_of(self, gap: float) -> int:
        """0-based bin index; bins are left-open, right-closed intervals."""
        return bisect.bisect_left(self.boundaries, gap)

    def representative(self, bin_idx: int) -> float:
        return self.representatives[bin_idx]

    def one_hot(self, gaps: Sequence[float]) -> np.ndarray:
        out = np.zeros((len(gaps), self.num_bins), dtype=np.float64)
        for row, g in enumerate(gaps):
            out[row, self.bin_of(g)] = 1.0
        return out


def fit_partitioner(training_gaps: Sequence[float], partitions: int = DEFAULT_PARTITIONS) -> QuantilePartitioner:
    """Fit quantile boundaries with the midpoint convention at ties.

    Duplicate boundaries (fewer distinct values than partitions) are
    collapsed with a warning, reducing the effective partition count.
    """
    gaps = np.asarray(sorted(training_gaps), dtype=np.float64)
    if partitions < 1:
        raise ConfigError(f"partitions must be >= 1, got {partitions}")
    if gaps.size < partitions:
        raise ConfigError(f"need at least {partitions} gap samples to fit {partitions} partitions, got {gaps.size}")
    if partitions == 1:
        boundaries: list[float] = []
    else:
        qs = np.arange(1, partitions) / partitions
        raw = np.quantile(gaps, qs, method="midpoint")
        boundaries = []
        for value in raw:
            if boundaries and value <= boundaries[-1]:
                continue
            boundaries.append(float(value))
        if len(boundaries) < partitions - 1:
            warnings.warn(
                f"collapsed {partitions - 1 - len(boundaries)} duplicate partition boundaries; "
                f"effective partitions = {len(boundaries) + 1}",
                stacklevel=2,
            )
    reps = []
    for b in range(len(boundaries) + 1):
        lo = -np.inf if b == 0 else boundaries[b - 1]
        hi = np.inf if b == len(boundaries) else boundaries[b]
        members = gaps[(gaps > lo) & (gaps <= hi)]
        if members.size:
            reps.append(float(np.median(members)))
        elif b == 0:
            reps.append(float(hi))
        elif b == len(boundaries):
            reps.append(float(lo))
        else:
            reps.append((lo + hi) / 2.0)
    return QuantilePartitioner(tuple(boundaries), tuple(reps))


@dataclass
class LstmIntModel:
    """Trained gap classifier plus its partitioner and decode table."""

    net: LstmNetwork
    partitioner: QuantilePartitioner
    window: int = DEFAULT_WINDOW
    fallback_delta: int | None = DEFAULT_FALLBACK_DELTA
    train_losses: list[float] = field(default_factory=list)

    @property
    def num_bins(self) -> int:
        return self.partitioner.num_bins

    def predict_bin(self, recent_gaps: Sequence[float]) -> int:
        """Partition of the next gap given the last ``window`` gaps."""
        x = self.partitioner.one_hot(recent_gaps)[None, :, :]
        logits, _ = self.net.forward(x)
        return int(np.argmax(logits[0]))

    def representative(self, bin_idx: int) -> float:
        return self.partitioner.representative(bin_idx)

    def predict_bins_batch(self, windows: np.ndarray) -> np.ndarray:
        logits, _ = self.net.forward(windows)
        return np.argmax(logits, axis=1)


def _gap_windows(trace: Trace, window: int) -> tuple[list[list[float]], list[float], list[float]]:
    """Sliding (inputs, target) pairs over each item's gap series."""
    inputs: list[list[float]] = []
    targets: list[float] = []
    all_gaps: list[float] = []
    for item, hist in sorted(item_history_index(trace).items()):
        gaps = hist.inter_arrivals()
        all_gaps.extend(gaps)
        for j in range(window, len(gaps)):
            inputs.append(gaps[j - window : j])
            targets.append(gaps[j])
    return inputs, targets, all_gaps


def build_training_set(
    trace: Trace, partitioner: QuantilePartitioner, window: int
) -> tuple[np.ndarray, np.ndarray]:
    """One-hot encoded (inputs, targets) arrays for the classifier."""
    inputs, targets, _ = _gap_windows(trace, window)
    if not inputs:
        raise ConfigError(f"no item in the trace has at least {window + 1} inter-arrivals; cannot train")
    num_bins = partitioner.num_bins
    x = np.zeros((len(inputs), window, num_bins), dtype=np.float64)
    y = np.zeros((len(inputs), num_bins), dtype=np.float64)
    for row, (win, tgt) in enumerate(zip(inputs, targets)):
        for t, g in enumerate(win):
            x[row, t, partitioner.bin_of(g)] = 1.0
        y[row, partitioner.bin_of(tgt)] = 1.0
    return x, y


def train_lstm_int(
    trace: Trace,
    *,
    partitions: int = DEFAULT_PARTITIONS,
    window: int = DEFAULT_WINDOW,
    hidden: int = DEFAULT_HIDDEN,
    epochs: int = 20,
    lr: float = 0.01,
    batch_size: int = 64,
    seed: int = 0,
    partitioner: QuantilePartitioner | None = None,
    fallback_delta: int | None = DEFAULT_FALLBACK_DELTA,
) -> LstmIntModel:
    """Fit the partitioner (unless given) and train the gap classifier."""
    if partitioner is None:
        _, _, all_gaps = _gap_windows(trace, window)
        partitioner = fit_partitioner(all_gaps, partitions)
    x, y = build_training_set(trace, partitioner, window)
    net = LstmNetwork(
        partitioner.num_bins,
        hidden,
        0,
        [partitioner.num_bins],
        ["identity"],
        name="lstm-int",
        rng=substream(seed, "lstm-int-init"),
    )
    model = LstmIntModel(net, partitioner, window, fallback_delta)
    if epochs == 0:
        return model

    rng = substream(seed, "lstm-int-shuffle")
    opt = Adam(lr=lr)
    initial_loss, _ = softmax_cross_entropy(net.forward(x)[0], y)
    model.train_losses.append(initial_loss)
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            out, cache = net.forward(x[idx])
            loss, dout = softmax_cross_entropy(out, y[idx])
            grads = net.backward(cache, dout)
            opt.step(net.params(), grads)
            epoch_loss += loss * len(idx)
        model.train_losses.append(epoch_loss / n)
    return model


class LstmIntPolicy(Policy):
    """Eviction policy combining the gap predictor with a frequency fallback.

    A cached item's score is valid only when (a) it has at least window+1
    past gaps, (b) the predicted partition is not the top (widest) one, and
    (c) the predicted arrival has not been overdue for more than one full
    predicted gap. Everything else is scored by the fallback and evicted
    before any valid item.
    """

    policy_id = "lstm-int"

    def __init__(self, model: LstmIntModel, fallback: LfuDeltaPolicy | None = None):
        self.model = model
        self.window = model.window
        self.fallback = fallback or LfuDeltaPolicy(model.fallback_delta)
        self._recent_gaps: dict[str, list[float]] = {}
        self._gap_count: dict[str, int] = {}
        self._last_ts: dict[str, float] = {}
        self._pred: dict[str, tuple[float, float, int]] = {}  # item -> (tau_last, gap_hat, bin)

    def observe(self, timestamp: float, item: str) -> None:
        self.fallback.observe(timestamp, item)
        prev = self._last_ts.get(item)
        self._last_ts[item] = timestamp
        if prev is None:
            return
        gaps = self._recent_gaps.setdefault(item, [])
        gaps.append(timestamp - prev)
        if len(gaps) > self.window:
            del gaps[0]
        self._gap_count[item] = self._gap_count.get(item, 0) + 1
        if len(gaps) == self.window:
            bin_idx = self.model.predict_bin(gaps)
            self._pred[item] = (timestamp, self.model.representative(bin_idx), bin_idx)

    def score_with_flag(self, item: str, now: float) -> tuple[float, bool]:
        """(score, valid); invalid items carry their fallback score."""
        pred = self._pred.get(item)
        if pred is None or self._gap_count.get(item, 0) < self.window + 1:
            return self.fallback.score(item, now), False
        tau_last, gap_hat, bin_idx = pred
        if bin_idx == self.model.num_bins - 1:
            return self.fallback.score(item, now), False
        if now > tau_last + 2.0 * gap_hat:
            return self.fallback.score(item, now), False
        return now - (tau_last + gap_hat), True

    def score(self, item: str, now: float) -> float:
        return self.score_with_flag(item, now)[0]

    def pick_eviction(self, contents: Mapping[str, int], now: float, *, snapshot: bool = False) -> EvictionDecision:
        """Fallback-scored items go first (by fallback score); otherwise the
        valid item with the lowest predicted-arrival score goes."""
        if not contents:
            raise ValueError("cannot pick an eviction from an empty cache")
        best_fallback = None
        best_valid = None
        scores = {} if snapshot else None
        for item, seq in contents.items():
            s, valid = self.score_with_flag(item, now)
            if scores is not None:
                scores[item] = s
            key = (s, seq, item)
            if valid:
                if best_valid is None or key < best_valid:
                    best_valid = key
            else:
                if best_fallback is None or key < best_fallback:
                    best_fallback = key
        chosen = best_fallback if best_fallback is not None else best_valid
        return EvictionDecision(chosen[2], chosen[0], scores)


# --- checkpoint helpers ----------------------------------------------------


def save_lstm_int_model(path, model: LstmIntModel) -> None:
    from ..nnet import save_checkpoint

    meta, arrays = lstm_int_payload(model)
    save_checkpoint(path, meta, arrays)


def load_lstm_int_model(path) -> LstmIntModel:
    from ..nnet import load_checkpoint

    meta, arrays = load_checkpoint(path)
    if meta.get("kind") != "lstm-int":
        raise ConfigError(f"{path}: not an lstm-int model checkpoint")
    return lstm_int_from_payload(meta, arrays)


def lstm_int_payload(model: LstmIntModel) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    meta = {
        "kind": "lstm-int",
        "window": model.window,
        "hidden": model.net.hidden_size,
        "boundaries": list(model.partitioner.boundaries),
        "representatives": list(model.partitioner.representatives),
        "fallback_delta": model.fallback_delta,
    }
    return meta, model.net.params()


def lstm_int_from_payload(meta: dict, arrays: Mapping[str, np.ndarray]) -> LstmIntModel:
    partitioner = QuantilePartitioner(tuple(meta["boundaries"]), tuple(meta["representatives"]))
    net = LstmNetwork(
        partitioner.num_bins,
        int(meta["hidden"]),
        0,
        [partitioner.num_bins],
        ["identity"],
        name="lstm-int",
        rng=substream(0, "lstm-int-init"),
    )
    for name, arr in net.params():
        arr[...] = arrays[name]
    return LstmIntModel(net, partitioner, int(meta["window"]), meta.get("fallback_delta"))
