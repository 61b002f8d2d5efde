"""Next-slot request-count prediction policy.

Time is cut into fixed slots of ``b`` seconds. Per item, an LSTM regressor
maps the counts of the previous ``w`` slots to the count expected in the
next slot, and that prediction is the caching score for the whole slot.
Items quiet for all of the last ``w`` slots are inactive and score 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from ..nnet import Adam, LstmNetwork, huber
from ..rng import substream
from ..traces import Trace, item_history_index
from .base import Policy

DEFAULT_WINDOW = 2
DEFAULT_HIDDEN = 32


def slot_count_series(trace: Trace, slot_seconds: float) -> dict[str, tuple[int, list[int]]]:
    """Per item: (first slot index, counts from that slot through its last)."""
    if slot_seconds <= 0:
        raise ConfigError(f"slot length must be positive, got {slot_seconds}")
    series: dict[str, tuple[int, list[int]]] = {}
    for item, hist in item_history_index(trace).items():
        slots = [int(t // slot_seconds) for t in hist.arrival_times]
        first, last = slots[0], slots[-1]
        counts = [0] * (last - first + 1)
        for s in slots:
            counts[s - first] += 1
        series[item] = (first, counts)
    return series


@dataclass
class LstmReqModel:
    """Trained slot-count regressor; counts are scaled to ~[0, 1] for the net."""

    net: LstmNetwork
    slot_seconds: float
    window: int = DEFAULT_WINDOW
    scale: float = 1.0
    train_losses: list[float] = field(default_factory=list)

    def predict(self, recent_counts) -> float:
        x = np.asarray(recent_counts, dtype=np.float64)[None, :, None] / self.scale
        out, _ = self.net.forward(x)
        return max(0.0, float(out[0, 0]) * self.scale)

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        out, _ = self.net.forward(windows[:, :, None] / self.scale)
        return np.maximum(0.0, out[:, 0] * self.scale)


def build_count_windows(trace: Trace, slot_seconds: float, window: int) -> tuple[np.ndarray, np.ndarray]:
    """(inputs, targets) of consecutive slot counts across all items."""
    xs: list[list[int]] = []
    ys: list[int] = []
    series = slot_count_series(trace, slot_seconds)
    for item in sorted(series):
        _, counts = series[item]
        for j in range(window, len(counts)):
            xs.append(counts[j - window : j])
            ys.append(counts[j])
    if not xs:
        raise ConfigError(f"trace spans fewer than {window + 1} slots of {slot_seconds}s for every item; cannot train")
    return np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)


def train_lstm_req(
    trace: Trace,
    slot_seconds: float,
    *,
    window: int = DEFAULT_WINDOW,
    hidden: int = DEFAULT_HIDDEN,
    epochs: int = 30,
    lr: float = 0.01,
    batch_size: int = 64,
    seed: int = 0,
) -> LstmReqModel:
    x, y = build_count_windows(trace, slot_seconds, window)
    scale = max(1.0, float(x.max()), float(y.max()))
    net = LstmNetwork(1, hidden, 0, [1], ["identity"], name="lstm-req", rng=substream(seed, "lstm-req-init"))
    model = LstmReqModel(net, slot_seconds, window, scale)
    if epochs == 0:
        return model

    xs = x[:, :, None] / scale
    ys = (y / scale)[:, None]
    rng = substream(seed, "lstm-req-shuffle")
    opt = Adam(lr=lr)
    initial_loss, _ = huber(net.forward(xs)[0], ys, delta=1.0)
    model.train_losses.append(initial_loss)
    n = xs.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            out, cache = net.forward(xs[idx])
            loss, dout = huber(out, ys[idx], delta=1.0)
            grads = net.backward(cache, dout)
            opt.step(net.params(), grads)
            epoch_loss += loss * len(idx)
        model.train_losses.append(epoch_loss / n)
    return model


def format_slots(slot_seconds: float) -> str:
    return f"{slot_seconds:g}"


class LstmReqPolicy(Policy):
    """Scores every cached item by its predicted next-slot request count."""

    def __init__(self, model: LstmReqModel):
        self.model = model
        self.slot_seconds = model.slot_seconds
        self.window = model.window
        self.policy_id = f"lstm-req-{format_slots(model.slot_seconds)}"
        self._slot = 0
        self._recent: dict[str, list[float]] = {}  # last <= window finalized counts
        self._current: dict[str, int] = {}
        self._scores: dict[str, float] = {}

    def observe(self, timestamp: float, item: str) -> None:
        slot = int(timestamp // self.slot_seconds)
        while self._slot < slot:
            self._finish_slot()
        self._current[item] = self._current.get(item, 0) + 1

    def _finish_slot(self) -> None:
        # fold the finished slot into every tracked item's window
        tracked = set(self._recent) | set(self._current)
        for item in tracked:
            win = self._recent.setdefault(item, [])
            win.append(float(self._current.get(item, 0)))
            if len(win) > self.window:
                del win[0]
        self._current.clear()
        self._slot += 1
        # inactive items (no request in any of the last `window` slots) drop out
        dead = [item for item, win in self._recent.items() if len(win) == self.window and not any(win)]
        for item in dead:
            del self._recent[item]
        self._scores = {}
        for item, win in self._recent.items():
            padded = [0.0] * (self.window - len(win)) + win
            self._scores[item] = self.model.predict(padded)

    def score(self, item: str, now: float) -> float:
        return self._scores.get(item, 0.0)


# --- checkpoint helpers ----------------------------------------------------


def save_lstm_req_model(path, model: LstmReqModel) -> None:
    from ..nnet import save_checkpoint

    meta, arrays = lstm_req_payload(model)
    save_checkpoint(path, meta, arrays)


def load_lstm_req_model(path) -> LstmReqModel:
    from ..nnet import load_checkpoint

    meta, arrays = load_checkpoint(path)
    if meta.get("kind") != "lstm-req":
        raise ConfigError(f"{path}: not an lstm-req model checkpoint")
    return lstm_req_from_payload(meta, arrays)


def lstm_req_payload(model: LstmReqModel) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    meta = {
        "kind": "lstm-req",
        "slot_seconds": model.slot_seconds,
        "window": model.window,
        "hidden": model.net.hidden_size,
        "scale": model.scale,
    }
    return meta, model.net.params()


def lstm_req_from_payload(meta: dict, arrays: Mapping[str, np.ndarray]) -> LstmReqModel:
    net = LstmNetwork(1, int(meta["hidden"]), 0, [1], ["identity"], name="lstm-req", rng=substream(0, "lstm-req-init"))
    for name, arr in net.params():
        arr[...] = arrays[name]
    return LstmReqModel(net, float(meta["slot_seconds"]), int(meta["window"]), float(meta["scale"]))
