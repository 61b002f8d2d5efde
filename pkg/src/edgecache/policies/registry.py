"""Policy-id strings and their factory.

Ids as they appear in config files and reports:
    lfu-inf           unbounded-window frequency
    lfu-<requests>    frequency within the last <requests> global requests
    lru-<n>           recency of the n-th most recent request
    fif               farthest-in-future oracle (needs the full trace)
    lstm-int          gap-prediction policy (needs a trained model)
    lstm-req-<sec>    slot-count prediction policy (needs a trained model)
"""

from __future__ import annotations

import re
from typing import Mapping

from ..errors import ConfigError
from ..traces import Trace
from .base import FifPolicy, LfuDeltaPolicy, LruNPolicy, Policy
from .lstm_int import LstmIntPolicy
from .lstm_req import LstmReqPolicy

_LFU_RE = re.compile(r"^lfu-(\d+)$")
_LRU_RE = re.compile(r"^lru-(\d+)$")
_LSTM_REQ_RE = re.compile(r"^lstm-req-(\d+(?:\.\d+)?)$")


def parse_policy_id(policy_id: str) -> dict:
    """Validate a policy id; returns its kind and parameters."""
    if policy_id == "lfu-inf":
        return {"kind": "lfu", "delta": None}
    if m := _LFU_RE.match(policy_id):
        delta = int(m.group(1))
        if delta < 1:
            raise ConfigError(f"policy {policy_id!r}: window must be >= 1")
        return {"kind": "lfu", "delta": delta}
    if m := _LRU_RE.match(policy_id):
        n = int(m.group(1))
        if n < 1:
            raise ConfigError(f"policy {policy_id!r}: depth must be >= 1")
        return {"kind": "lru", "n": n}
    if policy_id == "fif":
        return {"kind": "fif"}
    if policy_id == "lstm-int":
        return {"kind": "lstm-int"}
    if m := _LSTM_REQ_RE.match(policy_id):
        return {"kind": "lstm-req", "slot_seconds": float(m.group(1))}
    raise ConfigError(
        f"unknown policy id {policy_id!r} "
        "(expected lfu-inf, lfu-<requests>, lru-<n>, fif, lstm-int, or lstm-req-<seconds>)"
    )


def requires_model(policy_id: str) -> bool:
    return parse_policy_id(policy_id)["kind"] in ("lstm-int", "lstm-req")


def build_policy(policy_id: str, *, trace: Trace | None = None, models: Mapping[str, object] | None = None) -> Policy:
    """Fresh policy instance for an id.

    ``trace`` is required for the oracle policy; ``models`` maps lstm policy
    ids to their trained models.
    """
    spec = parse_policy_id(policy_id)
    kind = spec["kind"]
    if kind == "lfu":
        return LfuDeltaPolicy(spec["delta"])
    if kind == "lru":
        return LruNPolicy(spec["n"])
    if kind == "fif":
        if trace is None:
            raise ConfigError("policy 'fif' needs the full trace (future-request oracle)")
        return FifPolicy(trace)
    model = (models or {}).get(policy_id)
    if model is None:
        raise ConfigError(f"policy {policy_id!r} needs a trained model; none was provided")
    if kind == "lstm-int":
        return LstmIntPolicy(model)
    return LstmReqPolicy(model)


def build_policies(policy_ids, *, trace: Trace | None = None, models: Mapping[str, object] | None = None) -> list[Policy]:
    if len(set(policy_ids)) != len(list(policy_ids)):
        raise ConfigError(f"duplicate policy ids in ensemble: {list(policy_ids)}")
    return [build_policy(pid, trace=trace, models=models) for pid in policy_ids]
