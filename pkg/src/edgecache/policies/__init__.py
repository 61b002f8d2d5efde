"""Eviction policies and the policy-id registry."""

from .base import (
    EvictionDecision,
    FifPolicy,
    LfuDeltaPolicy,
    LruNPolicy,
    Policy,
    PolicyScore,
    evict_lowest,
    fif_score,
)
from .registry import build_policy, build_policies, parse_policy_id

__all__ = [
    "EvictionDecision",
    "FifPolicy",
    "LfuDeltaPolicy",
    "LruNPolicy",
    "Policy",
    "PolicyScore",
    "build_policies",
    "build_policy",
    "evict_lowest",
    "fif_score",
    "parse_policy_id",
]
