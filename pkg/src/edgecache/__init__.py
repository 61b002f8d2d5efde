"""Trace-driven edge-cache simulation with an ensemble policy selector."""

from .agent import AgentConfig, SelectorAgent, load_agent, save_agent, train_selector
from .cache import Cache
from .policies import build_policies, build_policy, parse_policy_id
from .simulate import (
    compare_reports,
    run_cec_simulation,
    run_fif_selector,
    run_policy_simulation,
    train_models_for,
)
from .traces import (
    Request,
    Trace,
    generate_shot_noise_trace,
    generate_trace_from_config,
    generate_zipf_irm_trace,
    item_history_index,
    load_trace,
    save_trace,
)
from .virtual_bank import VirtualCacheBank

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "Cache",
    "Request",
    "SelectorAgent",
    "Trace",
    "VirtualCacheBank",
    "build_policies",
    "build_policy",
    "compare_reports",
    "generate_shot_noise_trace",
    "generate_trace_from_config",
    "generate_zipf_irm_trace",
    "item_history_index",
    "load_agent",
    "load_trace",
    "parse_policy_id",
    "run_cec_simulation",
    "run_fif_selector",
    "run_policy_simulation",
    "save_agent",
    "save_trace",
    "train_models_for",
    "train_selector",
    "__version__",
]
