# SPDX-License-Identifier: Apache-2.0
"""Uncertainty-gated token routing with federated threshold learning.

Thin re-export of the compiled ``_fedhlm`` module. Configs are passed as
text in the same ``key = value`` format the command-line tool reads.
"""

from ._fedhlm import (
    ConfigError,
    cache_hit_curve,
    cluster_aggregate,
    config_keys,
    entropy_score,
    expected_cost,
    fit_cache_alpha,
    global_aggregate,
    llm_adjudicate,
    local_loss,
    loss_gradient,
    lr_schedule,
    mc_disagreement,
    normalize_config,
    rejection_probability,
    run,
    run_outputs,
    should_attempt_p2p,
)

__all__ = [
    "ConfigError",
    "cache_hit_curve",
    "cluster_aggregate",
    "config_keys",
    "entropy_score",
    "expected_cost",
    "fit_cache_alpha",
    "global_aggregate",
    "llm_adjudicate",
    "local_loss",
    "loss_gradient",
    "lr_schedule",
    "mc_disagreement",
    "normalize_config",
    "rejection_probability",
    "run",
    "run_outputs",
    "should_attempt_p2p",
]
