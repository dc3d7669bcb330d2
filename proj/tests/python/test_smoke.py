# SPDX-License-Identifier: Apache-2.0
import math

import pytest

import fedhlm

SMALL = """
topology.num_clients = 6
topology.num_clusters = 2
sim.rounds = 4
sim.tokens_per_client_per_round = 10
"""


def test_run_conserves_tokens():
    rep = fedhlm.run(SMALL, seed=3)
    assert len(rep["rounds"]) == 4
    for row in rep["rounds"]:
        assert row["local_count"] + row["p2p_count"] + row["edge_count"] + row["llm_count"] == 60
    totals = rep["totals"]
    assert sum(totals.values()) == 240
    assert rep["trr"] == pytest.approx(1 - totals["llm"] / 240)
    assert len(rep["clients"]) == 6


def test_outputs_are_deterministic_across_threads():
    a = fedhlm.run_outputs(SMALL, seed=9, threads=1)
    b = fedhlm.run_outputs(SMALL, seed=9, threads=3)
    assert a == b
    assert a["metrics_csv"].count("\n") == 5
    assert a["trace"].count("\n") == 240


def test_baseline_modes():
    u = fedhlm.run(SMALL, mode="uhlm")
    assert u["totals"]["p2p"] == 0
    r = fedhlm.run(SMALL, mode="rand")
    assert all(math.isnan(row["global_threshold"]) for row in r["rounds"])


def test_config_errors():
    with pytest.raises(fedhlm.ConfigError):
        fedhlm.run("partition.dirichlet_alpha = -1")
    with pytest.raises(ValueError):
        fedhlm.run("no.such.key = 1")
    with pytest.raises(ValueError):
        fedhlm.run(SMALL, mode="turbo")
    text = fedhlm.normalize_config(SMALL)
    assert fedhlm.normalize_config(text) == text
    assert "learner.gamma" in fedhlm.config_keys()


def test_gradient_matches_finite_difference():
    recs = [(0.2, 0.1), (0.55, 0.7), (0.9, 0.0)]
    h = 1e-6
    fd = (fedhlm.local_loss(recs, 0.5 + h) - fedhlm.local_loss(recs, 0.5 - h)) / (2 * h)
    g = fedhlm.loss_gradient(recs, 0.5)
    assert g <= 0
    assert g == pytest.approx(fd, rel=1e-6)


def test_aggregation_and_cost():
    assert fedhlm.cluster_aggregate([0.4, 0.6], [10, 30]) == pytest.approx(0.55)
    assert fedhlm.global_aggregate([0.2, 0.4, 0.9]) == pytest.approx(0.5)
    assert fedhlm.expected_cost(0.5, 1.0, 4.0) == pytest.approx(3.0)
    assert fedhlm.should_attempt_p2p(0.25, 1.0, 4.0)
    assert not fedhlm.should_attempt_p2p(0.2, 1.0, 4.0)
    assert fedhlm.cache_hit_curve(1, math.log(2)) == pytest.approx(0.5)
    alpha, r2 = fedhlm.fit_cache_alpha([8, 16, 32], [1 - math.exp(-0.02 * s) for s in (8, 16, 32)])
    assert alpha == pytest.approx(0.02)
    assert r2 == pytest.approx(1.0)


def test_adjudication():
    slm = [0.5, 0.3, 0.2]
    llm = [0.25, 0.5, 0.25]
    assert fedhlm.rejection_probability(slm, llm, 0) == pytest.approx(0.5)
    accepted, token, beta = fedhlm.llm_adjudicate(slm, llm, 1, seed=1)
    assert accepted and token == 1 and beta == 0.0
    n = 4000
    acc = sum(fedhlm.llm_adjudicate(slm, llm, 0, seed=s)[0] for s in range(n))
    assert abs(acc / n - 0.5) < 0.04
    assert fedhlm.entropy_score([0.25] * 4) == pytest.approx(math.log(4))
    assert fedhlm.mc_disagreement([1.0, 0.0, 0.0]) == 0.0
