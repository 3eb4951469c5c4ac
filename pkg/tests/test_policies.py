"""Policies: parsing, decide distributions, plan sampling, beta estimates."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from conftest import (
    all_ones_realization,
    random_instance,
    single_edge_instance,
    two_recipient_instance,
    two_step_rate_instance,
)
from donormatch.graph import (
    MODE_RATE,
    DemandRealization,
    Donor,
    Recipient,
    build_scenario,
    donor_max_degree,
)
from donormatch.policies import (
    PolicySpec,
    PreMatchPlan,
    adaptmatch_decide,
    estimate_beta,
    execute_prematch,
    max_decide,
    nadaplp_plan,
    nadaplp_rate_plan,
    nadapopt_plan,
    parse_policy,
    rand_decide,
    randmax_decide,
)
from donormatch.solver import (
    FIXEDTIME_LP,
    RATELIMIT_LP,
    LpSolution,
    solve_fixedtime_lp,
    solve_nadapopt_lp,
    solve_ratelimit_lp,
)


# ---------------------------------------------------------------------------
# parsing and validation


def test_parse_bare_kind_names():
    assert parse_policy("max") == PolicySpec("max")
    assert parse_policy("rand") == PolicySpec("rand")
    assert parse_policy(" Max ") == PolicySpec("max")


def test_parse_bare_number_is_the_gamma():
    assert parse_policy("randmax:0.3") == PolicySpec("randmax", gamma=0.3)
    assert parse_policy("adaptmatch:0.5") == PolicySpec("adaptmatch", gamma=0.5)


def test_parse_key_value_parameters():
    got = parse_policy("nadaplp:alpha=0.1,gamma=0.5")
    assert got == PolicySpec("nadaplp", gamma=0.5, alpha=0.1)
    got = parse_policy("nadaplp_rate:gamma=0.2", mode=MODE_RATE)
    assert got.kind == "nadaplp_rate" and got.gamma == 0.2


def test_parse_rejects_malformed_strings():
    with pytest.raises(ValueError, match="unknown policy"):
        parse_policy("greedy")
    with pytest.raises(ValueError, match="unknown policy parameter"):
        parse_policy("nadaplp:beta=0.1")
    with pytest.raises(ValueError, match="more than one bare number"):
        parse_policy("randmax:0.3,0.4")


def test_labels_parse_back_to_the_same_spec():
    specs = [
        PolicySpec("max"),
        PolicySpec("rand"),
        PolicySpec("randmax", gamma=0.25),
        PolicySpec("adaptmatch", gamma=0.5),
        PolicySpec("nadaplp", gamma=0.5, alpha=0.1),
        PolicySpec("nadaplp_rate", gamma=0.2, alpha=0.05, mode=MODE_RATE),
    ]
    for spec in specs:
        assert parse_policy(spec.label(), mode=spec.mode) == spec


def test_spec_validates_parameters_and_mode_pairing():
    with pytest.raises(ValueError, match="gamma"):
        PolicySpec("randmax", gamma=1.5)
    with pytest.raises(ValueError, match="alpha"):
        PolicySpec("max", alpha=0.5)
    with pytest.raises(ValueError, match="fallback_gamma"):
        PolicySpec("rand", fallback_gamma=0.5)
    with pytest.raises(ValueError, match="rate-limited"):
        PolicySpec("nadaplp_rate")
    with pytest.raises(ValueError, match="fixed-time"):
        PolicySpec("nadapopt", mode=MODE_RATE)
    with pytest.raises(ValueError, match="unknown mode"):
        PolicySpec("rand", mode="sometimes")


# ---------------------------------------------------------------------------
# myopic deciders


def test_rand_decide_is_uniform_over_available_edges():
    s = two_recipient_instance()
    r = all_ones_realization(s)
    rng = np.random.default_rng(7)
    n = 10_000
    hits_a = sum(rand_decide(s, "u", 1, r, rng) == ("u", "A") for _ in range(n))
    se = np.sqrt(0.25 / n)
    assert abs(hits_a / n - 0.5) < 3 * se


def test_max_decide_takes_the_heavier_edge():
    s = two_recipient_instance()
    r = all_ones_realization(s)
    rng = np.random.default_rng(7)
    assert all(max_decide(s, "u", 1, r, rng) == ("u", "B") for _ in range(100))


def test_max_decide_breaks_ties_uniformly():
    s = two_recipient_instance()
    s = dataclasses.replace(s, weights=np.ones_like(s.weights))
    r = all_ones_realization(s)
    rng = np.random.default_rng(7)
    n = 10_000
    hits_a = sum(max_decide(s, "u", 1, r, rng) == ("u", "A") for _ in range(n))
    se = np.sqrt(0.25 / n)
    assert abs(hits_a / n - 0.5) < 3 * se


def test_randmax_mixture_hits_the_expected_weights():
    # Mixing at 0.4 pre-picks the uniform arm with probability 0.4, so A's
    # match probability is 0.2 and the expected weights are (0.18, 0.80).
    s = two_recipient_instance()
    r = all_ones_realization(s)
    rng = np.random.default_rng(11)
    n = 10_000
    hits_a = sum(
        randmax_decide(s, "u", 1, r, 0.4, rng) == ("u", "A") for _ in range(n)
    )
    freq_a = hits_a / n
    se = np.sqrt(0.2 * 0.8 / n)
    assert abs(freq_a - 0.2) < 3 * se
    assert freq_a * 0.9 == pytest.approx(0.18, abs=3 * se)
    assert (1 - freq_a) * 1.0 == pytest.approx(0.80, abs=3 * se)


def test_deciders_respect_the_realization():
    s = two_recipient_instance()
    only_b = DemandRealization(np.array([[0], [1]], dtype=np.int8))
    nobody = DemandRealization(np.zeros((2, 1), dtype=np.int8))
    rng = np.random.default_rng(3)
    for _ in range(50):
        assert rand_decide(s, "u", 1, only_b, rng) == ("u", "B")
        assert randmax_decide(s, "u", 1, only_b, 1.0, rng) == ("u", "B")
        assert rand_decide(s, "u", 1, nobody, rng) is None
        assert max_decide(s, "u", 1, nobody, rng) is None


# ---------------------------------------------------------------------------
# pre-match plans


def test_lp_rounding_plan_prematch_frequency():
    # x* = p = 0.5 on the lone cell, so the pre-match probability is
    # alpha * x*/p = alpha.
    s = single_edge_instance(p=0.5)
    lp = solve_fixedtime_lp(s, 0.0)
    rng = np.random.default_rng(5)
    n = 20_000
    hits = sum(
        nadaplp_plan(s, 0.0, 0.6, rng, lp=lp).assignment[0, 0] == 0 for _ in range(n)
    )
    se = np.sqrt(0.6 * 0.4 / n)
    assert abs(hits / n - 0.6) < 3 * se


def test_lp_rounding_plan_at_zero_alpha_is_empty():
    s = single_edge_instance(p=0.5)
    lp = solve_fixedtime_lp(s, 0.0)
    rng = np.random.default_rng(5)
    for _ in range(10):
        assert (nadaplp_plan(s, 0.0, 0.0, rng, lp=lp).assignment == -1).all()


def test_lp_rounding_plan_rejects_overfull_mass():
    s = single_edge_instance(p=0.5)
    lp = solve_fixedtime_lp(s, 0.0)
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError, match=r"donor 'u' at step 1 \(reduce alpha\)"):
        nadaplp_plan(s, 0.0, 1.2, rng, lp=lp)


def test_lp_rounding_plan_default_alpha_is_always_valid():
    rng = np.random.default_rng(42)
    for _ in range(12):
        s = random_instance(rng)
        alpha = 1.0 / max(donor_max_degree(s), 1)
        for gamma in (0.0, 1.0):
            nadaplp_plan(s, gamma, alpha, rng)


def test_plan_ignores_mass_on_impossible_cells():
    # A hand-built solution putting weight where availability is zero must
    # round to "no pre-match" rather than divide by that zero.
    s = single_edge_instance(p=0.0)
    lp = LpSolution(
        kind=FIXEDTIME_LP,
        x=np.array([[0.4]]),
        s=np.array([np.nan]),
        a=None,
        objective=0.0,
        gamma=0.0,
    )
    rng = np.random.default_rng(5)
    for _ in range(20):
        assert (nadaplp_plan(s, 0.0, 1.0, rng, lp=lp).assignment == -1).all()


def test_optimal_nonadaptive_plan_splits_evenly_at_full_fairness():
    s = two_recipient_instance()
    lp = solve_nadapopt_lp(s, 1.0)
    rng = np.random.default_rng(9)
    n = 20_000
    picks = np.array(
        [nadapopt_plan(s, 1.0, rng, lp=lp).assignment[0, 0] for _ in range(n)]
    )
    assert (picks >= 0).all()  # y* sums to one, so someone is always chosen
    se = np.sqrt(0.25 / n)
    assert abs((picks == s.edges.index(("u", "A"))).mean() - 0.5) < 3 * se


def test_execute_prematch_branches():
    s = two_recipient_instance()
    a = s.edges.index(("u", "A"))
    both = all_ones_realization(s)
    no_a = DemandRealization(np.array([[0], [1]], dtype=np.int8))
    empty = PreMatchPlan(np.full((1, 1), -1, dtype=np.int64))
    planned = PreMatchPlan(np.array([[a]], dtype=np.int64))
    assert execute_prematch(s, empty, "u", 1, both) is None
    assert execute_prematch(s, planned, "u", 1, both) == ("u", "A")
    assert execute_prematch(s, planned, "u", 1, no_a) is None


def test_adaptmatch_uses_the_plan_then_falls_back():
    s = two_recipient_instance()
    a = s.edges.index(("u", "A"))
    both = all_ones_realization(s)
    no_a = DemandRealization(np.array([[0], [1]], dtype=np.int8))
    planned = PreMatchPlan(np.array([[a]], dtype=np.int64))
    empty = PreMatchPlan(np.full((1, 1), -1, dtype=np.int64))
    rng = np.random.default_rng(13)
    # Planned edge lands: taken regardless of the coin.
    assert all(
        adaptmatch_decide(s, planned, "u", 1, both, 1.0, rng) == ("u", "A")
        for _ in range(20)
    )
    # No plan entry, gamma 0: pure max fallback.
    assert all(
        adaptmatch_decide(s, empty, "u", 1, both, 0.0, rng) == ("u", "B")
        for _ in range(20)
    )
    # Planned recipient missing: the fallback still matches what is there.
    assert all(
        adaptmatch_decide(s, planned, "u", 1, no_a, 0.0, rng) == ("u", "B")
        for _ in range(20)
    )


# ---------------------------------------------------------------------------
# rate-limited rounding


def test_estimate_beta_trivia():
    rng = np.random.default_rng(17)
    with pytest.raises(ValueError, match="trials"):
        estimate_beta(two_step_rate_instance(), 0.0, 0.5, 0, rng)
    # No edges: nothing ever blocks, beta is identically one.
    s = build_scenario(
        donors=[Donor("u", 0.0, 0.0)],
        recipients=[Recipient("v", 0.0, 0.0)],
        edges=[],
        weights=[],
        availability=None,
        horizon=3,
        rate_limit=2,
    )
    assert (estimate_beta(s, 0.0, 0.5, 50, rng).beta == 1.0).all()


def test_estimate_beta_tracks_the_blocking_rate():
    # Hand plan mass 0.8 at the first step blocks the donor through the
    # second, so availability there is 1 - 0.8.
    s = two_step_rate_instance()
    lp = LpSolution(
        kind=RATELIMIT_LP,
        x=np.array([[0.8, 0.2]]),
        s=np.array([np.nan]),
        a=np.array([[1.0, 0.2]]),
        objective=1.0,
        gamma=0.0,
    )
    est = estimate_beta(s, 0.0, 1.0, 4_000, np.random.default_rng(19), lp=lp)
    assert est.beta[0, 0] == 1.0
    se = np.sqrt(0.2 * 0.8 / 4_000)
    # The analytic floor sits at 0.2, so essentially only upward noise remains.
    assert 0.2 - 1e-12 <= est.beta[0, 1] <= 0.2 + 3 * se


def test_rate_plan_waits_like_its_relaxation():
    # The relaxation saves the notification for the heavier second step, so
    # plans never pre-match the first and hit the second at rate alpha.
    s = two_step_rate_instance(w1=0.7, w2=1.0)
    lp = solve_ratelimit_lp(s, 0.0)
    beta = estimate_beta(s, 0.0, 0.5, 500, np.random.default_rng(21), lp=lp)
    assert beta.beta[0, 1] == pytest.approx(1.0)
    rng = np.random.default_rng(23)
    n = 20_000
    picks = np.array(
        [
            nadaplp_rate_plan(s, 0.0, 0.5, beta, rng, lp=lp).assignment[0]
            for _ in range(n)
        ]
    )
    assert (picks[:, 0] == -1).all()
    se = np.sqrt(0.25 / n)
    assert abs((picks[:, 1] == 0).mean() - 0.5) < 3 * se


def test_rate_rounding_default_alpha_never_overfills():
    # At alpha = 1/(2D) the window rows cap every trailing-window mass at
    # alpha, so the floor keeps beta at 1/2 or better and the induced plan
    # mass at one or less.
    rng = np.random.default_rng(29)
    for _ in range(8):
        s = random_instance(rng)
        alpha = 1.0 / (2.0 * max(donor_max_degree(s), 1))
        for gamma in (0.0, 1.0):
            lp = solve_ratelimit_lp(s, gamma)
            beta = estimate_beta(s, gamma, alpha, 100, rng, lp=lp)
            assert (beta.beta >= 0.5 - 1e-9).all()
            assert (beta.beta[:, 0] == 1.0).all()
            nadaplp_rate_plan(s, gamma, alpha, beta, rng, lp=lp)
