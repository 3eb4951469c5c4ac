"""Time-stepped simulation driver.

Walks the horizon step by step, asks the policy for a decision per
available donor, and aggregates Monte Carlo statistics over trials.

Randomness is laid out so that runs are reproducible and trials are
independent of evaluation order. The master generator is consumed
exactly twice per evaluation: once for the per-trial Philox keys, once
for anything solved up front (the fixed realization, a beta estimate).
Each trial then owns counter-separated streams derived from its key:

    plan draw          counter [0, 0, 0, 1]
    realization draw   counter [0, 0, 0, 2]
    decisions          counter [0, 0, 0, 3], re-keyed per (donor, step)

The decision stream is itself only used to draw a per-trial key; each
(donor, step) cell gets its own generator keyed by it with the cell id
in the counter, so visiting donors in a different order cannot change
any decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .graph import (
    MODE_FIXED,
    MODE_RATE,
    DemandRealization,
    MatchingOutcome,
    Scenario,
    outcome_from_matches,
)
from .policies import (
    BetaEstimate,
    PolicySpec,
    PreMatchPlan,
    adaptmatch_decide,
    default_alpha,
    estimate_beta,
    execute_prematch,
    max_decide,
    nadaplp_plan,
    nadaplp_rate_plan,
    nadapopt_plan,
    rand_decide,
    randmax_decide,
)
from .solver import (
    LpSolution,
    solve_fixedtime_lp,
    solve_nadapopt_lp,
    solve_ratelimit_lp,
)

_CTR_PLAN = 1
_CTR_REALIZATION = 2
_CTR_DECIDE = 3


@dataclass
class TrialResult:
    """One simulated run; ``seed`` is the trial's index under the master seed."""

    outcome: MatchingOutcome
    seed: int
    policy: PolicySpec


@dataclass
class AggregateResult:
    """Monte Carlo summary over trials.

    ``match_counts[e, t-1]`` counts the trials in which edge e was matched
    at step t; ``totals`` and ``recipient_totals`` keep every trial's
    total and per-recipient weights so callers can do paired comparisons
    and per-trial fairness counts. Full TrialResults are retained only on
    request.
    """

    mean_total_weight: float
    mean_recipient_weight: Dict[str, float]
    trial_count: int
    std_err_total: float
    std_err_recipient: Dict[str, float]
    totals: np.ndarray
    recipient_totals: np.ndarray
    match_counts: np.ndarray
    trials: Optional[List[TrialResult]] = None


def draw_realization(s: Scenario, rng: np.random.Generator) -> DemandRealization:
    """Independent Bernoulli(p_vt) draw per recipient and step."""
    hit = rng.random((s.n_recipients, s.horizon)) < s.availability
    return DemandRealization(hit.astype(np.int8))


def _trial_key(rng: np.random.Generator, n: int = 1) -> np.ndarray:
    return rng.integers(1 << 63, size=(n, 2), dtype=np.uint64)


def _stream(key: np.ndarray, block: int, cell: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, cell, block]))


def run_policy(
    s: Scenario,
    policy: PolicySpec,
    r: DemandRealization,
    rng: np.random.Generator,
    plan: Optional[PreMatchPlan] = None,
    seed: int = 0,
) -> TrialResult:
    """Run one trial of a policy over the horizon on realization r.

    Fixed-time mode lets a donor act exactly on its scheduled days;
    rate-limited mode lets it act whenever at least K steps have passed
    since its last match. Plan-based kinds require ``plan``.
    """
    if policy.needs_plan and plan is None:
        raise ValueError(f"policy {policy.kind} requires a pre-computed plan")
    key = rng.integers(1 << 63, size=2, dtype=np.uint64)

    matched: Dict[int, List] = {}
    next_free = np.ones(s.n_donors, dtype=np.int64)  # earliest step donor may act
    for t in range(1, s.horizon + 1):
        for ui, donor in enumerate(s.donors):
            if policy.mode == MODE_FIXED:
                if not s.donor_schedule[ui, t - 1]:
                    continue
            elif t < next_free[ui]:
                continue
            edge = _decide(s, policy, plan, donor.id, t, r, key, ui)
            if edge is None:
                continue
            matched.setdefault(t, []).append(edge)
            if policy.mode == MODE_RATE:
                next_free[ui] = t + s.rate_limit
    outcome = outcome_from_matches(s, matched)
    return TrialResult(outcome=outcome, seed=seed, policy=policy)


def _decide(s, policy, plan, uid, t, r, key, ui):
    kind = policy.kind
    if kind in ("nadaplp", "nadapopt", "nadaplp_rate"):
        return execute_prematch(s, plan, uid, t, r)
    cell = _stream(key, _CTR_DECIDE, cell=ui * s.horizon + (t - 1))
    if kind == "rand":
        return rand_decide(s, uid, t, r, cell)
    if kind == "max":
        return max_decide(s, uid, t, r, cell)
    if kind == "randmax":
        return randmax_decide(s, uid, t, r, policy.gamma, cell)
    fallback = policy.fallback_gamma if policy.fallback_gamma is not None else policy.gamma
    return adaptmatch_decide(s, plan, uid, t, r, fallback, cell)


def estimate_normalization(
    s: Scenario,
    trials: int = 50,
    r: Optional[DemandRealization] = None,
    rng: Optional[np.random.Generator] = None,
    protocol: str = "fixed",
    mode: str = MODE_FIXED,
) -> Dict[str, float]:
    """Normalization scores m_v: the uniform-random policy's mean Y_v.

    ``protocol="fixed"`` averages over trials on the given realization
    (the experimental convention); ``protocol="expectation"`` redraws the
    realization each trial, in which case r is ignored.
    """
    if protocol not in ("fixed", "expectation"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if protocol == "fixed" and r is None:
        raise ValueError("the fixed protocol needs the realization to hold fixed")
    if rng is None:
        rng = np.random.default_rng()
    agg = monte_carlo_evaluate(
        s,
        PolicySpec("rand", mode=mode),
        trials,
        realization_mode="fixed" if protocol == "fixed" else "resampled",
        rng=rng,
        realization=r,
    )
    return dict(agg.mean_recipient_weight)


def monte_carlo_evaluate(
    s: Scenario,
    policy: PolicySpec,
    trials: int,
    realization_mode: str = "fixed",
    rng: Optional[np.random.Generator] = None,
    realization: Optional[DemandRealization] = None,
    lp: Optional[LpSolution] = None,
    beta: Optional[BetaEstimate] = None,
    beta_trials: int = 200,
    keep_trials: bool = False,
) -> AggregateResult:
    """Evaluate a policy over Monte Carlo trials.

    ``realization_mode="fixed"`` runs every trial on one realization (the
    one given, or a single draw); ``"resampled"`` draws a fresh one per
    trial. Plan-based kinds solve their LP once here and redraw the plan
    each trial; pass ``lp`` (and ``beta`` for the rate-limited rounding
    kind) to reuse existing solutions.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    if realization_mode not in ("fixed", "resampled"):
        raise ValueError(f"unknown realization_mode {realization_mode!r}")
    if rng is None:
        rng = np.random.default_rng()

    keys = _trial_key(rng, trials)

    alpha = policy.alpha
    if alpha is None:
        alpha = default_alpha(s, policy.mode)
    if policy.kind == "nadaplp":
        lp = lp or solve_fixedtime_lp(s, policy.gamma)
    elif policy.kind in ("nadapopt", "adaptmatch"):
        lp = lp or solve_nadapopt_lp(s, policy.gamma)
    elif policy.kind == "nadaplp_rate":
        lp = lp or solve_ratelimit_lp(s, policy.gamma)
        if beta is None:
            beta = estimate_beta(s, policy.gamma, alpha, beta_trials, rng, lp=lp)

    fixed_r = None
    if realization_mode == "fixed":
        fixed_r = realization if realization is not None else draw_realization(s, rng)

    totals = np.zeros(trials)
    recip = np.zeros((trials, s.n_recipients))
    match_counts = np.zeros((s.n_edges, s.horizon))
    kept: Optional[List[TrialResult]] = [] if keep_trials else None

    for i in range(trials):
        r = fixed_r
        if r is None:
            r = draw_realization(s, _stream(keys[i], _CTR_REALIZATION))
        plan = None
        if policy.needs_plan:
            plan_rng = _stream(keys[i], _CTR_PLAN)
            if policy.kind == "nadaplp":
                plan = nadaplp_plan(s, policy.gamma, alpha, plan_rng, lp=lp)
            elif policy.kind == "nadaplp_rate":
                plan = nadaplp_rate_plan(s, policy.gamma, alpha, beta, plan_rng, lp=lp)
            else:
                plan = nadapopt_plan(s, policy.gamma, plan_rng, lp=lp)
        tr = run_policy(s, policy, r, _stream(keys[i], _CTR_DECIDE), plan=plan, seed=i)
        totals[i] = tr.outcome.total_weight
        for vid, y in tr.outcome.recipient_weight.items():
            recip[i, s.recipient_index[vid]] = y
        for t, edges in tr.outcome.matched.items():
            for e in edges:
                match_counts[s.edge_lookup[e], t - 1] += 1
        if kept is not None:
            kept.append(tr)

    mean_recip = recip.mean(axis=0)
    se_recip = _std_err(recip)
    return AggregateResult(
        mean_total_weight=float(totals.mean()),
        mean_recipient_weight={
            v.id: float(mean_recip[j]) for j, v in enumerate(s.recipients)
        },
        trial_count=trials,
        std_err_total=float(_std_err(totals[:, None])[0]),
        std_err_recipient={
            v.id: float(se_recip[j]) for j, v in enumerate(s.recipients)
        },
        totals=totals,
        recipient_totals=recip,
        match_counts=match_counts,
        trials=kept,
    )


def _std_err(columns: np.ndarray) -> np.ndarray:
    n = columns.shape[0]
    if n < 2:
        return np.zeros(columns.shape[1])
    return columns.std(axis=0, ddof=1) / np.sqrt(n)
