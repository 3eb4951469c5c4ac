"""Notification policies.

Two families live here. The myopic deciders (rand and max, with randmax
mixing the two) look only at the edges available right now and answer
one question: which edge, if any, does donor u match at step t. The
plan-based policies commit in advance: an LP solution is sampled into a
PreMatchPlan assigning at most one edge per donor per step, and at run
time the pre-matched edge is used exactly when its recipient shows up.
AdaptMatch executes a plan but falls back to the myopic mixture when the
pre-match misses.

Every function takes the generator it should draw from; nothing here
seeds or splits streams. The simulator owns stream layout so that trials
are reproducible and donors can be visited in any order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .graph import (
    MODE_FIXED,
    MODE_RATE,
    DemandRealization,
    Edge,
    Scenario,
    available_edges,
    donor_max_degree,
)
from .solver import (
    LpSolution,
    solve_fixedtime_lp,
    solve_nadapopt_lp,
    solve_ratelimit_lp,
)

KINDS = ("rand", "max", "randmax", "nadaplp", "nadapopt", "adaptmatch", "nadaplp_rate")
_PLAN_KINDS = ("nadaplp", "nadapopt", "adaptmatch", "nadaplp_rate")
_ALPHA_KINDS = ("nadaplp", "nadaplp_rate")

# Slack allowed on a pre-match distribution's total mass before the plan
# is rejected as invalid; covers LP feasibility noise, nothing more.
VALIDITY_TOL = 1e-7


@dataclass(frozen=True)
class PolicySpec:
    """One policy choice, parsed from a CLI string or built directly.

    ``gamma`` is the proportionality parameter throughout: the mixing
    probability for randmax, the plan's LP parameter for the plan-based
    kinds. ``alpha`` scales pre-match mass for the two LP-rounding kinds
    and may stay None to mean the always-valid default (1/D fixed-time,
    1/(2D) rate-limited). ``fallback_gamma`` is adaptmatch's coin for the
    miss branch; None defaults it to ``gamma``.
    """

    kind: str
    gamma: float = 0.0
    alpha: Optional[float] = None
    fallback_gamma: Optional[float] = None
    mode: str = MODE_FIXED

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.alpha is not None and self.kind not in _ALPHA_KINDS:
            raise ValueError(f"{self.kind} takes no alpha")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.fallback_gamma is not None:
            if self.kind != "adaptmatch":
                raise ValueError(f"{self.kind} takes no fallback_gamma")
            if not 0.0 <= self.fallback_gamma <= 1.0:
                raise ValueError(
                    f"fallback_gamma must lie in [0, 1], got {self.fallback_gamma}"
                )
        if self.mode not in (MODE_FIXED, MODE_RATE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.kind == "nadaplp_rate" and self.mode != MODE_RATE:
            raise ValueError("nadaplp_rate runs under the rate-limited mode only")
        if self.kind in ("nadaplp", "nadapopt", "adaptmatch") and self.mode != MODE_FIXED:
            raise ValueError(f"{self.kind} runs under the fixed-time mode only")

    @property
    def needs_plan(self) -> bool:
        return self.kind in _PLAN_KINDS

    def label(self) -> str:
        """Short display form, e.g. ``randmax:0.3``."""
        if self.kind in ("rand", "max"):
            return self.kind
        parts = [f"{self.gamma:g}"]
        if self.alpha is not None:
            parts.insert(0, f"alpha={self.alpha:g}")
        return f"{self.kind}:{','.join(parts)}"


def default_alpha(s: Scenario, mode: str) -> float:
    """The always-valid rounding scale: 1/D fixed-time, 1/(2D) rate-limited.

    D is the largest donor degree. At 1/D every fixed-time pre-match
    distribution's mass stays at one or below; the rate-limited variant
    halves that again so the availability correction cannot push it over.
    """
    d = max(donor_max_degree(s), 1)
    return 1.0 / d if mode == MODE_FIXED else 1.0 / (2.0 * d)


def parse_policy(text: str, mode: str = MODE_FIXED) -> PolicySpec:
    """Parse a CLI policy string.

    Accepted forms: ``max``, ``rand``, ``randmax:0.3``, ``adaptmatch:0.5``,
    and key=value lists such as ``nadaplp:alpha=0.1,gamma=0.5`` or
    ``nadaplp_rate:gamma=0.2``. A single bare number after the colon is
    the gamma.
    """
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in KINDS:
        raise ValueError(f"unknown policy {kind!r} (expected one of {', '.join(KINDS)})")
    kwargs: Dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" in item:
                key, val = item.split("=", 1)
                key = key.strip()
                if key not in ("gamma", "alpha", "fallback_gamma"):
                    raise ValueError(f"unknown policy parameter {key!r} in {text!r}")
                kwargs[key] = float(val)
            elif "gamma" in kwargs:
                raise ValueError(f"more than one bare number in policy {text!r}")
            else:
                kwargs["gamma"] = float(item)
    return PolicySpec(kind=kind, mode=mode, **kwargs)


@dataclass(frozen=True)
class PreMatchPlan:
    """Sampled pre-match assignment M_ut.

    ``assignment[u, t-1]`` holds the edge index pre-matched for donor u at
    step t, or -1 for none.
    """

    assignment: np.ndarray

    def as_dict(self, s: Scenario) -> Dict[Tuple[str, int], Edge]:
        out = {}
        for ui, d in enumerate(s.donors):
            for tau in range(s.horizon):
                e = int(self.assignment[ui, tau])
                if e >= 0:
                    out[(d.id, tau + 1)] = s.edges[e]
        return out


@dataclass(frozen=True)
class BetaEstimate:
    """Estimated availability probabilities beta_ut, shape (U, T)."""

    beta: np.ndarray


# ---------------------------------------------------------------------------
# myopic deciders


def rand_decide(
    s: Scenario, u: str, t: int, r: DemandRealization, rng: np.random.Generator
) -> Optional[Edge]:
    """Uniform choice among the donor's available edges; None if none."""
    edges = available_edges(s, u, t, r)
    if not edges:
        return None
    return edges[int(rng.integers(len(edges)))]


def max_decide(
    s: Scenario, u: str, t: int, r: DemandRealization, rng: np.random.Generator
) -> Optional[Edge]:
    """Max-weight available edge, ties broken uniformly; None if none."""
    edges = available_edges(s, u, t, r)
    if not edges:
        return None
    w = np.array([s.weights[s.edge_lookup[e], t - 1] for e in edges])
    ties = np.flatnonzero(w == w.max())
    return edges[int(ties[int(rng.integers(ties.size))])]


def randmax_decide(
    s: Scenario,
    u: str,
    t: int,
    r: DemandRealization,
    gamma: float,
    rng: np.random.Generator,
) -> Optional[Edge]:
    """With probability gamma act like rand_decide, otherwise max_decide."""
    if rng.random() < gamma:
        return rand_decide(s, u, t, r, rng)
    return max_decide(s, u, t, r, rng)


# ---------------------------------------------------------------------------
# pre-match plans


def nadaplp_plan(
    s: Scenario,
    gamma: float,
    alpha: float,
    rng: np.random.Generator,
    lp: Optional[LpSolution] = None,
) -> PreMatchPlan:
    """Sample a plan that pre-matches e at t with probability alpha*x*/p.

    x* is the fixed-time relaxation's optimum at the given gamma (pass a
    solved ``lp`` to reuse one). alpha must keep every per-(donor, step)
    distribution's total mass at or below one; alpha = 1/D always does.
    """
    if lp is None:
        lp = solve_fixedtime_lp(s, gamma)
    probs = _over_availability(s, np.clip(lp.x, 0.0, None)) * alpha
    _check_valid(s, probs, "nadaplp")
    return PreMatchPlan(_draw_assignment(s, probs, rng))


def nadapopt_plan(
    s: Scenario,
    gamma: float,
    rng: np.random.Generator,
    lp: Optional[LpSolution] = None,
) -> PreMatchPlan:
    """Sample a plan from the optimal non-adaptive probabilities y*."""
    if lp is None:
        lp = solve_nadapopt_lp(s, gamma)
    probs = np.clip(lp.x, 0.0, None)
    return PreMatchPlan(_draw_assignment(s, probs, rng))


def execute_prematch(
    s: Scenario, plan: PreMatchPlan, u: str, t: int, r: DemandRealization
) -> Optional[Edge]:
    """The pre-matched edge at (u, t) if its recipient showed up, else None."""
    e = int(plan.assignment[s.donor_index[u], t - 1])
    if e < 0:
        return None
    avail = np.asarray(r.available)
    if not avail[s.edge_recipient[e], t - 1]:
        return None
    return s.edges[e]


def adaptmatch_decide(
    s: Scenario,
    plan: PreMatchPlan,
    u: str,
    t: int,
    r: DemandRealization,
    gamma: float,
    rng: np.random.Generator,
) -> Optional[Edge]:
    """Pre-matched edge when it lands; otherwise the randmax fallback."""
    pre = execute_prematch(s, plan, u, t, r)
    if pre is not None:
        return pre
    return randmax_decide(s, u, t, r, gamma, rng)


def estimate_beta(
    s: Scenario,
    gamma: float,
    alpha: float,
    trials: int,
    rng: np.random.Generator,
    lp: Optional[LpSolution] = None,
    rounds: int = 3,
) -> BetaEstimate:
    """Estimate beta_ut, the chance donor u is rate-limit-free at step t.

    Fixed-point simulation: starting from beta = 1, repeatedly build the
    induced pre-match distribution, simulate ``trials`` runs of it, and
    re-estimate availability from the empirical frequencies (``rounds``
    iterations, default 3). Estimates are clamped from below by the union
    bound 1 - sum of alpha*x* over the donor's trailing window, which the
    relaxation's packing rows keep at 1 - alpha or better; in particular
    alpha = 1/(2D) keeps every beta at 1/2 or better. beta_u1 is exactly 1.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    if lp is None:
        lp = solve_ratelimit_lp(s, gamma)
    xstar = np.clip(lp.x, 0.0, None)

    match_mass = np.zeros((s.n_donors, s.horizon))
    np.add.at(match_mass, s.edge_donor, alpha * xstar)
    floor = np.ones((s.n_donors, s.horizon))
    cum = np.cumsum(match_mass, axis=1)
    for tau in range(1, s.horizon):
        lo = tau - s.rate_limit + 1
        floor[:, tau] = 1.0 - (cum[:, tau - 1] - (cum[:, lo - 1] if lo > 0 else 0.0))
    floor = np.clip(floor, 0.0, 1.0)

    base = _over_availability(s, xstar) * alpha
    beta = np.ones((s.n_donors, s.horizon))
    for _ in range(max(1, rounds)):
        probs = base / np.maximum(beta[s.edge_donor], 1e-12)
        probs = _scale_to_valid(s, probs)
        empirical = _availability_frequency(s, probs, trials, rng)
        beta = np.maximum(empirical, floor)
        beta[:, 0] = 1.0
    return BetaEstimate(beta)


def nadaplp_rate_plan(
    s: Scenario,
    gamma: float,
    alpha: float,
    beta: BetaEstimate,
    rng: np.random.Generator,
    lp: Optional[LpSolution] = None,
) -> PreMatchPlan:
    """Sample a rate-limited plan: e at t with probability alpha*x*/(beta*p).

    x* is the rate-limited relaxation's optimum; execution still honors
    the K-day rule (the simulator skips blocked donors), beta only
    corrects the pre-match mass for the chance of being blocked.
    """
    if lp is None:
        lp = solve_ratelimit_lp(s, gamma)
    probs = _over_availability(s, np.clip(lp.x, 0.0, None)) * alpha
    probs = probs / np.maximum(beta.beta[s.edge_donor], 1e-12)
    _check_valid(s, probs, "nadaplp_rate")
    return PreMatchPlan(_draw_assignment(s, probs, rng))


# ---------------------------------------------------------------------------
# helpers


def _over_availability(s: Scenario, x: np.ndarray) -> np.ndarray:
    """x / p per cell, taking 0 where p = 0 (solver noise, not signal)."""
    p = s.availability[s.edge_recipient]
    out = np.zeros_like(x)
    np.divide(x, p, out=out, where=p > 0.0)
    return out


def _mass_by_donor_step(s: Scenario, probs: np.ndarray) -> np.ndarray:
    mass = np.zeros((s.n_donors, s.horizon))
    np.add.at(mass, s.edge_donor, probs)
    return mass


def _check_valid(s: Scenario, probs: np.ndarray, kind: str) -> None:
    mass = _mass_by_donor_step(s, probs)
    over = np.argwhere(mass > 1.0 + VALIDITY_TOL)
    if over.size:
        ui, tau = over[0]
        raise ValueError(
            f"{kind} pre-match distribution invalid: mass {mass[ui, tau]:.6f} > 1 "
            f"for donor {s.donors[ui].id!r} at step {tau + 1} (reduce alpha)"
        )


def _scale_to_valid(s: Scenario, probs: np.ndarray) -> np.ndarray:
    """Scale any overfull per-(donor, step) distribution back to mass 1."""
    mass = _mass_by_donor_step(s, probs)
    scale = np.where(mass > 1.0, 1.0 / np.maximum(mass, 1e-12), 1.0)
    return probs * scale[s.edge_donor]


def _draw_assignment(
    s: Scenario, probs: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One categorical draw per (donor, step) from per-edge probabilities.

    Consumes exactly one uniform per (donor, step) regardless of degree,
    drawn as a single (U, T) block, so two plans built from generators in
    the same state land on the same assignments wherever their
    probabilities agree.
    """
    uniforms = rng.random((s.n_donors, s.horizon))
    assignment = np.full((s.n_donors, s.horizon), -1, dtype=np.int64)
    for ui in range(s.n_donors):
        eu = s.donor_edges[ui]
        if eu.size == 0:
            continue
        cum = np.cumsum(probs[eu, :], axis=0)
        hit = uniforms[ui] < cum
        first = np.argmax(hit, axis=0)
        chosen = hit.any(axis=0)
        assignment[ui, chosen] = eu[first[chosen]]
    return assignment


def _availability_frequency(
    s: Scenario, probs: np.ndarray, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Fraction of simulated runs with donor u unblocked at step t."""
    U, V, T, K = s.n_donors, s.n_recipients, s.horizon, s.rate_limit
    uniforms = rng.random((trials, U, T))
    arrivals = rng.random((trials, V, T)) < s.availability[None, :, :]
    free_count = np.zeros((U, T))
    blocked = np.zeros((trials, U), dtype=np.int64)
    for tau in range(T):
        free = blocked == 0
        free_count[:, tau] = free.sum(axis=0)
        matched = np.zeros((trials, U), dtype=bool)
        for ui in range(U):
            eu = s.donor_edges[ui]
            if eu.size == 0:
                continue
            cum = np.cumsum(probs[eu, tau])
            pick = np.searchsorted(cum, uniforms[:, ui, tau], side="right")
            cand = np.flatnonzero(free[:, ui] & (pick < eu.size))
            if cand.size == 0:
                continue
            v_of = s.edge_recipient[eu[pick[cand]]]
            matched[cand, ui] = arrivals[cand, v_of, tau]
        blocked = np.maximum(blocked - 1, 0)
        blocked[matched] = K - 1
    return free_count / float(trials)
