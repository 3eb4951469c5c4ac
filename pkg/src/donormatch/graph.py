"""Instance data model for donor-to-opportunity matching.

Holds the donation graph (donor and recipient vertices with their
admissible edges), per-edge-per-step
weights, recipient availability distributions, donor notification schedules
and the per-recipient normalization scores, plus the structural queries the
rest of the package builds on.

Time steps are 1-based everywhere in the public interface; the backing
numpy arrays use column ``t - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

Edge = Tuple[str, str]

STATIC = "static"
DYNAMIC = "dynamic"

MODE_FIXED = "fixed_time"
MODE_RATE = "rate_limited"


@dataclass(frozen=True)
class Donor:
    """A donor: opaque id, location in degrees, first notification day."""

    id: str
    lat: float
    lon: float
    first_notify: int = 1


@dataclass(frozen=True)
class Recipient:
    """A donation opportunity, either always available or stochastically so."""

    id: str
    lat: float
    lon: float
    kind: str = STATIC


@dataclass(frozen=True)
class Scenario:
    """A full matching instance.

    Attributes
    ----------
    donors, recipients : tuple
        Entity records in index order; ids are opaque strings and all hot
        paths go through the dense integer indices below.
    edges : tuple of (donor_id, recipient_id)
        The admissible pairs.
    weights : ndarray, shape (E, T)
        Match value w_et for edge e at step t.
    availability : ndarray, shape (V, T)
        Availability probability p_vt; 1.0 at every step for static
        recipients.
    donor_schedule : ndarray, shape (U, T)
        Fixed-time notification indicator a_ut, derived from each donor's
        first-notify day and the rate limit K (1 exactly every K days).
    horizon : int
        Number of days T.
    rate_limit : int
        Minimum spacing K between notifications of one donor.
    normalization : ndarray, shape (V,), optional
        Per-recipient score m_v; None until estimated.
    """

    donors: Tuple[Donor, ...]
    recipients: Tuple[Recipient, ...]
    edges: Tuple[Edge, ...]
    weights: np.ndarray
    availability: np.ndarray
    donor_schedule: np.ndarray
    horizon: int
    rate_limit: int
    normalization: Optional[np.ndarray] = None

    @cached_property
    def donor_index(self) -> Dict[str, int]:
        return {d.id: i for i, d in enumerate(self.donors)}

    @cached_property
    def recipient_index(self) -> Dict[str, int]:
        return {v.id: i for i, v in enumerate(self.recipients)}

    @cached_property
    def edge_lookup(self) -> Dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def edge_donor(self) -> np.ndarray:
        """Donor index of each edge."""
        return np.array([self.donor_index[e[0]] for e in self.edges], dtype=np.int64)

    @cached_property
    def edge_recipient(self) -> np.ndarray:
        """Recipient index of each edge."""
        return np.array(
            [self.recipient_index[e[1]] for e in self.edges], dtype=np.int64
        )

    @cached_property
    def donor_edges(self) -> Tuple[np.ndarray, ...]:
        """Edge indices adjacent to each donor, in edge order."""
        buckets: List[List[int]] = [[] for _ in self.donors]
        for e, (uid, _vid) in enumerate(self.edges):
            buckets[self.donor_index[uid]].append(e)
        return tuple(np.array(b, dtype=np.int64) for b in buckets)

    @property
    def n_donors(self) -> int:
        return len(self.donors)

    @property
    def n_recipients(self) -> int:
        return len(self.recipients)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class DemandRealization:
    """One binary draw of recipient availability, shape (V, T)."""

    available: np.ndarray


@dataclass
class MatchingOutcome:
    """Edges matched per step plus the induced per-recipient weights."""

    matched: Dict[int, List[Edge]]
    recipient_weight: Dict[str, float]
    total_weight: float


def fixed_schedule(first_notify: int, horizon: int, rate_limit: int) -> np.ndarray:
    """Materialize a donor's 0/1 schedule row from the first-notify day."""
    row = np.zeros(horizon, dtype=np.int8)
    t = int(first_notify)
    while t <= horizon:
        if t >= 1:
            row[t - 1] = 1
        t += rate_limit
    return row


WeightSpec = Union[float, Sequence[float], Mapping[Union[int, str], float]]


def _weight_row(spec: WeightSpec, horizon: int, label: str) -> np.ndarray:
    """Expand one edge's weight spec (a constant, else a per-step list or map) to length T."""
    if isinstance(spec, Mapping):
        row = np.empty(horizon, dtype=float)
        for t in range(1, horizon + 1):
            if t in spec:
                row[t - 1] = float(spec[t])
            elif str(t) in spec:
                row[t - 1] = float(spec[str(t)])
            else:
                raise ValueError(f"missing weight at t={t} for {label}")
        return row
    if np.ndim(spec) == 0:
        return np.full(horizon, float(spec))
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (horizon,):
        raise ValueError(f"weight list for {label} has length {arr.size}, want {horizon}")
    return arr


def _availability_row(
    spec: Optional[WeightSpec], horizon: int, kind: str
) -> np.ndarray:
    """Expand one recipient's availability spec; absent entries default to 0 (dynamic) or 1 (static)."""
    default = 1.0 if kind == STATIC else 0.0
    if spec is None:
        return np.full(horizon, default)
    if isinstance(spec, Mapping):
        row = np.full(horizon, default if kind == STATIC else 0.0)
        for key, val in spec.items():
            t = int(key)
            if not 1 <= t <= horizon:
                raise ValueError(f"availability step {t} outside 1..{horizon}")
            row[t - 1] = float(val)
        return row
    if np.ndim(spec) == 0:
        return np.full(horizon, float(spec))
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (horizon,):
        raise ValueError(f"availability list has length {arr.size}, want {horizon}")
    return arr


def build_scenario(
    donors: Sequence[Donor],
    recipients: Sequence[Recipient],
    edges: Sequence[Edge],
    weights: Union[np.ndarray, Sequence[WeightSpec], Mapping[Edge, WeightSpec]],
    availability: Union[np.ndarray, Mapping[str, WeightSpec], None],
    horizon: int,
    rate_limit: int,
    normalization: Union[np.ndarray, Mapping[str, float], None] = None,
) -> Scenario:
    """Assemble a Scenario from flexible inputs.

    Parameters
    ----------
    weights : array (E, T), list parallel to ``edges``, or map keyed by edge
        Each per-edge entry may be a constant (same weight at every step),
        a length-T sequence, or a {t: weight} map covering every step.
    availability : array (V, T) or map keyed by recipient id
        Static recipients may be omitted (implied 1.0); for dynamic
        recipients absent entries default to 0.
    normalization : array (V,) or map keyed by recipient id, optional

    Returns
    -------
    Scenario
        With the fixed-time schedule materialized from each donor's
        first-notify day. Semantic problems (out-of-range weights and the
        like) are left to ``validate_scenario``; only structural errors
        (unknown ids, wrong lengths) raise here.
    """
    donors = tuple(donors)
    recipients = tuple(recipients)
    edges = tuple((str(u), str(v)) for u, v in edges)
    T = int(horizon)
    E, V = len(edges), len(recipients)

    if isinstance(weights, np.ndarray):
        W = np.asarray(weights, dtype=float)
        if W.shape != (E, T):
            raise ValueError(f"weights array has shape {W.shape}, want {(E, T)}")
    else:
        W = np.empty((E, T), dtype=float)
        if isinstance(weights, Mapping):
            for e, edge in enumerate(edges):
                if edge not in weights:
                    raise ValueError(f"missing weights for edge {edge}")
                W[e] = _weight_row(weights[edge], T, f"edge {edge}")
        else:
            specs = list(weights)
            if len(specs) != E:
                raise ValueError(f"{len(specs)} weight entries for {E} edges")
            for e, spec in enumerate(specs):
                W[e] = _weight_row(spec, T, f"edge {edges[e]}")

    if isinstance(availability, np.ndarray):
        P = np.asarray(availability, dtype=float)
        if P.shape != (V, T):
            raise ValueError(f"availability array has shape {P.shape}, want {(V, T)}")
    else:
        avail_map = dict(availability) if availability else {}
        unknown = set(avail_map) - {v.id for v in recipients}
        if unknown:
            raise ValueError(f"availability given for unknown recipients {sorted(unknown)}")
        P = np.empty((V, T), dtype=float)
        for i, rec in enumerate(recipients):
            P[i] = _availability_row(avail_map.get(rec.id), T, rec.kind)

    if normalization is None:
        m = None
    elif isinstance(normalization, Mapping):
        m = np.zeros(V, dtype=float)
        unknown = set(normalization) - {v.id for v in recipients}
        if unknown:
            raise ValueError(f"normalization given for unknown recipients {sorted(unknown)}")
        for i, rec in enumerate(recipients):
            if rec.id in normalization:
                m[i] = float(normalization[rec.id])
    else:
        m = np.asarray(normalization, dtype=float)
        if m.shape != (V,):
            raise ValueError(f"normalization array has shape {m.shape}, want {(V,)}")

    A = np.stack(
        [fixed_schedule(d.first_notify, T, int(rate_limit)) for d in donors]
    ) if donors else np.zeros((0, T), dtype=np.int8)

    return Scenario(
        donors=donors,
        recipients=recipients,
        edges=edges,
        weights=W,
        availability=P,
        donor_schedule=A,
        horizon=T,
        rate_limit=int(rate_limit),
        normalization=m,
    )


def validate_scenario(s: Scenario) -> List[str]:
    """Check every Scenario invariant, returning one message per violation.

    An empty list means the scenario is valid. Violations name the
    offending entity; nothing is raised.
    """
    out: List[str] = []
    T = s.horizon

    if T < 1:
        out.append(f"horizon {T} < 1")
    if s.rate_limit < 1:
        out.append(f"rate_limit {s.rate_limit} < 1")

    donor_ids = [d.id for d in s.donors]
    recipient_ids = [v.id for v in s.recipients]
    if len(set(donor_ids)) != len(donor_ids):
        dupes = sorted({i for i in donor_ids if donor_ids.count(i) > 1})
        out.append(f"duplicate donor ids {dupes}")
    if len(set(recipient_ids)) != len(recipient_ids):
        dupes = sorted({i for i in recipient_ids if recipient_ids.count(i) > 1})
        out.append(f"duplicate recipient ids {dupes}")
    donor_set, recipient_set = set(donor_ids), set(recipient_ids)

    seen = set()
    for u, v in s.edges:
        if u not in donor_set:
            out.append(f"edge ({u}, {v}) references unknown donor {u}")
        if v not in recipient_set:
            out.append(f"edge ({u}, {v}) references unknown recipient {v}")
        if (u, v) in seen:
            out.append(f"duplicate edge ({u}, {v})")
        seen.add((u, v))

    for d in s.donors:
        if d.first_notify < 1:
            out.append(f"donor {d.id} first_notify {d.first_notify} < 1")
    for rec in s.recipients:
        if rec.kind not in (STATIC, DYNAMIC):
            out.append(f"recipient {rec.id} has unknown kind {rec.kind!r}")

    shapes_ok = (
        s.weights.shape == (len(s.edges), T)
        and s.availability.shape == (len(s.recipients), T)
        and s.donor_schedule.shape == (len(s.donors), T)
    )
    if not shapes_ok:
        out.append(
            "array shape mismatch: weights %s, availability %s, schedule %s for "
            "(E, V, U, T) = (%d, %d, %d, %d)"
            % (
                s.weights.shape,
                s.availability.shape,
                s.donor_schedule.shape,
                len(s.edges),
                len(s.recipients),
                len(s.donors),
                T,
            )
        )
        return out

    bad_e, bad_t = np.where((s.weights < 0.0) | (s.weights > 1.0))
    for e, tc in zip(bad_e, bad_t):
        out.append(
            f"weight {s.weights[e, tc]:g} outside [0, 1] on edge {s.edges[e]} at t={tc + 1}"
        )
    bad_v, bad_t = np.where((s.availability < 0.0) | (s.availability > 1.0))
    for vi, tc in zip(bad_v, bad_t):
        out.append(
            f"availability {s.availability[vi, tc]:g} outside [0, 1] for "
            f"recipient {s.recipients[vi].id} at t={tc + 1}"
        )
    for i, rec in enumerate(s.recipients):
        if rec.kind == STATIC and not np.all(s.availability[i] == 1.0):
            out.append(f"static recipient {rec.id} has availability below 1")

    for i, d in enumerate(s.donors):
        row = s.donor_schedule[i]
        if not np.all((row == 0) | (row == 1)):
            out.append(f"donor {d.id} schedule has entries outside {{0, 1}}")
            continue
        ts = np.flatnonzero(row) + 1
        if ts.size >= 2 and not np.all(np.diff(ts) == s.rate_limit):
            out.append(
                f"donor {d.id} schedule gaps {np.diff(ts).tolist()} differ from K={s.rate_limit}"
            )

    if s.normalization is not None:
        if s.normalization.shape != (len(s.recipients),):
            out.append(f"normalization has shape {s.normalization.shape}")
        else:
            for i, rec in enumerate(s.recipients):
                if s.normalization[i] < 0:
                    out.append(
                        f"normalization {s.normalization[i]:g} < 0 for recipient {rec.id}"
                    )
    return out


def donor_max_degree(s: Scenario) -> int:
    """Largest number of edges incident to any one donor (0 with no edges)."""
    if not s.donors:
        return 0
    return max(len(es) for es in s.donor_edges)


def available_edges(
    s: Scenario,
    u: str,
    t: int,
    r: DemandRealization,
    donor_available: bool = True,
) -> List[Edge]:
    """Edges of donor u whose recipient is available at step t under r.

    Returns the empty list when ``donor_available`` is false. Raises
    ValueError for t outside 1..T.
    """
    if not 1 <= t <= s.horizon:
        raise ValueError(f"t={t} outside 1..{s.horizon}")
    if not donor_available:
        return []
    ui = s.donor_index[u]
    avail = r.available[:, t - 1]
    return [
        s.edges[e] for e in s.donor_edges[ui] if avail[s.edge_recipient[e]] == 1
    ]


def outcome_from_matches(
    s: Scenario, matched: Mapping[int, Sequence[Edge]]
) -> MatchingOutcome:
    """Build a MatchingOutcome from per-step matched edges, filling in Y_v."""
    Y = {v.id: 0.0 for v in s.recipients}
    per_step: Dict[int, List[Edge]] = {}
    eidx = {e: i for i, e in enumerate(s.edges)}
    for t, es in matched.items():
        if not es:
            continue
        per_step[int(t)] = [tuple(e) for e in es]
        for e in es:
            Y[e[1]] += float(s.weights[eidx[tuple(e)], int(t) - 1])
    return MatchingOutcome(
        matched=per_step,
        recipient_weight=Y,
        total_weight=float(sum(Y.values())),
    )


def validate_outcome(
    s: Scenario,
    outcome: MatchingOutcome,
    r: DemandRealization,
    mode: str = MODE_FIXED,
) -> List[str]:
    """Check a MatchingOutcome against every invariant for the given mode.

    Verifies step range, edge existence, at most one match per donor per
    step, recipient availability at each match, the mode's donor
    availability rule (schedule for fixed-time, K-day spacing for
    rate-limited), and consistency of the stored weights.
    """
    out: List[str] = []
    eidx = {e: i for i, e in enumerate(s.edges)}
    matched_steps: Dict[str, List[int]] = {d.id: [] for d in s.donors}

    for t, es in sorted(outcome.matched.items()):
        if not 1 <= t <= s.horizon:
            out.append(f"matched step t={t} outside 1..{s.horizon}")
            continue
        donors_here = set()
        for e in es:
            e = tuple(e)
            if e not in eidx:
                out.append(f"matched edge {e} at t={t} is not in the graph")
                continue
            u, v = e
            if u in donors_here:
                out.append(f"donor {u} matched twice at t={t}")
            donors_here.add(u)
            if r.available[s.recipient_index[v], t - 1] != 1:
                out.append(f"edge {e} matched at t={t} but recipient unavailable")
            if mode == MODE_FIXED:
                if s.donor_schedule[s.donor_index[u], t - 1] != 1:
                    out.append(f"edge {e} matched at t={t} off donor {u}'s schedule")
            matched_steps[u].append(t)

    if mode == MODE_RATE:
        for u, ts in matched_steps.items():
            ts = sorted(ts)
            for a, b in zip(ts, ts[1:]):
                if b - a < s.rate_limit:
                    out.append(
                        f"donor {u} matched at t={a} and t={b}, closer than K={s.rate_limit}"
                    )

    expect = outcome_from_matches(
        s,
        {
            t: [e for e in es if tuple(e) in eidx]
            for t, es in outcome.matched.items()
            if 1 <= t <= s.horizon
        },
    )
    for vid, y in expect.recipient_weight.items():
        got = outcome.recipient_weight.get(vid, 0.0)
        if abs(got - y) > 1e-9:
            out.append(f"recipient_weight[{vid}] = {got:g} but matches sum to {y:g}")
    if abs(outcome.total_weight - sum(outcome.recipient_weight.values())) > 1e-9:
        out.append("total_weight differs from the sum of recipient weights")
    return out


def with_normalization(
    s: Scenario, m: Union[np.ndarray, Mapping[str, float]]
) -> Scenario:
    """Copy of s with normalization scores attached."""
    if isinstance(m, Mapping):
        arr = np.array([float(m.get(v.id, 0.0)) for v in s.recipients])
    else:
        arr = np.asarray(m, dtype=float)
    return replace(s, normalization=arr)


# ---------------------------------------------------------------------------
# file format


def scenario_to_dict(s: Scenario) -> dict:
    """JSON-ready dict; constant-over-time rows are written compactly."""
    def compact(row: np.ndarray):
        vals = [float(x) for x in row]
        return vals[0] if len(set(vals)) == 1 else vals

    doc: dict = {
        "horizon": s.horizon,
        "rate_limit": s.rate_limit,
        "donors": [
            {"id": d.id, "lat": d.lat, "lon": d.lon, "first_notify": d.first_notify}
            for d in s.donors
        ],
        "recipients": [
            {"id": v.id, "lat": v.lat, "lon": v.lon, "kind": v.kind}
            for v in s.recipients
        ],
        "edges": [[u, v] for u, v in s.edges],
        "weights": [compact(s.weights[e]) for e in range(len(s.edges))],
        "availability": {
            v.id: compact(s.availability[i])
            for i, v in enumerate(s.recipients)
            if v.kind == DYNAMIC
        },
    }
    if s.normalization is not None:
        doc["normalization"] = {
            v.id: float(s.normalization[i]) for i, v in enumerate(s.recipients)
        }
    return doc


def scenario_from_dict(doc: Mapping) -> Scenario:
    """Inverse of scenario_to_dict; tolerates the compact weight forms."""
    donors = [
        Donor(
            id=str(d["id"]),
            lat=float(d.get("lat", 0.0)),
            lon=float(d.get("lon", 0.0)),
            first_notify=int(d.get("first_notify", 1)),
        )
        for d in doc["donors"]
    ]
    recipients = [
        Recipient(
            id=str(v["id"]),
            lat=float(v.get("lat", 0.0)),
            lon=float(v.get("lon", 0.0)),
            kind=str(v.get("kind", STATIC)),
        )
        for v in doc["recipients"]
    ]
    return build_scenario(
        donors=donors,
        recipients=recipients,
        edges=[tuple(e) for e in doc["edges"]],
        weights=doc["weights"],
        availability=doc.get("availability") or {},
        horizon=int(doc["horizon"]),
        rate_limit=int(doc["rate_limit"]),
        normalization=doc.get("normalization"),
    )


def save_scenario(s: Scenario, path) -> None:
    """Write the scenario as JSON (sorted keys, so equal scenarios give equal bytes)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    """Read a scenario written by save_scenario (or by hand)."""
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
