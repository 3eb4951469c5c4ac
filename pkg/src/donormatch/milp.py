"""Best-first branch and bound over the bounded-variable simplex.

Solves  max c.x,  A x <= b,  0 <= x <= upper,  x_j binary for j in a given
index set. Nodes are LP relaxations with branching variables pinned via
their bounds; the queue is ordered by LP bound so the incumbent closes the
gap as early as possible. Intended for desk-scale oracle instances, not for
anything large.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .simplex import SimplexError, solve_lp

INT_TOL = 1e-6
REL_GAP = 1e-6
MAX_NODES = 20000


class MilpError(RuntimeError):
    """Branch-and-bound failure (node budget exhausted or LP breakdown)."""


@dataclass
class MilpResult:
    status: str               # "optimal" or "infeasible"
    x: Optional[np.ndarray]
    objective: float
    nodes: int = 0


def solve_milp(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    upper: np.ndarray,
    binary: Sequence[int],
    incumbent_x: Optional[np.ndarray] = None,
) -> MilpResult:
    """Maximize c.x with the listed variables restricted to {0, 1}.

    Parameters
    ----------
    binary : sequence of int
        Indices of the binary variables; the rest stay continuous.
    incumbent_x : ndarray, optional
        A known feasible point to start the incumbent from (the callers
        pass the empty matching). Without one the search can still prove
        infeasibility.

    Returns
    -------
    MilpResult
        The objective is recomputed as c.x on the final integral point, so
        callers comparing against independently summed weights see matching
        digits rather than accumulated tableau error.
    """
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = c.size
    A = np.asarray(A, dtype=float).reshape(len(b), n)
    binary = np.asarray(sorted(binary), dtype=int)

    best_x = None
    best_obj = -np.inf
    if incumbent_x is not None:
        best_x = np.asarray(incumbent_x, dtype=float).copy()
        best_obj = float(c @ best_x)

    lo0 = np.zeros(n)
    up0 = upper.copy()
    counter = itertools.count()
    heap = []
    nodes = 0

    def push(lo, up):
        try:
            res = solve_lp(c, A, b, up, lo)
        except SimplexError as exc:
            raise MilpError(f"node LP failed: {exc}") from exc
        if res.status != "optimal":
            return
        heapq.heappush(heap, (-res.objective, next(counter), res.x, lo, up))

    push(lo0, up0)

    while heap:
        neg_bound, _, x, lo, up = heapq.heappop(heap)
        bound = -neg_bound
        nodes += 1
        if nodes > MAX_NODES:
            raise MilpError(f"node budget {MAX_NODES} exhausted")
        if bound <= best_obj + _gap(best_obj):
            break  # best-first: nothing left can beat the incumbent

        frac = np.abs(x[binary] - np.round(x[binary]))
        if binary.size == 0 or frac.max() <= INT_TOL:
            xi = x.copy()
            xi[binary] = np.round(xi[binary])
            obj = float(c @ xi)
            if obj > best_obj:
                best_obj, best_x = obj, xi
            continue

        j = binary[int(np.argmax(frac))]
        lo_hi, up_lo = lo.copy(), up.copy()
        lo_hi[j] = 1.0
        up_lo[j] = 0.0
        push(lo, up_lo)    # x_j = 0 child
        push(lo_hi, up)    # x_j = 1 child

    if best_x is None:
        return MilpResult("infeasible", None, -np.inf, nodes)
    return MilpResult("optimal", best_x, best_obj, nodes)


def _gap(obj: float) -> float:
    return max(1e-9, REL_GAP * abs(obj))
