"""Maximize a concave, positively homogeneous function over a scaled simplex.

Both diagonal-scaling searches (Lyapunov LMI margin and balanced dominance
margin) reduce to

    maximize f(d)  subject to  d_i >= d_min,  sum(d) = q

where ``f`` is a pointwise minimum of functions that are linear along the
active piece, so each oracle call returns a supergradient ``g`` with
``f(d) = g @ d`` and ``f(d') <= g @ d'`` for every ``d'``.  The cuts are
therefore homogeneous and the cutting-plane LP gives a certified upper bound.

The search runs projected supergradient ascent for a warm start, then
Kelley cutting planes until the bound gap closes or the budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .errors import NumericalError

D_MIN = 1e-9


def project_to_simplex(v, total, floor=D_MIN):
    """Euclidean projection onto ``{x : x_i >= floor, sum(x) = total}``."""
    v = np.asarray(v, dtype=float)
    q = v.size
    budget = total - q * floor
    if budget < 0:
        raise ValueError("floor too large for the simplex total")
    y = v - floor
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - budget
    ind = np.arange(1, q + 1)
    rho = np.nonzero(u - css / ind > 0)[0]
    rho = rho[-1] if rho.size else 0
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0) + floor


@dataclass
class SimplexResult:
    d: np.ndarray
    lower: float
    upper: float
    iterations: int
    cuts: list = field(repr=False, default_factory=list)


def _lp_bound(cuts, q, floor):
    # variables: d_1..d_q, t ; maximize t  s.t.  t <= g_k . d
    G = np.array(cuts)
    n_cuts = G.shape[0]
    c = np.zeros(q + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-G, np.ones((n_cuts, 1))])
    b_ub = np.zeros(n_cuts)
    A_eq = np.zeros((1, q + 1))
    A_eq[0, :q] = 1.0
    bounds = [(floor, None)] * q + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[float(q)],
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericalError(f"cutting-plane LP failed: {res.message}")
    d = project_to_simplex(res.x[:q], float(q), floor)
    # re-evaluate the bound at the LP point from the cuts themselves
    bound = float(np.min(G @ res.x[:q]))
    return d, max(bound, float(-res.fun))


def maximize_on_simplex(
    oracle: Callable[[np.ndarray], tuple],
    q: int,
    budget: int = 5000,
    gap_tol: float = 1e-7,
    floor: float = D_MIN,
    warm_steps: int = 30,
    target: float | None = None,
) -> SimplexResult:
    """Maximize a concave homogeneous ``f`` on ``{d >= floor, sum(d) = q}``.

    `oracle(d)` returns ``(f(d), g)``.  `budget` bounds the number of oracle
    calls.  The returned ``upper`` is valid for the true maximum only up to
    the LP solver's tolerance; ``lower`` is attained at ``d``.  With `target`
    the search also stops once ``lower > target`` or ``upper <= target``.
    """
    if budget < 1:
        return SimplexResult(np.full(q, 1.0), -np.inf, np.inf, 0)

    d = np.full(q, 1.0)
    best_d, best = d, -np.inf
    upper = np.inf
    cuts = []
    calls = 0

    def evaluate(point):
        nonlocal best, best_d, calls
        val, g = oracle(point)
        calls += 1
        g = np.asarray(g, dtype=float)
        cuts.append(g)
        if val > best:
            best, best_d = float(val), point.copy()
        return val, g

    def gap_closed():
        if target is not None and (best > target or upper <= target):
            return True
        return upper - best <= gap_tol * max(1.0, abs(best))

    val, g = evaluate(d)
    # The simplex has max sum q, so f <= q * max(g) globally.
    upper = min(upper, float(q * np.max(g)))

    # Projected supergradient warm start with normalized diminishing steps.
    step0 = 0.5
    for k in range(1, warm_steps + 1):
        if calls >= budget or gap_closed():
            break
        gn = np.linalg.norm(g - g.mean())
        if gn == 0:
            break
        d = project_to_simplex(d + (step0 / np.sqrt(k)) * (g - g.mean()) / gn, float(q), floor)
        val, g = evaluate(d)

    # Kelley cutting planes.
    while calls < budget and not gap_closed():
        d, bound = _lp_bound(cuts, q, floor)
        upper = min(upper, bound)
        if gap_closed():
            break
        evaluate(d)

    if calls >= budget and not gap_closed() and len(cuts) > 0:
        _, bound = _lp_bound(cuts, q, floor)
        upper = min(upper, bound)

    return SimplexResult(best_d, best, max(upper, best), calls, cuts)
