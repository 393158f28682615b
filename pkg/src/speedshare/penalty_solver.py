"""Welfare-optimal schedules for penalty instances.

For a fixed completion order the cheapest trade-off between energy and
linear delay penalties has a closed form: the j-th execution span solves a
first-order condition driven by the total penalty rate of everyone still
waiting.  Optimizing the order reduces to a classical single-machine problem
(minimize the weighted sum of completion times raised to a concave power),
solved exactly by enumeration for small n and by the weight-over-time ratio
rule as a bounded heuristic otherwise.  ``coordinate_descent_lengths`` is an
independent numerical minimizer used to cross-check the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import PenaltyJob, ScheduleResult, SpeedProfile, TooLarge

BRUTE_FORCE_LIMIT = 9

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonPositivePenalty(ValueError):
    """An announced penalty rate that is zero, negative, or non-finite."""


def _suffix_penalties(order: Sequence[int], p: Mapping[int, float]) -> list[float]:
    """S[j] = total penalty rate of jobs at ranks j..n-1 (everyone still waiting)."""
    suffix = [0.0] * len(order)
    acc = 0.0
    for j in range(len(order) - 1, -1, -1):
        rate = p[order[j]]
        if not (math.isfinite(rate) and rate > 0.0):
            raise NonPositivePenalty(f"user {order[j]}: penalty rate must be positive, got {rate!r}")
        acc += rate
        suffix[j] = acc
    return suffix


def interval_lengths(
    order: Sequence[int],
    w: Mapping[int, float],
    p_hat: Mapping[int, float],
    alpha: float,
) -> tuple[float, ...]:
    """Optimal execution span per rank for a fixed order.

    The span of the job at rank j equals
    ``(w_j**alpha * (alpha - 1) / S_j) ** (1/alpha)`` where ``S_j`` sums the
    announced penalty rates of every job at rank j or later.  This is the
    unique stationary point of span-j's energy plus the delay it inflicts on
    all waiting jobs.
    """
    suffix = _suffix_penalties(order, p_hat)
    return tuple(
        (w[u] ** alpha * (alpha - 1.0) / suffix[j]) ** (1.0 / alpha)
        for j, u in enumerate(order)
    )


def foc_residuals(
    order: Sequence[int],
    w: Mapping[int, float],
    p_hat: Mapping[int, float],
    lengths: Sequence[float],
    alpha: float,
) -> tuple[float, ...]:
    """Per-rank first-order-condition residual (alpha-1) w^alpha ell^-alpha - S_j."""
    suffix = _suffix_penalties(order, p_hat)
    return tuple(
        (alpha - 1.0) * w[u] ** alpha * lengths[j] ** (-alpha) - suffix[j]
        for j, u in enumerate(order)
    )


def direct_objective(
    order: Sequence[int],
    w: Mapping[int, float],
    p: Mapping[int, float],
    lengths: Sequence[float],
    alpha: float,
) -> float:
    """Total penalty plus energy for explicit spans: sum p_i t_i + sum w^a ell^(1-a)."""
    t = 0.0
    penalty = 0.0
    drawn = 0.0
    for j, u in enumerate(order):
        ell = lengths[j]
        t += ell
        penalty += p[u] * t
        drawn += w[u] ** alpha * ell ** (1.0 - alpha)
    return penalty + drawn


def cost_scale(alpha: float) -> float:
    """Constant relating the classical objective to the speed-scaled one."""
    return alpha * (alpha - 1.0) ** ((1.0 - alpha) / alpha)


def social_cost(
    order: Sequence[int],
    w: Mapping[int, float],
    p: Mapping[int, float],
    alpha: float,
) -> float:
    """Minimal penalty-plus-energy for an order, in closed form.

    Equals ``cost_scale(alpha) * sum_j w_j * S_j ** ((alpha-1)/alpha)`` with
    ``S_j`` the suffix penalty sums; identical to evaluating
    :func:`direct_objective` at :func:`interval_lengths`.
    """
    suffix = _suffix_penalties(order, p)
    beta = (alpha - 1.0) / alpha
    return cost_scale(alpha) * sum(
        w[u] * suffix[j] ** beta for j, u in enumerate(order)
    )


@dataclass(frozen=True)
class ClassicalInstance:
    """Single-machine weighted completion-time instance equivalent to a penalty instance.

    Job i takes ``processing[i] = p_i`` time units and weighs
    ``weight[i] = w_i``; the objective is sum of weight * completion**beta
    with ``beta = (alpha-1)/alpha`` in (0, 1).  A classical order's cost,
    multiplied by ``scale``, equals the social cost of the REVERSED order in
    the speed-scaling game, so argmins map to argmins under reversal.
    """

    ids: tuple[int, ...]
    processing: Mapping[int, float]
    weight: Mapping[int, float]
    beta: float
    scale: float

    def back_map(self, classical_order: Sequence[int]) -> tuple[int, ...]:
        """Speed-scaling order corresponding to a classical order."""
        return tuple(reversed(classical_order))


def to_classical(
    jobs: Sequence[PenaltyJob], alpha: float
) -> ClassicalInstance:
    """Restate a penalty instance as the equivalent classical problem."""
    return ClassicalInstance(
        ids=tuple(j.id for j in jobs),
        processing={j.id: j.p for j in jobs},
        weight={j.id: j.w for j in jobs},
        beta=(alpha - 1.0) / alpha,
        scale=cost_scale(alpha),
    )


def classical_cost(inst: ClassicalInstance, order: Sequence[int]) -> float:
    """Weighted sum of completion times to the beta power for a classical order."""
    t = 0.0
    total = 0.0
    for u in order:
        t += inst.processing[u]
        total += inst.weight[u] * t ** inst.beta
    return total


def smith_order(w: Mapping[int, float], p: Mapping[int, float]) -> tuple[int, ...]:
    """Heuristic order: reverse of the classical weight-over-time ratio rule.

    The classical rule runs jobs by decreasing ``w_i / p_i`` (ties by id
    ascending); reversing it gives the speed-scaling order.  Guaranteed
    within a factor (sqrt(3)+1)/2 of optimal for the concave-power objective.
    """
    classical = sorted(w, key=lambda u: (-(w[u] / p[u]), u))
    return tuple(reversed(classical))


@lru_cache(maxsize=None)
def _all_orders(n: int) -> np.ndarray:
    """Every permutation of range(n), lexicographic, as an (n!, n) int array."""
    return np.array(list(permutations(range(n))), dtype=np.int8)


def brute_force_order(
    w: Mapping[int, float], p: Mapping[int, float], alpha: float
) -> tuple[tuple[int, ...], float]:
    """Exact minimum-social-cost order by evaluating all n! permutations.

    Permutations are scored in one vectorized pass; the first minimum wins,
    so exact ties resolve to the lexicographically smallest order.  Refuses
    n > BRUTE_FORCE_LIMIT.
    """
    ids = sorted(w)
    n = len(ids)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force enumerates at most {BRUTE_FORCE_LIMIT} jobs, got {n}")
    perms = _all_orders(n)
    wv = np.array([w[u] for u in ids])
    pv = np.array([p[u] for u in ids])
    ranked_p = pv[perms]
    suffix = np.cumsum(ranked_p[:, ::-1], axis=1)[:, ::-1]
    beta = (alpha - 1.0) / alpha
    costs = (wv[perms] * suffix ** beta).sum(axis=1)
    best = perms[int(np.argmin(costs))]
    order = tuple(ids[j] for j in best)
    return order, social_cost(order, w, p, alpha)


def classical_brute_force(
    inst: ClassicalInstance,
) -> tuple[tuple[int, ...], float]:
    """Exact minimum-cost classical order over all n! permutations.

    Same enumeration discipline as :func:`brute_force_order`: lexicographic
    scan, first minimum wins.
    """
    ids = sorted(inst.ids)
    n = len(ids)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force enumerates at most {BRUTE_FORCE_LIMIT} jobs, got {n}")
    perms = _all_orders(n)
    wv = np.array([inst.weight[u] for u in ids])
    pv = np.array([inst.processing[u] for u in ids])
    completions = np.cumsum(pv[perms], axis=1)
    costs = (wv[perms] * completions ** inst.beta).sum(axis=1)
    best = perms[int(np.argmin(costs))]
    order = tuple(ids[j] for j in best)
    return order, classical_cost(inst, order)


def choose_order(
    w: Mapping[int, float], p: Mapping[int, float], alpha: float
) -> tuple[tuple[int, ...], str]:
    """Order selection policy: exact enumeration when affordable, ratio rule above."""
    if len(w) <= BRUTE_FORCE_LIMIT:
        order, _ = brute_force_order(w, p, alpha)
        return order, "brute-force"
    return smith_order(w, p), "smith"


def _golden_min(f: Callable[[float], float], x0: float, rel_tol: float = 1e-13) -> float:
    """Minimize a unimodal positive-argument function near x0 by golden section."""
    a, b, c = x0 / 2.0, x0, x0 * 2.0
    fa, fb, fc = f(a), f(b), f(c)
    while fa < fb:  # minimum lies further left
        c, fc = b, fb
        b, fb = a, fa
        a = a / 2.0
        fa = f(a)
    while fc < fb:  # minimum lies further right
        a, fa = b, fb
        b, fb = c, fc
        c = c * 2.0
        fc = f(c)
    x1 = c - _INV_PHI * (c - a)
    x2 = a + _INV_PHI * (c - a)
    f1, f2 = f(x1), f(x2)
    while c - a > rel_tol * c:
        if f1 < f2:
            c = x2
            x2, f2 = x1, f1
            x1 = c - _INV_PHI * (c - a)
            f1 = f(x1)
        else:
            a = x1
            x1, f1 = x2, f2
            x2 = a + _INV_PHI * (c - a)
            f2 = f(x2)
    return 0.5 * (a + c)


def coordinate_descent_lengths(
    order: Sequence[int],
    w: Mapping[int, float],
    p_hat: Mapping[int, float],
    alpha: float,
    *,
    rel_tol: float = 1e-10,
    max_cycles: int = 200,
) -> tuple[float, ...]:
    """Numerically minimized execution spans, independent of the closed form.

    Cyclic coordinate descent over the spans with a golden-section line
    search on the full penalty-plus-energy objective; stops once no
    coordinate moves by more than ``rel_tol`` relative in a cycle.
    """
    n = len(order)
    lengths = [1.0] * n
    for _ in range(max_cycles):
        worst_move = 0.0
        for j in range(n):
            def f(x: float, j: int = j) -> float:
                saved = lengths[j]
                lengths[j] = x
                val = direct_objective(order, w, p_hat, lengths, alpha)
                lengths[j] = saved
                return val

            new = _golden_min(f, lengths[j])
            worst_move = max(worst_move, abs(new - lengths[j]) / max(lengths[j], 1e-300))
            lengths[j] = new
        if worst_move <= rel_tol:
            break
    return tuple(lengths)


def schedule_penalty_jobs(
    jobs: Sequence[PenaltyJob],
    alpha: float,
    p_hat: Mapping[int, float] | None = None,
    order: Sequence[int] | None = None,
) -> tuple[ScheduleResult, str]:
    """Full schedule for announced penalty rates (defaulting to the truth).

    Returns the schedule and the order-selection method used ("brute-force",
    "smith", or "fixed" when the caller pins the order).
    """
    w = {j.id: j.w for j in jobs}
    rates = dict(p_hat) if p_hat is not None else {j.id: j.p for j in jobs}
    if order is None:
        chosen, method = choose_order(w, rates, alpha)
    else:
        chosen, method = tuple(order), "fixed"
    lengths = interval_lengths(chosen, w, rates, alpha)
    times: list[float] = []
    t = 0.0
    for ell in lengths:
        t += ell
        times.append(t)
    profile = SpeedProfile(tuple((w[u], lengths[j]) for j, u in enumerate(chosen)))
    drawn = sum(w[u] ** alpha * lengths[j] ** (1.0 - alpha) for j, u in enumerate(chosen))
    result = ScheduleResult(
        order=chosen,
        times=tuple(times),
        lengths=lengths,
        profile=profile,
        energy=drawn,
        block_of=tuple(range(len(chosen))),
    )
    return result, method
