"""Reference schedulers and optimum computations used as baselines."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .model import (Identical, Instance, InstanceError, Packing, Related, Schedule, Single, max_single_rate,
                    speed_matrix)


def _require_single(instance: Instance) -> None:
    if not isinstance(instance.model, Single):
        raise InstanceError("this baseline needs a single-machine instance")


def srpt_single(instance: Instance) -> Schedule:
    """Preemptive shortest remaining processing time on one machine.

    Among available jobs the one with least remaining work runs; ties go to
    the smallest index.  Optimal for total (unweighted) completion time.
    """
    _require_single(instance)
    n = instance.n
    rel = instance.r
    order = sorted(range(n), key=lambda j: (rel[j], j))
    remaining = list(instance.p)
    comp: list[Fraction | None] = [None] * n
    heap: list[tuple[Fraction, int]] = []
    t = rel[order[0]]
    events = [t]
    rates: list[dict[int, Fraction]] = []
    k = 0
    while k < n or heap:
        while k < n and rel[order[k]] <= t:
            j = order[k]
            heapq.heappush(heap, (remaining[j], j))
            k += 1
        if not heap:
            t = rel[order[k]]
            rates.append({})
            events.append(t)
            continue
        rem, j = heap[0]
        finish = t + rem
        stop = min(finish, rel[order[k]]) if k < n else finish
        heapq.heappop(heap)
        remaining[j] = rem - (stop - t)
        if stop == finish:
            comp[j] = finish
        else:
            heapq.heappush(heap, (remaining[j], j))
        if stop > t:
            if rates and rates[-1] == {j: Fraction(1)}:
                events[-1] = stop  # extend the previous piece instead of splitting it
            else:
                rates.append({j: Fraction(1)})
                events.append(stop)
        t = stop
    return Schedule(instance, events, rates, comp, algorithm="srpt")


def srpt_objective_fast(p: Sequence[float], r: Sequence[float]) -> float:
    """Float SRPT objective (unit weights) for large single-machine instances."""
    n = len(p)
    order = sorted(range(n), key=lambda j: (r[j], j))
    heap: list[tuple[float, int]] = []
    t = float(r[order[0]]) if n else 0.0
    total = 0.0
    k = 0
    while k < n or heap:
        while k < n and r[order[k]] <= t:
            heapq.heappush(heap, (float(p[order[k]]), order[k]))
            k += 1
        if not heap:
            t = float(r[order[k]])
            continue
        rem, j = heapq.heappop(heap)
        nxt = float(r[order[k]]) if k < n else float("inf")
        if t + rem <= nxt:
            t += rem
            total += t
        else:
            heapq.heappush(heap, (rem - (nxt - t), j))
            t = nxt
    return total


# ---------------------------------------------------------------------------
# related machines, unit weights


def _sorted_speeds(instance: Instance) -> list[Fraction]:
    if isinstance(instance.model, Single):
        return [Fraction(1)]
    if isinstance(instance.model, (Identical, Related)):
        return sorted(instance.model.speeds, reverse=True)
    raise InstanceError("needs a single, identical or related machine model")


def preemptive_spt_related(instance: Instance) -> Schedule:
    """Optimal schedule for unit weights and a common release date.

    At any time the k shortest unfinished jobs run on the k fastest machines.
    Since a shorter job always runs at least as fast as a longer one, the
    ranking never changes and jobs finish in SPT order.
    """
    speeds = _sorted_speeds(instance)
    if len(set(instance.r)) != 1:
        raise InstanceError("preemptive SPT needs a common release date")
    if any(w != 1 for w in instance.w):
        raise InstanceError("preemptive SPT needs unit weights")
    n = instance.n
    order = sorted(range(n), key=lambda j: (instance.p[j], j))
    remaining = {j: instance.p[j] for j in order}
    t = instance.r[0]
    events = [t]
    rates: list[dict[int, Fraction]] = []
    assignments: list[dict] = []
    comp: list[Fraction | None] = [None] * n
    for pos, j in enumerate(order):
        live = order[pos:]
        dt = remaining[j] / speeds[0]
        if dt > 0:
            step = {}
            x = {}
            for rank, k in enumerate(live[:len(speeds)]):
                step[k] = speeds[rank]
                x[(rank, k)] = Fraction(1)
                remaining[k] -= speeds[rank] * dt
            t += dt
            rates.append(step)
            assignments.append(x)
            events.append(t)
        comp[j] = t
    # model speeds are stored fastest first, so the rank is the machine index
    return Schedule(instance, events, rates, comp,
                    assignments=None if isinstance(instance.model, Single) else assignments,
                    algorithm="preemptive-spt")


@dataclass
class MuVector:
    mu: list[Fraction]
    lam: list[Fraction]

    def objective(self, p: Sequence) -> Fraction:
        """Optimal total completion time for processing times p (any order)."""
        ps = sorted(Fraction(v) for v in p)
        return sum((m * q for m, q in zip(self.mu, ps)), Fraction(0))


def mu_vector(s: Sequence, n: int) -> MuVector:
    """Coefficients with OPT(p) = sum_k mu_k p_k for p sorted ascending.

    With gaps g_k = C_k - C_{k-1} the SPT schedule satisfies the lower
    triangular system sum_{j<=k} s_{k-j+1} g_j = p_k.  The total completion
    time is sum_k (n-k+1) g_k, so mu solves the transposed system against
    (n, n-1, ..., 1); lam holds the successive differences of mu.
    """
    speeds = sorted((Fraction(v) for v in s), reverse=True)[:n]
    speeds += [Fraction(0)] * (n - len(speeds))
    if n < 1 or speeds[0] <= 0:
        raise InstanceError("need n >= 1 and a positive speed")
    mu = [Fraction(0)] * n
    for k in range(n - 1, -1, -1):
        # column k of the lower triangular matrix has entries s_{i-k+1} at rows i >= k
        acc = Fraction(n - k)
        for i in range(k + 1, n):
            acc -= speeds[i - k] * mu[i]
        mu[k] = acc / speeds[0]
    lam = [mu[k] - (mu[k + 1] if k + 1 < n else 0) for k in range(n)]
    return MuVector(mu, lam)


@dataclass
class SuperadditivityReport:
    optimum: Fraction
    part_sums: list[Fraction]
    margins: list[Fraction]

    @property
    def ok(self) -> bool:
        return all(m >= 0 for m in self.margins)


def check_superadditivity_related(s: Sequence, p: Sequence, partitions: Sequence[Sequence[Sequence]]
                                  ) -> SuperadditivityReport:
    """Compare OPT(p) with the sum of optima of the parts of each partition."""
    p = [Fraction(v) for v in p]
    n = len(p)
    mv = mu_vector(s, n)
    opt = mv.objective(p)
    sums, margins = [], []
    for parts in partitions:
        parts = [[Fraction(v) for v in part] for part in parts]
        if any(len(part) != n for part in parts) or any(v < 0 for part in parts for v in part):
            raise InstanceError("each part must be a non-negative vector of the same length as p")
        if [sum(col, Fraction(0)) for col in zip(*parts)] != p:
            raise InstanceError("parts do not sum to p")
        total = sum((mv.objective(part) for part in parts), Fraction(0))
        sums.append(total)
        margins.append(opt - total)
    return SuperadditivityReport(opt, sums, margins)


# ---------------------------------------------------------------------------
# non-preemptive schedules on unrelated machines


def _nonpreemptive_schedule(instance: Instance, placement: dict[int, tuple[int, Fraction, Fraction]],
                            algorithm: str) -> Schedule:
    """Build a Schedule from job -> (machine, start, end)."""
    S = speed_matrix(instance.model, instance.n)
    times = sorted({t for _, a, b in placement.values() for t in (a, b)})
    rates, xs = [], []
    for a, b in zip(times, times[1:]):
        step, x = {}, {}
        for j, (i, s0, s1) in placement.items():
            if s0 <= a and b <= s1:
                step[j] = S[i][j]
                x[(i, j)] = Fraction(1)
        rates.append(step)
        xs.append(x)
    comp = [placement[j][2] for j in range(instance.n)]
    single = isinstance(instance.model, Single)
    return Schedule(instance, times, rates, comp, assignments=None if single else xs, algorithm=algorithm)


def wspt_nonpreemptive_unrelated(instance: Instance) -> Schedule:
    """Greedy list schedule: jobs by best w s / p, each onto the machine finishing it earliest in weight terms."""
    if len(set(instance.r)) != 1:
        raise InstanceError("the greedy list schedule needs a common release date")
    S = speed_matrix(instance.model, instance.n)
    n, m = instance.n, len(S)
    jobs = instance.jobs
    order = sorted(range(n), key=lambda j: (-max(jobs[j].w * S[i][j] / jobs[j].p for i in range(m)), j))
    load = [instance.r[0]] * m
    placement = {}
    for j in order:
        best = None
        for i in range(m):
            if S[i][j] <= 0:
                continue
            end = load[i] + jobs[j].p / S[i][j]
            if best is None or jobs[j].w * end < best[0]:
                best = (jobs[j].w * end, i, end)
        _, i, end = best
        placement[j] = (i, load[i], end)
        load[i] = end
    return _nonpreemptive_schedule(instance, placement, "wspt-list")


def opt_nonpreemptive_value(S: Sequence[Sequence], p: Sequence, w: Sequence) -> Fraction:
    """Exact optimum of R||sum w_j C_j by enumerating machine assignments.

    Each machine then runs its jobs in Smith's ratio order, which is optimal
    for a fixed assignment.  Jobs with p_j = 0 finish at time 0 and cost
    nothing.  Exponential: meant for n <= 6 and m <= 3.
    """
    p = [Fraction(v) for v in p]
    w = [Fraction(v) for v in w]
    n, m = len(p), len(S)
    real = [j for j in range(n) if p[j] > 0]
    choices = [[i for i in range(m) if S[i][j] > 0] for j in real]
    if any(not c for c in choices):
        raise InstanceError("unschedulable job")
    best = None
    for assign in itertools.product(*choices):
        total = Fraction(0)
        for i in range(m):
            mine = [j for j, a in zip(real, assign) if a == i]
            mine.sort(key=lambda j: (p[j] / Fraction(S[i][j]) / w[j], j))
            t = Fraction(0)
            for j in mine:
                t += p[j] / Fraction(S[i][j])
                total += w[j] * t
        if best is None or total < best:
            best = total
    return best if best is not None else Fraction(0)


# ---------------------------------------------------------------------------
# optimum bracket for tiny instances


@dataclass
class OptBracket:
    lower: Fraction
    upper: Fraction
    lp_value: Fraction
    sources: dict[str, Fraction] = field(default_factory=dict)

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower


def _sequential_upper(instance: Instance, order: Sequence[int]) -> Fraction:
    """Run jobs one at a time in ``order``, each alone at its maximal rate."""
    t = Fraction(0)
    total = Fraction(0)
    for j in order:
        job = instance.jobs[j]
        t = max(t, job.r) + job.p / max_single_rate(instance.model, j)
        total += job.w * t
    return total


def _list_upper(instance: Instance, order: Sequence[int]) -> Fraction:
    """Non-preemptive list schedule on machines: each job where it finishes first."""
    S = speed_matrix(instance.model, instance.n)
    load = [Fraction(0)] * len(S)
    total = Fraction(0)
    for j in order:
        job = instance.jobs[j]
        best = None
        for i in range(len(S)):
            if S[i][j] > 0:
                end = max(load[i], job.r) + job.p / S[i][j]
                if best is None or end < best[0]:
                    best = (end, i)
        load[best[1]] = best[0]
        total += job.w * best[0]
    return total


def brute_force_opt_preemptive(instance: Instance, grid: Fraction | int = 1) -> OptBracket:
    """Bracket the preemptive optimum of a tiny instance.

    Lower side: the best of the time-indexed LP(1) value on the given grid,
    the trivial bound sum w_j (r_j + p_j / rho_j) and, for unit weights with
    a common release on related machines, the exact optimum.  Upper side:
    the best of PF, SRPT on one machine, and every permutation's list or
    sequential schedule.
    """
    from .lp import build_time_indexed, simplex_solve  # the lp module depends on this one
    from .pf import run_pf

    if instance.n > 6:
        raise InstanceError("brute force is limited to n <= 6")
    grid = Fraction(grid)
    # a cell may not be longer than any job's fastest possible run, otherwise
    # midpoint busy times can exceed true completion times
    for k, job in enumerate(instance.jobs):
        if grid > job.p / max_single_rate(instance.model, k):
            raise InstanceError(f"grid too coarse: job {k} can finish within one cell")
    sources: dict[str, Fraction] = {}
    prob = build_time_indexed(instance, 1, cell=grid)
    sol = simplex_solve(prob)
    if sol.status != "optimal":
        raise InstanceError(f"time-indexed LP is {sol.status}")
    sources["lp"] = sol.objective
    sources["trivial"] = sum((j.w * (j.r + j.p / max_single_rate(instance.model, k))
                              for k, j in enumerate(instance.jobs)), Fraction(0))
    uppers = {"pf": run_pf(instance).objective}
    if isinstance(instance.model, Single):
        uppers["srpt"] = srpt_single(instance).objective
    uppers["sequential"] = min(_sequential_upper(instance, order)
                               for order in itertools.permutations(range(instance.n)))
    if not isinstance(instance.model, Packing):
        uppers["list"] = min(_list_upper(instance, order) for order in itertools.permutations(range(instance.n)))
    exact = (isinstance(instance.model, (Single, Identical, Related)) and len(set(instance.r)) == 1
             and all(w == 1 for w in instance.w))
    if exact:
        value = preemptive_spt_related(instance).objective
        sources["spt"] = value
        uppers["spt"] = value
    lower = max(sources.values())
    upper = min(uppers.values())
    sources.update({f"upper:{k}": v for k, v in uppers.items()})
    return OptBracket(lower, upper, sol.objective, sources)
