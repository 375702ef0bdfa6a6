"""Proportional-fair online scheduling.

At every release and completion the engine recomputes the PF rates of the
available jobs and keeps them constant until the next event.  Event times
are exact rationals: approximate solvers produce float rates, which are
converted exactly, so all tolerance lives in the rates themselves.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .egsolve import RateSolution, SolverError, rates_for_jobs
from .model import Instance, InstanceError, Packing, Schedule, Single, speed_matrix


class EngineError(RuntimeError):
    """A rate solve failed inside the event loop; carries the event time."""

    def __init__(self, time: Fraction, cause: Exception):
        super().__init__(f"at t={time}: {cause}")
        self.time = time
        self.cause = cause


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(float(v))


def _interval_rates(instance: Instance, jobs: tuple[int, ...], sol: RateSolution):
    """Global rate map and assignment for one solve, as exact rationals."""
    if sol.x is None:
        return {j: _exact(v) for j, v in zip(jobs, sol.y)}, None
    S = speed_matrix(instance.model.restrict(jobs), len(jobs))
    x = {}
    rates = {}
    for i, row in enumerate(sol.x):
        for k, v in enumerate(row):
            v = _exact(v)
            if v > 0:
                x[(i, jobs[k])] = v
    for k, j in enumerate(jobs):
        if sol.exact:
            rates[j] = sol.y[k]
        else:
            # derive the rate from the stored assignment so the two agree exactly
            rates[j] = sum((S[i][k] * x.get((i, j), Fraction(0)) for i in range(len(S))), Fraction(0))
    return rates, x


def run_pf(instance: Instance, solver: str = "auto", tol: float = 1e-10) -> Schedule:
    """Simulate PF; completions are applied before releases at equal times."""
    n = instance.n
    remaining = list(instance.p)
    release = instance.r
    completions: list[Fraction | None] = [None] * n
    t = min(release)
    events = [t]
    rates_seq: list[dict[int, Fraction]] = []
    assignments: list = []
    solutions: list = []
    pending = sorted(range(n), key=lambda j: (release[j], j))
    nxt = 0
    alive: set[int] = set()
    while True:
        while nxt < n and release[pending[nxt]] <= t:
            alive.add(pending[nxt])
            nxt += 1
        if not alive and nxt == n:
            break
        next_release = release[pending[nxt]] if nxt < n else None
        if not alive:
            rates_seq.append({})
            assignments.append(None)
            solutions.append(None)
            t = next_release
            events.append(t)
            continue
        jobs = tuple(sorted(alive))
        try:
            sol = rates_for_jobs(instance, jobs, solver, tol)
        except (SolverError, InstanceError) as exc:
            raise EngineError(t, exc) from exc
        rates, x = _interval_rates(instance, jobs, sol)
        if any(rates[j] <= 0 for j in jobs):
            raise EngineError(t, SolverError("solver returned a non-positive rate"))
        dt = min(remaining[j] / rates[j] for j in jobs)
        if next_release is not None:
            dt = min(dt, next_release - t)
        t_next = t + dt
        for j in jobs:
            remaining[j] -= rates[j] * dt
            if remaining[j] <= 0:
                remaining[j] = Fraction(0)
                completions[j] = t_next
                alive.discard(j)
        rates_seq.append(rates)
        assignments.append(x)
        solutions.append((jobs, sol))
        t = t_next
        events.append(t)
    machine_model = not isinstance(instance.model, (Packing, Single))
    return Schedule(instance, events, rates_seq, completions,
                    assignments=assignments if machine_model else None,
                    solutions=solutions, algorithm="pf")


def pf_rates_hypothetical(instance: Instance, job_set: Sequence[int],
                          remaining: Mapping[int, Fraction] | None = None,
                          solver: str = "auto", tol: float = 1e-10) -> RateSolution:
    """Rates PF would pick if every job in ``job_set`` were available.

    ``remaining`` is accepted for symmetry with the engine state but never
    read: PF is non-clairvoyant.
    """
    jobs = tuple(sorted(set(job_set)))
    if not jobs or not all(0 <= j < instance.n for j in jobs):
        raise InstanceError("job set must be a non-empty subset of the instance's jobs")
    return rates_for_jobs(instance, jobs, solver, tol)


def wrr_completion_times(p: Sequence, w: Sequence) -> list[Fraction]:
    """Closed-form weighted round robin completions for WSPT-ordered jobs released at 0."""
    p = [Fraction(v) for v in p]
    w = [Fraction(v) for v in w]
    out = []
    done = Fraction(0)
    for j in range(len(p)):
        out.append(done + p[j] / w[j] * sum(w[j:], Fraction(0)))
        done += p[j]
    return out


def wspt_order(p: Sequence, w: Sequence) -> list[int]:
    return sorted(range(len(p)), key=lambda j: (Fraction(p[j]) / Fraction(w[j]), j))


def run_wrr_fast(p: Sequence[float], w: Sequence[float], r: Sequence[float]) -> list[float]:
    """Float weighted round robin with releases via virtual time.

    Virtual time advances at rate 1/W(t); job j finishes once virtual time
    reaches its start value plus p_j/w_j.  O(n log n); used for the large
    single-machine lower-bound families where rational event times blow up.
    """
    n = len(p)
    order = sorted(range(n), key=lambda j: (r[j], j))
    comp = [0.0] * n
    heap: list[tuple[float, int]] = []
    W = 0.0
    t = float(r[order[0]]) if n else 0.0
    v = 0.0
    k = 0
    while k < n or heap:
        if not heap:
            t = max(t, float(r[order[k]]))
        while k < n and r[order[k]] <= t:
            j = order[k]
            heapq.heappush(heap, (v + p[j] / w[j], j))
            W += w[j]
            k += 1
        fin_v, j = heap[0]
        t_fin = t + (fin_v - v) * W
        if k < n and r[order[k]] < t_fin:
            t_rel = float(r[order[k]])
            v += (t_rel - t) / W
            t = t_rel
            continue
        heapq.heappop(heap)
        v, t = fin_v, t_fin
        comp[j] = t
        W -= w[j]
        if not heap:
            W = 0.0
    return comp


# ---------------------------------------------------------------------------
# structured decomposition


@dataclass
class StructuredPiece:
    index: int
    start: Fraction
    duration: Fraction
    processed: list[Fraction]
    carried_weight: Fraction
    active_weight: Fraction

    @property
    def base_objective(self) -> Fraction:
        """Objective of the piece alone: every positive job finishes at ``duration``."""
        return self.duration * self.active_weight


def decompose_structured(schedule: Schedule, check: bool = True, solver: str = "auto",
                         tol: float = 0.0) -> list[StructuredPiece]:
    """Split a PF schedule into its per-interval processing vectors.

    With ``check`` each piece is re-run under PF as a fresh instance with
    uniform releases and all its positive jobs must finish together at the
    interval length.
    """
    inst = schedule.instance
    pieces = []
    for l, rates in enumerate(schedule.rates):
        a, b = schedule.events[l], schedule.events[l + 1]
        dt = b - a
        amounts = [Fraction(0)] * inst.n
        for j, y in rates.items():
            amounts[j] = y * dt
        carried = sum((inst.jobs[j].w for j in schedule.unfinished(a) if inst.jobs[j].r > a), Fraction(0))
        active = sum((inst.jobs[j].w for j in rates if rates[j] > 0), Fraction(0))
        pieces.append(StructuredPiece(l, a, dt, amounts, carried, active))
        if check and rates:
            jobs = sorted(j for j in rates if rates[j] > 0)
            sub = inst.subinstance(jobs, p=[amounts[j] for j in jobs], r=[Fraction(0)] * len(jobs))
            ran = run_pf(sub, solver)
            if any(abs(c - dt) > tol for c in ran.completions):
                raise InstanceError(f"piece {l}: jobs do not finish together; schedule is not a PF schedule")
    return pieces


def verify_splitting_identity(schedule: Schedule) -> tuple[bool, Fraction]:
    """Check ALG = sum over pieces of (piece objective + duration * carried weight).

    The objective is measured from the first release, matching the
    normalization used by the decomposition.
    """
    pieces = decompose_structured(schedule, check=False)
    inst = schedule.instance
    alg = sum((job.w * (c - schedule.origin) for job, c in zip(inst.jobs, schedule.completions)), Fraction(0))
    rhs = sum((pc.base_objective + pc.duration * pc.carried_weight for pc in pieces), Fraction(0))
    return alg == rhs, alg - rhs
