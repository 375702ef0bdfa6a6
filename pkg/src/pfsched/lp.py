"""Exact LP solving, time-indexed relaxations and alpha-point rounding.

``simplex_solve`` returns exact rational optima.  A floating-point tableau
simplex proposes a basis; the basis is then verified in rational arithmetic
(primal feasibility and non-negative reduced costs), and only if that fails
does an exact Bland-rule tableau simplex take over.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .model import (Instance, InstanceError, Job, Packing, Schedule, Single, max_single_rate,
                    speed_matrix, to_fraction)


@dataclass
class LpProblem:
    """min (or max) c x  s.t.  rows[k] . x  (sense)  rhs[k],  x >= 0."""

    c: list[Fraction] = field(default_factory=list)
    rows: list[dict[int, Fraction]] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[Fraction] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    maximize: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def add_var(self, name: str, cost: Fraction | int = 0) -> int:
        self.names.append(name)
        self.c.append(Fraction(cost))
        return len(self.c) - 1

    def add_row(self, coeffs: dict[int, Fraction], sense: str, rhs: Fraction | int) -> int:
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"unknown sense {sense!r}")
        self.rows.append({k: Fraction(v) for k, v in coeffs.items() if v != 0})
        self.senses.append(sense)
        self.rhs.append(Fraction(rhs))
        return len(self.rows) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.c)

    def objective_value(self, x: Sequence) -> Fraction:
        return sum((ci * Fraction(xi) for ci, xi in zip(self.c, x) if ci), Fraction(0))

    def violation(self, x: Sequence) -> Fraction:
        """Largest constraint or sign violation of x (0 when feasible)."""
        worst = max([Fraction(0)] + [-Fraction(v) for v in x])
        for row, sense, b in zip(self.rows, self.senses, self.rhs):
            lhs = sum((a * Fraction(x[k]) for k, a in row.items()), Fraction(0))
            if sense == "<=":
                worst = max(worst, lhs - b)
            elif sense == ">=":
                worst = max(worst, b - lhs)
            else:
                worst = max(worst, abs(lhs - b))
        return worst


@dataclass
class LpSolution:
    status: str
    x: list[Fraction] = field(default_factory=list)
    duals: list[Fraction] = field(default_factory=list)
    objective: Fraction | None = None
    method: str = ""

    def by_name(self, problem: LpProblem) -> dict[str, Fraction]:
        return {name: v for name, v in zip(problem.names, self.x) if v}


# ---------------------------------------------------------------------------
# standard form


@dataclass
class _Standard:
    cols: list[dict[int, Fraction]]   # sparse columns of the equality system
    b: list[Fraction]
    c: list[Fraction]
    n_orig: int
    artificial: set[int]
    flipped: list[bool]
    start_basis: list[int]


def _standard_form(p: LpProblem) -> _Standard:
    n = len(p.c)
    cols: list[dict[int, Fraction]] = [dict() for _ in range(n)]
    b, flipped = [], []
    for k, (row, sense, rhs) in enumerate(zip(p.rows, p.senses, p.rhs)):
        flip = rhs < 0
        for j, a in row.items():
            cols[j][k] = -a if flip else a
        if flip:
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        b.append(-rhs if flip else rhs)
        flipped.append(flip)
        p_sense = sense
        if p_sense == "<=":
            cols.append({k: Fraction(1)})
        elif p_sense == ">=":
            cols.append({k: Fraction(-1)})
    c = [-v for v in p.c] if p.maximize else list(p.c)
    c += [Fraction(0)] * (len(cols) - n)
    artificial: set[int] = set()
    start = []
    slack_of_row: dict[int, int] = {}
    for j in range(n, len(cols)):
        (k, v), = cols[j].items()
        if v > 0:
            slack_of_row[k] = j
    for k in range(len(b)):
        if k in slack_of_row:
            start.append(slack_of_row[k])
        else:
            cols.append({k: Fraction(1)})
            c.append(Fraction(0))
            artificial.add(len(cols) - 1)
            start.append(len(cols) - 1)
    return _Standard(cols, b, c, n, artificial, flipped, start)


# ---------------------------------------------------------------------------
# floating-point tableau simplex (basis proposal only)


def _float_simplex(std: _Standard, max_iter: int = 50_000, eps: float = 1e-9) -> tuple[str, list[int]]:
    m, N = len(std.b), len(std.cols)
    T = np.zeros((m, N + 1))
    for j, col in enumerate(std.cols):
        for k, v in col.items():
            T[k, j] = float(v)
    T[:, N] = [float(v) for v in std.b]
    basis = list(std.start_basis)
    art = np.zeros(N, dtype=bool)
    art[list(std.artificial)] = True

    def run(cost: np.ndarray, allowed: np.ndarray) -> str:
        stall = 0
        last = math.inf
        for it in range(max_iter):
            z = cost[:N] - cost[basis] @ T[:, :N]
            cand = np.where(allowed & (z < -eps))[0]
            if cand.size == 0:
                return "optimal"
            value = float(cost[basis] @ T[:, N])
            stall = stall + 1 if value >= last - 1e-12 else 0
            last = value
            e = int(cand[0]) if stall > 50 else int(cand[np.argmin(z[cand])])
            colv = T[:, e]
            pos = colv > eps
            if not np.any(pos):
                return "unbounded"
            ratios = np.full(m, math.inf)
            ratios[pos] = T[pos, N] / colv[pos]
            rmin = ratios.min()
            ties = np.where(ratios <= rmin + 1e-12)[0]
            r = int(min(ties, key=lambda k: basis[k]))
            T[r] /= T[r, e]
            others = np.arange(m) != r
            T[others] -= np.outer(T[others, e], T[r])
            basis[r] = e
        return "iteration-limit"

    if std.artificial:
        cost1 = np.zeros(N)
        cost1[art] = 1.0
        status = run(cost1, np.ones(N, dtype=bool))
        if status != "optimal":
            return status, basis
        if float(cost1[basis] @ T[:, N]) > 1e-7:
            return "infeasible", basis
        for r in range(m):
            if art[basis[r]]:
                row = np.abs(T[r, :N])
                row[art] = 0
                e = int(np.argmax(row))
                if row[e] > eps:
                    T[r] /= T[r, e]
                    others = np.arange(m) != r
                    T[others] -= np.outer(T[others, e], T[r])
                    basis[r] = e
    cost2 = np.array([float(v) for v in std.c])
    return run(cost2, ~art), basis


# ---------------------------------------------------------------------------
# exact sparse linear algebra


def _sparse_solve(rows: list[dict[int, Fraction]], rhs: list[Fraction]) -> dict[int, Fraction] | None:
    """Solve a square sparse system exactly; None when singular.

    Gaussian elimination that always pivots in the shortest remaining row,
    on the column occurring in the fewest rows.
    """
    rows = [dict(r) for r in rows]
    b = list(rhs)
    col_rows: dict[int, set[int]] = defaultdict(set)
    for i, r in enumerate(rows):
        for c in r:
            col_rows[c].add(i)
    active = set(range(len(rows)))
    pivots: list[tuple[int, int]] = []
    while active:
        i = min(active, key=lambda k: len(rows[k]))
        if not rows[i]:
            return None
        c = min(rows[i], key=lambda cc: len(col_rows[cc]))
        piv = rows[i][c]
        active.discard(i)
        for k in list(col_rows[c]):
            if k == i or k not in active:
                continue
            f = rows[k][c] / piv
            for cc, v in rows[i].items():
                nv = rows[k].get(cc, 0) - f * v
                if nv == 0:
                    if cc in rows[k]:
                        del rows[k][cc]
                        col_rows[cc].discard(k)
                else:
                    if cc not in rows[k]:
                        col_rows[cc].add(k)
                    rows[k][cc] = nv
            b[k] -= f * b[i]
        pivots.append((i, c))
    z: dict[int, Fraction] = {}
    for i, c in reversed(pivots):
        acc = b[i]
        for cc, v in rows[i].items():
            if cc != c:
                acc -= v * z[cc]
        z[c] = acc / rows[i][c]
    return z


def _verify_basis(std: _Standard, basis: list[int]) -> tuple[bool, list[Fraction], list[Fraction]]:
    """Exact primal values and duals of a basis, and whether it is optimal."""
    m = len(std.b)
    # B x_B = b, written row-wise over basis positions
    brows: list[dict[int, Fraction]] = [dict() for _ in range(m)]
    for pos, j in enumerate(basis):
        for k, v in std.cols[j].items():
            brows[k][pos] = v
    xb = _sparse_solve(brows, std.b)
    if xb is None:
        return False, [], []
    x = [Fraction(0)] * len(std.cols)
    for pos, j in enumerate(basis):
        x[j] = xb[pos]
    if any(v < 0 for v in xb.values()) or any(x[j] != 0 for j in std.artificial):
        return False, x, []
    # B^T y = c_B, one row per basic column
    trows = [dict(std.cols[j]) for j in basis]
    y = _sparse_solve(trows, [std.c[j] for j in basis])
    if y is None:
        return False, x, []
    yv = [y.get(k, Fraction(0)) for k in range(m)]
    inb = set(basis)
    for j, col in enumerate(std.cols):
        if j in inb or j in std.artificial:
            continue
        if std.c[j] - sum((v * yv[k] for k, v in col.items()), Fraction(0)) < 0:
            return False, x, yv
    return True, x, yv


# ---------------------------------------------------------------------------
# exact dense tableau simplex with Bland's rule


def _exact_simplex(std: _Standard, basis: list[int] | None = None, max_iter: int = 200_000
                   ) -> tuple[str, list[int]]:
    m, N = len(std.b), len(std.cols)
    T = [[Fraction(0)] * (N + 1) for _ in range(m)]
    for j, col in enumerate(std.cols):
        for k, v in col.items():
            T[k][j] = v
    for k in range(m):
        T[k][N] = std.b[k]

    def pivot(r: int, e: int) -> None:
        pr = T[r]
        inv = 1 / pr[e]
        T[r] = pr = [v * inv for v in pr]
        for k in range(m):
            if k != r and T[k][e] != 0:
                f = T[k][e]
                rk = T[k]
                T[k] = [a - f * b if b else a for a, b in zip(rk, pr)]

    if basis is None:
        basis = list(std.start_basis)
    else:
        basis = list(basis)
        for r, e in enumerate(basis):
            if T[r][e] == 0:
                swap = next((k for k in range(r + 1, m) if T[k][e] != 0), None)
                if swap is None:
                    return _exact_simplex(std, None, max_iter)
                T[r], T[swap] = T[swap], T[r]
            pivot(r, e)
        if any(T[r][N] < 0 for r in range(m)):
            return _exact_simplex(std, None, max_iter)

    def run(cost: list[Fraction], allowed: set[int]) -> str:
        for _ in range(max_iter):
            cb = [cost[j] for j in basis]
            enter = None
            for j in sorted(allowed):
                if j in basis:
                    continue
                z = cost[j] - sum((cb[k] * T[k][j] for k in range(m) if T[k][j]), Fraction(0))
                if z < 0:
                    enter = j
                    break
            if enter is None:
                return "optimal"
            best = None
            for k in range(m):
                a = T[k][enter]
                if a > 0:
                    ratio = T[k][N] / a
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[k] < basis[best[1]]):
                        best = (ratio, k)
            if best is None:
                return "unbounded"
            pivot(best[1], enter)
            basis[best[1]] = enter
        return "iteration-limit"

    legit = set(range(N)) - std.artificial
    if any(j in std.artificial for j in basis):
        cost1 = [Fraction(int(j in std.artificial)) for j in range(N)]
        status = run(cost1, set(range(N)))
        if status != "optimal":
            return status, basis
        if sum((T[r][N] for r in range(m) if basis[r] in std.artificial), Fraction(0)) > 0:
            return "infeasible", basis
        for r in range(m):
            if basis[r] in std.artificial:
                e = next((j for j in sorted(legit) if T[r][j] != 0), None)
                if e is not None:
                    pivot(r, e)
                    basis[r] = e
    return run(std.c, legit), basis


def simplex_solve(problem: LpProblem, method: str = "auto") -> LpSolution:
    """Exact optimum with duals.

    ``method="exact"`` skips the floating-point basis proposal and runs the
    rational Bland simplex from the slack basis.
    """
    std = _standard_form(problem)
    tried = None
    if method == "auto":
        status, basis = _float_simplex(std)
        if status == "optimal":
            ok, x, y = _verify_basis(std, basis)
            if ok:
                return _finish(problem, std, x, y, "float-guided")
            tried = basis
    elif method != "exact":
        raise ValueError(f"unknown method {method!r}")
    status, basis = _exact_simplex(std, tried)
    if status != "optimal":
        return LpSolution(status=status, method="exact")
    ok, x, y = _verify_basis(std, basis)
    if not ok:
        raise ArithmeticError("exact simplex ended on a basis that fails verification")
    return _finish(problem, std, x, y, "exact")


def _finish(problem: LpProblem, std: _Standard, x: list[Fraction], y: list[Fraction], how: str) -> LpSolution:
    xs = x[:std.n_orig]
    duals = [-v if f else v for v, f in zip(y, std.flipped)]
    if problem.maximize:
        duals = [-v for v in duals]
    return LpSolution("optimal", xs, duals, problem.objective_value(xs), how)


# ---------------------------------------------------------------------------
# time-indexed relaxation


def dual_rows(instance: Instance) -> tuple[str, int]:
    """Row family of the rate polytope: ("packing", D) or ("assignment", m + n)."""
    model = instance.model
    if isinstance(model, Packing):
        return "packing", model.rows
    if isinstance(model, Single):
        return "packing", 1
    return "assignment", len(speed_matrix(model, instance.n)) + instance.n


def _packing_matrix(instance: Instance) -> list[list[Fraction]]:
    if isinstance(instance.model, Single):
        return [[Fraction(1)] * instance.n]
    return [list(row) for row in instance.model.B]


def default_horizon(instance: Instance, kappa: Fraction | int = 1) -> Fraction:
    """Makespan of running the jobs one by one at 1/kappa of their top rate after the last release."""
    return max(instance.r) + Fraction(kappa) * sum(
        (job.p / max_single_rate(instance.model, j) for j, job in enumerate(instance.jobs)), Fraction(0))


def default_cell(instance: Instance) -> Fraction:
    """Largest 1/L grid holding every release, no wider than any job's fastest run."""
    L = 1
    for r in instance.r:
        L = math.lcm(L, r.denominator)
    cell = Fraction(1, L)
    shortest = min(job.p / max_single_rate(instance.model, j) for j, job in enumerate(instance.jobs))
    if cell > shortest:
        cell /= math.ceil(cell / shortest)
    return cell


def build_time_indexed(instance: Instance, kappa: Fraction | int = 1, horizon: int | None = None,
                       cell: Fraction | int = 1) -> LpProblem:
    """Time-indexed relaxation with cells [t*cell, (t+1)*cell), t < horizon.

    Variables hold the amount of processing in a cell; the objective charges
    each unit at the midpoint of its cell.  Machine models use one variable
    per machine, job and cell together with machine and job capacity rows.
    """
    kappa = Fraction(kappa)
    cell = Fraction(cell)
    if kappa < 1 or cell <= 0:
        raise InstanceError("need kappa >= 1 and a positive cell width")
    for k, job in enumerate(instance.jobs):
        if (job.r / cell).denominator != 1:
            raise InstanceError(f"release of job {k} is not on the cell grid")
    if horizon is None:
        horizon = math.ceil(default_horizon(instance, kappa) / cell)
    cap = cell / kappa
    prob = LpProblem(meta={"kind": "time-indexed", "kappa": kappa, "cell": cell, "horizon": horizon,
                           "var": []})
    n = instance.n
    jobs = instance.jobs
    first = [int(job.r / cell) for job in jobs]
    cover = {j: {} for j in range(n)}
    rows_kind, _ = dual_rows(instance)
    if rows_kind == "packing":
        B = _packing_matrix(instance)
        cells: dict[tuple[int, int], dict[int, Fraction]] = defaultdict(dict)
        for j in range(n):
            for t in range(first[j], horizon):
                mid = (t + Fraction(1, 2)) * cell
                v = prob.add_var(f"y[{j},{t}]", jobs[j].w / jobs[j].p * mid)
                prob.meta["var"].append((j, t))
                cover[j][v] = Fraction(1)
                for d, row in enumerate(B):
                    if row[j]:
                        cells[(d, t)][v] = row[j]
        for j in range(n):
            prob.add_row(cover[j], ">=", jobs[j].p)
        for t in range(horizon):
            for d in range(len(B)):
                if cells.get((d, t)):
                    prob.add_row(cells[(d, t)], "<=", cap)
    else:
        S = speed_matrix(instance.model, n)
        m = len(S)
        mrow: dict[tuple[int, int], dict[int, Fraction]] = defaultdict(dict)
        jrow: dict[tuple[int, int], dict[int, Fraction]] = defaultdict(dict)
        for j in range(n):
            for t in range(first[j], horizon):
                mid = (t + Fraction(1, 2)) * cell
                for i in range(m):
                    if S[i][j] <= 0:
                        continue
                    v = prob.add_var(f"x[{i},{j},{t}]", jobs[j].w / jobs[j].p * S[i][j] * mid)
                    prob.meta["var"].append((i, j, t))
                    cover[j][v] = S[i][j]
                    mrow[(i, t)][v] = Fraction(1)
                    jrow[(j, t)][v] = Fraction(1)
        for j in range(n):
            prob.add_row(cover[j], ">=", jobs[j].p)
        for t in range(horizon):
            for i in range(m):
                if mrow.get((i, t)):
                    prob.add_row(mrow[(i, t)], "<=", cap)
            for j in range(n):
                if jrow.get((j, t)):
                    prob.add_row(jrow[(j, t)], "<=", cap)
    return prob


def schedule_to_cells(schedule: Schedule, problem: LpProblem) -> list[Fraction]:
    """Express a schedule's processing as a variable vector of a time-indexed LP."""
    cell = problem.meta["cell"]
    index = {key: k for k, key in enumerate(problem.meta["var"])}
    x = [Fraction(0)] * len(problem.c)
    machine = problem.meta["var"] and len(problem.meta["var"][0]) == 3
    for l, rates in enumerate(schedule.rates):
        a, b = schedule.events[l], schedule.events[l + 1]
        t = int(a // cell)
        while t * cell < b:
            lo, hi = max(a, t * cell), min(b, (t + 1) * cell)
            if hi > lo:
                if machine:
                    for (i, j), v in (schedule.assignments[l] or {}).items():
                        x[index[(i, j, t)]] += v * (hi - lo)
                else:
                    for j, y in rates.items():
                        x[index[(j, t)]] += y * (hi - lo)
            t += 1
    return x


# ---------------------------------------------------------------------------
# interval-indexed relaxation and alpha-point rounding


def build_interval_indexed(instance: Instance, eps: Fraction | float, delta: Fraction | float,
                           horizon: Fraction | None = None) -> LpProblem:
    """Geometric-interval relaxation of the instance with releases shifted by delta.

    Interval l is (b_{l-1}, b_l] with b_l = delta (1+eps)^l; variables are
    rates held constant over an interval, allowed only when the interval
    starts at or after the shifted release.  The horizon is found by
    doubling from the largest single-job lower bound until the LP is
    feasible.
    """
    eps, delta = to_fraction(eps), to_fraction(delta)
    if eps <= 0 or delta <= 0:
        raise InstanceError("eps and delta must be positive")
    shifted = [job.r + delta for job in instance.jobs]
    rho = [max_single_rate(instance.model, j) for j in range(instance.n)]
    if horizon is not None:
        return _interval_lp(instance, eps, delta, shifted, Fraction(horizon))
    horizon = max(r + job.p / q for r, job, q in zip(shifted, instance.jobs, rho))
    while True:
        prob = _interval_lp(instance, eps, delta, shifted, horizon)
        if simplex_solve(prob).status == "optimal":
            return prob
        horizon *= 2


def _interval_lp(instance: Instance, eps: Fraction, delta: Fraction, shifted: list[Fraction],
                 horizon: Fraction) -> LpProblem:
    bounds = [delta]
    while bounds[-1] < horizon:
        bounds.append(bounds[-1] * (1 + eps))
    L = len(bounds) - 1
    n = instance.n
    jobs = instance.jobs
    prob = LpProblem(meta={"kind": "interval-indexed", "eps": eps, "delta": delta, "bounds": bounds,
                           "releases": shifted, "var": []})
    cover = {j: {} for j in range(n)}
    rows_kind, _ = dual_rows(instance)
    caps: dict[tuple, dict[int, Fraction]] = defaultdict(dict)
    S = None if rows_kind == "packing" else speed_matrix(instance.model, n)
    B = _packing_matrix(instance) if rows_kind == "packing" else None
    for j in range(n):
        for l in range(1, L + 1):
            if bounds[l - 1] < shifted[j]:
                continue
            width = bounds[l] - bounds[l - 1]
            if B is not None:
                v = prob.add_var(f"y[{j},{l}]", jobs[j].w * width / jobs[j].p * bounds[l - 1])
                prob.meta["var"].append((j, l))
                cover[j][v] = width
                for d, row in enumerate(B):
                    if row[j]:
                        caps[("d", d, l)][v] = row[j]
            else:
                for i in range(len(S)):
                    if S[i][j] <= 0:
                        continue
                    v = prob.add_var(f"x[{i},{j},{l}]", jobs[j].w * S[i][j] * width / jobs[j].p * bounds[l - 1])
                    prob.meta["var"].append((i, j, l))
                    cover[j][v] = S[i][j] * width
                    caps[("m", i, l)][v] = Fraction(1)
                    caps[("j", j, l)][v] = Fraction(1)
    for j in range(n):
        prob.add_row(cover[j], ">=", jobs[j].p)
    for key in sorted(caps):
        prob.add_row(caps[key], "<=", 1)
    return prob


def interval_rates(instance: Instance, problem: LpProblem, solution: LpSolution) -> list[list[Fraction]]:
    """rates[j][l] for l = 1..L (index 0 unused) from an interval-indexed LP solution."""
    L = len(problem.meta["bounds"]) - 1
    rates = [[Fraction(0)] * (L + 1) for _ in range(instance.n)]
    S = None
    for key, v in zip(problem.meta["var"], solution.x):
        if not v:
            continue
        if len(key) == 2:
            j, l = key
            rates[j][l] += v
        else:
            if S is None:
                S = speed_matrix(instance.model, instance.n)
            i, j, l = key
            rates[j][l] += S[i][j] * v
    return rates


def sample_alpha(seed: int) -> float:
    """Draw alpha with density 2x on (0, 1) by inverse transform: alpha = sqrt(u)."""
    rng = random.Random(seed)
    u = 0.0
    while u == 0.0:
        u = rng.random()
    return math.sqrt(u)


def alpha_points(instance: Instance, problem: LpProblem, solution: LpSolution, alpha: Fraction | float
                 ) -> list[Fraction]:
    """C_j(alpha): left end of the first interval by whose end j's LP fraction reaches alpha."""
    alpha = to_fraction(alpha)
    bounds = problem.meta["bounds"]
    rates = interval_rates(instance, problem, solution)
    out = []
    for j, job in enumerate(instance.jobs):
        done = Fraction(0)
        for l in range(1, len(bounds)):
            done += rates[j][l] * (bounds[l] - bounds[l - 1]) / job.p
            if done >= alpha:
                out.append(bounds[l - 1])
                break
    return out


def alpha_point_round(instance: Instance, problem: LpProblem, solution: LpSolution,
                      seed: int | None = None, alpha: Fraction | float | None = None) -> Schedule:
    """Stretch the LP schedule by 1/alpha; each job keeps its LP rate and stops at completion.

    ``alpha`` overrides the random draw (test hook).  The chosen value is
    stored in ``schedule.solutions``.
    """
    if alpha is None:
        alpha = sample_alpha(0 if seed is None else seed)
    alpha = to_fraction(alpha)
    if not 0 < alpha <= 1:
        raise InstanceError("alpha must lie in (0, 1]")
    bounds = problem.meta["bounds"]
    rates = interval_rates(instance, problem, solution)
    n = instance.n
    remaining = list(instance.p)
    comp: list[Fraction | None] = [None] * n
    events = [bounds[0] / alpha]
    pieces: list[dict[int, Fraction]] = []
    for l in range(1, len(bounds)):
        t, end = bounds[l - 1] / alpha, bounds[l] / alpha
        while t < end:
            live = {j: rates[j][l] for j in range(n) if comp[j] is None and rates[j][l] > 0}
            if not live:
                break
            stop = min([end] + [t + remaining[j] / y for j, y in live.items()])
            for j, y in live.items():
                remaining[j] -= y * (stop - t)
                if remaining[j] <= 0:
                    remaining[j] = Fraction(0)
                    comp[j] = stop
            if events[-1] != t:
                pieces.append({})
                events.append(t)
            pieces.append(live)
            events.append(stop)
            t = stop
    if any(c is None for c in comp):
        raise InstanceError("LP solution does not cover every job")
    sched = Schedule(instance, events, pieces, comp, algorithm="alpha-point")
    sched.solutions = [{"alpha": alpha}]
    return sched


def rounded_objectives(instance: Instance, problem: LpProblem, solution: LpSolution,
                       alphas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized float evaluation of the rounded schedule for many alphas.

    Returns (objectives, worst ratio C_j / ((1+eps) C_j(alpha) / alpha) per sample).
    """
    bounds = np.array([float(b) for b in problem.meta["bounds"]])
    eps = float(problem.meta["eps"])
    rates = interval_rates(instance, problem, solution)
    alphas = np.asarray(alphas, dtype=float)
    total = np.zeros_like(alphas)
    worst = np.zeros_like(alphas)
    widths = np.diff(bounds)
    for j, job in enumerate(instance.jobs):
        p = float(job.p)
        y = np.array([float(v) for v in rates[j][1:]])
        frac = np.cumsum(y * widths) / p
        frac[-1] = max(frac[-1], 1.0)
        l = np.searchsorted(frac, alphas - 1e-15, side="left")  # first interval with frac >= alpha
        before = np.where(l > 0, frac[np.maximum(l - 1, 0)], 0.0)
        start = bounds[l] / alphas
        C = start + (p - before * p / alphas) / y[l]
        total += float(job.w) * C
        worst = np.maximum(worst, C / ((1 + eps) * bounds[l] / alphas))
    return total, worst


# ---------------------------------------------------------------------------
# dual feasibility of density-form certificates


@dataclass
class DualCheckReport:
    feasible: bool
    max_violation: Fraction
    dual_objective: Fraction
    witness: dict[str, Any] | None = None
    checked_points: int = 0
    max_slack: Fraction = Fraction(0)


def _beta_at(seg: Any, d: int, t: Fraction) -> Fraction:
    return seg.const[d] + seg.slope[d] * t


def dual_constraint_check(instance: Instance, kappa: Fraction | int, certificate: Any,
                          tol: Fraction | float = 0) -> DualCheckReport:
    """Check every dual constraint of the time-indexed relaxation for a certificate.

    The certificate gives alpha per job and row densities beta_d(t) that are
    affine on each segment (time measured from ``certificate.origin``).  The
    constraint for job j and the cell with midpoint t >= r_j reads

        alpha_j / p_j - (w_j / p_j) t  <=  kappa * (row combination of beta at t),

    where the combination is sum_d b_dj beta_d for packing rows and
    min_i (beta_i + beta_{m+j}) / s_ij for machine/job rows.  The difference of
    the two sides is convex in t on a segment, so the first and last cell
    midpoints of each segment cover all of its cells.
    """
    kappa = Fraction(kappa)
    tol = to_fraction(tol)
    cell = certificate.cell
    origin = certificate.origin
    kind, D = dual_rows(instance)
    segs = certificate.segments
    witness = None
    worst = Fraction(0)
    points = 0
    slack = Fraction(0)

    def note(v: Fraction, info: dict) -> None:
        nonlocal worst, witness
        if v > worst:
            worst = v
            witness = info

    for j, a in enumerate(certificate.alpha):
        note(-a, {"type": "alpha<0", "job": j})
    prev = Fraction(0)
    for k, seg in enumerate(segs):
        if seg.start != prev or seg.end <= seg.start:
            raise InstanceError(f"segment {k} does not continue the previous one")
        if ((seg.end - seg.start) / cell).denominator != 1:
            raise InstanceError(f"segment {k} is not aligned with the cell grid")
        prev = seg.end
        if len(seg.const) != D or len(seg.slope) != D:
            raise InstanceError(f"segment {k} has {len(seg.const)} rows, model needs {D}")
        for t in {seg.start + cell / 2, seg.end - cell / 2}:
            for d in range(D):
                note(-_beta_at(seg, d, t), {"type": "beta<0", "row": d, "time": t + origin, "segment": k})
    horizon = prev

    if kind == "packing":
        B = _packing_matrix(instance)

        def rhs(seg, j, t):
            return kappa * sum((B[d][j] * _beta_at(seg, d, t) for d in range(D) if B[d][j]), Fraction(0))
    else:
        S = speed_matrix(instance.model, instance.n)
        m = len(S)

        def rhs(seg, j, t):
            return kappa * min((_beta_at(seg, i, t) + _beta_at(seg, m + j, t)) / S[i][j]
                               for i in range(m) if S[i][j] > 0)

    for j, job in enumerate(instance.jobs):
        rel = job.r - origin
        if (rel / cell).denominator != 1:
            raise InstanceError(f"release of job {j} is not on the cell grid")
        a_over_p = certificate.alpha[j] / job.p
        slope = job.w / job.p
        for k, seg in enumerate(segs):
            lo = max(seg.start, rel)
            if lo >= seg.end:
                continue
            for t in {lo + cell / 2, seg.end - cell / 2}:
                points += 1
                lhs = a_over_p - slope * t
                r = rhs(seg, j, t)
                slack = max(slack, r - lhs)
                note(lhs - r, {"type": "constraint", "job": j, "time": t + origin, "segment": k,
                               "lhs": lhs, "rhs": r})
        t = max(horizon, rel) + cell / 2
        points += 1
        note(a_over_p - slope * t, {"type": "constraint", "job": j, "time": t + origin,
                                    "segment": None, "lhs": a_over_p - slope * t, "rhs": Fraction(0)})
    objective = sum(certificate.alpha, Fraction(0)) - sum(
        ((seg.end - seg.start) * sum((_beta_at(seg, d, (seg.start + seg.end) / 2) for d in range(D)), Fraction(0))
         for seg in segs), Fraction(0))
    if witness is not None:
        witness["violation"] = worst
    return DualCheckReport(worst <= tol, worst, objective, witness if worst > tol else None, points, slack)
