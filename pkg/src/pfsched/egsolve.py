"""Eisenberg-Gale rate computation: maximize sum_j w_j log y_j over a rate polytope.

Three solvers are provided:

* ``solve_eg_related``: the exact combinatorial level algorithm for uniformly
  related machines, in rational arithmetic, with closed-form multipliers.
* ``solve_eg_packing``: a projected Newton method on the dual of the program
  for an explicit packing matrix.
* ``solve_eg_unrelated``: pairwise conditional gradient over the assignment
  polytope with a bipartite matching oracle, followed by a Newton polish on
  the face it identifies.

All of them return a :class:`RateSolution`; ``kkt_residual`` checks any of
them against the optimality conditions of the program.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linear_sum_assignment, linprog

from .model import (Identical, Instance, InstanceError, Model, Packing, Related, Single,
                    Unrelated, speed_matrix)


class SolverError(RuntimeError):
    """A rate solver failed to reach its tolerance."""


@dataclass
class KKTReport:
    stationarity: float = 0.0
    complementarity: float = 0.0
    feasibility: float = 0.0
    nonnegativity: float = 0.0
    multiplier_sum: float = 0.0

    @property
    def max(self):
        return max(self.stationarity, self.complementarity, self.feasibility,
                   self.nonnegativity, self.multiplier_sum)

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass
class RateSolution:
    """Optimal rates for one job set, in the local order of the solved subproblem.

    ``eta`` holds one multiplier per packing row, or per machine for
    assignment models, in which case ``delta`` holds one per job and ``x`` is
    the machine x job assignment.
    """

    y: tuple
    eta: tuple
    delta: tuple | None = None
    x: tuple | None = None
    kkt: KKTReport = field(default_factory=KKTReport)
    solver_tol: float = 0.0
    exact: bool = False
    method: str = ""
    gap: float = 0.0

    @property
    def kkt_residual(self):
        return self.kkt.max

    @property
    def multiplier_total(self):
        total = sum(self.eta)
        if self.delta is not None:
            total += sum(self.delta)
        return total


@dataclass
class LevelDecomposition:
    levels: list[tuple[int, ...]]
    prices: list[Fraction]


# ---------------------------------------------------------------------------
# related machines: level algorithm


def solve_eg_related(speeds: Sequence, w: Sequence) -> tuple[RateSolution, LevelDecomposition]:
    """Exact PF rates on related machines.

    Jobs must be sorted by non-increasing weight and speeds non-increasing.
    The machine list is padded with zero speeds (or the job list with
    zero-weight dummies) so that both have the same length; dummies are
    dropped from the output.
    """
    s = [Fraction(v) for v in speeds]
    ws = [Fraction(v) for v in w]
    if any(a < b for a, b in zip(ws, ws[1:])):
        raise InstanceError("weights must be sorted non-increasing")
    if any(a < b for a, b in zip(s, s[1:])):
        raise InstanceError("speeds must be sorted non-increasing")
    if not s or s[0] <= 0 or any(v <= 0 for v in ws):
        raise InstanceError("need a positive speed and positive weights")
    n = len(ws)
    N = max(n, len(s))
    s = s + [Fraction(0)] * (N - len(s))
    wp = ws + [Fraction(0)] * (N - n)

    levels: list[tuple[int, ...]] = []
    prices: list[Fraction] = []
    i = 0
    while i < N:
        if all(v == 0 for v in s[i:]):
            # only zero-speed machines left: they belong to the previous level
            last = levels.pop()
            levels.append(last + tuple(range(i, N)))
            break
        best, h = None, i
        sw = ss = Fraction(0)
        for k in range(i, N):
            sw += wp[k]
            ss += s[k]
            if ss == 0:
                continue
            ratio = sw / ss
            if best is None or ratio >= best:
                best, h = ratio, k
        levels.append(tuple(range(i, h + 1)))
        prices.append(best)
        i = h + 1
    # a level may have absorbed zero-speed machines; recompute its price
    prices = [sum(wp[k] for k in L) / sum(s[k] for k in L) for L in levels]

    pi = [Fraction(0)] * N
    y = [Fraction(0)] * N
    for L, price in zip(levels, prices):
        for k in L:
            pi[k] = price
            y[k] = wp[k] / price if price > 0 else Fraction(0)

    eta = [Fraction(0)] * N
    acc = pi[N - 1] * s[N - 1]
    eta[N - 1] = acc
    for k in range(N - 2, -1, -1):
        acc += pi[k] * (s[k] - s[k + 1])
        eta[k] = acc
    delta = [pi[k] * s[k] - eta[k] for k in range(N)]

    x_full = [[Fraction(0)] * N for _ in range(N)]
    for L, price in zip(levels, prices):
        if price == 0:
            continue  # only dummy jobs: nothing to allocate
        block = level_allocation([s[k] for k in L], [y[k] for k in L])
        for a, i_m in enumerate(L):
            for b, j in enumerate(L):
                x_full[i_m][j] = block[a][b]

    m = len([v for v in speeds])
    x = tuple(tuple(x_full[i_m][j] for j in range(n)) for i_m in range(m))
    sol = RateSolution(y=tuple(y[:n]), eta=tuple(eta[:m]), delta=tuple(delta[:n]), x=x,
                       exact=True, method="levels")
    sol.kkt = kkt_residual(Related(tuple(Fraction(v) for v in speeds)), ws, sol)
    kept = [tuple(k for k in L if k < n) for L in levels]
    keep = [k for k, L in enumerate(kept) if L]
    return sol, LevelDecomposition([kept[k] for k in keep], [prices[k] for k in keep])


def level_allocation(level_speeds: Sequence, level_rates: Sequence) -> list[list[Fraction]]:
    """Fractional assignment realizing ``level_rates`` on machines ``level_speeds``.

    Both lists are in non-increasing order.  The rates must be majorized by
    the speeds (prefix sums of rates at most those of speeds, equal totals).
    A product of at most k-1 two-coordinate averaging steps turns the speed
    vector into the rate vector; that product is doubly stochastic and is
    returned as ``x[machine][job]``.
    """
    s = [Fraction(v) for v in level_speeds]
    y = [Fraction(v) for v in level_rates]
    if len(s) != len(y):
        raise InstanceError("need one speed per rate")
    k = len(s)
    if any(a < b for a, b in zip(s, s[1:])) or any(a < b for a, b in zip(y, y[1:])):
        raise InstanceError("speeds and rates must be sorted non-increasing")
    ps = py = Fraction(0)
    for a, b in zip(s, y):
        ps += a
        py += b
        if py > ps:
            raise InstanceError("prefix condition violated: rates not realizable")
    if ps != py:
        raise InstanceError("prefix condition violated: totals differ")

    P = [[Fraction(int(a == b)) for b in range(k)] for a in range(k)]
    cur = list(s)
    while True:
        above = [j for j in range(k) if cur[j] > y[j]]
        if not above:
            break
        j = max(above)
        lo = min(q for q in range(j + 1, k) if cur[q] < y[q])
        d = min(cur[j] - y[j], y[lo] - cur[lo])
        lam = 1 - d / (cur[j] - cur[lo])
        for row in P:
            a, b = row[j], row[lo]
            row[j] = lam * a + (1 - lam) * b
            row[lo] = (1 - lam) * a + lam * b
        cur[j] -= d
        cur[lo] += d
    return P


def related_order(w: Sequence) -> list[int]:
    """Job order used by the level algorithm: weight descending, index ascending."""
    return sorted(range(len(w)), key=lambda j: (-Fraction(w[j]), j))


def solve_related_any_order(speeds: Sequence, w: Sequence) -> RateSolution:
    """Level algorithm for jobs in arbitrary order; output in input order."""
    order = related_order(w)
    sol, _ = solve_eg_related(sorted((Fraction(v) for v in speeds), reverse=True), [w[j] for j in order])
    n = len(w)
    inv = [0] * n
    for pos, j in enumerate(order):
        inv[j] = pos
    y = tuple(sol.y[inv[j]] for j in range(n))
    delta = tuple(sol.delta[inv[j]] for j in range(n))
    x = tuple(tuple(row[inv[j]] for j in range(n)) for row in sol.x)
    out = RateSolution(y=y, eta=sol.eta, delta=delta, x=x, kkt=sol.kkt, exact=True, method="levels")
    return out


def related_packing_matrix(speeds: Sequence, n: int) -> list[list[Fraction]]:
    """Explicit packing description of the related-machines rate polytope.

    One row per non-empty job subset S: sum_{j in S} y_j <= sum of the |S|
    largest speeds.  Exponential in n; meant for small cross-checks.
    """
    s = sorted((Fraction(v) for v in speeds), reverse=True)
    cap = [sum(s[:k], Fraction(0)) for k in range(n + 1)]
    rows = []
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            rows.append([Fraction(1) / cap[size] if j in S else Fraction(0) for j in range(n)])
    return rows


# ---------------------------------------------------------------------------
# explicit packing polytope: dual projected Newton


def solve_eg_packing(B: Sequence[Sequence], w: Sequence, tol: float = 1e-10,
                     max_iter: int = 10_000) -> RateSolution:
    """Minimize g(eta) = sum(eta) - sum_j w_j log((B^T eta)_j) over eta >= 0.

    The primal rates are y_j = w_j / (B^T eta)_j.  Each iteration takes a
    Newton step on the coordinates that are not pinned at zero and a scaled
    gradient step on the pinned ones, followed by an Armijo search along the
    projection arc.
    """
    Bm = np.array([[float(b) for b in row] for row in B], dtype=float)
    wv = np.array([float(v) for v in w], dtype=float)
    if Bm.ndim != 2 or Bm.shape[1] != wv.size:
        raise InstanceError("dimension mismatch between B and w")
    if np.any(Bm < 0) or np.any(wv <= 0):
        raise InstanceError("B must be non-negative and w positive")
    if np.any(Bm.sum(axis=0) <= 0):
        raise InstanceError("unschedulable job: all-zero packing column")
    D = Bm.shape[0]
    W = wv.sum()
    live = Bm.sum(axis=1) > 0  # all-zero rows never bind; their multiplier stays 0
    eta = np.where(live, W / max(int(live.sum()), 1), 0.0)

    def g(e):
        c = Bm.T @ e
        if np.any(c <= 0):
            return math.inf
        return e.sum() - float(wv @ np.log(c))

    best = None
    for it in range(max_iter):
        c = Bm.T @ eta
        y = wv / c
        grad = 1.0 - Bm @ y
        rep = _packing_report(Bm, wv, y, eta)
        if best is None or rep.max < best[0].max:
            best = (rep, eta.copy())
        if rep.max <= tol * 1e-2:
            break
        eps = min(1e-8, float(np.linalg.norm(eta - np.maximum(eta - grad, 0.0))))
        pinned = (eta <= eps) & (grad > 0) & live
        free = ~pinned & live
        d = np.zeros(D)
        if np.any(pinned):
            d[pinned] = -grad[pinned]
        if np.any(free):
            Bf = Bm[free]
            H = (Bf * (wv / c**2)) @ Bf.T
            # damping keeps the step bounded along directions the log term ignores
            pg = float(np.max(np.abs(eta - np.maximum(eta - grad, 0.0))))
            H[np.diag_indices_from(H)] += min(pg, 1.0) * float(np.max(np.diag(H)))
            try:
                d[free] = -np.linalg.solve(H, grad[free])
            except np.linalg.LinAlgError:
                d[free] = -np.linalg.lstsq(H, grad[free], rcond=None)[0]
            if float(grad[free] @ d[free]) >= 0:
                d[free] = -grad[free]
        g0 = g(eta)
        step = 1.0
        while True:
            cand = np.maximum(eta + step * d, 0.0)
            gc = g(cand)
            if gc <= g0 + 1e-4 * float(grad @ (cand - eta)):
                break
            # near the optimum g is flat to rounding; fall back to the residual
            cc = Bm.T @ cand
            if np.all(cc > 0) and _packing_report(Bm, wv, wv / cc, cand).max < 0.5 * rep.max:
                break
            if step < 1e-14:
                break
            step *= 0.5
        if np.array_equal(cand, eta):
            break
        eta = cand
    rep, eta = best
    if rep.max > tol:
        raise SolverError(f"packing solver stopped with KKT residual {rep.max:.3e} > {tol:.1e}")
    y = wv / (Bm.T @ eta)
    load = float(np.max(Bm @ y))
    if load > 1.0:
        # pull the rates back inside the polytope; stationarity moves by the same ratio
        y = y / load
    sol = RateSolution(y=tuple(float(v) for v in y), eta=tuple(float(v) for v in eta),
                       solver_tol=tol, method="dual-newton")
    sol.kkt = kkt_residual(Packing(tuple(tuple(Fraction(b) for b in row) for row in B)), w, sol)
    return sol


def _packing_report(Bm: np.ndarray, wv: np.ndarray, y: np.ndarray, eta: np.ndarray) -> KKTReport:
    load = Bm @ y
    return KKTReport(
        stationarity=float(np.max(np.abs(wv / y - Bm.T @ eta) / wv)),
        complementarity=float(np.max(np.abs(eta * (1.0 - load)))),
        feasibility=float(max(0.0, np.max(load - 1.0))),
        nonnegativity=float(max(0.0, -np.min(eta))),
        multiplier_sum=float(abs(eta.sum() - wv.sum()) / wv.sum()),
    )


# ---------------------------------------------------------------------------
# unrelated machines: conditional gradient + face polish


def solve_eg_unrelated(s: Sequence[Sequence], w: Sequence, tol: float = 1e-10,
                       max_iter: int = 20_000) -> RateSolution:
    """PF rates on unrelated machines (speed matrix ``s[i][j]``).

    Pairwise conditional gradient over doubly substochastic assignments,
    where the linear oracle is a maximum-weight matching on the gradient
    weights w_j s_ij / y_j.  Whenever the relative duality gap drops by a
    factor of 100 the current support is handed to a Newton polish; the
    polished point is kept once its certified gap is below ``tol``.
    """
    S = np.array([[float(v) for v in row] for row in s], dtype=float)
    wv = np.array([float(v) for v in w], dtype=float)
    m, n = S.shape
    if wv.size != n:
        raise InstanceError("dimension mismatch between speed matrix and weights")
    if np.any(S < 0) or np.any(wv <= 0):
        raise InstanceError("speeds must be non-negative and weights positive")
    if np.any(S.max(axis=0) <= 0):
        raise InstanceError("unschedulable job: no machine can process it")
    W = wv.sum()
    target = min(tol, 1e-12) * W

    # start from the average of single-edge assignments, one per job, so y > 0
    active: dict[tuple, float] = {}
    vy: dict[tuple, np.ndarray] = {}

    def vertex_y(v: tuple) -> np.ndarray:
        out = np.zeros(n)
        for i, j in v:
            out[j] += S[i, j]
        return out

    for j in range(n):
        v = ((int(np.argmax(S[:, j])), j),)
        active[v] = active.get(v, 0.0) + 1.0 / n
        vy[v] = vertex_y(v)
    y = sum(lam * vy[v] for v, lam in active.items())

    def assignment() -> np.ndarray:
        X = np.zeros((m, n))
        for v, lam in active.items():
            for e in v:
                X[e] += lam
        return X

    best: tuple[float, np.ndarray] | None = None
    level = 1e-2
    gap = math.inf
    for it in range(max_iter):
        gw = S * (wv / y)[None, :]
        rows, cols = linear_sum_assignment(gw, maximize=True)
        fw = tuple((int(i), int(j)) for i, j in zip(rows, cols) if S[i, j] > 0)
        if fw not in vy:
            vy[fw] = vertex_y(fw)
        price = wv / y
        gap = float(vy[fw] @ price) - W
        if gap <= level * W or gap <= target:
            X = _polish(S, wv, assignment())
            if X is not None:
                yp = (S * X).sum(axis=0)
                pgap = _matching_gap(S, wv, yp)
                if best is None or pgap < best[0]:
                    best = (pgap, X)
                if pgap <= target:
                    break
            if gap <= target:
                break
            level = max(level * 1e-2, 1e-15)
        away = min(active, key=lambda v: float(vy[v] @ price))
        d = vy[fw] - vy[away]
        gmax = active[away]
        step = _line_search(wv, y, d, gmax)
        active[away] -= step
        if active[away] <= 1e-15:
            del active[away]
        active[fw] = active.get(fw, 0.0) + step
        y = y + step * d
        y = np.maximum(y, 1e-300)

    X = assignment()
    fw_gap = _matching_gap(S, wv, (S * X).sum(axis=0))
    if best is not None and best[0] <= fw_gap:
        X, gap = best[1], best[0]
    else:
        gap = fw_gap
    if gap > tol * W:
        raise SolverError(f"unrelated solver: duality gap {gap:.3e} above {tol * W:.1e}")
    yv = (S * X).sum(axis=0)
    eta, delta = recover_multipliers_assignment(S, wv, yv, X, tol=max(tol, 1e-9))
    sol = RateSolution(y=tuple(float(v) for v in yv), eta=tuple(eta), delta=tuple(delta),
                       x=tuple(tuple(float(v) for v in row) for row in X),
                       solver_tol=tol, method="conditional-gradient", gap=gap)
    sol.kkt = kkt_residual(Unrelated(tuple(tuple(Fraction(v) for v in row) for row in s)), w, sol)
    return sol


def _line_search(wv: np.ndarray, y: np.ndarray, d: np.ndarray, gmax: float) -> float:
    """Maximize sum w log(y + a d) over a in [0, gmax] by bisection on the derivative."""
    def slope(a: float) -> float:
        z = y + a * d
        if np.any(z <= 0):
            return -math.inf
        return float(np.sum(wv * d / z))

    if slope(gmax) >= 0:
        return gmax
    lo, hi = 0.0, gmax
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def _matching_gap(S: np.ndarray, wv: np.ndarray, y: np.ndarray) -> float:
    if np.any(y <= 0):
        return math.inf
    gw = S * (wv / y)[None, :]
    rows, cols = linear_sum_assignment(gw, maximize=True)
    return float(gw[rows, cols].sum() - wv.sum())


def _polish(S: np.ndarray, wv: np.ndarray, X: np.ndarray, steps: int = 40,
            support_tol: float = 1e-9, tight_tol: float = 1e-7) -> np.ndarray | None:
    """Newton's method on the face spanned by the current support.

    Machines and jobs whose assignment is (nearly) full become equality
    constraints; the step is taken in the null space of those constraints and
    cut short where an edge would turn negative or a slack row overflow.
    """
    m, n = S.shape
    X = X.copy()
    for _ in range(steps):
        E = [(i, j) for i in range(m) for j in range(n) if X[i, j] > support_tol and S[i, j] > 0]
        if not E:
            return None
        k = len(E)
        xe = np.array([X[e] for e in E])
        Rm = np.zeros((m, k))
        Km = np.zeros((n, k))
        A = np.zeros((n, k))
        for q, (i, j) in enumerate(E):
            Rm[i, q] = 1.0
            Km[j, q] = 1.0
            A[j, q] = S[i, j]
        full_r = Rm @ xe > 1 - tight_tol
        full_c = Km @ xe > 1 - tight_tol
        C = np.vstack([Rm[full_r], Km[full_c]])
        if C.shape[0]:
            xe = xe + np.linalg.lstsq(C, 1.0 - C @ xe, rcond=None)[0]
            N = null_space(C)
        else:
            N = np.eye(k)
        y = A @ xe
        if np.any(y <= 0) or np.any(xe < -1e-12):
            return None
        if N.shape[1] == 0:
            break
        grad = N.T @ (A.T @ (wv / y))
        AN = A @ N
        H = AN.T @ (AN * (wv / y**2)[:, None])
        dz = np.linalg.lstsq(H, grad, rcond=None)[0]
        dx = N @ dz
        t = 1.0
        neg = dx < 0
        if np.any(neg):
            t = min(t, float(np.min(-xe[neg] / dx[neg])))
        for M, full in ((Rm, full_r), (Km, full_c)):
            grow = M @ dx
            room = 1.0 - M @ xe
            mask = (~full) & (grow > 0)
            if np.any(mask):
                t = min(t, float(np.min(room[mask] / grow[mask])))
        xe = xe + t * dx
        X = np.zeros((m, n))
        for q, e in enumerate(E):
            X[e] = max(xe[q], 0.0)
        dy = A @ dx
        if t == 1.0 and float(np.max(np.abs(dy))) <= 1e-15 * float(np.max(y)):
            break
    for M in (X.sum(axis=1), X.sum(axis=0)):
        if np.any(M > 1 + 1e-12):
            return None
    return np.minimum(X, 1.0)


def recover_multipliers_assignment(s: Any, w: Any, y: Any, x: Any = None,
                                   tol: float = 1e-9) -> tuple[list[float], list[float]]:
    """Machine and job multipliers for an (approximately) optimal assignment.

    Solves min sum(eta) + sum(delta) subject to eta_i + delta_j >= s_ij w_j / y_j
    and eta, delta >= 0: the dual of the maximum-weight fractional matching on
    the gradient weights.  At an optimum its value is sum(w) and complementary
    slackness with x holds.  A final pass raises delta_j where rounding left a
    constraint violated, so the inequality holds exactly in floating point.
    """
    S = np.array(s, dtype=float)
    wv = np.array(w, dtype=float)
    yv = np.array(y, dtype=float)
    m, n = S.shape
    G = S * (wv / yv)[None, :]
    edges = [(i, j) for i in range(m) for j in range(n) if S[i, j] > 0]
    A = np.zeros((len(edges), m + n))
    b = np.zeros(len(edges))
    for q, (i, j) in enumerate(edges):
        A[q, i] = -1.0
        A[q, m + j] = -1.0
        b[q] = -G[i, j]
    res = linprog(np.ones(m + n), A_ub=A, b_ub=b, bounds=[(0, None)] * (m + n), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"multiplier recovery failed: {res.message}")
    eta = np.maximum(res.x[:m], 0.0)
    delta = np.maximum(res.x[m:], 0.0)
    for i, j in edges:
        short = G[i, j] - eta[i] - delta[j]
        if short > 0:
            delta[j] += short
    if abs(eta.sum() + delta.sum() - wv.sum()) > max(tol, 1e-9) * wv.sum() * 1e3:
        raise SolverError("multipliers do not sum to the total weight; rates not converged")
    return [float(v) for v in eta], [float(v) for v in delta]


# ---------------------------------------------------------------------------
# optimality check


def kkt_residual(model: Model, w: Sequence, solution: RateSolution) -> KKTReport:
    """Violation of each family of optimality conditions (exact for rational input).

    Stationarity is measured relative to w_j, constraint violations absolutely.
    """
    ws = list(w)
    exact = solution.exact
    num = (lambda v: Fraction(v)) if exact else (lambda v: float(v))
    zero = num(0)
    y = [num(v) for v in solution.y]
    W = sum((num(v) for v in ws), zero)
    rep = KKTReport(zero, zero, zero, zero, zero)
    n = len(ws)
    if isinstance(model, (Packing, Single)) and solution.delta is None:
        B = [[1] * n] if isinstance(model, Single) else model.B
        eta = [num(v) for v in solution.eta]
        for j in range(n):
            price = sum((num(B[d][j]) * eta[d] for d in range(len(B))), zero)
            rep.stationarity = max(rep.stationarity, abs(num(ws[j]) / y[j] - price) / num(ws[j]))
        for d, row in enumerate(B):
            load = sum((num(row[j]) * y[j] for j in range(n)), zero)
            rep.feasibility = max(rep.feasibility, load - 1)
            rep.complementarity = max(rep.complementarity, abs(eta[d] * (1 - load)))
        rep.nonnegativity = max([zero] + [-e for e in eta])
        rep.multiplier_sum = abs(sum(eta, zero) - W)
        return rep
    S = speed_matrix(model, n)
    m = len(S)
    eta = [num(v) for v in solution.eta]
    delta = [num(v) for v in solution.delta]
    x = [[num(v) for v in row] for row in solution.x]
    for i in range(m):
        for j in range(n):
            if S[i][j] <= 0:
                continue
            lhs = num(S[i][j]) * num(ws[j]) / y[j]
            gap = eta[i] + delta[j] - lhs
            rep.stationarity = max(rep.stationarity, -gap / num(ws[j]))
            if x[i][j] > 0:
                rep.stationarity = max(rep.stationarity, abs(gap) / num(ws[j]))
    for i in range(m):
        load = sum(x[i], zero)
        rep.feasibility = max(rep.feasibility, load - 1)
        rep.complementarity = max(rep.complementarity, abs(eta[i] * (1 - load)))
    for j in range(n):
        load = sum((x[i][j] for i in range(m)), zero)
        got = sum((num(S[i][j]) * x[i][j] for i in range(m)), zero)
        rep.feasibility = max(rep.feasibility, load - 1, abs(got - y[j]))
        rep.complementarity = max(rep.complementarity, abs(delta[j] * (1 - load)))
    rep.nonnegativity = max([zero] + [-v for v in eta + delta] + [-v for row in x for v in row])
    rep.multiplier_sum = abs(sum(eta, zero) + sum(delta, zero) - W)
    return rep


# ---------------------------------------------------------------------------
# dispatch

SOLVERS = ("auto", "packing", "related", "unrelated")


def solver_for(model: Model, solver: str = "auto") -> str:
    """Resolve a solver choice for a model, rejecting incompatible pairs."""
    if solver not in SOLVERS:
        raise InstanceError(f"unknown solver {solver!r}")
    if solver == "auto":
        if isinstance(model, Single):
            return "single"
        if isinstance(model, (Identical, Related)):
            return "related"
        return model.kind
    if solver == "related" and not isinstance(model, (Single, Identical, Related)):
        raise InstanceError(f"related solver cannot handle {model.kind} models")
    if solver == "unrelated" and isinstance(model, Packing):
        raise InstanceError("unrelated solver cannot handle packing models")
    if solver == "packing" and isinstance(model, Unrelated):
        raise InstanceError("no explicit packing description for unrelated models")
    return solver


def solve_rates(model: Model, w: Sequence, solver: str = "auto", tol: float = 1e-10) -> RateSolution:
    """PF rates for the jobs of ``model`` (already restricted to the job set) with weights w."""
    kind = solver_for(model, solver)
    n = len(w)
    if kind == "single":
        W = sum((Fraction(v) for v in w), Fraction(0))
        sol = RateSolution(y=tuple(Fraction(v) / W for v in w), eta=(W,), exact=True, method="closed-form")
        sol.kkt = kkt_residual(model, w, sol)
        return sol
    if kind == "related":
        speeds = (Fraction(1),) if isinstance(model, Single) else model.speeds
        return solve_related_any_order(speeds, w)
    if kind == "packing":
        if isinstance(model, Packing):
            B = model.B
        elif isinstance(model, Single):
            B = ((Fraction(1),) * n,)
        else:
            B = related_packing_matrix(model.speeds, n)
        return solve_eg_packing(B, w, tol)
    return solve_eg_unrelated(speed_matrix(model, n), w, tol)


@lru_cache(maxsize=8192)
def _cached_rates(model: Model, w: tuple, solver: str, tol: float) -> RateSolution:
    return solve_rates(model, w, solver, tol)


def rates_for_jobs(instance: Instance, jobs: Sequence[int], solver: str = "auto",
                   tol: float = 1e-10) -> RateSolution:
    """PF rates for a subset of an instance's jobs (local order = order of ``jobs``).

    Only weights and the polytope columns of the listed jobs are read.
    """
    jobs = tuple(jobs)
    model = instance.model.restrict(jobs)
    w = tuple(instance.jobs[j].w for j in jobs)
    return _cached_rates(model, w, solver, tol)


@dataclass
class MonotonicityViolation:
    job: int
    subset: tuple[int, ...]
    superset: tuple[int, ...]
    rate_in_subset: float
    rate_in_superset: float


def test_monotonicity(instance: Instance, subsets: Iterable[Iterable[int]], tol: float = 1e-9,
                      solver: str = "auto") -> list[MonotonicityViolation]:
    """Flag jobs whose PF rate drops when other jobs leave (for nested pairs of subsets)."""
    sets = [tuple(sorted(set(S))) for S in subsets]
    sols = {S: rates_for_jobs(instance, S, solver) for S in set(sets) if S}
    out = []
    for small in sets:
        for big in sets:
            if not small or small == big or not set(small) <= set(big):
                continue
            ys, yb = sols[small], sols[big]
            for j in small:
                a = ys.y[small.index(j)]
                b = yb.y[big.index(j)]
                if a < b - tol:
                    out.append(MonotonicityViolation(j, small, big, float(a), float(b)))
    return out


test_monotonicity.__test__ = False  # not a pytest test despite the name
