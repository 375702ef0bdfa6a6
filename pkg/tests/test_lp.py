import math
import random
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from pfsched.certify import BetaSegment, wrr_tight_certificate
from pfsched.lp import (LpProblem, alpha_point_round, alpha_points, build_interval_indexed, build_time_indexed,
                        default_cell, dual_constraint_check, rounded_objectives, sample_alpha, schedule_to_cells,
                        simplex_solve)
from pfsched.model import Job, RandomParams, Related, Single, random_instance
from pfsched.pf import run_pf

from conftest import make

F = Fraction


def test_simplex_trivial():
    prob = LpProblem(maximize=True)
    x = prob.add_var("x", 1)
    prob.add_row({x: 1}, "<=", 1)
    for method in ("auto", "exact"):
        sol = simplex_solve(prob, method)
        assert sol.status == "optimal"
        assert sol.x == [1] and sol.duals == [1] and sol.objective == 1


def test_simplex_degenerate_cycling_example():
    """Beale's example cycles under the textbook pivot rule without anti-cycling."""
    prob = LpProblem()
    v = [prob.add_var(f"x{i}", c) for i, c in enumerate([F(-3, 4), 150, F(-1, 50), 6])]
    prob.add_row({v[0]: F(1, 4), v[1]: -60, v[2]: F(-1, 25), v[3]: 9}, "<=", 0)
    prob.add_row({v[0]: F(1, 2), v[1]: -90, v[2]: F(-1, 50), v[3]: 3}, "<=", 0)
    prob.add_row({v[2]: 1}, "<=", 1)
    for method in ("auto", "exact"):
        assert simplex_solve(prob, method).objective == F(-1, 20)


def test_simplex_statuses():
    prob = LpProblem(maximize=True)
    x = prob.add_var("x", 1)
    prob.add_row({x: 1}, ">=", 1)
    assert simplex_solve(prob).status == "unbounded"
    prob = LpProblem()
    x = prob.add_var("x", 1)
    prob.add_row({x: 1}, "<=", 1)
    prob.add_row({x: 1}, ">=", 2)
    assert simplex_solve(prob).status == "infeasible"


def random_lp(rng):
    n, m = rng.randint(1, 5), rng.randint(1, 5)
    prob = LpProblem(maximize=rng.random() < 0.5)
    v = [prob.add_var(f"x{i}", rng.randint(-3, 3)) for i in range(n)]
    for _ in range(m):
        prob.add_row({v[i]: rng.randint(-2, 3) for i in range(n)}, rng.choice(["<=", ">=", "=="]), rng.randint(-3, 5))
    return prob


def scipy_reference(prob):
    sign = -1 if prob.maximize else 1
    c = [sign * float(v) for v in prob.c]
    n = len(c)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row, sense, b in zip(prob.rows, prob.senses, prob.rhs):
        dense = [float(row.get(k, 0)) for k in range(n)]
        if sense == "<=":
            A_ub.append(dense); b_ub.append(float(b))
        elif sense == ">=":
            A_ub.append([-a for a in dense]); b_ub.append(-float(b))
        else:
            A_eq.append(dense); b_eq.append(float(b))
    res = linprog(c, A_ub=A_ub or None, b_ub=b_ub or None, A_eq=A_eq or None, b_eq=b_eq or None,
                  bounds=[(0, None)] * n, method="highs")
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}[res.status]
    return status, (sign * res.fun if status == "optimal" else None)


@given(st.integers(0, 10 ** 6))
def test_simplex_matches_highs_and_strong_duality(seed):
    prob = random_lp(random.Random(seed))
    sol = simplex_solve(prob)
    status, value = scipy_reference(prob)
    assert sol.status == status
    if status == "optimal":
        assert math.isclose(float(sol.objective), value, abs_tol=1e-7)
        assert prob.violation(sol.x) == 0
        assert sum(y * b for y, b in zip(sol.duals, prob.rhs)) == sol.objective
        assert simplex_solve(prob, "exact").objective == sol.objective


def test_time_indexed_examples():
    one = make([(2, 1, 0)], Single())
    assert simplex_solve(build_time_indexed(one, 1, horizon=2)).objective == 1
    assert simplex_solve(build_time_indexed(one, 2, horizon=4)).objective == 2
    assert simplex_solve(build_time_indexed(make([(1, 1, 0), (1, 1, 0)], Single()), 1)).objective == 2


def test_time_indexed_short_horizon_infeasible():
    assert simplex_solve(build_time_indexed(make([(3, 1, 0)], Single()), 1, horizon=2)).status == "infeasible"


def test_time_indexed_assignment_rows():
    inst = make([(2, 1, 0), (2, 1, 0)], Related((F(2), F(1))))
    prob = build_time_indexed(inst, 1, cell=F(1, 2))
    assert len(prob.meta["var"][0]) == 3
    sol = simplex_solve(prob)
    assert sol.status == "optimal" and sol.objective <= F(5, 2)


def test_pf_cells_feasible_in_lp():
    inst = make([(3, 1, 0), (1, 2, 1), (2, 1, 2)], Single())
    prob = build_time_indexed(inst, 1)
    x = schedule_to_cells(run_pf(inst), prob)
    assert prob.violation(x) == 0
    assert prob.objective_value(x) >= simplex_solve(prob).objective


def test_default_cell():
    assert default_cell(make([(1, 1, F(1, 2)), (3, 1, 0)], Single())) == F(1, 2)
    assert default_cell(make([(1, 1, 0)], Related((F(3),)))) == F(1, 3)


def test_interval_one_job():
    inst = make([(1, 1, 0)], Single())
    prob = build_interval_indexed(inst, 1, 1)
    assert prob.meta["bounds"][:2] == [1, 2]
    sol = simplex_solve(prob)
    assert sol.objective == 1
    assert sol.by_name(prob) == {"y[0,1]": 1}


def test_interval_lp_bounded_by_slack_and_shifted_optimum():
    from pfsched.baselines import brute_force_opt_preemptive
    for seed in range(10):
        inst = random_instance(RandomParams(kind="single", n=3, p_range=(1, 4), w_range=(1, 3), r_range=(0, 3)), seed)
        eps = F(1, 2)
        li = simplex_solve(build_interval_indexed(inst, eps, eps)).objective
        l1 = simplex_solve(build_time_indexed(inst, 1)).objective
        assert li <= (1 + eps) ** 2 * l1
        shifted = inst.with_jobs([Job(j.p, j.w, j.r + eps) for j in inst.jobs])
        assert li <= brute_force_opt_preemptive(shifted, grid=default_cell(shifted)).upper


def test_interval_lp_approaches_time_indexed():
    inst = make([(2, 1, 0), (1, 2, 0), (3, 1, 1)], Single())
    target = simplex_solve(build_time_indexed(inst, 1)).objective
    gaps = [simplex_solve(build_interval_indexed(inst, e, e)).objective - target for e in (1, F(1, 4), F(1, 8))]
    assert gaps[0] > gaps[1] > gaps[2] >= 0


def _interval_solution(inst, eps=F(1, 10), delta=F(1, 10)):
    prob = build_interval_indexed(inst, eps, delta)
    return prob, simplex_solve(prob)


def test_alpha_one_no_slowdown():
    inst = make([(2, 1, 0), (1, 3, 1)], Single())
    prob, sol = _interval_solution(inst)
    sched = alpha_point_round(inst, prob, sol, alpha=1)
    points = alpha_points(inst, prob, sol, 1)
    for c, a in zip(sched.completions, points):
        assert c <= (1 + prob.meta["eps"]) * a


def test_alpha_round_deterministic_and_feasible():
    from pfsched.model import validate_schedule
    inst = make([(2, 1, 0), (1, 3, 1), (3, 2, 0)], Single())
    prob, sol = _interval_solution(inst)
    a = alpha_point_round(inst, prob, sol, seed=42)
    b = alpha_point_round(inst, prob, sol, seed=42)
    assert a.completions == b.completions
    assert validate_schedule(a) == []


def test_vectorized_rounding_matches_exact():
    inst = make([(2, 1, 0), (1, 3, 1), (3, 2, 0)], Related((F(2), F(1))))
    prob, sol = _interval_solution(inst)
    alphas = [sample_alpha(s) for s in range(20)]
    objs, worst = rounded_objectives(inst, prob, sol, np.array(alphas))
    for a, value in zip(alphas, objs):
        assert math.isclose(float(alpha_point_round(inst, prob, sol, alpha=a).objective), value, rel_tol=1e-9)
    assert (worst <= 1 + 1e-9).all()


def test_one_job_expectation():
    inst = make([(1, 1, 0)], Single())
    prob, sol = _interval_solution(inst)
    objs, _ = rounded_objectives(inst, prob, sol, np.array([sample_alpha(s) for s in range(10_000)]))
    bound = 2 * (1 + F(1, 10)) * (1 + F(1, 10)) * sol.objective
    assert objs.mean() <= float(bound) + 3 * objs.std(ddof=1) / 100


def test_sample_alpha_density():
    draws = np.array([sample_alpha(s) for s in range(20_000)])
    assert 0 < draws.min() and draws.max() < 1
    assert abs(draws.mean() - 2 / 3) < 0.01  # mean of density 2x


# dual feasibility checker ------------------------------------------------------


def zero_certificate(n, rows=1):
    return SimpleNamespace(alpha=[F(0)] * n, segments=[BetaSegment(F(0), F(2), (F(0),) * rows, (F(0),) * rows)],
                           cell=F(1), origin=F(0))


def test_zero_certificate_feasible():
    inst = make([(1, 1, 0), (2, 1, 0)], Single())
    report = dual_constraint_check(inst, 1, zero_certificate(2))
    assert report.feasible and report.dual_objective == 0


def test_inflated_alpha_violates():
    inst = make([(1, 1, 0), (1, 1, 0)], Single())
    cert = wrr_tight_certificate(inst)
    assert dual_constraint_check(inst, 1, cert).feasible
    cert.alpha[0] += 1
    report = dual_constraint_check(inst, 1, cert)
    assert not report.feasible
    assert report.max_violation > 0
    assert report.witness["job"] == 0
