import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from pfsched.baselines import brute_force_opt_preemptive
from pfsched.certify import (CertificateError, MonotonicityError, general_psp_certificate, monpsp_certificate,
                             structured_certificate, verify_certificate, wrr_tight_certificate)
from pfsched.lp import build_time_indexed, default_cell, dual_constraint_check, simplex_solve
from pfsched.model import (RandomParams, Related, Single, gen_nonmonotone_counterexample, random_instance)
from pfsched.pf import run_pf

from conftest import make, structured_instance

F = Fraction


def beta_total(cert):
    return sum(cert.alpha) - cert.dual_objective


def test_structured_two_unit_jobs():
    inst = make([(1, 1, 0), (1, 1, 0)], Single())
    cert = structured_certificate(run_pf(inst))
    assert cert.alg == 4 and sum(cert.alpha) == 4
    assert beta_total(cert) == 2 and cert.dual_objective == 2
    verdict = verify_certificate(cert, inst)
    assert verdict.message == "feasible; ALG ≤ 2·OPT"
    assert verdict.report.max_slack == 0


def test_structured_related_one_level():
    inst = make([(3, 1, 0), (3, 1, 0)], Related((F(2), F(1))))
    cert = structured_certificate(run_pf(inst))
    assert cert.alg == 4 and cert.dual_objective == 2
    report = dual_constraint_check(inst, 1, cert)
    assert report.feasible and report.max_slack == 0


def test_structured_one_job():
    inst = make([(1, 1, 0)], Single())
    assert structured_certificate(run_pf(inst)).dual_objective == F(1, 2)


def test_structured_rejects_staggered_finish():
    with pytest.raises(CertificateError):
        structured_certificate(run_pf(make([(1, 1, 0), (2, 1, 0)], Single())))


@given(st.integers(0, 10 ** 6))
def test_structured_tight_and_half(seed):
    inst = structured_instance(seed)
    sched = run_pf(inst)
    cert = structured_certificate(sched)
    report = dual_constraint_check(inst, 1, cert)
    assert report.feasible and report.max_slack == 0
    assert cert.dual_objective == sched.objective / 2


def test_monpsp_related_example():
    inst = make([(3, 1, 0), (3, 1, 0)], Related((F(2), F(1))))
    cert = monpsp_certificate(run_pf(inst), kappa=2)
    assert sum(cert.alpha) == 4 and beta_total(cert) == 2 and cert.dual_objective == 2
    assert verify_certificate(cert, inst).message == "feasible; ALG ≤ 4·OPT"


def test_monpsp_single_machine_uniform():
    for seed in range(10):
        inst = random_instance(RandomParams(kind="single", n=4, w_range=(1, 4)), seed)
        sched = run_pf(inst)
        cert = monpsp_certificate(sched, kappa=2)
        assert cert.dual_objective == sched.objective / 2
        assert verify_certificate(cert, inst).feasible


def test_monpsp_rejects_counterexample():
    inst = gen_nonmonotone_counterexample()
    with pytest.raises(MonotonicityError) as info:
        monpsp_certificate(run_pf(inst))
    assert info.value.violations[0].job == 1


def test_monpsp_needs_kappa_above_one():
    with pytest.raises(CertificateError):
        monpsp_certificate(run_pf(make([(1, 1, 0)], Single())), kappa=1)


@pytest.mark.parametrize("kind, restricted", [("related", False), ("unrelated", True), ("identical", False)])
def test_monpsp_with_releases(kind, restricted):
    for seed in range(8):
        inst = random_instance(RandomParams(kind=kind, n=4, m=2, r_range=(0, 4), w_range=(1, 3),
                                            restricted=restricted, density=0.7), seed)
        sched = run_pf(inst)
        cert = monpsp_certificate(sched, kappa=2)
        tol = 0 if kind != "unrelated" else 1e-7
        assert verify_certificate(cert, inst, tol=tol).feasible
        assert abs(float(cert.dual_objective) - float(cert.alg) / 2) <= 1e-6


def test_general_single_job_constant_quantile():
    inst = make([(3, 2, 1)], Single())
    sched = run_pf(inst)
    cert = general_psp_certificate(sched)
    assert cert.alpha == [2 * 3]
    assert verify_certificate(cert, inst).feasible


@pytest.mark.parametrize("kind", ["packing", "single", "related"])
def test_general_random(kind):
    for seed in range(10):
        inst = random_instance(RandomParams(kind=kind, n=4, m=2, rows=3, r_range=(0, 3), w_range=(1, 4)), seed)
        sched = run_pf(inst)
        cert = general_psp_certificate(sched)
        verdict = verify_certificate(cert, inst, tol=1e-6)
        assert verdict.feasible
        assert cert.dual_objective >= cert.alg / 3 - F(1, 10 ** 6)
        assert verdict.message == "feasible; ALG ≤ 27·OPT"


def test_general_rejects_bad_parameters():
    sched = run_pf(make([(1, 1, 0)], Single()))
    with pytest.raises(CertificateError):
        general_psp_certificate(sched, lam=F(3, 2))


def test_wrr_examples():
    inst = make([(1, 1, 0), (1, 1, 0)], Single())
    cert = wrr_tight_certificate(inst)
    assert cert.alg == 4 and cert.dual_objective == 2
    assert simplex_solve(build_time_indexed(inst, 1)).objective == 2
    one = wrr_tight_certificate(make([(1, 1, 0)], Single()))
    assert one.alg == 1 and one.dual_objective == F(1, 2)


def test_wrr_random_matches_lp():
    rng = random.Random(12)
    for _ in range(25):
        jobs = [(rng.randint(1, 5), rng.randint(1, 5), 0) for _ in range(rng.randint(1, 5))]
        inst = make(jobs, Single())
        cert = wrr_tight_certificate(inst)
        assert cert.dual_objective == cert.alg / 2 == run_pf(inst).objective / 2
        assert verify_certificate(cert, inst).feasible
        assert simplex_solve(build_time_indexed(inst, 1)).objective == cert.dual_objective


def test_wrr_rejects_bad_inputs():
    with pytest.raises(CertificateError):
        wrr_tight_certificate(make([(1, 1, 0)], Related((F(1),))))
    with pytest.raises(CertificateError):
        wrr_tight_certificate(make([(F(1, 2), 1, 0)], Single()))
    with pytest.raises(CertificateError):
        wrr_tight_certificate(make([(1, 1, 0), (1, 1, 1)], Single()))


def test_tampered_certificate_rejected():
    inst = make([(2, 1, 0), (1, 2, 0), (3, 1, 0)], Single())
    cert = wrr_tight_certificate(inst)
    seg = cert.segments[1]
    cert.segments[1] = type(seg)(seg.start, seg.end, tuple(c / 2 for c in seg.const), tuple(s / 2 for s in seg.slope))
    verdict = verify_certificate(cert, inst)
    assert not verdict.feasible
    assert verdict.message.startswith("infeasible at (")
    assert verdict.witness["type"] == "constraint"


def test_stored_objective_mismatch_rejected():
    inst = make([(1, 1, 0), (2, 1, 0)], Single())
    cert = wrr_tight_certificate(inst)
    cert.dual_objective += 1
    verdict = verify_certificate(cert, inst)
    assert not verdict.feasible and "differs" in verdict.message


def test_weak_duality_against_brute_force():
    for seed in range(8):
        inst = random_instance(RandomParams(kind="single", n=3, p_range=(1, 3), w_range=(1, 3), r_range=(0, 2)), seed)
        sched = run_pf(inst)
        upper = brute_force_opt_preemptive(inst).upper
        shift = sum(inst.w) * sched.origin
        for cert in (monpsp_certificate(sched, kappa=2), general_psp_certificate(sched)):
            assert verify_certificate(cert, inst).feasible
            assert cert.dual_objective <= cert.kappa * (upper - shift)


def test_certificate_serialization():
    inst = make([(1, 1, 0), (2, 1, 0)], Single())
    cert = monpsp_certificate(run_pf(inst))
    doc = cert.to_dict()
    assert doc["kind"] == "monpsp" and doc["claimed_ratio"] == 4
    table = cert.cell_table()
    assert sum(sum(v) for _, v in table) == beta_total(cert)
