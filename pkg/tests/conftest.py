from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from pfsched.model import Instance, Job

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make(jobs, model):
    """Instance from (p, w, r) triples."""
    return Instance(tuple(Job(Fraction(p), Fraction(w), Fraction(r)) for p, w, r in jobs), model)


@pytest.fixture
def two_jobs_path():
    import pathlib
    return str(pathlib.Path(__file__).resolve().parents[1] / "examples" / "two_jobs_single.json")


def structured_instance(seed, n_range=(1, 5)):
    """Uniform-release instance on which PF finishes every job at one common time.

    Picks a model and weights, solves for the PF rates of all jobs and sets
    p_j = y_j * C, so every job needs exactly time C at its PF rate.
    """
    import random

    from pfsched.egsolve import solve_rates
    from pfsched.model import Identical, Related, Single

    rng = random.Random(seed)
    n = rng.randint(*n_range)
    kind = rng.choice(["single", "identical", "related"])
    if kind == "single":
        model = Single()
    elif kind == "identical":
        model = Identical(rng.randint(1, 3))
    else:
        model = Related(tuple(sorted((Fraction(rng.randint(1, 4)) for _ in range(rng.randint(1, 3))), reverse=True)))
    w = [Fraction(rng.randint(1, 5)) for _ in range(n)]
    C = Fraction(rng.randint(1, 4))
    y = solve_rates(model, w).y
    return Instance(tuple(Job(rate * C, wj, Fraction(0)) for rate, wj in zip(y, w)), model)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
