"""Instances, schedules, the instance file format and instance generators.

All numeric data is held as ``fractions.Fraction`` so that event times and
objective values can be compared exactly.
"""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence, Union

Number = Union[int, Fraction, str, float]

# sqrt(3) to 20 significant digits; every generator that needs it uses this
# fixed rational so the resulting timelines stay exact.
SQRT3 = Fraction("1.7320508075688772935")

# Processing times of the 30 waves of the round-robin lower-bound family.
RR_TABLE_P = (
    "1", "0.95160", "0.90702", "0.86581", "0.82759", "0.79203", "0.75885",
    "0.72782", "0.69872", "0.67137", "0.64561", "0.62131", "0.59832",
    "0.57656", "0.55590", "0.53628", "0.51760", "0.49980", "0.48282",
    "0.46659", "0.45106", "0.43619", "0.42194", "0.40825", "0.39510",
    "0.38245", "0.37027", "0.35854", "0.34722", "0.33630",
)


class InstanceError(ValueError):
    """Malformed or inconsistent instance data."""


class UnschedulableJobError(InstanceError):
    """A job that no feasible rate vector can serve."""


def to_fraction(value: Number) -> Fraction:
    """Parse an int, Fraction, decimal string, ``"a/b"`` string or float."""
    if isinstance(value, bool):
        raise InstanceError(f"not a number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InstanceError(f"not a finite number: {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InstanceError(f"cannot parse rational {value!r}") from exc
    raise InstanceError(f"not a number: {value!r}")


def fraction_to_json(x: Fraction) -> Union[int, str]:
    if x.denominator == 1:
        return int(x.numerator)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# polytope models


@dataclass(frozen=True)
class Job:
    p: Fraction
    w: Fraction
    r: Fraction = Fraction(0)


@dataclass(frozen=True)
class Packing:
    """Explicit packing polytope ``B y <= 1`` with ``B`` of shape D x n."""

    B: tuple[tuple[Fraction, ...], ...]
    kind = "packing"

    @property
    def rows(self) -> int:
        return len(self.B)

    def restrict(self, jobs: Sequence[int]) -> "Packing":
        return Packing(tuple(tuple(row[j] for j in jobs) for row in self.B))


@dataclass(frozen=True)
class Single:
    kind = "single"

    def restrict(self, jobs: Sequence[int]) -> "Single":
        return self


@dataclass(frozen=True)
class Identical:
    m: int
    kind = "identical"

    @property
    def speeds(self) -> tuple[Fraction, ...]:
        return (Fraction(1),) * self.m

    def restrict(self, jobs: Sequence[int]) -> "Identical":
        return self


@dataclass(frozen=True)
class Related:
    """Uniformly related machines; speeds are kept sorted non-increasing."""

    speeds: tuple[Fraction, ...]
    kind = "related"

    @property
    def m(self) -> int:
        return len(self.speeds)

    def restrict(self, jobs: Sequence[int]) -> "Related":
        return self


@dataclass(frozen=True)
class Unrelated:
    """Speed matrix ``speed_matrix[i][j]`` of machine i on job j."""

    speed_matrix: tuple[tuple[Fraction, ...], ...]
    kind = "unrelated"

    @property
    def m(self) -> int:
        return len(self.speed_matrix)

    def restrict(self, jobs: Sequence[int]) -> "Unrelated":
        return Unrelated(tuple(tuple(row[j] for j in jobs) for row in self.speed_matrix))

    @property
    def is_restricted(self) -> bool:
        return all(s in (0, 1) for row in self.speed_matrix for s in row)


Model = Union[Packing, Single, Identical, Related, Unrelated]
ASSIGNMENT_KINDS = ("identical", "related", "unrelated")


def speed_matrix(model: Model, n: int) -> list[list[Fraction]]:
    """Machine x job speeds for any machine model (single = one unit machine)."""
    if isinstance(model, Single):
        return [[Fraction(1)] * n]
    if isinstance(model, (Identical, Related)):
        return [[s] * n for s in model.speeds]
    if isinstance(model, Unrelated):
        return [list(row) for row in model.speed_matrix]
    raise InstanceError("packing models have no speed matrix")


def machine_speed(model: Model, i: int, j: int) -> Fraction:
    if isinstance(model, Single):
        return Fraction(1)
    if isinstance(model, (Identical, Related)):
        return model.speeds[i]
    if isinstance(model, Unrelated):
        return model.speed_matrix[i][j]
    raise InstanceError("packing models have no machines")


def max_single_rate(model: Model, j: int) -> Fraction:
    """Largest rate job j can get when it is alone."""
    if isinstance(model, Packing):
        return min(Fraction(1) / row[j] for row in model.B if row[j] > 0)
    if isinstance(model, Single):
        return Fraction(1)
    if isinstance(model, (Identical, Related)):
        return max(model.speeds)
    return max(row[j] for row in model.speed_matrix)


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    model: Model

    def __post_init__(self) -> None:
        if not self.jobs:
            raise InstanceError("instance has no jobs")
        for k, job in enumerate(self.jobs):
            if job.p <= 0:
                raise InstanceError(f"job {k}: processing requirement must be positive")
            if job.w <= 0:
                raise InstanceError(f"job {k}: weight must be positive")
            if job.r < 0:
                raise InstanceError(f"job {k}: negative release date")
        _validate_model(self.model, len(self.jobs))

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def p(self) -> tuple[Fraction, ...]:
        return tuple(j.p for j in self.jobs)

    @property
    def w(self) -> tuple[Fraction, ...]:
        return tuple(j.w for j in self.jobs)

    @property
    def r(self) -> tuple[Fraction, ...]:
        return tuple(j.r for j in self.jobs)

    @property
    def kind(self) -> str:
        return self.model.kind

    @property
    def uniform_release(self) -> bool:
        return len(set(self.r)) == 1

    def with_jobs(self, jobs: Iterable[Job]) -> "Instance":
        return Instance(tuple(jobs), self.model)

    def subinstance(self, indices: Sequence[int], p: Sequence[Fraction] | None = None,
                    r: Sequence[Fraction] | None = None) -> "Instance":
        """Instance on the given jobs (in the given order), optionally with new p or r."""
        jobs = []
        for k, j in enumerate(indices):
            job = self.jobs[j]
            jobs.append(Job(job.p if p is None else p[k], job.w, job.r if r is None else r[k]))
        return Instance(tuple(jobs), self.model.restrict(indices))


def _validate_model(model: Model, n: int) -> None:
    if isinstance(model, Packing):
        if not model.B:
            raise InstanceError("packing matrix has no rows")
        for row in model.B:
            if len(row) != n:
                raise InstanceError(f"packing row has {len(row)} entries, expected {n}")
            if any(b < 0 for b in row):
                raise InstanceError("negative packing coefficient")
        for j in range(n):
            if all(row[j] == 0 for row in model.B):
                raise UnschedulableJobError(f"unschedulable job {j}: all-zero packing column")
    elif isinstance(model, Identical):
        if model.m < 1:
            raise InstanceError("identical model needs at least one machine")
    elif isinstance(model, Related):
        if not model.speeds or any(s <= 0 for s in model.speeds):
            raise InstanceError("related speeds must be positive")
        if list(model.speeds) != sorted(model.speeds, reverse=True):
            raise InstanceError("related speeds must be sorted non-increasing")
    elif isinstance(model, Unrelated):
        if not model.speed_matrix:
            raise InstanceError("speed matrix has no machines")
        for row in model.speed_matrix:
            if len(row) != n:
                raise InstanceError(f"speed row has {len(row)} entries, expected {n}")
            if any(s < 0 for s in row):
                raise InstanceError("negative speed")
        for j in range(n):
            if all(row[j] == 0 for row in model.speed_matrix):
                raise UnschedulableJobError(f"unschedulable job {j}: no machine can process it")
    elif not isinstance(model, Single):
        raise InstanceError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# file format


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    """Build an instance from a decoded document; zero-p jobs are dropped with a warning."""
    if not isinstance(doc, Mapping):
        raise InstanceError("instance document must be an object")
    kind = doc.get("model")
    raw_jobs = doc.get("jobs")
    if not isinstance(raw_jobs, list):
        raise InstanceError("'jobs' must be a list")
    parsed = []
    for k, item in enumerate(raw_jobs):
        if not isinstance(item, Mapping) or "p" not in item:
            raise InstanceError(f"job {k} is malformed")
        p = to_fraction(item["p"])
        w = to_fraction(item.get("w", 1))
        r = to_fraction(item.get("r", 0))
        if p < 0 or w < 0 or r < 0:
            raise InstanceError(f"job {k}: negative value")
        parsed.append(Job(p, w, r))
    keep = [k for k, job in enumerate(parsed) if job.p > 0]
    dropped = [k for k, job in enumerate(parsed) if job.p == 0]
    if dropped:
        warnings.warn(f"dropping jobs with zero processing requirement: {dropped}", stacklevel=2)

    def matrix(key: str) -> list[list[Fraction]]:
        value = doc.get(key)
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            raise InstanceError(f"'{key}' must be a list of lists")
        return [[to_fraction(v) for v in row] for row in value]

    if kind == "packing":
        B = matrix("B")
        if any(len(row) != len(parsed) for row in B):
            raise InstanceError("dimension mismatch between B and jobs")
        model: Model = Packing(tuple(tuple(row[k] for k in keep) for row in B))
    elif kind == "single":
        model = Single()
    elif kind == "identical":
        m = doc.get("m")
        if not isinstance(m, int) or isinstance(m, bool):
            raise InstanceError("'m' must be an integer")
        model = Identical(m)
    elif kind == "related":
        speeds = doc.get("speeds")
        if not isinstance(speeds, list):
            raise InstanceError("'speeds' must be a list")
        model = Related(tuple(to_fraction(s) for s in speeds))
    elif kind == "unrelated":
        S = matrix("speed_matrix")
        if any(len(row) != len(parsed) for row in S):
            raise InstanceError("dimension mismatch between speed_matrix and jobs")
        model = Unrelated(tuple(tuple(row[k] for k in keep) for row in S))
    else:
        raise InstanceError(f"unknown model kind {kind!r}")
    return Instance(tuple(parsed[k] for k in keep), model)


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed document: {exc}") from exc
    return instance_from_dict(doc)


def load_instance(path: str) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "model": instance.kind,
        "jobs": [{"p": fraction_to_json(j.p), "w": fraction_to_json(j.w), "r": fraction_to_json(j.r)}
                 for j in instance.jobs],
    }
    model = instance.model
    if isinstance(model, Packing):
        doc["B"] = [[fraction_to_json(b) for b in row] for row in model.B]
    elif isinstance(model, Identical):
        doc["m"] = model.m
    elif isinstance(model, Related):
        doc["speeds"] = [fraction_to_json(s) for s in model.speeds]
    elif isinstance(model, Unrelated):
        doc["speed_matrix"] = [[fraction_to_json(s) for s in row] for row in model.speed_matrix]
    return doc


def serialize_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), sort_keys=True)


# ---------------------------------------------------------------------------
# schedules


@dataclass
class Schedule:
    """Piecewise-constant rate profile.

    ``rates[l]`` holds the positive rates on ``[events[l], events[l+1])``.
    Times are in the instance's own time frame.
    """

    instance: Instance
    events: list[Fraction]
    rates: list[dict[int, Fraction]]
    completions: list[Fraction]
    assignments: list[Any] | None = None
    solutions: list[Any] | None = field(default=None, repr=False)
    algorithm: str = ""

    @property
    def objective(self) -> Fraction:
        return sum((j.w * c for j, c in zip(self.instance.jobs, self.completions)), Fraction(0))

    @property
    def origin(self) -> Fraction:
        return self.events[0]

    @property
    def intervals(self) -> int:
        return len(self.rates)

    def unfinished(self, t: Fraction) -> list[int]:
        """U(t): jobs with C_j > t, released or not."""
        return [j for j, c in enumerate(self.completions) if c > t]

    def available(self, t: Fraction) -> list[int]:
        """J(t): released and unfinished jobs."""
        return [j for j, c in enumerate(self.completions) if self.instance.jobs[j].r <= t < c]

    def unfinished_weight(self, t: Fraction) -> Fraction:
        return sum((self.instance.jobs[j].w for j in self.unfinished(t)), Fraction(0))

    def processed(self) -> list[Fraction]:
        done = [Fraction(0)] * self.instance.n
        for l, rates in enumerate(self.rates):
            dt = self.events[l + 1] - self.events[l]
            for j, y in rates.items():
                done[j] += y * dt
        return done

    def to_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "events": [fraction_to_json(t) for t in self.events],
            "rates": [{str(j): fraction_to_json(y) for j, y in sorted(r.items())} for r in self.rates],
            "completions": [fraction_to_json(c) for c in self.completions],
            "objective": fraction_to_json(self.objective),
        }


def rates_violation(model: Model, rates: Mapping[int, Fraction], assignment: Any = None) -> Fraction:
    """Largest constraint violation of a rate vector (0 when feasible).

    Machine models are checked through the assignment when one is given;
    related models without an assignment use the prefix-sum criterion.
    """
    worst = Fraction(0)
    if isinstance(model, Packing):
        for row in model.B:
            worst = max(worst, sum((row[j] * y for j, y in rates.items()), Fraction(0)) - 1)
        return worst
    if isinstance(model, Single):
        return max(worst, sum(rates.values(), Fraction(0)) - 1)
    if assignment is None:
        if isinstance(model, Unrelated):
            raise InstanceError("unrelated rate vectors need an assignment to be checked")
        speeds = sorted(model.speeds, reverse=True)
        ys = sorted(rates.values(), reverse=True)
        top_y = top_s = Fraction(0)
        for k, y in enumerate(ys):
            top_y += y
            top_s += speeds[k] if k < len(speeds) else 0
            worst = max(worst, top_y - top_s)
        return worst
    for (i, j), x in assignment.items():
        if x < 0:
            worst = max(worst, -x)
    rows: dict[int, Fraction] = {}
    cols: dict[int, Fraction] = {}
    got: dict[int, Fraction] = {}
    for (i, j), x in assignment.items():
        rows[i] = rows.get(i, Fraction(0)) + x
        cols[j] = cols.get(j, Fraction(0)) + x
        got[j] = got.get(j, Fraction(0)) + machine_speed(model, i, j) * x
    for v in list(rows.values()) + list(cols.values()):
        worst = max(worst, v - 1)
    for j, y in rates.items():
        worst = max(worst, abs(got.get(j, Fraction(0)) - y))
    return worst


def validate_schedule(schedule: Schedule, tol: Fraction | float = 0) -> list[str]:
    """Return the list of violated schedule invariants (empty when valid)."""
    tol = to_fraction(tol)
    inst = schedule.instance
    problems = []
    ev = schedule.events
    if any(b <= a for a, b in zip(ev, ev[1:])):
        problems.append("event times are not strictly increasing")
    if len(schedule.rates) != len(ev) - 1:
        problems.append("one rate map per interval expected")
    for j, done in enumerate(schedule.processed()):
        if abs(done - inst.jobs[j].p) > tol:
            problems.append(f"job {j}: processed {done} != p {inst.jobs[j].p}")
    for l, rates in enumerate(schedule.rates):
        a, b = ev[l], ev[l + 1]
        for j, y in rates.items():
            if y < 0:
                problems.append(f"negative rate for job {j} on interval {l}")
            if y > 0 and (a < inst.jobs[j].r or b > schedule.completions[j]):
                problems.append(f"job {j} served outside [r_j, C_j) on interval {l}")
        assignment = schedule.assignments[l] if schedule.assignments else None
        if isinstance(inst.model, Unrelated) and assignment is None:
            continue
        if rates_violation(inst.model, rates, assignment) > tol:
            problems.append(f"interval {l}: rate vector infeasible")
    return problems


# ---------------------------------------------------------------------------
# generators


def gen_rr_lb_simple(n: int) -> Instance:
    """Two waves of n unit-weight jobs: p=1 at 0, then p=sqrt(3)-1 at (2-sqrt(3))n."""
    if n < 1:
        raise InstanceError("n must be positive")
    late = (2 - SQRT3) * n
    jobs = [Job(Fraction(1), Fraction(1), Fraction(0))] * n
    jobs += [Job(SQRT3 - 1, Fraction(1), late)] * n
    return Instance(tuple(jobs), Single())


def rr_table_releases(n: int) -> list[Fraction]:
    """Release date of each wave.

    Under round robin the i*n jobs present after the i-th release all share
    the machine, so bringing their common remaining work from p_i down to
    p_{i+1} takes i*n*(p_i - p_{i+1}) time.
    """
    ps = [Fraction(v) for v in RR_TABLE_P]
    rel = [Fraction(0)]
    for i in range(1, len(ps)):
        rel.append(rel[-1] + i * n * (ps[i - 1] - ps[i]))
    return rel


def gen_rr_lb_table(n: int) -> Instance:
    if n < 1:
        raise InstanceError("n must be positive")
    jobs = []
    for p, r in zip(RR_TABLE_P, rr_table_releases(n)):
        jobs += [Job(Fraction(p), Fraction(1), r)] * n
    return Instance(tuple(jobs), Single())


def gen_nonmonotone_counterexample() -> Instance:
    """Three machines, three unit jobs; dropping job 3 lowers job 2's PF rate."""
    S = ((1, 2, 0), (0, 1, 2), (0, 0, 1))
    model = Unrelated(tuple(tuple(Fraction(s) for s in row) for row in S))
    return Instance(tuple(Job(Fraction(1), Fraction(1)) for _ in range(3)), model)


def gen_migration_lb(n: int) -> Instance:
    """n unit jobs on one machine of speed sqrt(n) plus n-1 unit-speed machines."""
    root = math.isqrt(n) if n >= 0 else -1
    if n < 2 or root * root != n:
        raise InstanceError("migration family needs a perfect square n >= 2")
    speeds = (Fraction(root),) + (Fraction(1),) * (n - 1)
    return Instance(tuple(Job(Fraction(1), Fraction(1)) for _ in range(n)), Related(speeds))


def migration_ratio_formula(n: int) -> float:
    return n * (n + 1) / (2 * (1 + math.sqrt(n) * (n - 1)))


@dataclass(frozen=True)
class RandomParams:
    kind: str = "single"
    n: int = 4
    m: int = 2
    p_range: tuple[int, int] = (1, 5)
    w_range: tuple[int, int] = (1, 1)
    r_range: tuple[int, int] = (0, 0)
    s_range: tuple[int, int] = (1, 3)
    rows: int = 2
    density: float = 1.0
    restricted: bool = False


def random_instance(params: RandomParams, seed: int) -> Instance:
    """Reproducible random instance with integer data drawn from the given ranges."""
    pr = params
    for lo, hi in (pr.p_range, pr.w_range, pr.s_range):
        if lo < 1 or hi < lo:
            raise InstanceError("p, w and speed ranges must be positive and non-empty")
    if pr.r_range[0] < 0 or pr.r_range[1] < pr.r_range[0]:
        raise InstanceError("release range must be non-negative and non-empty")
    if pr.n < 1 or pr.m < 1 or pr.rows < 1 or not 0 < pr.density <= 1:
        raise InstanceError("impossible parameter combination")
    rng = random.Random(seed)
    jobs = tuple(Job(Fraction(rng.randint(*pr.p_range)), Fraction(rng.randint(*pr.w_range)),
                     Fraction(rng.randint(*pr.r_range))) for _ in range(pr.n))
    if pr.kind == "single":
        model: Model = Single()
    elif pr.kind == "identical":
        model = Identical(pr.m)
    elif pr.kind == "related":
        model = Related(tuple(sorted((Fraction(rng.randint(*pr.s_range)) for _ in range(pr.m)), reverse=True)))
    elif pr.kind == "unrelated":
        while True:
            rows = []
            for _ in range(pr.m):
                row = []
                for _ in range(pr.n):
                    usable = rng.random() < pr.density
                    speed = 1 if pr.restricted else rng.randint(*pr.s_range)
                    row.append(Fraction(speed if usable else 0))
                rows.append(tuple(row))
            if all(any(row[j] > 0 for row in rows) for j in range(pr.n)):
                break
        model = Unrelated(tuple(rows))
    elif pr.kind == "packing":
        while True:
            B = tuple(tuple(Fraction(rng.randint(1, 4), rng.randint(1, 4)) if rng.random() < pr.density else Fraction(0)
                            for _ in range(pr.n)) for _ in range(pr.rows))
            if all(any(row[j] > 0 for row in B) for j in range(pr.n)):
                break
        model = Packing(B)
    else:
        raise InstanceError(f"unknown model kind {pr.kind!r}")
    return Instance(jobs, model)
