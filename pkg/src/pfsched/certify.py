"""Dual-fitting certificates for PF schedules and their verification.

A certificate assigns a value alpha_j to every job and, for every row of the
rate polytope, a density beta_d(t) that is affine on each segment of the
timeline.  Feasibility for the dual of the time-indexed relaxation with
speed parameter kappa, together with an objective identity, yields a bound
ALG <= ratio * OPT by weak duality.

Times inside a certificate are measured from the schedule's first release
(``origin``).  The certified inequality then concerns objectives shifted by
W * origin, which only strengthens the bound for the original objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .egsolve import RateSolution, test_monotonicity
from .lp import DualCheckReport, dual_constraint_check, dual_rows
from .model import (Identical, Instance, InstanceError, Related, Schedule, Single, Unrelated,
                    fraction_to_json, max_single_rate, to_fraction)
from .pf import pf_rates_hypothetical, wrr_completion_times, wspt_order


class CertificateError(InstanceError):
    """The certificate's preconditions do not hold for this input."""


class MonotonicityError(CertificateError):
    def __init__(self, message: str, violations: list):
        super().__init__(message)
        self.violations = violations


@dataclass(frozen=True)
class BetaSegment:
    """beta_d(t) = const[d] + slope[d] * t on [start, end)."""

    start: Fraction
    end: Fraction
    const: tuple
    slope: tuple


@dataclass
class DualCertificate:
    kind: str
    kappa: Fraction
    alpha: list[Fraction]
    segments: list[BetaSegment]
    cell: Fraction
    origin: Fraction
    claimed_ratio: Fraction | None
    dual_objective: Fraction
    alg: Fraction
    lam: Fraction | None = None
    notes: dict[str, Any] = field(default_factory=dict)

    def cell_table(self, limit: int = 10_000) -> list[tuple[Fraction, list[Fraction]]]:
        """Per-cell totals of beta (cell start, one value per row)."""
        out = []
        for seg in self.segments:
            t = seg.start
            while t < seg.end:
                if len(out) >= limit:
                    return out
                mid = t + self.cell / 2
                out.append((t, [self.cell * (c + s * mid) for c, s in zip(seg.const, seg.slope)]))
                t += self.cell
        return out

    def to_dict(self) -> dict[str, Any]:
        def num(v):
            return fraction_to_json(v) if isinstance(v, Fraction) else float(v)
        return {
            "kind": self.kind,
            "kappa": num(self.kappa),
            "lambda": None if self.lam is None else num(self.lam),
            "origin": num(self.origin),
            "cell": num(self.cell),
            "alpha": [num(a) for a in self.alpha],
            "segments": [{"start": num(s.start), "end": num(s.end), "const": [num(v) for v in s.const],
                          "slope": [num(v) for v in s.slope]} for s in self.segments],
            "claimed_ratio": None if self.claimed_ratio is None else num(self.claimed_ratio),
            "dual_objective": num(self.dual_objective),
            "alg_shifted": num(self.alg),
        }


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(float(v))


def _lcm_denominator(values: Sequence[Fraction]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, Fraction(v).denominator)
    return out


def _cell_width(instance: Instance, times: Sequence[Fraction], origin: Fraction) -> Fraction:
    """Largest 1/L grid containing all breakpoints and releases, no wider than any job's fastest run."""
    L = _lcm_denominator([t - origin for t in times] + [r - origin for r in instance.r])
    width = Fraction(1, L)
    shortest = min(job.p / max_single_rate(instance.model, j) for j, job in enumerate(instance.jobs))
    if width > shortest:
        width /= math.ceil(width / shortest)
    return width


def _row_vector(instance: Instance, jobs: Sequence[int], sol: RateSolution | None) -> list[Fraction]:
    """Multipliers of one rate solve laid out on the instance's dual rows."""
    kind, D = dual_rows(instance)
    out = [Fraction(0)] * D
    if sol is None:
        return out
    if kind == "packing":
        if sol.delta is not None or len(sol.eta) != D:
            raise CertificateError("solver multipliers do not match the model's packing rows")
        return [_exact(v) for v in sol.eta]
    m = D - instance.n
    if sol.delta is None or len(sol.eta) != m:
        raise CertificateError("solver multipliers do not match the model's machine and job rows")
    for i, v in enumerate(sol.eta):
        out[i] = _exact(v)
    for k, j in enumerate(jobs):
        out[m + j] = _exact(sol.delta[k])
    return out


def _objective(alpha: Sequence[Fraction], segments: Sequence[BetaSegment]) -> Fraction:
    total = sum(alpha, Fraction(0))
    for seg in segments:
        mid = (seg.start + seg.end) / 2
        total -= (seg.end - seg.start) * sum((c + s * mid for c, s in zip(seg.const, seg.slope)), Fraction(0))
    return total


def _shifted_alg(schedule: Schedule) -> Fraction:
    inst = schedule.instance
    return sum((job.w * (c - schedule.origin) for job, c in zip(inst.jobs, schedule.completions)), Fraction(0))


def _known_monotone(instance: Instance) -> bool:
    model = instance.model
    if isinstance(model, (Single, Identical, Related)):
        return True
    return isinstance(model, Unrelated) and model.is_restricted


def monpsp_certificate(schedule: Schedule, instance: Instance | None = None, solver: str = "auto",
                       kappa: Fraction | int = 2, tol: float = 1e-9, subset_limit: int = 8) -> DualCertificate:
    """alpha_j = w_j C_j and beta(t) = eta_hat(t) / kappa from the rates PF would pick on U(t).

    Before building anything the monotonicity the construction relies on is
    checked: on models not known to be monotone every nested pair of job
    subsets is tested (up to ``subset_limit`` jobs), and at every interval
    the hypothetical rates must not exceed the actual ones.
    """
    inst = instance or schedule.instance
    kappa = Fraction(kappa)
    if kappa <= 1:
        raise CertificateError("kappa must exceed 1")
    if not _known_monotone(inst):
        if inst.n > subset_limit:
            raise MonotonicityError("model is not known to be monotone and too large to test exhaustively", [])
        import itertools
        subsets = [c for k in range(1, inst.n + 1) for c in itertools.combinations(range(inst.n), k)]
        bad = test_monotonicity(inst, subsets, tol, solver)
        if bad:
            v = bad[0]
            raise MonotonicityError(
                f"PF rate of job {v.job} drops from {v.rate_in_superset:.6g} to {v.rate_in_subset:.6g} "
                f"when the job set shrinks from {v.superset} to {v.subset}", bad)
    origin = schedule.origin
    segments = []
    for l, rates in enumerate(schedule.rates):
        a, b = schedule.events[l], schedule.events[l + 1]
        unfinished = schedule.unfinished(a)
        if not unfinished:
            break
        sol = pf_rates_hypothetical(inst, unfinished, solver=solver, tol=tol)
        for k, j in enumerate(unfinished):
            if j in rates and float(sol.y[k]) > float(rates[j]) + tol:
                raise MonotonicityError(f"hypothetical rate of job {j} exceeds its actual rate at t={a}",
                                        [(j, a, sol.y[k], rates[j])])
        eta = _row_vector(inst, unfinished, sol)
        segments.append(BetaSegment(a - origin, b - origin, tuple(v / kappa for v in eta),
                                    tuple(Fraction(0) for _ in eta)))
    alpha = [job.w * (c - origin) for job, c in zip(inst.jobs, schedule.completions)]
    cell = _cell_width(inst, schedule.events, origin)
    return DualCertificate("monpsp", kappa, alpha, segments, cell, origin, kappa * kappa / (kappa - 1),
                           _objective(alpha, segments), _shifted_alg(schedule))


def structured_certificate(schedule: Schedule, instance: Instance | None = None, solver: str = "auto"
                           ) -> DualCertificate:
    """Tight certificate for uniform releases with one common completion time C.

    alpha_j = w_j C and beta(t) = (1 - t/C) eta, where eta are the multipliers
    of the single rate solve.
    """
    inst = instance or schedule.instance
    if not inst.uniform_release:
        raise CertificateError("structured certificate needs a common release date")
    if len(set(schedule.completions)) != 1 or len(schedule.rates) != 1:
        raise CertificateError("structured certificate needs all jobs to finish at the same time")
    origin = schedule.origin
    C = schedule.completions[0] - origin
    jobs, sol = schedule.solutions[0]
    eta = _row_vector(inst, jobs, sol)
    seg = BetaSegment(Fraction(0), C, tuple(eta), tuple(-v / C for v in eta))
    alpha = [job.w * C for job in inst.jobs]
    cell = _cell_width(inst, schedule.events, origin)
    return DualCertificate("structured", Fraction(1), alpha, [seg], cell, origin, Fraction(2),
                           _objective(alpha, [seg]), _shifted_alg(schedule))


def _quantile(values: Sequence[tuple[Fraction, int]], lam: Fraction) -> Fraction:
    """Value at index ceil(lam * W) of the ascending list holding w copies of each value."""
    total = sum(w for _, w in values)
    k = math.ceil(lam * total)
    acc = 0
    for v, w in sorted(values):
        acc += w
        if acc >= k:
            return v
    return max(v for v, _ in values)


def general_psp_certificate(schedule: Schedule, instance: Instance | None = None, solver: str = "auto",
                            kappa: Fraction | int = 9, lam: Fraction | float = Fraction(2, 3)
                            ) -> DualCertificate:
    """Quantile certificate valid for every polytope.

    zeta(t) is the weighted lam-quantile of y_j(t)/p_j over the unfinished
    jobs (unreleased ones count with rate 0); alpha_j is w_j times the time
    j spends at or below the quantile; beta_d(t) integrates zeta * eta_d from
    t to the end of the schedule, divided by kappa.
    """
    inst = instance or schedule.instance
    kappa = Fraction(kappa)
    lam = to_fraction(lam)
    if not 0 < lam < 1 or kappa < 1:
        raise CertificateError("need 0 < lambda < 1 and kappa >= 1")
    scale = _lcm_denominator(inst.w)
    iw = [int(w * scale) for w in inst.w]
    origin = schedule.origin
    alpha = [Fraction(0)] * inst.n
    pieces = []
    for l, rates in enumerate(schedule.rates):
        a, b = schedule.events[l], schedule.events[l + 1]
        unfinished = schedule.unfinished(a)
        if not unfinished:
            break
        ratio = {j: rates.get(j, Fraction(0)) / inst.jobs[j].p for j in unfinished}
        zeta = _quantile([(ratio[j], iw[j]) for j in unfinished], lam)
        for j in unfinished:
            if ratio[j] <= zeta:
                alpha[j] += inst.jobs[j].w * (b - a)
        entry = schedule.solutions[l] if schedule.solutions else None
        eta = _row_vector(inst, entry[0], entry[1]) if entry else _row_vector(inst, [], None)
        pieces.append((a - origin, b - origin, zeta, eta))
    segments = []
    tail = [Fraction(0)] * dual_rows(inst)[1]
    for a, b, zeta, eta in reversed(pieces):
        slope = tuple(-zeta * e / kappa for e in eta)
        const = tuple((zeta * e * b + tl) / kappa for e, tl in zip(eta, tail))
        segments.append(BetaSegment(a, b, const, slope))
        tail = [tl + zeta * e * (b - a) for e, tl in zip(eta, tail)]
    segments.reverse()
    factor = lam - 1 / ((1 - lam) * kappa)
    claimed = kappa / factor if factor > 0 else None
    cell = _cell_width(inst, schedule.events, origin)
    return DualCertificate("general", kappa, alpha, segments, cell, origin, claimed,
                           _objective(alpha, segments), _shifted_alg(schedule), lam=lam)


def wrr_tight_certificate(instance: Instance) -> DualCertificate:
    """Weighted round robin on one machine: alpha_j = w_j C_j and, on the stretch
    [q_{i-1}, q_i) where the i-th job in WSPT order would run alone,
    beta(t) = (w_i / p_i)(C_i - t)."""
    if not isinstance(instance.model, Single):
        raise CertificateError("the round robin certificate needs a single machine")
    if not instance.uniform_release:
        raise CertificateError("the round robin certificate needs a common release date")
    if any(p.denominator != 1 for p in instance.p):
        raise CertificateError("processing requirements must be integers")
    origin = instance.r[0]
    order = wspt_order(instance.p, instance.w)
    ps = [instance.p[j] for j in order]
    ws = [instance.w[j] for j in order]
    comp_sorted = wrr_completion_times(ps, ws)
    comp = [Fraction(0)] * instance.n
    for pos, j in enumerate(order):
        comp[j] = comp_sorted[pos]
    segments = []
    q = Fraction(0)
    for pos in range(instance.n):
        rate = ws[pos] / ps[pos]
        segments.append(BetaSegment(q, q + ps[pos], (rate * comp_sorted[pos],), (-rate,)))
        q += ps[pos]
    alpha = [w * c for w, c in zip(instance.w, comp)]
    alg = sum(alpha, Fraction(0))
    return DualCertificate("wrr", Fraction(1), alpha, segments, Fraction(1), origin, Fraction(2),
                           _objective(alpha, segments), alg, notes={"completions": comp})


@dataclass
class Verdict:
    feasible: bool
    dual_objective: Fraction
    max_violation: Fraction
    bound: Fraction | None
    message: str
    witness: dict[str, Any] | None = None
    report: DualCheckReport | None = None

    def to_dict(self) -> dict[str, Any]:
        def num(v):
            return fraction_to_json(v) if isinstance(v, Fraction) else v
        witness = None if self.witness is None else {k: num(v) if isinstance(v, Fraction) else v
                                                     for k, v in self.witness.items()}
        return {"feasible": self.feasible, "dual_objective": float(self.dual_objective),
                "max_violation": float(self.max_violation),
                "bound": None if self.bound is None else float(self.bound),
                "message": self.message, "witness": witness}


def _fmt(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{float(v):.4g}"


def verify_certificate(certificate: DualCertificate, instance: Instance, kappa: Fraction | int | None = None,
                       tol: float = 0) -> Verdict:
    """Re-check a certificate from scratch and state the bound it implies.

    The bound is the claimed ratio when the objective identity behind the
    claim holds (within ``tol`` relative to ALG), else the ratio achieved by
    the recomputed dual objective.
    """
    kappa = Fraction(kappa) if kappa is not None else certificate.kappa
    tol_f = to_fraction(tol)
    report = dual_constraint_check(instance, kappa, certificate, tol_f)
    scale = max(Fraction(1), abs(certificate.alg))
    mismatch = abs(report.dual_objective - certificate.dual_objective)
    if not report.feasible:
        w = report.witness
        where = ", ".join(f"{k}={_fmt(v) if isinstance(v, Fraction) else v}" for k, v in w.items()
                          if k in ("type", "job", "row", "time", "segment"))
        return Verdict(False, report.dual_objective, report.max_violation, None,
                       f"infeasible at ({where}); violation {float(report.max_violation):.3e}", w, report)
    if mismatch > tol_f * scale:
        return Verdict(False, report.dual_objective, report.max_violation, None,
                       f"stored dual objective differs from recomputed value by {float(mismatch):.3e}",
                       {"type": "objective", "stored": certificate.dual_objective,
                        "recomputed": report.dual_objective}, report)
    obj = report.dual_objective
    if obj <= 0:
        return Verdict(True, obj, report.max_violation, None, "feasible; non-positive objective implies no bound",
                       None, report)
    bound = kappa * certificate.alg / obj
    claimed = certificate.claimed_ratio
    if claimed is not None and bound <= claimed * (1 + tol_f):
        bound = claimed
    return Verdict(True, obj, report.max_violation, bound, f"feasible; ALG ≤ {_fmt(bound)}·OPT", None, report)
