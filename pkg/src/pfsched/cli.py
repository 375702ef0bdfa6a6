"""Command-line harness: runs, certificates, lower-bound families, sweeps, LP bounds and rounding.

Every command writes one JSON document (schema-versioned, keys sorted) to
stdout or ``--out``; ``sweep`` writes CSV.  Timing lives under its own key
and is left out of the document digest, so identical arguments give
identical digests.

Exit codes: 0 success, 1 bad input or usage, 2 solver failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import baselines, certify, lp
from .egsolve import SolverError, rates_for_jobs
from .model import (Instance, InstanceError, RandomParams, Related, Single, gen_migration_lb,
                    gen_nonmonotone_counterexample, gen_rr_lb_simple, gen_rr_lb_table,
                    load_instance, migration_ratio_formula, random_instance, serialize_instance,
                    fraction_to_json, to_fraction)
from .pf import EngineError, run_pf, run_wrr_fast

SCHEMA_VERSION = 1
CSV_VERSION = 1
CSV_COLUMNS = ["csv_version", "seed", "kind", "n", "m", "algorithm", "objective", "lp1", "reference",
               "reference_value", "ratio", "certificate", "certified_bound", "bound_holds", "error"]
TARGETS = {"rr-simple": 2.0746, "rr-table": 2.1906}
ALGORITHMS = ("pf", "srpt", "spt-related", "wspt-np")
CERTIFICATES = ("monpsp", "structured", "general", "wrr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message)


def _num(v: Any) -> Any:
    if isinstance(v, Fraction):
        return fraction_to_json(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _float(v: Any) -> float | None:
    return None if v is None else float(v)


def instance_digest(instance: Instance) -> str:
    return hashlib.sha256(serialize_instance(instance).encode()).hexdigest()[:16]


def _document(command: str, body: dict[str, Any], seconds: float) -> dict[str, Any]:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, **body}
    canonical = json.dumps(doc, sort_keys=True, default=_num)
    doc["digest"] = hashlib.sha256(canonical.encode()).hexdigest()[:16]
    doc["timing"] = {"seconds": round(seconds, 6)}
    return doc


def _ratio(num: Any, den: Any) -> float | None:
    if den is None or num is None or den <= 0:
        return None
    return float(Fraction(num) / Fraction(den)) if not isinstance(num, float) else num / float(den)


def _schedule_algorithm(name: str, instance: Instance, args: argparse.Namespace):
    if name == "pf":
        return run_pf(instance, args.solver, args.tol)
    if name == "srpt":
        return baselines.srpt_single(instance)
    if name == "spt-related":
        return baselines.preemptive_spt_related(instance)
    return baselines.wspt_nonpreemptive_unrelated(instance)


def _reference(instance: Instance) -> tuple[str, Fraction] | None:
    """Exact optimum when a closed form or optimal rule applies."""
    unit = all(w == 1 for w in instance.w)
    if unit and isinstance(instance.model, Single):
        return "srpt", baselines.srpt_single(instance).objective
    if unit and instance.uniform_release and isinstance(instance.model, Related):
        mv = baselines.mu_vector(instance.model.speeds, instance.n)
        return "opt", mv.objective(instance.p) + sum(instance.w) * instance.r[0]
    return None


def _lp1(instance: Instance) -> Fraction | None:
    prob = lp.build_time_indexed(instance, 1, cell=lp.default_cell(instance))
    sol = lp.simplex_solve(prob)
    return sol.objective if sol.status == "optimal" else None


# ---------------------------------------------------------------------------
# commands


def cmd_run(args: argparse.Namespace) -> dict[str, Any]:
    instance = load_instance(args.instance)
    sched = _schedule_algorithm(args.algorithm, instance, args)
    body: dict[str, Any] = {
        "instance_digest": instance_digest(instance),
        "algorithm": args.algorithm,
        "objective": sched.objective,
        "objective_float": float(sched.objective),
        "completions": list(sched.completions),
        "baselines": {},
        "ratios": {},
    }
    ref = _reference(instance)
    if ref:
        body["baselines"][ref[0]] = ref[1]
        body["ratios"][f"objective/{ref[0]}"] = _ratio(sched.objective, ref[1])
    if args.lp and instance.n <= 8:
        value = _lp1(instance)
        body["lp_bounds"] = {"lp1": value}
        body["ratios"]["objective/lp1"] = _ratio(sched.objective, value)
    if args.schedule:
        body["schedule"] = sched.to_dict()
    return body


def _build_certificate(kind: str, instance: Instance, args: argparse.Namespace) -> certify.DualCertificate:
    if kind == "wrr":
        return certify.wrr_tight_certificate(instance)
    sched = run_pf(instance, args.solver, args.tol)
    if kind == "structured":
        return certify.structured_certificate(sched, instance, args.solver)
    if kind == "monpsp":
        return certify.monpsp_certificate(sched, instance, args.solver, kappa=to_fraction(args.kappa or 2),
                                          tol=args.tol)
    return certify.general_psp_certificate(sched, instance, args.solver, kappa=to_fraction(args.kappa or 9),
                                           lam=to_fraction(args.lam or Fraction(2, 3)))


def cmd_certify(args: argparse.Namespace) -> dict[str, Any]:
    instance = load_instance(args.instance)
    cert = _build_certificate(args.kind, instance, args)
    verdict = certify.verify_certificate(cert, instance, tol=args.tol)
    print(verdict.message, file=sys.stderr)
    doc = cert.to_dict()
    doc["cells"] = [{"start": _num(t), "beta": [_num(v) for v in vals]}
                    for t, vals in cert.cell_table(limit=args.cells)]
    return {
        "instance_digest": instance_digest(instance),
        "algorithm": "wrr" if args.kind == "wrr" else "pf",
        "objective": cert.alg + sum(instance.w) * cert.origin,
        "certificate": doc,
        "verdict": verdict.to_dict(),
    }


def _lowerbound_rr(family: str, n: int) -> dict[str, Any]:
    inst = gen_rr_lb_simple(n) if family == "rr-simple" else gen_rr_lb_table(n)
    p = [float(v) for v in inst.p]
    r = [float(v) for v in inst.r]
    rr = sum(run_wrr_fast(p, [1.0] * len(p), r))
    srpt = baselines.srpt_objective_fast(p, r)
    return {"jobs": inst.n, "rr_objective": rr, "srpt_objective": srpt, "ratio": rr / srpt,
            "ratio_denominator": "srpt", "target": TARGETS[family]}


def _lowerbound_migration(n: int) -> dict[str, Any]:
    inst = gen_migration_lb(n)
    fast_only = Instance(inst.jobs, Related(inst.model.speeds[:1]))
    # a non-migratory algorithm keeping every job on the fast machine, scheduled optimally there
    constrained = baselines.preemptive_spt_related(fast_only).objective
    # the alternative: one job per machine
    split = sum((1 / s for s in inst.model.speeds), Fraction(0))
    opt = baselines.mu_vector(inst.model.speeds, n).objective(inst.p)
    pf = run_pf(inst).objective
    ratio = float(constrained / split)
    target = migration_ratio_formula(n)
    return {"jobs": n, "constrained_objective": constrained, "split_objective": split, "ratio": ratio,
            "ratio_denominator": "split", "target": target, "relative_error": abs(ratio - target) / target,
            "pf_objective": pf, "opt_objective": opt, "pf_over_opt": float(pf / opt)}


def _lowerbound_nonmonotone(args: argparse.Namespace) -> dict[str, Any]:
    inst = gen_nonmonotone_counterexample()
    full = rates_for_jobs(inst, (0, 1, 2), args.solver if args.solver != "auto" else "unrelated", args.tol)
    part = rates_for_jobs(inst, (0, 1), args.solver if args.solver != "auto" else "unrelated", args.tol)
    before, after = float(full.y[1]), float(part.y[1])
    print(f"job 2: rate drops from {before:.6f} to {after:.6f} when job 3 leaves", file=sys.stderr)
    return {"rates_all": [float(v) for v in full.y], "rates_without_job3": [float(v) for v in part.y],
            "job": 2, "rate_before": before, "rate_after": after, "target": [4 / 3, 1.0]}


def cmd_lowerbound(args: argparse.Namespace) -> dict[str, Any]:
    if args.family in ("rr-simple", "rr-table"):
        body = _lowerbound_rr(args.family, args.n or (2000 if args.family == "rr-simple" else 500))
    elif args.family == "migration":
        body = _lowerbound_migration(args.n or 100)
    else:
        body = _lowerbound_nonmonotone(args)
    if "ratio" in body:
        print(f"{args.family}: ratio {body['ratio']:.4f} (target {body['target']:.4f})", file=sys.stderr)
    return {"family": args.family, **body}


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def _sweep_rows(seed: int, args: argparse.Namespace) -> list[dict[str, Any]]:
    params = RandomParams(kind=args.kind, n=args.n, m=args.m, p_range=_parse_range(args.p),
                          w_range=_parse_range(args.w), r_range=_parse_range(args.r),
                          s_range=_parse_range(args.s), rows=args.rows, restricted=args.restricted)
    base = {"csv_version": CSV_VERSION, "seed": seed, "kind": args.kind, "n": args.n, "m": args.m}
    try:
        instance = random_instance(params, seed)
        lp1 = _lp1(instance) if args.lp else None
        ref = _reference(instance)
    except Exception as exc:  # recorded per row; the sweep goes on
        return [{**base, "algorithm": "", "error": f"{type(exc).__name__}: {exc}"}]
    rows = []
    for alg in args.algorithms.split(","):
        row = {**base, "algorithm": alg}
        try:
            sched = _schedule_algorithm(alg, instance, args)
            row["objective"] = float(sched.objective)
            row["lp1"] = _float(lp1)
            cert_bound = None
            lower = None
            if args.certificate and alg == "pf":
                cert = _build_certificate(args.certificate, instance, args)
                verdict = certify.verify_certificate(cert, instance, tol=args.tol)
                row["certificate"] = args.certificate
                if verdict.feasible and verdict.bound is not None:
                    cert_bound = verdict.bound
                    # weak duality: OPT >= dual / kappa for the shifted instance
                    lower = verdict.dual_objective / cert.kappa + sum(instance.w) * cert.origin
                    row["certified_bound"] = float(cert_bound)
            if ref is not None:
                row["reference"], row["reference_value"] = ref[0], float(ref[1])
                denom = ref[1]
            else:
                candidates = {"lp1": lp1, "dual": lower}
                name, denom = max(((k, v) for k, v in candidates.items() if v is not None),
                                  key=lambda kv: kv[1], default=(None, None))
                row["reference"] = "lower-bracket:" + name if name else ""
                row["reference_value"] = _float(denom)
            row["ratio"] = _ratio(sched.objective, denom)
            if cert_bound is not None and row["ratio"] is not None:
                row["bound_holds"] = row["ratio"] <= float(cert_bound) * (1 + 1e-9)
        except (SolverError, EngineError, InstanceError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def cmd_sweep(args: argparse.Namespace) -> str:
    seeds = list(range(args.seed, args.seed + args.seeds))
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        results = list(pool.map(lambda s: _sweep_rows(s, args), seeds))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rows in results:
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def cmd_lp(args: argparse.Namespace) -> dict[str, Any]:
    instance = load_instance(args.instance)
    kappa = to_fraction(args.kappa or 1)
    cell = to_fraction(args.cell) if args.cell else lp.default_cell(instance)
    prob = lp.build_time_indexed(instance, kappa, horizon=args.horizon, cell=cell)
    sol = lp.simplex_solve(prob)
    body: dict[str, Any] = {"instance_digest": instance_digest(instance), "kappa": kappa, "cell": cell,
                            "time_indexed": {"status": sol.status, "objective": sol.objective,
                                             "variables": prob.shape[1], "rows": prob.shape[0]}}
    if args.eps is not None:
        iprob = lp.build_interval_indexed(instance, to_fraction(args.eps), to_fraction(args.delta))
        isol = lp.simplex_solve(iprob)
        body["interval_indexed"] = {"status": isol.status, "objective": isol.objective,
                                    "bounds": list(iprob.meta["bounds"])}
    return body


def cmd_round(args: argparse.Namespace) -> dict[str, Any]:
    instance = load_instance(args.instance)
    eps, delta = to_fraction(args.eps), to_fraction(args.delta)
    prob = lp.build_interval_indexed(instance, eps, delta)
    sol = lp.simplex_solve(prob)
    if sol.status != "optimal":
        raise SolverError(f"interval-indexed LP is {sol.status}")
    first = lp.alpha_point_round(instance, prob, sol, seed=args.seed)
    alphas = np.array([lp.sample_alpha(args.seed + k) for k in range(args.samples)])
    objs, worst = lp.rounded_objectives(instance, prob, sol, alphas)
    mean = float(objs.mean())
    stderr = float(objs.std(ddof=1) / math.sqrt(len(objs))) if len(objs) > 1 else 0.0
    bound = float(2 * (1 + eps) * (1 + delta) * sol.objective)
    return {"instance_digest": instance_digest(instance), "eps": eps, "delta": delta,
            "lp_interval_objective": sol.objective, "samples": args.samples, "seed": args.seed,
            "first_sample": {"alpha": _float(first.solutions[0]["alpha"]), "objective": first.objective},
            "mean_objective": mean, "standard_error": stderr, "expectation_bound": bound,
            "per_sample_bound_holds": bool((worst <= 1 + 1e-9).all())}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--solver", choices=("auto", "packing", "related", "unrelated"), default="auto")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--kappa", type=str, default=None)
    common.add_argument("--lambda", dest="lam", type=str, default=None)
    common.add_argument("--out", type=str, default=None)

    parser = _Parser(prog="pfsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="schedule an instance file")
    p.add_argument("instance")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="pf")
    p.add_argument("--lp", action="store_true", help="also report the LP(1) lower bound")
    p.add_argument("--schedule", action="store_true", help="include the full event table")

    p = sub.add_parser("certify", parents=[common], help="build and check a dual certificate")
    p.add_argument("instance")
    p.add_argument("--kind", choices=CERTIFICATES, required=True)
    p.add_argument("--cells", type=int, default=1000, help="cap on per-cell rows in the output")

    p = sub.add_parser("lowerbound", parents=[common], help="reproduce a lower-bound family")
    p.add_argument("family", choices=("rr-simple", "rr-table", "migration", "nonmonotone"))
    p.add_argument("--n", type=int, default=None)

    p = sub.add_parser("sweep", parents=[common], help="random instances to CSV")
    p.add_argument("--kind", choices=("single", "identical", "related", "unrelated", "packing"), default="single")
    p.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds from --seed")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--p", default="1:5", help="processing range lo:hi")
    p.add_argument("--w", default="1:1")
    p.add_argument("--r", default="0:0")
    p.add_argument("--s", default="1:3")
    p.add_argument("--restricted", action="store_true")
    p.add_argument("--algorithms", default="pf")
    p.add_argument("--certificate", choices=CERTIFICATES, default=None)
    p.add_argument("--lp", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("lp", parents=[common], help="time-indexed (and interval-indexed) LP bounds")
    p.add_argument("instance")
    p.add_argument("--horizon", type=int, default=None, help="number of cells")
    p.add_argument("--cell", type=str, default=None)
    p.add_argument("--eps", type=str, default=None)
    p.add_argument("--delta", type=str, default="1/10")

    p = sub.add_parser("round", parents=[common], help="alpha-point rounding of the interval LP")
    p.add_argument("instance")
    p.add_argument("--eps", type=str, default="1/10")
    p.add_argument("--delta", type=str, default="1/10")
    p.add_argument("--samples", type=int, default=1000)
    return parser


COMMANDS: dict[str, Callable[[argparse.Namespace], Any]] = {
    "run": cmd_run, "certify": cmd_certify, "lowerbound": cmd_lowerbound, "sweep": cmd_sweep,
    "lp": cmd_lp, "round": cmd_round,
}


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    start = time.perf_counter()
    try:
        result = COMMANDS[args.command](args)
    except (SolverError, EngineError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except (InstanceError, OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a bug
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if isinstance(result, str):
        _emit(result, args.out)
    else:
        doc = _document(args.command, result, time.perf_counter() - start)
        _emit(json.dumps(doc, sort_keys=True, indent=2, default=_num) + "\n", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
