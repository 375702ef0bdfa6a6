import csv
import io
import json

import pytest

from pfsched.cli import CSV_COLUMNS, main
from pfsched.model import Related, Unrelated, Packing, instance_to_dict

from conftest import make

from fractions import Fraction as F


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_instance(tmp_path, inst, name="inst.json"):
    path = tmp_path / name
    path.write_text(json.dumps(instance_to_dict(inst)))
    return str(path)


def test_run_pf(two_jobs_path, capsys):
    code, out, _ = run_cli(["run", two_jobs_path], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["objective"] == 5 and doc["schema_version"] == 1
    assert doc["baselines"]["srpt"] == 4
    assert doc["ratios"]["objective/srpt"] == 1.25


def test_run_srpt(two_jobs_path, capsys):
    code, out, _ = run_cli(["run", two_jobs_path, "--algorithm", "srpt"], capsys)
    assert code == 0 and json.loads(out)["objective"] == 4


def test_unknown_algorithm_is_usage_error(two_jobs_path, capsys):
    code, _, err = run_cli(["run", two_jobs_path, "--algorithm", "magic"], capsys)
    assert code == 1 and "usage" in err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run_cli(["run", str(bad)], capsys)[0] == 1
    assert run_cli(["run", str(tmp_path / "missing.json")], capsys)[0] == 1


def test_solver_error_exit_code(tmp_path, capsys, monkeypatch):
    import pfsched.cli as cli
    from pfsched.egsolve import SolverError

    def boom(*args, **kwargs):
        raise SolverError("did not converge")

    monkeypatch.setattr(cli, "run_pf", boom)
    path = write_instance(tmp_path, make([(1, 1, 0)], Related((F(1),))))
    assert run_cli(["run", path], capsys)[0] == 2


def test_internal_error_exit_code(two_jobs_path, capsys, monkeypatch):
    import pfsched.cli as cli
    monkeypatch.setitem(cli.COMMANDS, "run", lambda args: 1 / 0)
    assert run_cli(["run", two_jobs_path], capsys)[0] == 3


def test_result_documents_reproducible(two_jobs_path, capsys):
    first = json.loads(run_cli(["run", two_jobs_path, "--lp"], capsys)[1])
    second = json.loads(run_cli(["run", two_jobs_path, "--lp"], capsys)[1])
    first.pop("timing"), second.pop("timing")
    assert first == second


def test_certify_structured_related(tmp_path, capsys):
    path = write_instance(tmp_path, make([(3, 1, 0), (3, 1, 0)], Related((F(2), F(1)))))
    code, out, err = run_cli(["certify", path, "--kind", "structured"], capsys)
    assert code == 0
    assert "ALG ≤ 2·OPT" in err
    assert json.loads(out)["verdict"]["feasible"]


def test_certify_monpsp_restricted(tmp_path, capsys):
    S = ((F(1), F(1), F(0)), (F(0), F(1), F(1)))
    path = write_instance(tmp_path, make([(2, 1, 0), (1, 1, 1), (3, 2, 0)], Unrelated(S)))
    code, _, err = run_cli(["certify", path, "--kind", "monpsp", "--kappa", "2"], capsys)
    assert code == 0 and "ALG ≤ 4·OPT" in err


def test_certify_general_packing(tmp_path, capsys):
    B = ((F(1), F(2), F(0)), (F(0), F(1), F(1)))
    path = write_instance(tmp_path, make([(2, 1, 0), (1, 3, 1), (3, 2, 0)], Packing(B)))
    code, _, err = run_cli(["certify", path, "--kind", "general", "--kappa", "9", "--lambda", "2/3"], capsys)
    assert code == 0 and "ALG ≤ 27·OPT" in err


def test_certify_incompatible_kind(tmp_path, capsys):
    path = write_instance(tmp_path, make([(1, 1, 0)], Related((F(1),))))
    assert run_cli(["certify", path, "--kind", "wrr"], capsys)[0] == 1


def test_lowerbound_families(capsys):
    doc = json.loads(run_cli(["lowerbound", "rr-simple", "--n", "200"], capsys)[1])
    assert doc["ratio"] > 2.0 and doc["ratio_denominator"] == "srpt"
    doc = json.loads(run_cli(["lowerbound", "migration", "--n", "4"], capsys)[1])
    assert doc["constrained_objective"] == 5 and doc["split_objective"] == "7/2" and abs(doc["ratio"] - 10 / 7) < 1e-12


def test_lowerbound_nonmonotone(capsys):
    code, out, err = run_cli(["lowerbound", "nonmonotone"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert abs(doc["rate_before"] - 4 / 3) < 1e-6 and abs(doc["rate_after"] - 1) < 1e-6
    assert "job 2" in err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_related_uniform_ratio_at_most_two(capsys):
    code, out, _ = run_cli(["sweep", "--kind", "related", "--seeds", "100", "--n", "4", "--m", "2"], capsys)
    rows = read_csv(out)
    assert code == 0 and len(rows) == 100
    assert all(r["reference"] == "opt" for r in rows)
    assert max(float(r["ratio"]) for r in rows) <= 2 + 1e-9


def test_sweep_single_with_releases(capsys):
    code, out, _ = run_cli(["sweep", "--kind", "single", "--seeds", "100", "--n", "5", "--r", "0:6"], capsys)
    rows = read_csv(out)
    assert all(r["reference"] == "srpt" for r in rows)
    assert max(float(r["ratio"]) for r in rows) <= 3


def test_sweep_certificate_bounds_hold(capsys):
    args = ["sweep", "--kind", "packing", "--seeds", "6", "--n", "3", "--w", "1:3", "--r", "0:2",
            "--certificate", "general", "--lp", "--tol", "1e-7"]
    rows = read_csv(run_cli(args, capsys)[1])
    assert all(r["bound_holds"] == "True" for r in rows)
    assert all(r["reference"].startswith("lower-bracket") for r in rows)


def test_sweep_empty(capsys):
    out = run_cli(["sweep", "--seeds", "0"], capsys)[1]
    assert out.strip() == ",".join(CSV_COLUMNS)


def test_sweep_deterministic(capsys):
    args = ["sweep", "--kind", "unrelated", "--seeds", "5", "--workers", "3"]
    assert run_cli(args, capsys)[1] == run_cli(args, capsys)[1]


def test_lp_and_round(two_jobs_path, capsys):
    doc = json.loads(run_cli(["lp", two_jobs_path, "--eps", "1/2"], capsys)[1])
    assert doc["time_indexed"]["objective"] == "5/2"
    assert doc["interval_indexed"]["status"] == "optimal"
    doc = json.loads(run_cli(["round", two_jobs_path, "--samples", "200", "--seed", "3"], capsys)[1])
    assert doc["per_sample_bound_holds"]
    assert doc["mean_objective"] <= doc["expectation_bound"]


def test_out_flag(two_jobs_path, tmp_path, capsys):
    target = tmp_path / "result.json"
    assert run_cli(["run", two_jobs_path, "--out", str(target)], capsys)[0] == 0
    assert json.loads(target.read_text())["objective"] == 5
