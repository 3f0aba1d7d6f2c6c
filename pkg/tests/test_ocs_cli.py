import json
import subprocess
import sys

import pytest
import sympy as sp

from ocfactor.cli import main, resolve_path
from ocfactor.errors import OcsFormatError
from ocfactor.ocs import dumps, format_candidate, loads

p1, p2, q1, q2, u1, u2, v1, y1 = sp.symbols("p1 p2 q1 q2 u1 u2 v1 y1")

MINIMAL = """\
system s   # comment
states q1 q2
controls u1
dyn q1' = q2
dyn q2' = u1
cost (1/2)*u1^2
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# -- file format --------------------------------------------------------------


def test_minimal_file():
    sf = loads(MINIMAL)
    assert sf.system.name == "s"
    assert sf.system.dynamics == (q2, u1)
    assert sf.candidates == ()


def test_corpus_summaries(corpus):
    assert corpus["e1"].summary() == "system e1: 2 states, 2 controls, 1 candidate"
    assert corpus["e1"].system.charts == (q1,)
    assert [c.name for c in corpus["e3"].candidates] == ["combined", "horizontal_a", "horizontal_b"]
    assert corpus["e2"].candidate("reconstructed").qtilde is None


def test_declared_factor_block(corpus):
    c = corpus["e3"].candidate("horizontal_b")
    assert c.declared.dynamics == (v1,)
    assert c.declared.controls == (v1,)
    assert c.declared.cost == sp.Rational(1, 2) * (v1**2 - y1**2)


@pytest.mark.parametrize("name", ["e1", "e2", "e3", "e4", "e1_identity", "e3_identity"])
def test_dump_load_round_trip(corpus, name):
    sf = corpus[name]
    again = loads(dumps(sf))
    assert again.system == sf.system
    assert again.candidates == sf.candidates


def test_chart_direction():
    sf = loads(MINIMAL + "chart 1 < q1\n")
    assert sf.system.charts == (q1 - 1,)


def test_user_synthesis_line():
    sf = loads(MINIMAL + "synth u1 = p2\n")
    assert sf.synthesis.values == (p2,) and sf.synthesis.origin == "user-supplied"


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("", 1, "empty"),
        ("# only a comment\n", 1, "empty"),
        ("states q1\n", 1, "system"),
        (MINIMAL + "dyn q1' = q1\n", 7, "duplicate dynamics"),
        (MINIMAL.replace("dyn q2' = u1\n", "dyn q2' = u1\ndyn q3' = q1\n"), 1, "dynamics/state count mismatch"),
        (MINIMAL.replace("cost (1/2)*u1^2", "cost (1/2)*w1^2"), 6, "unknown symbol 'w1'"),
        (MINIMAL.replace("cost (1/2)*u1^2", "cost (1/2)*+"), 6, "unexpected"),
        (MINIMAL + "candidate c\nx1 = p1\n", 7, "x1..x1 and y1..y1"),
        (MINIMAL + "candidate c\nx1 = p1\ny1 = u1\n", 9, "unknown symbol 'u1'"),
        (MINIMAL + "candidate c\nx1 = p1\ny1 = q1\nfactor cost v1\n", 7, "factor block"),
        (MINIMAL + "bogus line\n", 7, "unknown declaration"),
        (MINIMAL + "candidate c\nx1 = p1\ny1 = q1\ncost q1\n", 10, "after a candidate"),
    ],
)
def test_format_errors(text, line, fragment):
    with pytest.raises(OcsFormatError) as exc:
        loads(text)
    assert exc.value.line == line
    assert fragment in str(exc.value)


def test_error_column_points_into_expression():
    with pytest.raises(OcsFormatError) as exc:
        loads(MINIMAL.replace("cost (1/2)*u1^2", "cost (1/2)*w1^2"))
    assert exc.value.column == len("cost (1/2)*") + 1


def test_format_candidate(corpus):
    text = format_candidate(corpus["e1"].candidate("reduce1"))
    assert text.splitlines() == ["candidate reduce1", "x1 = 2*p2", "y1 = q1^2", "qtilde = 2*p2^2 + 4*q1^3/3"]


def test_bundled_corpus_resolution():
    assert resolve_path("examples/e1.ocs").name == "e1.ocs"
    assert resolve_path("e4.ocs").is_file()


# -- command line ---------------------------------------------------------------


def test_parse_command(capsys):
    code, out, _ = run(capsys, "parse", "examples/e1.ocs")
    assert code == 0
    assert out.startswith("system e1: 2 states, 2 controls, 1 candidate")
    assert "q1' = p2/q1" in out


def test_parse_json(capsys):
    code, out, _ = run(capsys, "parse", "e4.ocs", "--json")
    data = json.loads(out)
    assert code == 0 and data["hamiltonian"] == "p1*p2 - q2"
    assert data["synthesis"] == {"u1": "p2", "u2": "p1"}


def test_parse_errors_exit_two(capsys, tmp_path):
    bad = tmp_path / "bad.ocs"
    bad.write_text(MINIMAL.replace("dyn q2' = u1\n", "dyn q2' = u1\ndyn q3' = q1\n"))
    code, _, err = run(capsys, "parse", str(bad))
    assert code == 2 and "dynamics/state count mismatch" in err and "line 1" in err
    empty = tmp_path / "empty.ocs"
    empty.write_text("")
    assert run(capsys, "parse", str(empty))[0] == 2
    assert run(capsys, "parse", str(tmp_path / "missing.ocs"))[0] == 2


def test_usage_errors_exit_two(capsys):
    assert run(capsys, "verify", "e1.ocs", "--candidate", "nope")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_verify_first_example(capsys):
    code, out, _ = run(capsys, "verify", "e1.ocs", "--candidate", "reduce1")
    assert code == 0
    assert "overall: pass" in out


def test_verify_stated_second_example_potential(capsys):
    code, out, _ = run(capsys, "verify", "e2.ocs", "--candidate", "stated_qtilde")
    assert code == 1
    assert "factorization_equation  fail" in out
    assert "d(p1^2/2 - p1*p2 + p2^2/2)" in out


def test_verify_reconstructed_second_example(capsys):
    code, out, _ = run(capsys, "verify", "e2.ocs", "--candidate", "reconstructed")
    assert code == 0
    assert "qtilde_source: reconstructed" in out
    assert "qtilde: -p1*q1 + p1*q2 + p2*q1 - p2*q2 + q1^2/2 - q1*q2 + q2^2/2" in out


def test_verify_third_example_exit_code(capsys):
    assert run(capsys, "verify", "e3.ocs", "--samples", "30")[0] == 1


def test_json_report_schema_round_trip(capsys):
    code, out, _ = run(capsys, "verify", "e1.ocs", "--json")
    data = json.loads(out)
    assert code == 0 and data["overall"] == "pass"
    (report,) = data["reports"]
    for check in report["checks"]:
        assert {"name", "status", "symbolic", "numeric_residual", "tolerance", "detail"} <= set(check)
    assert json.loads(json.dumps(data)) == data


def test_json_failure_carries_witness(capsys):
    _, out, _ = run(capsys, "verify", "e2.ocs", "--candidate", "stated_qtilde", "--json")
    checks = {c["name"]: c for c in json.loads(out)["reports"][0]["checks"]}
    assert checks["factorization_equation"]["symbolic"] == "no"
    assert checks["factorization_equation"]["witness"]


@pytest.mark.parametrize(
    "file, cand, dyn, cost",
    [
        ("e1.ocs", "reduce1", "v1", "v1^2/2 + 4*y1^(3/2)/3"),
        ("e2.ocs", "reconstructed", "v1", "v1^2/2 - y1^2/2"),
        ("e4.ocs", "derived", "v1", "v1^2/2"),
    ],
)
def test_reduce(capsys, tmp_path, file, cand, dyn, cost):
    out_file = tmp_path / "factor.ocs"
    code, out, _ = run(capsys, "reduce", file, "--candidate", cand, "--json", "--output", str(out_file))
    data = json.loads(out)
    assert code == 0
    assert data["dynamics"] == {"y1'": dyn}
    assert data["cost"] == cost
    assert data["synthesis"] == {"v1": "x1"}
    assert data["mu"] == 1
    # the generated file re-verifies
    assert run(capsys, "verify", str(out_file))[0] == 0


def test_reduce_refuses_failing_candidate(capsys):
    code, _, err = run(capsys, "reduce", "e2.ocs", "--candidate", "stated_qtilde")
    assert code == 1 and "does not verify" in err


def test_reduce_needs_a_choice_between_candidates(capsys):
    assert run(capsys, "reduce", "e2.ocs")[0] == 2


def test_simulate_first_example(capsys):
    code, out, _ = run(capsys, "simulate", "e1.ocs", "--init", "1,1,1,1", "--json")
    data = json.loads(out)
    assert code == 0
    assert data["drift_Gbar"] <= 1e-6 and data["drift_H"] <= 1e-6
    assert data["mapped_residual"] <= 1e-5


def test_simulate_fourth_example_closed_form(capsys):
    code, out, _ = run(capsys, "simulate", "e4.ocs", "--init", "1,1,0,0", "--json")
    data = json.loads(out)
    assert data["mapped_endpoint"]["y1"] == pytest.approx(2.0, abs=1e-9)
    assert data["mapped_endpoint"]["x1"] == pytest.approx(1.0)


def test_simulate_off_chart_start(capsys):
    code, _, err = run(capsys, "simulate", "e1.ocs", "--init", "1,1,0,1")
    assert code == 2 and "chart" in err


def test_simulate_bad_init(capsys):
    assert run(capsys, "simulate", "e1.ocs", "--init", "1,2")[0] == 2


def test_boundary_commands(capsys):
    _, out, _ = run(capsys, "boundary", "e4.ocs", "--json")
    data = json.loads(out)
    assert data["counts"] == {"UnderDetermined": 20}
    _, out, _ = run(capsys, "boundary", "e1.ocs", "--fibers", "5")
    assert "WellDetermined: 5/5" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ocfactor", "parse", "e1.ocs"], capture_output=True, text=True)
    assert res.returncode == 0 and "2 states" in res.stdout
