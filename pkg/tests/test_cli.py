"""End-to-end command line checks running main() in process."""

import io

import pytest

from maltcube.algebras import FiniteAlgebra, parse_algebra, render_algebra
from maltcube.cli import main
from maltcube.entailment import condition_index
from maltcube.terms import (
    hagemann_mitschke_condition,
    jonsson_condition,
    parse_condition,
    random_condition,
    render_condition,
    union_conditions,
)

LATTICE_TEXT = "universe: 2\nop meet/2:\n0 0\n0 1\nop join/2:\n0 1\n1 1\n"

CP3_TEXT = render_condition(hagemann_mitschke_condition(3))


@pytest.fixture
def lattice_file(tmp_path):
    path = tmp_path / "lattice.alg"
    path.write_text(LATTICE_TEXT)
    return str(path)


@pytest.fixture
def cp3_file(tmp_path):
    path = tmp_path / "cp3.cond"
    path.write_text(CP3_TEXT)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- check -------------------------------------------------------------------


def test_check_applicable(capsys, cp3_file):
    code, out, _ = run(capsys, "check", cp3_file)
    assert code == 0
    lines = out.splitlines()
    assert "consistent: yes" in lines
    assert "cube: none" in lines
    assert "applicable: yes" in lines


def test_check_cube_entailing(capsys, tmp_path):
    path = tmp_path / "hm2.cond"
    assert main(["gen", "hm", "2", "-o", str(path)]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "check", str(path))
    assert code == 1
    assert "applicable: no (cube identities for p_1)" in out.splitlines()
    code, out, _ = run(capsys, "check", "--machine", str(path))
    assert code == 1
    lines = out.splitlines()
    assert "consistent=yes" in lines
    assert "cube=p_1" in lines
    assert "applicable=no" in lines
    assert "reason=cube identities for p_1" in lines
    assert any(line.startswith("witness.p_1=") for line in lines)


def test_check_inconsistent(capsys, tmp_path):
    path = tmp_path / "hm1.cond"
    main(["gen", "hm", "1", "-o", str(path)])
    capsys.readouterr()
    code, out, _ = run(capsys, "check", str(path))
    assert code == 1
    lines = out.splitlines()
    assert "consistent: no" in lines
    assert "applicable: no (inconsistent)" in lines


def test_check_reads_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(CP3_TEXT))
    code, out, _ = run(capsys, "check", "-")
    assert code == 0
    assert "applicable: yes" in out


# --- closure -----------------------------------------------------------------


def test_closure_reports_classes(capsys, tmp_path):
    path = tmp_path / "maltsev.cond"
    path.write_text("signature: p/3\nidentities:\n  p(x,y,y) = x\n  p(x,x,y) = y\n")
    condition = parse_condition(path.read_text())
    index = condition_index(condition)
    code, out, _ = run(capsys, "closure", str(path))
    assert code == 0
    lines = out.splitlines()
    assert f"variables: {index.nvars}" in lines
    assert "inconsistent: no" in lines
    assert f"classes: {len(index.classes())}" in lines
    code, out, _ = run(capsys, "closure", "--machine", str(path))
    class_lines = [l for l in out.splitlines() if l.startswith("class=")]
    assert len(class_lines) == len(index.classes())


def test_closure_vars_override(capsys, tmp_path):
    path = tmp_path / "c.cond"
    path.write_text("signature: h/2\nidentities:\n  h(x,y) = h(y,x)\n")
    code, out, _ = run(capsys, "closure", "--vars", "4", str(path))
    assert code == 0
    assert "variables: 4" in out.splitlines()
    code, _, err = run(capsys, "closure", "--vars", "1", str(path))
    assert code == 2
    assert "error:" in err


# --- gen ---------------------------------------------------------------------


def test_gen_jonsson_round_trip(capsys, tmp_path):
    path = tmp_path / "cd2.cond"
    code, _, _ = run(capsys, "gen", "jonsson", "2", "-o", str(path))
    assert code == 0
    assert parse_condition(path.read_text()) == jonsson_condition(2)


def test_gen_writes_stdout_by_default(capsys):
    code, out, _ = run(capsys, "gen", "hm", "3")
    assert code == 0
    assert parse_condition(out) is not None
    assert "p_1" in out


def test_gen_cube(capsys, tmp_path):
    # columns spell the matrix rows (y,x,x) and (x,x,y) downwards
    code, out, _ = run(capsys, "gen", "cube", "yx", "xx", "xy")
    assert code == 0
    condition = parse_condition(out)
    assert len(condition.identities) == 2
    path = tmp_path / "cube.cond"
    path.write_text(out)
    code, out, _ = run(capsys, "check", str(path))
    assert code == 1
    assert "cube identities" in out


def test_gen_union(capsys, tmp_path, cp3_file):
    cd3 = tmp_path / "cd3.cond"
    main(["gen", "jonsson", "3", "-o", str(cd3)])
    capsys.readouterr()
    code, out, _ = run(capsys, "gen", "union", str(cd3), cp3_file)
    assert code == 0
    expected = union_conditions(
        [jonsson_condition(3), parse_condition(CP3_TEXT)]
    )
    assert parse_condition(out) == expected
    code, _, err = run(capsys, "gen", "union", str(cd3), str(cd3))
    assert code == 2
    assert "error:" in err


def test_gen_random_is_seeded(capsys):
    from random import Random

    code, first, _ = run(capsys, "gen", "random", "--seed", "5")
    assert code == 0
    code, second, _ = run(capsys, "gen", "random", "--seed", "5")
    assert first == second == render_condition(random_condition(Random(5)))


# --- extend and model-check --------------------------------------------------


def test_extend_output_parses_and_models(capsys, tmp_path, lattice_file, cp3_file):
    out_path = tmp_path / "ext.alg"
    code, _, _ = run(capsys, "extend", lattice_file, cp3_file, "-o", str(out_path))
    assert code == 0
    text = out_path.read_text()
    assert "# absorbing: 2" in text
    assert any(
        line.startswith("# pattern p_1:") and "(1,2,2)->1" in line
        for line in text.splitlines()
    )
    extended = parse_algebra(text)
    assert extended.size == 3
    code, out, _ = run(capsys, "model-check", str(out_path), cp3_file)
    assert code == 0
    assert "satisfies: yes" in out


def test_extend_rejects_cube_conditions(capsys, lattice_file, tmp_path):
    path = tmp_path / "hm2.cond"
    main(["gen", "hm", "2", "-o", str(path)])
    capsys.readouterr()
    code, _, err = run(capsys, "extend", lattice_file, str(path))
    assert code == 1
    assert "cube identities" in err


def test_model_check_failure_reports_assignment(capsys, tmp_path):
    algebra = tmp_path / "imp.alg"
    algebra.write_text("universe: 2\nop h/2:\n1 1\n0 1\n")
    condition = tmp_path / "comm.cond"
    condition.write_text("signature: h/2\nidentities:\n  h(x,y) = h(y,x)\n")
    code, out, _ = run(capsys, "model-check", str(algebra), str(condition))
    assert code == 1
    lines = out.splitlines()
    assert "satisfies: no" in lines
    assert any(l.startswith("identity: h(") for l in lines)
    assert any(l.startswith("assignment: ") and "x=" in l for l in lines)


# --- smp ---------------------------------------------------------------------


def instance_file(tmp_path, text):
    path = tmp_path / "inst.smp"
    path.write_text(text)
    return str(path)


def test_smp_yes_with_witness(capsys, tmp_path, lattice_file):
    inst = instance_file(tmp_path, "m: 2\ngenerators:\n0 1\n1 0\ntarget:\n0 0\n")
    code, out, _ = run(capsys, "smp", "--witness", lattice_file, inst)
    assert code == 0
    lines = out.splitlines()
    assert "answer: yes" in lines
    assert any(l.startswith("members: ") for l in lines)
    assert any(l.startswith("rounds: ") for l in lines)
    witness_lines = [l for l in lines if l.startswith("witness: ")]
    assert len(witness_lines) == 1
    assert witness_lines[0] == "witness: meet(x1,x2)"


def test_smp_no(capsys, tmp_path, lattice_file):
    inst = instance_file(tmp_path, "m: 2\ngenerators:\n0 0\n1 1\ntarget:\n0 1\n")
    code, out, _ = run(capsys, "smp", "--witness", lattice_file, inst)
    assert code == 1
    lines = out.splitlines()
    assert "answer: no" in lines
    assert not any(l.startswith("witness") for l in lines)


def test_smp_budget_exit(capsys, tmp_path, lattice_file):
    inst = instance_file(tmp_path, "m: 3\ngenerators:\n0 1 1\n1 0 1\ntarget:\n1 1 1\n")
    code, _, err = run(capsys, "smp", "--budget", "2", lattice_file, inst)
    assert code == 3
    assert "budget" in err


def test_smp_machine_keys(capsys, tmp_path, lattice_file):
    inst = instance_file(tmp_path, "m: 2\ngenerators:\n0 1\ntarget:\n0 1\n")
    code, out, _ = run(capsys, "smp", "--machine", lattice_file, inst)
    assert code == 0
    lines = out.splitlines()
    assert "answer=yes" in lines
    assert any(l.startswith("members=") for l in lines)


def test_smp_algebra_from_stdin(capsys, tmp_path, monkeypatch):
    inst = instance_file(tmp_path, "m: 1\ngenerators:\n0\ntarget:\n0\n")
    monkeypatch.setattr("sys.stdin", io.StringIO(LATTICE_TEXT))
    code, out, _ = run(capsys, "smp", "-", inst)
    assert code == 0
    assert "answer: yes" in out


# --- interpret ---------------------------------------------------------------


def test_interpret_yes(capsys, cp3_file):
    code, out, _ = run(capsys, "interpret", cp3_file)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "interpretation: yes"
    for name in ("p_0", "p_1", "p_2", "p_3"):
        assert any(l.startswith(f"{name} = ") for l in lines)
    code, out, _ = run(capsys, "interpret", "--machine", cp3_file)
    assert any(l.startswith("term.p_1=") for l in out.splitlines())


def test_interpret_none_reasons(capsys, tmp_path):
    maltsev = tmp_path / "p.cond"
    maltsev.write_text("signature: p/3\nidentities:\n  p(x,y,y) = x\n  p(x,x,y) = y\n")
    code, out, _ = run(capsys, "interpret", str(maltsev))
    assert code == 1
    assert "interpretation: none (cube identities for p)" in out
    hm1 = tmp_path / "hm1.cond"
    main(["gen", "hm", "1", "-o", str(hm1)])
    capsys.readouterr()
    code, out, _ = run(capsys, "interpret", str(hm1))
    assert code == 1
    assert "interpretation: none (inconsistent)" in out


# --- reduce ------------------------------------------------------------------


def test_reduce_positive(capsys, tmp_path, lattice_file, cp3_file):
    inst = instance_file(tmp_path, "m: 2\ngenerators:\n0 1\n1 0\ntarget:\n0 0\n")
    code, out, _ = run(capsys, "reduce", lattice_file, cp3_file, inst)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "base: yes, extended: yes, certificate OK"
    assert lines[1].startswith("witness: ")


def test_reduce_negative(capsys, tmp_path, lattice_file, cp3_file):
    inst = instance_file(tmp_path, "m: 2\ngenerators:\n0 0\n1 1\ntarget:\n0 1\n")
    code, out, _ = run(capsys, "reduce", lattice_file, cp3_file, inst)
    assert code == 0
    assert out.splitlines() == ["base: no, extended: no, certificate OK"]


def test_reduce_machine(capsys, tmp_path, lattice_file, cp3_file):
    inst = instance_file(tmp_path, "m: 2\ngenerators:\n0 1\n1 0\ntarget:\n0 0\n")
    code, out, _ = run(capsys, "reduce", "--machine", lattice_file, cp3_file, inst)
    assert code == 0
    lines = out.splitlines()
    assert "base=yes" in lines
    assert "extended=yes" in lines
    assert "certificate=ok" in lines


# --- errors ------------------------------------------------------------------


def test_unknown_command_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "check", str(tmp_path / "nope.cond"))
    assert code == 2
    assert "error:" in err


def test_malformed_condition_reports_location(capsys, tmp_path):
    path = tmp_path / "bad.cond"
    path.write_text("signature: h/2\nidentities:\n  h(x = y\n")
    code, _, err = run(capsys, "check", str(path))
    assert code == 2
    assert f"{path}:3" in err


def test_malformed_algebra_reports_location(capsys, tmp_path, cp3_file):
    path = tmp_path / "bad.alg"
    path.write_text("universe: 2\nop f/1:\n0 9\n")
    code, _, err = run(capsys, "model-check", str(path), cp3_file)
    assert code == 2
    assert "error:" in err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main(["check", "--help"]) == 0
    capsys.readouterr()
