import json

import numpy as np
import pytest

from sfpoly.io import (ProblemFileError, build_problem, evaluate_expression, load_fixture,
                       load_problem, problem_to_document, read_polynomial_file,
                       read_problem_file, validate_document)
from sfpoly.poly import parse_polynomial

FIXTURES = ["ex41", "ex42", "ex43", "ex44", "ex45", "ex46", "ex47"]


def disk_doc(**extra):
    doc = {"name": "disk", "n": 2, "m": 1, "A": [[1, 1]], "parameters": {"R": 1.0},
           "C": [{"label": "disk", "sense": "le0",
                  "terms": [{"coeff": 1, "exps": [2, 0]}, {"coeff": 1, "exps": [0, 2]},
                            {"coeff": "-R", "exps": [0, 0]}]}],
           "Q": [[{"coeff": 1, "exps": [1]}]]}
    doc.update(extra)
    return doc


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_load(name):
    prob = load_fixture(name)
    assert prob.n >= 1 and len(prob.f) + len(prob.g) >= 1
    assert len(prob.h) == len(prob.g)


def test_le0_normalized_to_ge0():
    prob = build_problem(disk_doc(), {"R": 1.0})
    assert prob.f[0] == parse_polynomial("1 - x1^2 - x2^2", 2)
    assert prob.g[0] == parse_polynomial("x1", 1)
    assert prob.f_labels == ("disk",) and prob.g_labels == ("g1",)


def test_parameters_substituted_and_overridden(tmp_path):
    path = tmp_path / "disk.json"
    path.write_text(json.dumps(disk_doc()))
    assert load_problem(path).f[0].eval([0, 0]) == 1.0
    assert load_problem(path, R=4).f[0].eval([0, 0]) == 4.0
    assert load_problem(path, R="sqrt(2)/2").f[0].eval([0, 0]) == pytest.approx(2 ** 0.5 / 2)
    with pytest.raises(ProblemFileError, match="unknown parameter"):
        load_problem(path, S=1)


def test_equalities_expand_to_pairs():
    doc = disk_doc(C_eq=[[{"coeff": 1, "exps": [1, 0]}, {"coeff": -1, "exps": [0, 1]}]])
    prob = build_problem(doc, {"R": 1.0})
    assert len(prob.f) == 3
    assert prob.f[1] == -prob.f[2]
    assert prob.f_labels[1:] == ("f2(>=)", "f2(<=)")


def test_round_trip_through_document():
    prob = load_fixture("ex43", R=2.07)
    back = build_problem(problem_to_document(prob))
    assert back.f == prob.f and back.g == prob.g
    assert np.array_equal(back.A, prob.A)


def test_schema_errors_name_the_path():
    doc = disk_doc()
    doc["C"][0]["terms"][1]["exps"] = "oops"
    with pytest.raises(ProblemFileError, match=r"\$\.C\[0\]\.terms\[1\]\.exps"):
        validate_document(doc)
    with pytest.raises(ProblemFileError, match=r"schema violation at \$"):
        validate_document({"n": 2})


def test_exponent_length_checked():
    doc = disk_doc()
    doc["C"][0]["terms"][0]["exps"] = [2, 0, 0]
    with pytest.raises(ProblemFileError, match="expected 2"):
        build_problem(doc, {"R": 1.0})


def test_matrix_shape_checked():
    doc = disk_doc(A=[[1, 1, 1]])
    with pytest.raises(ProblemFileError):
        build_problem(doc, {"R": 1.0})


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ProblemFileError, match="no such problem file"):
        read_problem_file(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ProblemFileError, match="invalid JSON"):
        read_problem_file(bad)


def test_fixture_lookup_by_stem():
    assert read_problem_file("ex47").name == "ex47"


@pytest.mark.parametrize("text,value", [("2*3 + 1", 7.0), ("-a/2", -2.5), ("sqrt(36/13)", (36 / 13) ** 0.5),
                                        ("(a + 1)**2", 36.0), ("18*a + 51", 141.0)])
def test_expressions(text, value):
    assert evaluate_expression(text, {"a": 5}) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["b + 1", "__import__('os')", "1/0", "a.real", "1 +", "10**400"])
def test_bad_expressions(text):
    with pytest.raises(ProblemFileError):
        evaluate_expression(text, {"a": 5})


def test_polynomial_files(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"n": 2, "text": "(x1 + x2)^2"}))
    assert read_polynomial_file(p) == parse_polynomial("x1^2 + 2*x1*x2 + x2^2", 2)
    p.write_text(json.dumps({"n": 2, "terms": [{"coeff": 1, "exps": [1, 1]}]}))
    assert read_polynomial_file(p) == parse_polynomial("x1*x2", 2)
    p.write_text(json.dumps({"terms": []}))
    with pytest.raises(ProblemFileError):
        read_polynomial_file(p)
