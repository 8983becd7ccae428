"""Problem files: JSON documents describing ``C``, ``Q`` and ``A``.

A file looks like::

    {
      "name": "ball",
      "n": 2, "m": 2,
      "A": [[1, 0], [0, 1]],
      "parameters": {"R": 1.0},
      "C": [{"label": "disk", "sense": "le0",
             "terms": [{"coeff": 1, "exps": [2, 0]}, {"coeff": 1, "exps": [0, 2]},
                       {"coeff": "-R", "exps": [0, 0]}]}],
      "Q": [[{"coeff": 1, "exps": [1, 0]}]]
    }

A constraint is either a bare term list (read as ``p >= 0``) or an object
with ``terms``, an optional ``label`` and ``sense`` (``ge0`` or ``le0``).
Optional ``C_eq`` / ``Q_eq`` hold equalities ``p = 0``, each expanded to the
pair ``p >= 0``, ``-p >= 0``.  Coefficients may be numbers or arithmetic
expressions in the parameters (``+ - * / **``, parentheses, ``sqrt``).
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .poly import Polynomial
from .problem import SfpProblem


class ProblemFileError(ValueError):
    """Raised for unreadable or schema-invalid problem files."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": math.sqrt}


def evaluate_expression(text: str, names: Mapping[str, float] | None = None) -> float:
    """Evaluate an arithmetic expression over numbers and ``names``."""
    names = names or {}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ProblemFileError(f"unknown parameter '{node.id}' in '{text}'")
            return float(names[node.id])
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ProblemFileError(f"unsupported syntax in expression '{text}'")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ProblemFileError(f"cannot parse expression '{text}': {exc.msg}") from None
    try:
        value = ev(tree)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        if isinstance(exc, ProblemFileError):
            raise
        raise ProblemFileError(f"cannot evaluate '{text}': {exc}") from None
    if not math.isfinite(value):
        raise ProblemFileError(f"expression '{text}' is not finite")
    return value


def load_schema() -> dict:
    return json.loads(resources.files("sfpoly").joinpath("problem.schema.json").read_text())


def _path_str(path) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path)


def validate_document(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    # best_match descends into oneOf branches, so the path points at the bad field
    e = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if e is not None:
        raise ProblemFileError(f"schema violation at {_path_str(e.absolute_path)}: {e.message}")


@dataclass
class ProblemFile:
    """A parsed document; ``build`` substitutes parameters and returns the problem."""

    doc: dict
    source: str = ""

    @property
    def parameters(self) -> dict[str, Any]:
        return dict(self.doc.get("parameters", {}))

    @property
    def name(self) -> str:
        return self.doc.get("name", Path(self.source).stem if self.source else "")

    def build(self, overrides: Mapping[str, Any] | None = None) -> SfpProblem:
        params = {}
        merged = {**self.parameters, **(overrides or {})}
        for key in merged:
            if key not in self.parameters:
                raise ProblemFileError(f"unknown parameter '{key}'")
        for key, value in merged.items():
            params[key] = value if isinstance(value, (int, float)) else evaluate_expression(str(value))
        return build_problem(self.doc, params)


def _constraint_parts(item) -> tuple[list, str, str | None]:
    if isinstance(item, list):
        return item, "ge0", None
    return item["terms"], item.get("sense", "ge0"), item.get("label")


def _polynomial(terms, nvars: int, params, where: str) -> Polynomial:
    acc = []
    for i, t in enumerate(terms):
        exps = t["exps"]
        if len(exps) != nvars:
            raise ProblemFileError(f"{where}.terms[{i}].exps has length {len(exps)}, expected {nvars}")
        c = t["coeff"]
        c = float(c) if isinstance(c, (int, float)) else evaluate_expression(c, params)
        acc.append((exps, c))
    return Polynomial(nvars, acc)


def build_problem(doc: dict, params: Mapping[str, float] | None = None) -> SfpProblem:
    """Turn a validated document into an :class:`SfpProblem` (constraints normalized to ``>= 0``)."""
    params = dict(params or {})
    n, m = int(doc["n"]), int(doc["m"])
    A = np.array(doc["A"], dtype=float) if m else np.zeros((0, n))
    if A.shape != (m, n):
        raise ProblemFileError(f"$.A has shape {A.shape}, expected ({m}, {n})")

    def collect(key, nvars, prefix, equality, start=0):
        polys, labels = [], []
        for i, item in enumerate(doc.get(key, [])):
            terms, sense, label = _constraint_parts(item)
            p = _polynomial(terms, nvars, params, f"$.{key}[{i}]")
            label = label or f"{prefix}{start + i + 1}"
            if equality:
                polys += [p, -p]
                labels += [f"{label}(>=)", f"{label}(<=)"]
            else:
                polys.append(-p if sense == "le0" else p)
                labels.append(label)
        return polys, labels

    f, fl = collect("C", n, "f", False)
    fe, fel = collect("C_eq", n, "f", True, len(doc.get("C", [])))
    g, gl = collect("Q", m, "g", False)
    ge, gel = collect("Q_eq", m, "g", True, len(doc.get("Q", [])))
    try:
        return SfpProblem(n, m, A, tuple(f + fe), tuple(g + ge), doc.get("name", ""),
                          tuple(fl + fel), tuple(gl + gel))
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("sfpoly").joinpath("fixtures").joinpath(name)))


def resolve_path(path: str | Path) -> Path:
    """Use ``path`` if it exists, else look it up among the bundled fixtures."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix else p.name + ".json"
    bundled = fixture_path(name)
    if bundled.exists():
        return bundled
    raise ProblemFileError(f"no such problem file: {path}")


def read_problem_file(path: str | Path) -> ProblemFile:
    p = resolve_path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ProblemFileError(f"cannot read {p}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    validate_document(doc)
    return ProblemFile(doc, str(p))


def load_problem(path: str | Path, **overrides) -> SfpProblem:
    return read_problem_file(path).build(overrides)


def load_fixture(name: str, **overrides) -> SfpProblem:
    """Load a bundled fixture by stem, e.g. ``load_fixture("ex43", R=2.07)``."""
    return load_problem(fixture_path(f"{name}.json"), **overrides)


def problem_to_document(prob: SfpProblem) -> dict:
    """Serialize with every constraint in ``ge0`` form."""
    return {
        "name": prob.name, "n": prob.n, "m": prob.m, "A": prob.A.tolist(),
        "C": [{"label": lab, "sense": "ge0", "terms": p.to_terms()}
              for lab, p in zip(prob.f_labels, prob.f)],
        "Q": [{"label": lab, "sense": "ge0", "terms": p.to_terms()}
              for lab, p in zip(prob.g_labels, prob.g)],
    }


def read_polynomial_file(path: str | Path) -> Polynomial:
    """A polynomial document: ``{"n": 2, "terms": [...]}`` or ``{"n": 2, "text": "x1*x2"}``."""
    from .poly import parse_polynomial

    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ProblemFileError(f"cannot read {p}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "n" not in doc or not isinstance(doc["n"], int) or doc["n"] < 1:
        raise ProblemFileError(f"{p}: expected an object with a positive integer 'n'")
    if "text" in doc:
        try:
            return parse_polynomial(doc["text"], doc["n"])
        except ValueError as exc:
            raise ProblemFileError(f"{p}: {exc}") from None
    if "terms" not in doc:
        raise ProblemFileError(f"{p}: expected 'terms' or 'text'")
    return _polynomial(doc["terms"], doc["n"], doc.get("parameters", {}), "$")
