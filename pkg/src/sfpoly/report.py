"""Machine-readable run reports and their plain-text rendering."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .problem import SfpProblem
from .sfp import Feasible, Infeasible, SfpOutcome, verify_point


def fmt_point(u) -> str:
    return "(" + ", ".join(f"{v:.4f}" for v in np.asarray(u, dtype=float)) + ")"


@dataclass
class RunReport:
    verdict: str
    problem: str
    k: int | None
    point: list[float] | None
    point_display: str | None
    residuals: list[dict]
    certificate: dict | None
    orders: list[dict]
    seed: int
    xi_norm: float
    notes: list[str] = field(default_factory=list)
    reason: str = ""
    version: str = __version__

    @property
    def total_time(self) -> float:
        return sum(o["time"] for o in self.orders)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(**doc)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def consistent(self) -> bool:
        """Verdict agrees with the attached evidence."""
        if self.verdict == "feasible":
            return self.point is not None and self.k is not None and all(
                r["value"] >= -r["tol"] for r in self.residuals)
        if self.verdict == "infeasible":
            return self.certificate is not None and self.certificate.get("valid") is True
        return self.verdict == "inconclusive"

    def render(self) -> str:
        lines = [f"problem   {self.problem or '-'}",
                 f"verdict   {self.verdict}" + (f" (order k = {self.k})" if self.k is not None else "")]
        if self.point is not None:
            label = "point" if self.verdict == "feasible" else "last point"
            lines.append(f"{label:<9} {self.point_display}")
            lines.append(f"          full precision: [{', '.join(repr(v) for v in self.point)}]")
        if self.residuals:
            lines.append("residuals")
            lines.append(residual_table(self.residuals))
        if self.certificate is not None:
            c = self.certificate
            lines.append("certificate")
            lines.append(f"  block sizes  {c['block_sizes']}")
            lines.append(f"  violation v  {c['violation']:.4e}   (< 0 proves emptiness)")
            lines.append(f"  residual rho {c['residual']:.4e}")
            lines.append(f"  min eig      {c['min_eig']:.4e}")
            lines.append(f"  recheck      {'passed' if c['valid'] else 'FAILED'}")
        lines.append("orders")
        lines.append(table(["k", "status", "iters", "time[s]", "objective", "point ok", "message"],
                           [[o["k"], o["status"], o["iterations"], f"{o['time']:.3f}",
                             "-" if o["objective"] is None else f"{o['objective']:.6g}",
                             "-" if o["point_ok"] is None else str(o["point_ok"]).lower(),
                             o["message"]] for o in self.orders]))
        if self.reason:
            lines.append(f"reason    {self.reason}")
        for note in self.notes:
            lines.append(f"note      {note}")
        lines.append(f"seed {self.seed}, xi norm {self.xi_norm}, total {self.total_time:.3f}s, "
                     f"sfpoly {self.version}")
        return "\n".join(lines)


def residual_rows(prob: SfpProblem, u, tol: float) -> list[dict]:
    rep = verify_point(prob, u, tol)
    return [{"set": s, "label": lab, "value": v, "tol": tol} for s, lab, v in rep.rows()]


def residual_table(rows: list[dict]) -> str:
    return table(["set", "constraint", "value", "ok"],
                 [[r["set"], r["label"], f"{r['value']:.4f}" if abs(r["value"]) >= 1e-4
                   else f"{r['value']:.2e}", "yes" if r["value"] >= -r["tol"] else "NO"]
                  for r in rows])


def build_report(prob: SfpProblem, outcome: SfpOutcome, tol: float) -> RunReport:
    point = None
    if isinstance(outcome, Feasible):
        point = outcome.point
    elif not isinstance(outcome, Infeasible) and outcome.point is not None:
        point = outcome.point
    cert = None
    if isinstance(outcome, Infeasible):
        cert = {**outcome.certificate.summary(), "valid": bool(outcome.check.valid),
                "recheck_violation": outcome.check.violation,
                "recheck_residual": outcome.check.residual}
    orders = [{"k": r.k, "status": r.status, "time": r.time, "iterations": r.iterations,
               "objective": None if r.objective is None else float(r.objective),
               "point_ok": r.point_ok, "message": r.message} for r in outcome.trace]
    return RunReport(
        verdict=outcome.verdict, problem=prob.name,
        k=getattr(outcome, "k", None),
        point=None if point is None else [float(v) for v in point],
        point_display=None if point is None else fmt_point(point),
        residuals=[] if point is None else residual_rows(prob, point, tol),
        certificate=cert, orders=orders, seed=outcome.xi.seed,
        xi_norm=float(round(outcome.xi.norm, 12)), notes=list(outcome.notes),
        reason=getattr(outcome, "reason", ""))


def load_report_schema() -> dict:
    return json.loads(resources.files("sfpoly").joinpath("report.schema.json").read_text())


def validate_report(doc: Any) -> None:
    jsonschema.Draft202012Validator(load_report_schema()).validate(doc)


def table(header: list[str], rows: list[list]) -> str:
    cells = [[str(h) for h in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = []
    for n, r in enumerate(cells):
        out.append("  " + "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        if n == 0:
            out.append("  " + "  ".join("-" * w for w in widths))
    return "\n".join(out)
