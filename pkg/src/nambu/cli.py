"""Command-line driver: ``nambu <command> FILE [options]``.

Every command prints one JSON report (or a text rendering with
``--emit text``).  Exit codes: 0 success, 1 domain error (for example a
non-integrable input or a classification failure), 2 usage or parse error.
Output depends only on the input bytes and the flags; wall-clock timing is
added only with ``--timing``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import generators
from .linearizer import LinearizationError, LinearizerConfig, UnsupportedAction, linearize, slice_lambda, slice_theta, so_average
from .nambu_core import ClassificationError, classify_linear, is_nambu, singular_locus_check, type1_normal_form, type2_normal_form
from .polyring import PolyMap
from .tensorcalc import Multivector, TensorError, pushforward
from .textio import ParseError, format_document, format_poly, format_rational, parse_tensor

COMMANDS = ("check", "classify", "linearize", "generate", "format", "average", "slice")


class UsageError(Exception):
    pass


class DomainError(Exception):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(message)


@dataclass
class RunReport:
    command: str
    n: int | None = None
    cap: int | None = None
    input_digest: str | None = None
    outcome: str = "ok"
    result: Any = None
    map: list | None = None
    trace: list | None = None
    verified: dict = field(default_factory=dict)
    error: dict | None = None
    timing: float | None = None

    def to_json(self) -> dict:
        out = {
            "command": self.command,
            "n": self.n,
            "cap": self.cap,
            "input_digest": self.input_digest,
            "outcome": self.outcome,
            "result": self.result,
            "map": self.map,
            "trace": self.trace,
            "verified": self.verified,
        }
        if self.error is not None:
            out["error"] = self.error
        if self.timing is not None:
            out["timing"] = {"seconds": f"{self.timing:.3f}"}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "RunReport":
        timing = data.get("timing")
        return cls(
            command=data["command"],
            n=data.get("n"),
            cap=data.get("cap"),
            input_digest=data.get("input_digest"),
            outcome=data.get("outcome", "ok"),
            result=data.get("result"),
            map=data.get("map"),
            trace=data.get("trace"),
            verified=data.get("verified", {}),
            error=data.get("error"),
            timing=float(timing["seconds"]) if timing else None,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nambu", description="Exact tools for Nambu structures.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, needs_file=True):
        if needs_file:
            sp.add_argument("file", help="tensor document ('-' for standard input)")
        sp.add_argument("--emit", choices=("json", "text"), default="json")
        sp.add_argument("--timing", action="store_true", help="append wall-clock timing")

    common(sub.add_parser("check", help="test the integrability conditions"))
    common(sub.add_parser("classify", help="linear normal form of the linear part"))
    lin = sub.add_parser("linearize", help="formal linearization through a degree")
    common(lin)
    lin.add_argument("--degree", type=int, default=None)
    lin.add_argument("--schedule", choices=("doubling", "stepwise"), default="doubling")
    gen = sub.add_parser("generate", help="emit a seeded instance document")
    common(gen, needs_file=False)
    gen.add_argument("--type", dest="nf_type", choices=("type1", "type2", "euler"), default="type1")
    gen.add_argument("--q", type=int, default=2)
    gen.add_argument("--n", type=int, default=4)
    gen.add_argument("--signs", default=None, help="comma separated weights, e.g. 1,1,-1")
    gen.add_argument("--cap", type=int, default=8)
    gen.add_argument("--perturb", type=int, default=3, help="degree of the near-identity map (0 or 1: none)")
    gen.add_argument("--linear", action="store_true", help="conjugate by a random integer matrix instead")
    gen.add_argument("--seed", type=int, default=0)
    common(sub.add_parser("format", help="print the canonical document"))
    avg = sub.add_parser("average", help="invariant average over rotations of x1..xk")
    common(avg)
    avg.add_argument("--k", type=int, required=True)
    sl = sub.add_parser("slice", help="slices of a Nambu tensor")
    common(sl)
    sl.add_argument("--mode", choices=("lambda", "theta"), required=True)
    sl.add_argument("--k", type=int, required=True)
    return p


# ---------------------------------------------------------------------------


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


def _load(report: RunReport, path: str):
    data = _read(path)
    report.input_digest = "sha256:" + hashlib.sha256(data).hexdigest()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not UTF-8: {exc.reason}")
    doc = parse_tensor(text)
    report.n, report.cap = doc.nvars, doc.cap
    return doc


def _need(doc, kind, report):
    if not isinstance(doc.value, kind):
        raise UsageError(f"command {report.command} needs a {kind.__name__} document, got kind={doc.kind}")
    return doc.value


def _map_json(phi: PolyMap) -> list[str]:
    return [format_poly(c) for c in phi.components]


def cmd_check(args, report):
    P = _need(_load(report, args.file), Multivector, report)
    rep = is_nambu(P)
    report.result = {"integrable": rep.integrable}
    if rep.witness is not None:
        w = rep.witness
        report.result["witness"] = {
            "condition": w.condition,
            "multivector": [i + 1 for i in w.multivector] if w.multivector is not None else None,
            "component": [i + 1 for i in w.component],
            "residual": format_poly(w.residual),
            "description": w.describe(),
        }
        report.outcome = "not_integrable"
    report.verified = {"integrable": rep.integrable}
    return 0 if rep.integrable else 1


def cmd_classify(args, report):
    P = _need(_load(report, args.file), Multivector, report)
    lin = P.linear_part()
    try:
        nf, A = classify_linear(lin)
    except ClassificationError as exc:
        raise DomainError("classification", str(exc))
    report.result = nf.to_json()
    report.result["linear_input"] = lin == P
    if nf.variant == "type1" and nf.nondegenerate:
        ok, basis = singular_locus_check(lin)
        report.result["singular_locus"] = {"expected_dimension": ok, "tangent_basis": [[format_rational(v) for v in row] for row in basis]}
    report.map = _map_json(A)
    report.verified = {"normal_form_reproduced": pushforward(A, lin) == nf.tensor(lin.cap)}
    return 0


def cmd_linearize(args, report):
    P = _need(_load(report, args.file), Multivector, report)
    D = args.degree if args.degree is not None else P.cap
    try:
        cfg = LinearizerConfig(degree=D, schedule=args.schedule)
    except ValueError as exc:
        raise UsageError(str(exc))
    try:
        Phi, trace = linearize(P, config=cfg)
    except LinearizationError as exc:
        raise DomainError("linearization", str(exc))
    final = pushforward(Phi, P.with_cap(D))
    report.result = {"normal_form": trace.normal_form.to_json(), "steps": len(trace.steps)}
    report.map = _map_json(Phi)
    report.trace = trace.to_json()
    report.verified = {
        "nambu_input": True,
        "linear_through": trace.linear_through,
        "nonlinear_terms_after": final.graded(2, D).nterms(),
        "linear_part_is_normal_form": final.linear_part() == trace.normal_form.tensor(D),
    }
    return 0


def _parse_weights(text: str | None, q: int) -> tuple:
    if text is None:
        return (1,) * (q + 1)
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"bad --signs value {text!r}")


def cmd_generate(args, report):
    q, n, cap, seed = args.q, args.n, args.cap, args.seed
    report.n, report.cap = n, cap
    try:
        if args.nf_type == "euler":
            from .nambu_core import euler_tensor

            value = euler_tensor(q, cap)
            report.n = q + 1
        elif args.nf_type == "type1":
            w = _parse_weights(args.signs, q)
            if args.linear:
                value, _ = generators.conjugated_type1(q, n, w, (), cap, seed)
            elif args.perturb >= 2:
                value, _ = generators.perturbed_type1(q, n, w, cap, seed, args.perturb)
            else:
                value = type1_normal_form(q, n, w, (), cap)
        else:
            b = generators.random_type2_b(q, n, seed)
            if args.linear:
                value, _ = generators.conjugated_type2(q, n, b, cap, seed)
            else:
                value = type2_normal_form(q, n, b, cap)
    except ValueError as exc:
        raise UsageError(str(exc))
    doc = format_document(value)
    report.result = {"document": doc}
    return 0


def cmd_format(args, report):
    doc = _load(report, args.file)
    report.result = {"document": format_document(doc.value)}
    return 0


def cmd_average(args, report):
    doc = _load(report, args.file)
    if isinstance(doc.value, PolyMap):
        raise UsageError("average needs a function, multivector or form")
    try:
        value = so_average(doc.value, args.k)
    except (ValueError, UnsupportedAction) as exc:
        raise UsageError(str(exc))
    report.result = {"document": format_document(value)}
    report.verified = {"idempotent": so_average(value, args.k) == value}
    return 0


def cmd_slice(args, report):
    P = _need(_load(report, args.file), Multivector, report)
    try:
        value = slice_lambda(P, args.k) if args.mode == "lambda" else slice_theta(P, args.k)
    except ValueError as exc:
        raise UsageError(str(exc))
    report.n, report.cap = value.nvars, value.cap
    result = {"document": format_document(value)}
    if value.degree >= 1 and value.cap >= 1 and value.linear_part():
        try:
            nf, _ = classify_linear(value.linear_part())
            result["linear_normal_form"] = nf.to_json()
        except ClassificationError as exc:
            result["linear_normal_form"] = {"error": str(exc)}
    report.result = result
    report.verified = {"nambu": bool(is_nambu(value)) if value.degree >= 1 else True}
    return 0


HANDLERS = {
    "check": cmd_check,
    "classify": cmd_classify,
    "linearize": cmd_linearize,
    "generate": cmd_generate,
    "format": cmd_format,
    "average": cmd_average,
    "slice": cmd_slice,
}


def _text(report: RunReport) -> str:
    if report.error is not None:
        return f"error ({report.error['kind']}): {report.error['message']}\n"
    res = report.result or {}
    if isinstance(res, dict) and "document" in res and report.command in ("generate", "format", "average", "slice"):
        return res["document"]
    lines = [f"{report.command}: {report.outcome}"]
    if isinstance(res, dict):
        for k, v in res.items():
            lines.append(f"{k}: {json.dumps(v)}")
    if report.map is not None:
        lines.append("map:")
        lines.extend(f"  x{i + 1} -> {c}" for i, c in enumerate(report.map))
    for step in report.trace or []:
        lines.append(f"step {step['step']} window {tuple(step['window'])}: {step['terms_before']} -> {step['terms_after']} terms")
    for k, v in report.verified.items():
        lines.append(f"verified {k}: {json.dumps(v)}")
    return "\n".join(lines) + "\n"


def run_command(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    emit = "json"
    start = time.perf_counter()
    report = RunReport(command="")
    timing = False
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
        report.command = args.command
        emit, timing = args.emit, args.timing
        code = HANDLERS[args.command](args, report)
    except UsageError as exc:
        report.outcome, code = "error", 2
        report.error = {"kind": "usage", "message": str(exc)}
    except ParseError as exc:
        report.outcome, code = "error", 2
        report.error = {"kind": "parse", "message": exc.message, "line": exc.line, "column": exc.col, "expected": list(exc.expected)}
    except TensorError as exc:
        report.outcome, code = "error", 2
        report.error = {"kind": "type", "message": str(exc)}
    except DomainError as exc:
        report.outcome, code = "error", 1
        report.error = {"kind": exc.kind, "message": str(exc)}
    if timing:
        report.timing = time.perf_counter() - start
    if emit == "text":
        out.write(_text(report))
    else:
        out.write(json.dumps(report.to_json(), indent=2) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
