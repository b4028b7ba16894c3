"""Command-line entry point: validate, simulate, translate, prove."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from .graph import DEFAULT_TIME_FROM, extract_requirements
from .model import ModelError, ParamError, set_param, validate_model
from .modelfile import InvalidModelError, ModelFormatError, ModelSyntaxError, parse_model
from .simulator import DEFAULT_STEPS, CheckVerdict, check_assertions, check_asserts, simulate
from .smt import (DEFAULT_TIMEOUT, SolverConfig, SolverNotFoundError, Verdict, goal_sort_key,
                  prove_all, sweep)
from .translator import Bounded, Quantified, emit_smtlib, emit_why3, emit_why3_library, translate

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_ENV = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    model: str
    overrides: dict[str, object] = field(default_factory=dict)
    checks: list = field(default_factory=list)
    proofs: list = field(default_factory=list)
    sweep_param: str | None = None
    sweep_rows: list = field(default_factory=list)

    def to_dict(self):
        d = {"model": self.model, "overrides": self.overrides}
        if self.checks:
            d["checks"] = [{"goal": c.goal_name, "verdict": c.verdict.value,
                            "first_step": c.first_step, "checked_steps": c.checked_steps}
                           for c in self.checks]
        if self.proofs:
            d["proofs"] = [_proof_dict(r) for r in self.proofs]
        if self.sweep_param:
            d["sweep"] = {"parameter": self.sweep_param, "rows": [
                {"value": row.value,
                 "results": [dict(_proof_dict(r), pre=row.pre.get(r.goal_name),
                                  post=row.post.get(r.goal_name)) for r in row.results]}
                for row in self.sweep_rows]}
        return d

    def to_text(self):
        lines = [f"model: {self.model}"]
        for k, v in self.overrides.items():
            lines.append(f"set {k} = {v}")
        if self.checks:
            lines.append("")
            lines.append(_table(["GOAL", "CHECK RESULT", "FIRST FAIL", "CHECKED STEPS"],
                                [[c.goal_name, c.verdict.value,
                                  "" if c.first_step is None else str(c.first_step),
                                  str(c.checked_steps)] for c in self.checks]))
        if self.proofs:
            lines.append("")
            lines.append(_table(["GOAL", "VERDICT", "TIME (s)", "NOTE"],
                                [[r.goal_name, _verdict_text(r), f"{r.wall_time:.2f}",
                                  r.note.splitlines()[0] if r.note else ""] for r in self.proofs]))
        if self.sweep_param:
            # ordered by goal, then parameter value
            cells = sorted(((goal_sort_key(r.goal_name), row.value, row, r)
                            for row in self.sweep_rows for r in row.results),
                           key=lambda t: t[:2])
            rows = [[r.goal_name, f"{v:g}", _verdict_text(r),
                     _tf(row.pre.get(r.goal_name)), _tf(row.post.get(r.goal_name))]
                    for _, v, row, r in cells]
            lines.append("")
            lines.append(_table(["GOAL", self.sweep_param, "VERDICT", "Prec.", "Postc."], rows))
        return "\n".join(lines) + "\n"


def _proof_dict(r):
    d = {"goal": r.goal_name, "verdict": r.verdict.value, "wall_time": round(r.wall_time, 3)}
    if r.depth is not None:
        d["depth"] = r.depth
    if r.witness is not None:
        d["witness"] = {"step": r.witness.step, "initial": r.witness.initial}
    if r.note:
        d["note"] = r.note
    return d


def _verdict_text(r):
    text = r.verdict.value
    if r.witness is not None:
        text += f" (k={r.witness.step})"
    return text


def _tf(v):
    return "?" if v is None else ("True" if v else "False")


def _table(header, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header).rstrip(), fmt.format(*["-" * w for w in widths])]
    out += [fmt.format(*r).rstrip() for r in rows]
    return "\n".join(out)


# ---------------------------------------------------------------------------

def _value(text):
    try:
        return float(text)
    except ValueError:
        return text


def _parse_assignment(text):
    path, sep, value = text.partition("=")
    if not sep or "." not in path:
        raise UsageError(f"expected block.param=value, got {text!r}")
    return path, value


def _load(path, overrides):
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    model = parse_model(text, validate=False)
    applied = {}
    for item in overrides or []:
        p, v = _parse_assignment(item)
        model = set_param(model, p, _value(v))
        applied[p] = _value(v)
    violations = validate_model(model)
    if violations:
        raise InvalidModelError(violations)
    return model, applied


def _write_report(report, args):
    sys.stdout.write(report.to_text())
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")


def cmd_validate(args):
    try:
        with open(args.path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc.strerror or exc}") from None
    try:
        model = parse_model(text, validate=False)
    except ModelSyntaxError:
        raise
    except ModelFormatError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_VIOLATED
    violations = validate_model(model)
    for v in violations:
        print(f"{args.path}: {v}", file=sys.stderr)
    if violations:
        return EXIT_VIOLATED
    print(f"{args.path}: valid ({len(model.blocks)} blocks)")
    return EXIT_OK


def cmd_simulate(args):
    model, applied = _load(args.path, args.set)
    trace = simulate(model, args.steps)
    checks = check_assertions(trace, extract_requirements(model)) + check_asserts(model, trace)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(trace.to_columns())
    report = RunReport(model.name, applied, checks=checks)
    _write_report(report, args)
    return EXIT_VIOLATED if any(c.verdict is CheckVerdict.FAIL for c in checks) else EXIT_OK


def _mode(args):
    if args.mode == "bounded":
        return Bounded(args.depth, not args.fixed_init)
    return Quantified()


def _time_from(args):
    return None if args.goal_from == "all" else int(args.goal_from)


def cmd_translate(args):
    model, _ = _load(args.path, args.set)
    theory = translate(model, _time_from(args))
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    if args.format == "why3":
        written.append(_write(args.out_dir, f"{model.name}.why", emit_why3(theory)))
        written.append(_write(args.out_dir, "simulink.why", emit_why3_library(theory)))
    else:
        mode = _mode(args)
        for g in theory.goals:
            written.append(_write(args.out_dir, f"{model.name}_{g.name}_{mode.name}.smt2",
                                  emit_smtlib(theory, g.name, mode)))
    for p in written:
        print(p)
    return EXIT_OK


def _write(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def cmd_prove(args):
    model, applied = _load(args.path, args.set)
    goals = [args.goal] if args.goal else None
    theory = translate(model, _time_from(args))
    if goals:
        theory.goal(args.goal)
    config = SolverConfig(executable=args.solver, timeout=args.timeout, mode=_mode(args))
    config.resolve()
    report = RunReport(model.name, applied)
    if args.sweep:
        param, values = _parse_assignment(args.sweep)
        try:
            nums = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"sweep values must be numbers: {values!r}") from None
        report.sweep_param = param
        report.sweep_rows = sweep(model, param, nums, config, goals, _time_from(args))
        results = [r for row in report.sweep_rows for r in row.results]
    else:
        report.proofs = prove_all(theory, config, goals)
        results = report.proofs
    _write_report(report, args)
    if any(r.verdict is Verdict.SOLVER_ERROR for r in results):
        return EXIT_ENV
    ok = {Verdict.VALID, Verdict.BOUNDED_VALID}
    return EXIT_OK if all(r.verdict in ok for r in results) else EXIT_VIOLATED


def build_parser():
    p = argparse.ArgumentParser(prog="blockverify",
                                description="Simulate, translate and prove block-diagram models.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse and check a model file")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)

    def common(sp):
        sp.add_argument("path")
        sp.add_argument("--set", action="append", metavar="BLOCK.PARAM=VALUE",
                        help="override a block parameter (repeatable)")

    def goal_opts(sp):
        sp.add_argument("--mode", choices=["quantified", "bounded"], default="quantified")
        sp.add_argument("--depth", type=int, default=20, help="unrolling depth for bounded mode")
        sp.add_argument("--fixed-init", action="store_true",
                        help="bounded mode: pin UnitDelay initial values instead of leaving them free")
        sp.add_argument("--goal-from", default=str(DEFAULT_TIME_FROM),
                        help="first time step of goals, or 'all' for every integer")

    s = sub.add_parser("simulate", help="run the model and check its requirements")
    common(s)
    s.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    s.add_argument("--trace", metavar="FILE", help="write the trace as CSV")
    s.add_argument("--out", metavar="FILE", help="write a JSON report")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("translate", help="emit Why3 or SMT-LIB2")
    common(t)
    t.add_argument("--format", choices=["why3", "smt2"], required=True)
    t.add_argument("--out-dir", default=".")
    goal_opts(t)
    t.set_defaults(func=cmd_translate)

    pr = sub.add_parser("prove", help="discharge goals with an SMT solver")
    common(pr)
    pr.add_argument("--goal")
    pr.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    pr.add_argument("--solver", help="solver executable (default: $BLOCKVERIFY_SOLVER or z3/cvc5 on PATH)")
    pr.add_argument("--sweep", metavar="BLOCK.PARAM=V1,V2,...")
    pr.add_argument("--out", metavar="FILE", help="write a JSON report")
    goal_opts(pr)
    pr.set_defaults(func=cmd_prove)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "steps", 1) < 1 or getattr(args, "depth", 1) < 0:
        parser.error("--steps must be >= 1 and --depth >= 0")
    if getattr(args, "timeout", 1) <= 0:
        parser.error("--timeout must be positive")
    goal_from = getattr(args, "goal_from", None)
    if goal_from is not None and goal_from != "all" and not goal_from.lstrip("-").isdigit():
        parser.error("--goal-from takes an integer or 'all'")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"blockverify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidModelError as exc:
        for v in exc.violations:
            print(f"{args.path}: {v}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelFormatError, ParamError) as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"blockverify: unknown goal {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except SolverNotFoundError as exc:
        print(f"blockverify: {exc}\nhint: `blockverify translate --format smt2` still writes "
              "scripts you can run with any SMT-LIB2 solver", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
