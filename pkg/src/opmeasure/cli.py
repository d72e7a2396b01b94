"""Batch scenario runner.

A scenario is a JSON file::

    {"name": "...",
     "definitions": {"Z": {"kind": "observable", "hermitian": [[1, 0], [0, -1]]}, ...},
     "tasks": [{"task": "joint", "instrument": "L", "observable": "Z", "state": "plus"}]}

Definitions may refer to one another by name in any order.  Each task
produces a structured record; tasks with a verdict (built in, or from an
``expect`` block) decide the exit status: 0 when every verdict passed, 1
when one failed, 2 for usage, parse and definition errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import serialize as ser
from .classify import (
    disturbed_set,
    is_minimum_disturbing,
    satisfies_projection_postulate,
    satisfies_repeatability,
)
from .errors import OpMeasureError
from .instruments import (
    Instrument,
    audit_davies_lewis,
    check_factoring,
    compatibility_residual,
    identity_instrument,
    luders_instrument,
    von_neumann_instrument,
)
from .linalg import TOL, ket, projector
from .models import (
    IndirectModel,
    instrument_from_model,
    local_extension,
    measuring_model,
    number_observable,
    photon_counter_model,
    repeatable_model,
)
from .observables import (
    DensityOperator,
    DiscreteObservable,
    StateVector,
    lift,
    observable_from_basis,
)
from .successive import (
    commutator_criterion,
    disturbs,
    epr_joint,
    epr_reduction,
    is_simultaneous,
    local_residual,
    successive_joint,
)

DEFAULT_SEED = 20240501
DEFAULT_SAMPLES = 32
VERBS = ("build-instrument", "audit", "joint", "disturb", "simultaneous", "commutator",
         "local", "epr", "epr-reduce", "classify")
KINDS = ("matrix", "state", "observable", "model", "instrument")


class ScenarioError(OpMeasureError, ValueError):
    """A scenario that cannot be run: bad structure or an undefined name."""


def jsonable(x):
    """Plain-JSON copy of a result (numpy arrays and scalars included)."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------------------
# definitions


class Definitions:
    """Lazily built named objects with cycle detection."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ScenarioError("'definitions' must be an object")
        for name, rec in raw.items():
            if not isinstance(rec, dict) or rec.get("kind") not in KINDS:
                raise ScenarioError(f"definition {name!r} needs a 'kind' from {list(KINDS)}")
        self.raw = raw
        self.built: dict[str, object] = {}
        self._active: set[str] = set()

    def get(self, name: str, kind: str):
        if not isinstance(name, str):
            raise ScenarioError(f"expected the name of a {kind}, got {name!r}")
        if name not in self.raw:
            raise ScenarioError(f"undefined {kind} {name!r}")
        rec = self.raw[name]
        if rec["kind"] != kind:
            raise ScenarioError(f"{name!r} is a {rec['kind']}, expected a {kind}")
        if name not in self.built:
            if name in self._active:
                raise ScenarioError(f"definition {name!r} refers to itself")
            self._active.add(name)
            try:
                self.built[name] = getattr(self, "_" + kind)(rec)
            except ScenarioError:
                raise
            except (OpMeasureError, KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(f"definition {name!r}: {_describe(exc)}") from exc
            finally:
                self._active.discard(name)
        return self.built[name]

    def matrix(self, ref) -> np.ndarray:
        return self.get(ref, "matrix") if isinstance(ref, str) else ser.decode_matrix(ref)

    def vector(self, ref) -> np.ndarray:
        return self.get(ref, "matrix").reshape(-1) if isinstance(ref, str) else ser.decode_vector(ref)

    def _matrix(self, rec):
        if "vector" in rec:
            return ser.decode_vector(rec["vector"]).reshape(-1, 1)
        return ser.decode_matrix(rec["value"])

    def _state(self, rec):
        if "vector" in rec:
            return StateVector(self.vector(rec["vector"])).density()
        if "density" in rec:
            return DensityOperator(self.matrix(rec["density"]))
        if "basis" in rec:
            return DensityOperator(projector(ket(int(rec["dim"]), int(rec["basis"]))))
        raise ScenarioError("state needs 'vector', 'density' or 'basis'")

    def _observable(self, rec) -> DiscreteObservable:
        if "hermitian" in rec:
            return ser.decode_observable({"hermitian": ser.encode_matrix(self.matrix(rec["hermitian"]))})
        if "outcomes" in rec:
            outs = rec["outcomes"]
            return DiscreteObservable(tuple(o["value"] for o in outs),
                                      tuple(self.matrix(o["projection"]) for o in outs))
        if "basis" in rec:
            return observable_from_basis(self.matrix(rec["basis"]), rec.get("values"))
        if "number" in rec:
            return number_observable(int(rec["number"]), rec.get("values"))
        if "lift" in rec:
            return lift(self.get(rec["lift"], "observable"), rec["dims"], int(rec["index"]))
        raise ScenarioError("observable needs 'hermitian', 'outcomes', 'basis', 'number' or 'lift'")

    def _model(self, rec) -> IndirectModel:
        if "photon_counter" in rec:
            return photon_counter_model(int(rec["photon_counter"]), rec.get("values"))
        if "repeatable" in rec:
            return repeatable_model(self.get(rec["repeatable"], "observable"), rec.get("phases"))
        if "measuring" in rec:
            post = rec.get("post")
            post = None if post is None else [self.matrix(w) for w in post]
            env = rec.get("env_state")
            env = None if env is None else self.get(env, "state")
            return measuring_model(self.get(rec["measuring"], "observable"), post, env)
        if "local" in rec:
            return local_extension(self.get(rec["local"], "model"), int(rec["other_dim"]),
                                   int(rec.get("position", 0)))
        if "U" in rec:
            m = rec["M"]
            probe_obs = self.get(m, "observable") if isinstance(m, str) else ser.decode_observable(m)
            sigma = rec["sigma"]
            sigma = self.get(sigma, "state") if isinstance(sigma, str) else ser.decode_matrix(sigma)
            return IndirectModel(int(rec["sys_dim"]), int(rec["probe_dim"]), sigma,
                                 self.matrix(rec["U"]), probe_obs)
        raise ScenarioError("model needs 'photon_counter', 'repeatable', 'measuring', 'local' or 'U'")

    def _instrument(self, rec) -> Instrument:
        if "luders" in rec:
            instr = luders_instrument(self.get(rec["luders"], "observable"))
        elif "von_neumann" in rec:
            instr = von_neumann_instrument(self.get(rec["von_neumann"], "observable"),
                                           self.matrix(rec["refinement"]))
        elif "model" in rec:
            instr = instrument_from_model(self.get(rec["model"], "model"))
        elif "identity" in rec:
            instr = identity_instrument(int(rec["identity"]))
        elif "branches" in rec:
            instr = ser.decode_instrument({k: v for k, v in rec.items() if k != "observable"})
        else:
            raise ScenarioError(
                "instrument needs 'luders', 'von_neumann', 'model', 'identity' or 'branches'")
        if isinstance(rec.get("observable"), str):
            instr = instr.with_observable(self.get(rec["observable"], "observable"))
        return instr


def _describe(exc: BaseException) -> str:
    if isinstance(exc, KeyError):
        return f"missing field {exc.args[0]!r}"
    return f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# tasks


class Context:
    def __init__(self, defs: Definitions, seed: int, samples: int, tol: float):
        self.defs, self.seed, self.samples, self.tol = defs, seed, samples, tol

    def arg(self, task: dict, key: str, kind: str, default=None):
        if key not in task:
            if default is not None:
                return default
            raise ScenarioError(f"task {task.get('task')!r} needs {key!r}")
        return self.defs.get(task[key], kind)

    def opt(self, task: dict, key: str, kind: str):
        return self.defs.get(task[key], kind) if key in task else None


def _task_build(ctx: Context, task: dict, seed: int):
    instr = ctx.arg(task, "instrument", "instrument")
    out = {"dim": instr.dim, "outcomes": list(instr.values),
           "kraus_counts": [len(k) for k in instr.kraus()],
           "instrument": ser.encode_instrument(instr)}
    obs = ctx.opt(task, "observable", "observable")
    if obs is None:
        return out, None
    r = compatibility_residual(instr, obs)
    out["measures"] = r <= ctx.tol
    out["compatibility_residual"] = r
    if out["measures"]:
        fac = check_factoring(instr, obs, samples=min(ctx.samples, 8), seed=seed, tol=ctx.tol)
        out["factoring"] = fac.to_dict()
        return out, fac.passed
    return out, False


def _task_audit(ctx: Context, task: dict, seed: int):
    rep = audit_davies_lewis(ctx.arg(task, "instrument", "instrument"),
                             samples=int(task.get("samples", ctx.samples)), seed=seed)
    return rep.to_dict(), rep.passed


def _task_joint(ctx: Context, task: dict, seed: int):
    instr = ctx.arg(task, "instrument", "instrument")
    jd = successive_joint(instr, ctx.arg(task, "observable", "observable"),
                          ctx.arg(task, "state", "state"),
                          obs_a=ctx.opt(task, "first", "observable"), tol=ctx.tol)
    return jd.to_dict(), None


def _task_disturb(ctx: Context, task: dict, seed: int):
    ev = task.get("evolution")
    ev = None if ev is None else ctx.defs.matrix(ev)
    rep = disturbs(ctx.arg(task, "instrument", "instrument"),
                   ctx.arg(task, "observable", "observable"), evolution=ev, tol=ctx.tol)
    return rep.to_dict(), None


def _task_simultaneous(ctx: Context, task: dict, seed: int):
    rep = is_simultaneous(ctx.arg(task, "instrument", "instrument"),
                          ctx.arg(task, "observable", "observable"),
                          obs_a=ctx.opt(task, "first", "observable"),
                          samples=ctx.samples, seed=seed, tol=ctx.tol)
    return rep.to_dict(), rep.agrees_with_disturbance and rep.consistent_with_commutation


def _task_commutator(ctx: Context, task: dict, seed: int):
    rep = commutator_criterion(ctx.arg(task, "model", "model"),
                               ctx.arg(task, "observable", "observable"), tol=ctx.tol)
    return rep.to_dict(), rep.agrees_with_disturbance


def _task_local(ctx: Context, task: dict, seed: int):
    r = local_residual(ctx.arg(task, "model", "model"), task["dims"], int(task.get("which", 0)))
    return {"local": r <= ctx.tol, "residual": r}, None


def _task_epr(ctx: Context, task: dict, seed: int):
    rep = epr_joint(ctx.arg(task, "model", "model"), ctx.arg(task, "first", "observable"),
                    ctx.arg(task, "second", "observable"), ctx.arg(task, "state", "state"),
                    tol=ctx.tol)
    return rep.to_dict(), rep.passed


def _task_epr_reduce(ctx: Context, task: dict, seed: int):
    rep = epr_reduction(ctx.defs.vector(task["vector"]), ctx.defs.matrix(task["basis"]),
                        ctx.arg(task, "observable", "observable"), task.get("values"),
                        tol=ctx.tol)
    return rep.to_dict(), rep.passed


def _task_classify(ctx: Context, task: dict, seed: int):
    instr = ctx.arg(task, "instrument", "instrument")
    obs = ctx.arg(task, "observable", "observable")
    names = task.get("candidates", [])
    cands = {n: ctx.defs.get(n, "observable") for n in names}
    rep = is_minimum_disturbing(instr, obs, cands, samples=min(ctx.samples, 8), seed=seed,
                                tol=ctx.tol)
    out = rep.to_dict()
    out["disturbed_set"] = sorted(disturbed_set(instr, cands, tol=ctx.tol))
    out["repeatability"] = satisfies_repeatability(instr, obs, 8, seed, ctx.tol).to_dict()
    out["projection_postulate"] = satisfies_projection_postulate(instr, obs, ctx.tol).to_dict()
    return out, rep.consistent


HANDLERS = {
    "build-instrument": _task_build, "audit": _task_audit, "joint": _task_joint,
    "disturb": _task_disturb, "simultaneous": _task_simultaneous,
    "commutator": _task_commutator, "local": _task_local, "epr": _task_epr,
    "epr-reduce": _task_epr_reduce, "classify": _task_classify,
}


def _lookup(result: dict, path: str):
    cur = result
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise KeyError(path)
        cur = cur[part]
    return cur


def _matches(actual, expected, tol: float) -> bool:
    if isinstance(expected, bool) or expected is None or isinstance(expected, str):
        return actual == expected
    if isinstance(expected, (int, float)) and isinstance(actual, (int, float)) \
            and not isinstance(actual, bool):
        return abs(actual - expected) <= tol
    try:
        a = np.asarray(actual, dtype=float)
        e = np.asarray(expected, dtype=float)
    except (TypeError, ValueError):
        return actual == expected
    return a.shape == e.shape and bool(np.all(np.abs(a - e) <= tol))


def check_expectations(result: dict, expect: dict, tol: float) -> list[dict]:
    """Mismatches between a task result and its ``expect`` block.

    Keys are dotted paths into the result; numbers and tables compare
    within ``tol``, booleans and strings exactly.
    """
    failed = []
    for key, want in sorted(expect.items()):
        try:
            got = _lookup(result, key)
        except KeyError:
            failed.append({"key": key, "expected": want, "actual": None})
            continue
        if not _matches(got, want, tol):
            failed.append({"key": key, "expected": want, "actual": got})
    return failed


def run_task(ctx: Context, index: int, task: dict) -> dict:
    if not isinstance(task, dict) or task.get("task") not in VERBS:
        raise ScenarioError(f"task {index}: 'task' must be one of {list(VERBS)}")
    seed = ctx.seed + index
    expect = task.get("expect")
    if expect is not None and not isinstance(expect, dict):
        raise ScenarioError(f"task {index}: 'expect' must be an object")
    record = {"index": index, "task": task["task"], "seed": seed,
              "args": {k: v for k, v in sorted(task.items()) if k not in ("task", "expect")}}
    try:
        result, verdict = HANDLERS[task["task"]](ctx, task, seed)
        result = jsonable(result)
    except ScenarioError:
        raise
    except OpMeasureError as exc:
        # domain refusals (not compatible, mixed probe, ...) are results too
        result, verdict = {"error": type(exc).__name__, "message": str(exc)}, False
    if expect is not None:
        tol = float(task.get("expect_tol", ctx.tol))
        mismatches = check_expectations(result, expect, tol)
        record["expect"] = jsonable(expect)
        record["mismatches"] = jsonable(mismatches)
        if "error" in result:
            verdict = not mismatches
        else:
            verdict = (verdict is not False) and not mismatches
    record["verdict"] = None if verdict is None else ("PASS" if verdict else "FAIL")
    record["result"] = result
    return record


def load_scenario(path) -> dict:
    try:
        data = ser.load_json(path)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}")
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    if not isinstance(data.get("tasks", []), list):
        raise ScenarioError(f"{path}: 'tasks' must be a list")
    return data


def run_scenario(data: dict, seed: int = DEFAULT_SEED, samples: int = DEFAULT_SAMPLES,
                 tol: float = TOL, keep_going: bool = False) -> dict:
    """Execute every task in order; stop at the first failed verdict unless ``keep_going``."""
    defs = Definitions(data.get("definitions", {}))
    ctx = Context(defs, seed, samples, tol)
    report = {"scenario": data.get("name", ""), "seed": seed, "samples": samples, "tol": tol,
              "tasks": [], "aborted": False}
    tasks = data.get("tasks", [])
    for i, task in enumerate(tasks):
        try:
            rec = run_task(ctx, i, task)
        except ScenarioError as exc:
            # keep what already ran; the caller decides how to exit
            report["error"] = str(exc)
            report["aborted"] = True
            break
        report["tasks"].append(rec)
        if rec["verdict"] == "FAIL" and not keep_going:
            report["aborted"] = i + 1 < len(tasks)
            break
    report["passed"] = "error" not in report and all(
        t["verdict"] != "FAIL" for t in report["tasks"])
    return report


# ---------------------------------------------------------------------------
# text output


def format_table(headers: list[str], rows: list[list]) -> str:
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    numeric = [all(_is_number(r[i]) for r in cells[1:]) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) if num else c.ljust(w) for c, w, num in zip(r, widths, numeric))
             .rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _summary_line(rec: dict) -> str:
    res = rec["result"]
    if "error" in res:
        return f"{res['error']}: {res['message']}"
    keys = ("passed", "disturbed", "simultaneous", "holds", "local", "minimum_disturbing",
            "residual", "max_residual", "joint_residual")
    parts = [f"{k}={_fmt(res[k])}" for k in keys if k in res and not isinstance(res[k], dict)]
    return " ".join(parts)


def render_text(report: dict) -> str:
    out = [f"scenario: {report['scenario'] or '(unnamed)'}  seed={report['seed']}"]
    rows = [[t["index"], t["task"], t["verdict"] or "-", _summary_line(t)] for t in report["tasks"]]
    out.append(format_table(["#", "task", "verdict", "details"], rows))
    for t in report["tasks"]:
        table = t["result"].get("table")
        if table is not None and "outcomes_a" in t["result"]:
            res = t["result"]
            head = ["a \\ b"] + [_fmt(v) for v in res["outcomes_b"]]
            body = [[_fmt(a)] + row for a, row in zip(res["outcomes_a"], table)]
            out.append(f"\ntask {t['index']} joint distribution")
            out.append(format_table(head, body))
        elif t["task"] == "epr":
            res = t["result"]["joint"]
            head = ["c \\ d"] + [_fmt(v) for v in res["outcomes_b"]]
            body = [[_fmt(a)] + row for a, row in zip(res["outcomes_a"], res["table"])]
            out.append(f"\ntask {t['index']} EPR joint distribution")
            out.append(format_table(head, body))
    if "error" in report:
        out.append(f"\nstopped: {report['error']}")
    elif report["aborted"]:
        out.append("\naborted after a failed verdict (use --keep-going to continue)")
    out.append(f"\noverall: {'PASS' if report['passed'] else 'FAIL'}")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opmeasure",
                                description="Run measurement-theory scenarios and audits.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", type=Path)
    run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    run.add_argument("--tol", type=float, default=TOL)
    run.add_argument("--keep-going", action="store_true",
                     help="run remaining tasks after a failed verdict")
    run.add_argument("--out", type=Path, help="write the JSON report here")
    chk = sub.add_parser("check", help="audit an instrument file")
    chk.add_argument("instrument", type=Path)
    chk.add_argument("--seed", type=int, default=DEFAULT_SEED)
    chk.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    chk.add_argument("--out", type=Path)
    return p


def _write_report(report: dict, path: Path | None) -> None:
    if path is not None:
        ser.save(jsonable(report), path)


def _cmd_run(args) -> int:
    if args.samples < 0 or args.tol <= 0:
        raise ScenarioError("--samples must be >= 0 and --tol > 0")
    data = load_scenario(args.scenario)
    report = run_scenario(data, args.seed, args.samples, args.tol, args.keep_going)
    _write_report(report, args.out)
    print(render_text(report))
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
        return 2
    return 0 if report["passed"] else 1


def _cmd_check(args) -> int:
    try:
        data = ser.load_json(args.instrument)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{args.instrument}: parse error at line {exc.lineno}, "
                            f"column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise ScenarioError(f"{args.instrument}: {exc.strerror or exc}")
    try:
        # unchecked, so that the audit reports which axiom fails
        instr = ser.decode_instrument(data, check=False)
    except (OpMeasureError, TypeError, KeyError) as exc:
        raise ScenarioError(f"{args.instrument}: {_describe(exc)}") from exc
    rep = audit_davies_lewis(instr, samples=args.samples, seed=args.seed)
    report = {"instrument": str(args.instrument), "seed": args.seed, "audit": rep.to_dict(),
              "passed": rep.passed}
    _write_report(report, args.out)
    rows = [[k, v, "ok" if v <= rep.tol else "FAIL"] for k, v in sorted(rep.residuals.items())]
    print(format_table(["axiom", "residual", "status"], rows))
    print(f"\noverall: {'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_check(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
