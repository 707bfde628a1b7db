"""Command-line front end: JSON problem in, report.json and CSV tables out.

    onesided solve|oracle|levy|smoothfit|classify --spec problem.json --out DIR [--seed N] [--threads N]
    onesided bench [--criteria 1,2,3] [--out DIR]

Exit status: 0 on success, 2 when the answer is Inconclusive, 1 on errors
(including a failed oracle cross-validation or benchmark).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from . import __version__, _backend, acceptance, classify, levy, oracle, smoothfit, solver
from .errors import OneSidedError
from .reward import reward_from_dict
from .stochastic import LatticeLaw, law_from_dict

SCHEMA_VERSION = "1"
TASKS = {"solve": "solve", "oracle": "oracle-check", "levy": "levy-sequence", "smoothfit": "smoothfit",
         "classify": "classify", "bench": "bench"}
OK, INCONCLUSIVE, ERROR = "ok", "inconclusive", "error"
EXIT = {OK: 0, INCONCLUSIVE: 2, ERROR: 1}

DEFAULTS = {
    "seed": 0, "mode": "auto", "budget": 1 << 18, "min_budget": 1 << 14, "value_budget": 100_000, "tol": None,
    "confidence": 0.99, "grid": None, "bracket": None, "value_grid": None, "levels": 8, "level": 0, "ell_min": 0,
    "boundary": oracle.GEOMETRIC, "steps": list(smoothfit.DEFAULT_STEPS),
}


class ProblemError(Exception):
    """Invalid problem description; carries the stage that rejected it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def load_schema(name: str) -> dict:
    return json.loads(resources.files("onesided").joinpath("schema", name).read_text())


def validate_problem(problem: dict) -> None:
    try:
        jsonschema.validate(problem, load_schema("problem.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemError("schema", f"{where}: {exc.message}") from None


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_schema("report.schema.json"))


# ---------------------------------------------------------------------------
# JSON / CSV helpers


def jsonable(obj):
    """Plain JSON types with inf/nan spelled as strings, for byte-stable output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_text(header: list, rows: list, delimiter: str = ",") -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# run


@dataclass
class RunOutput:
    task: str
    status: str
    problem: Optional[dict]
    options: dict
    result: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    error: Optional[str] = None

    def report(self) -> dict:
        files = ["report.json"] + [f"{k}.csv" for k, (_, rows) in sorted(self.tables.items())]
        return jsonable({
            "tool": {"name": "artifact", "version": __version__, "schema_version": SCHEMA_VERSION,
                     "backend": _backend.BACKEND, "numpy": np.__version__},
            "task": self.task, "status": self.status, "problem": self.problem, "options": self.options,
            "result": self.result, "files": files, "error": self.error,
        })


def _options(problem: dict, seed: Optional[int], threads: Optional[int]) -> dict:
    opts = dict(DEFAULTS)
    opts.update(problem.get("numerics", {}))
    if seed is not None:
        opts["seed"] = int(seed)
    opts["threads"] = threads
    return opts


def _build(problem: dict):
    try:
        f = reward_from_dict(problem["reward"])
    except OneSidedError as exc:
        raise ProblemError("reward", f"{type(exc).__name__}: {exc}") from None
    proc = problem["process"]
    try:
        if "mode" in proc:
            return f, law_from_dict(proc), None
        return f, None, levy.model_from_dict(proc)
    except OneSidedError as exc:
        raise ProblemError("stochastic", f"{type(exc).__name__}: {exc}") from None


def _law_for(law, model, opts, q):
    """Increment law and per-step discount; a Levy model is discretized at numerics.level."""
    if law is not None:
        return law, q
    dt = 2.0 ** -int(opts["level"])
    return levy.step_law(model, dt), q * dt


def _value_rows(V, f, xs) -> list:
    if V is None or xs.size == 0:
        return []
    v, se = V.with_error(xs)
    return [(x, float(f.eval(x)), vv, s) for x, vv, s in zip(xs, v, se)]


def _default_value_grid(sol, law) -> np.ndarray:
    scale = law.unit if isinstance(law, LatticeLaw) else 1.0
    c = sol.u if sol.regime == solver.FINITE else 0.0
    if isinstance(law, LatticeLaw):
        return scale * (math.floor(c / scale) + np.arange(-10, 6))
    return np.linspace(c - 3 * scale, c + scale, 9)


def task_solve(problem, opts) -> RunOutput:
    f, law, model = _build(problem)
    q = float(problem["q"])
    law, qs = _law_for(law, model, opts, q)
    tol = opts["tol"] if opts["tol"] is not None else (1e-9 if isinstance(law, LatticeLaw) else 1e-3)
    opts["tol"] = tol
    res = solver.solve(law, f, qs, bracket=opts["bracket"], tol=tol, confidence=opts["confidence"],
                       mode=opts["mode"], budget=opts["budget"], value_budget=opts["value_budget"],
                       seed=opts["seed"], threads=opts["threads"])
    sol = res.solution
    grid = (np.asarray(opts["value_grid"], dtype=float) if opts["value_grid"] is not None
            else _default_value_grid(sol, law))
    rows = _value_rows(res.V, f, grid)
    result = res.to_dict()
    status = INCONCLUSIVE if sol.regime == solver.INCONCLUSIVE else OK
    return RunOutput("solve", status, problem, opts, result, {
        "value": (["x", "g", "V", "se"], rows),
        "ratio": (["x", "rho", "se"], [list(t) for t in sol.ratio_trace]),
    })


def task_oracle(problem, opts) -> RunOutput:
    f, law, model = _build(problem)
    if not isinstance(law, LatticeLaw):
        raise ProblemError("oracle", "the DP oracle needs a lattice increment law")
    q = float(problem["q"])
    tol = opts["tol"] if opts["tol"] is not None else 1e-9
    opts["tol"] = tol
    res = solver.solve(law, f, q, bracket=opts["bracket"], tol=tol, mode="exact", seed=opts["seed"])
    sol = res.solution
    if sol.regime != solver.FINITE:
        raise ProblemError("oracle", f"cross-validation needs a finite threshold, solver gave {sol.regime}")
    u = sol.u
    grid = opts["grid"] or [math.floor(min(u, 0.0)) - 60 * law.unit, math.ceil(max(u, 0.0)) + 20 * law.unit]
    opts["grid"] = list(grid)
    dp = oracle.value_iteration(law, f, q, grid, boundary=opts["boundary"])
    cv = oracle.cross_validate(u, res.V, dp, law.unit)
    rows = [(x, g, v, int(s)) for x, g, v, s in zip(dp.grid, dp.rewards, dp.values, dp.stopping)]
    result = {"solution": sol.to_dict(), "cross_validation": cv,
              "dp": {"iterations": dp.iterations, "residual": dp.residual, "converged": dp.converged,
                     "boundary": dp.boundary, "boundary_rate": dp.boundary_rate}}
    return RunOutput("oracle-check", OK if cv["pass"] else ERROR, problem, opts, result,
                     {"value": (["x", "g", "V", "inStoppingSet"], rows),
                      "ratio": (["x", "rho", "se"], [list(t) for t in sol.ratio_trace])},
                     None if cv["pass"] else "oracle: cross-validation failed")


def task_levy(problem, opts) -> RunOutput:
    f, law, model = _build(problem)
    if model is None:
        raise ProblemError("levy", "the dyadic sequence needs a Levy model, not an increment law")
    tol = opts["tol"] if opts["tol"] is not None else 1e-3
    opts["tol"] = tol
    budget = min(opts["budget"], 1 << 16) if "budget" not in problem.get("numerics", {}) else opts["budget"]
    opts["budget"] = budget
    seq = levy.threshold_sequence(model, f, float(problem["q"]), int(opts["levels"]), per_level_budget=budget,
                                  seed=opts["seed"], tol=tol, confidence=opts["confidence"],
                                  ell_min=int(opts["ell_min"]), threads=opts["threads"], bracket=opts["bracket"])
    rows = [(r.level, r.u, r.tolerance, r.se) for r in seq.levels]
    result = {"sequence": seq.to_dict(), "regularity": levy.regularity_of_zero(model)}
    status = OK if all(r.regime != solver.INCONCLUSIVE for r in seq.levels) else INCONCLUSIVE
    return RunOutput("levy-sequence", status, problem, opts, result,
                     {"sequence": (["level", "u", "tol", "se"], rows)})


def task_smoothfit(problem, opts) -> RunOutput:
    f, law, model = _build(problem)
    if model is None:
        raise ProblemError("smoothfit", "smooth-fit analysis needs a Levy model")
    level = int(opts["level"]) if "level" in problem.get("numerics", {}) else 10
    opts["level"] = level
    budget = opts["budget"] if "budget" in problem.get("numerics", {}) else 1 << 15
    opts["budget"] = budget
    rep = smoothfit.analyze(model, f, float(problem["q"]), None, confidence=opts["confidence"], budget=budget,
                            seed=opts["seed"], level=level, threads=opts["threads"], steps=opts["steps"])
    return RunOutput("smoothfit", OK, problem, opts, {"smoothfit": rep.to_dict()},
                     {"fd": (["eps", "difference", "se"], [list(t) for t in rep.fd_table])})


def task_classify(problem, opts) -> RunOutput:
    f, law, model = _build(problem)
    q = float(problem["q"])
    cont = model is not None
    law = model.time1_law if cont else law
    verdict = classify.light_tail_characterization(law, f, q, continuous_extension=cont)
    result = {"verdict": verdict.to_dict(), "tests": classify.classify(law, f, q, cont)}
    status = INCONCLUSIVE if verdict.verdict == classify.INCONCLUSIVE else OK
    return RunOutput("classify", status, problem, opts, result)


TASK_FUNCS = {"solve": task_solve, "oracle-check": task_oracle, "levy-sequence": task_levy,
              "smoothfit": task_smoothfit, "classify": task_classify}


def run(problem: dict, task: Optional[str] = None, seed: Optional[int] = None,
        threads: Optional[int] = None) -> RunOutput:
    """Validate and run one problem; errors become a report with status 'error'."""
    task = task or problem.get("task")
    if task not in TASK_FUNCS:
        return RunOutput(str(task), ERROR, problem, {}, {}, error=f"cli: unknown task {task!r}")
    opts: dict = {}
    try:
        validate_problem(problem)
        opts = _options(problem, seed, threads)
        return TASK_FUNCS[task](problem, opts)
    except ProblemError as exc:
        return RunOutput(task, ERROR, problem, opts, {}, error=str(exc))
    except OneSidedError as exc:
        mod = type(exc).__module__.split(".")[-1]
        return RunOutput(task, ERROR, problem, opts, {}, error=f"{task}: {type(exc).__name__}: {exc} ({mod})")


def emit_plot_data(out: RunOutput, out_dir: str) -> list:
    """Tab-separated plot columns: value vs reward, ratio trace and the threshold staircase.

    Tables that are empty (no grid, no trace) give empty files.
    """
    specs = {
        "plot_value.tsv": ("value", [0, 1, 2]),
        "plot_ratio.tsv": ("ratio", [0, 1, 2]),
        "plot_staircase.tsv": ("sequence", [0, 1]),
    }
    written = []
    for fname, (key, cols) in specs.items():
        header, rows = out.tables.get(key, ([], []))
        text = table_text([header[c] for c in cols], [[r[c] for c in cols] for r in rows], "\t") if rows else ""
        write_atomic(os.path.join(out_dir, fname), text)
        written.append(fname)
    return written


def write_outputs(out: RunOutput, out_dir: str, plots: bool = True) -> dict:
    rep = out.report()
    validate_report(rep)
    for name, (header, rows) in sorted(out.tables.items()):
        write_atomic(os.path.join(out_dir, f"{name}.csv"), table_text(header, rows))
    if plots:
        emit_plot_data(out, out_dir)
    write_atomic(os.path.join(out_dir, "report.json"), dumps(rep))
    return rep


# ---------------------------------------------------------------------------
# entry point


def _threads(arg: Optional[int]) -> Optional[int]:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("ONESIDED_THREADS")
    return max(1, int(env)) if env else None


def _bench(args) -> int:
    which = [int(k) for k in args.criteria.split(",")] if args.criteria else None
    results = []
    for k in (which or sorted(acceptance.CRITERIA)):
        r = acceptance.CRITERIA[k]()
        print(r.line(), flush=True)
        results.append(r)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria pass")
    if args.out:
        out = RunOutput("bench", OK if ok else ERROR, None, {"criteria": which or sorted(acceptance.CRITERIA)},
                        {"criteria": [r.to_dict() for r in results]})
        write_outputs(out, args.out, plots=False)
    return 0 if ok else 1


def main(argv: Optional[list] = None) -> int:
    p = argparse.ArgumentParser(prog="onesided", description="One-sided optimal stopping solver and checks.")
    p.add_argument("task", choices=sorted(TASKS))
    p.add_argument("--spec", help="problem JSON file")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="overrides numerics.seed")
    p.add_argument("--threads", type=int, help="worker threads (default: ONESIDED_THREADS or CPU count)")
    p.add_argument("--criteria", help="bench only: comma-separated criterion numbers")
    args = p.parse_args(argv)
    if args.seed is not None and args.seed < 0:
        p.error("--seed must be nonnegative")
    if args.task == "bench":
        return _bench(args)
    if not args.spec:
        p.error("--spec is required")
    try:
        with open(args.spec) as fh:
            problem = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cli: cannot read problem: {exc}", file=sys.stderr)
        return 1
    out = run(problem, TASKS[args.task], args.seed, _threads(args.threads))
    write_outputs(out, args.out or ".")
    if out.error:
        print(f"error: {out.error}", file=sys.stderr)
    else:
        print(f"{out.task}: {out.status}")
    return EXIT[out.status]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
