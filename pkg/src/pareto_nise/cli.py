"""Experiment runner: instance generation, single runs, comparisons, hypervolume.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 partial result
after a solver timeout.
"""

from __future__ import annotations

import argparse
import functools
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import mip
from .core import ContractError, Frontier, OracleError, nondominated_mask
from .metrics import MC_SAMPLES, evaluate_hypervolume, reference_point
from .monise import MoniseRun, SelectionError
from .nise2d import NiseRun
from .problems import (
    QuadraticSimplexProblem,
    knapsack_generate,
    load_problem,
    problem_from_dict,
    save_problem,
    synthetic_multilabel_generate,
)

ALGORITHMS = ("nise", "monise", "random-weights")
EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_TIMEOUT = 0, 2, 3, 4


class UsageError(ContractError):
    """Bad configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# ---------------------------------------------------------------------------
# configuration and reports


@dataclass
class RunConfig:
    """One experiment.

    ``problem`` is either ``{"path": ...}`` for an instance file or a
    generator spec such as ``{"type": "knapsack", "q": 20, "m": 5, "c": 0.5,
    "seed": 1}``. ``max_iter=None`` means 5·m for MONISE and 200 for NISE.
    """

    problem: dict
    algorithm: str = "monise"
    mu_stop: float = 1e-3
    max_iter: int | None = None
    solution_budget: int | None = None
    seed: int = 0
    output: str | None = None
    max_nodes: int | None = None

    def validate(self) -> None:
        if not isinstance(self.problem, dict) or not self.problem:
            raise UsageError("problem", "expected a path or a generator spec")
        if self.algorithm not in ALGORITHMS:
            raise UsageError("algorithm", f"must be one of {', '.join(ALGORITHMS)}")
        if not self.mu_stop > 0:
            raise UsageError("mu_stop", "must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise UsageError("max_iter", "must be positive")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise UsageError("max_nodes", "must be positive")
        if self.algorithm == "random-weights":
            if self.solution_budget is None or self.solution_budget < 1:
                raise UsageError("solution_budget", "random-weights needs a positive budget")
        elif self.solution_budget is not None and self.solution_budget < 1:
            raise UsageError("solution_budget", "must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise UsageError(sorted(extra)[0], "unknown config field")
        if "problem" not in data:
            raise UsageError("problem", "missing")
        return cls(**data)


@dataclass
class RunReport:
    """Everything a run produced, in plain JSON-friendly types."""

    config: dict
    instance_id: str
    m: int
    algorithm: str
    status: str
    solutions: list = field(default_factory=list)
    mu_history: list = field(default_factory=list)
    oracle_seconds: float = 0.0
    selection_seconds: float = 0.0
    total_seconds: float = 0.0
    oracle_calls: int = 0
    failures: int = 0
    dominated_removed: int = 0
    hypervolume: dict | None = None

    def objective_matrix(self) -> np.ndarray:
        if not self.solutions:
            return np.empty((0, self.m))
        return np.array([s["objectives"] for s in self.solutions], dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def load_report(path) -> RunReport:
    return RunReport.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# experiments


def build_problem(spec: dict):
    """Load an instance file or generate one from a spec."""
    if "path" in spec:
        try:
            return load_problem(spec["path"])
        except OSError as exc:
            raise UsageError("problem.path", str(exc)) from exc
    kind = spec.get("type")
    if "values" in spec or "X" in spec:
        # a full instance rather than generator parameters
        try:
            return problem_from_dict(spec)
        except (KeyError, ContractError) as exc:
            raise UsageError("problem", str(exc)) from exc
    try:
        if kind == "knapsack":
            return knapsack_generate(int(spec["q"]), int(spec["m"]), float(spec.get("c", 0.5)),
                                     int(spec.get("seed", 0)))
        if kind == "multilabel":
            return synthetic_multilabel_generate(int(spec["n"]), int(spec["d"]),
                                                 int(spec["L"]), int(spec.get("seed", 0)))
        if kind == "quadratic":
            return QuadraticSimplexProblem(int(spec.get("m", 3)))
    except KeyError as exc:
        raise UsageError(f"problem.{exc.args[0]}", "missing") from exc
    except ContractError as exc:
        raise UsageError("problem", str(exc)) from exc
    raise UsageError("problem.type", f"unknown problem type {kind!r}")


def instance_id(problem) -> str:
    blob = json.dumps(problem.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def sample_simplex(rng: np.random.Generator, m: int, size: int) -> np.ndarray:
    """Uniform draws on the unit simplex (Dirichlet with all ones)."""
    return rng.dirichlet(np.ones(m), size=size)


def random_weights_baseline(problem, budget: int, seed: int) -> Frontier:
    """Solve the oracle at ``budget`` uniform random simplex weights.

    Failed oracle calls are skipped and counted; repeated objective vectors
    are kept once.
    """
    if budget < 1:
        raise ContractError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    fr = Frontier()
    for w in sample_simplex(rng, problem.m, budget):
        t0 = time.perf_counter()
        try:
            sol = problem.solve_weighted(w / w.sum())
        except OracleError:
            fr.failures += 1
            continue
        finally:
            fr.oracle_seconds += time.perf_counter() - t0
        fr.add(sol)
    fr.status = "budget"
    return fr


def _solutions(fr: Frontier) -> tuple[list, int]:
    if not fr.solutions:
        return [], 0
    keep = nondominated_mask(fr.objective_matrix())
    sols = [s.to_dict() for s, k in zip(fr.solutions, keep) if k]
    return sols, int((~keep).sum())


def run_experiment(config: RunConfig) -> tuple[RunReport, int]:
    """Run one configuration. Returns the report and the process exit code.

    Solver failures still produce a (partial) report.
    """
    config.validate()
    problem = build_problem(config.problem)
    if config.algorithm == "nise" and problem.m != 2:
        raise UsageError("algorithm", f"nise needs m=2, instance has m={problem.m}")

    solver = None
    if config.max_nodes is not None:
        solver = functools.partial(mip.branch_and_bound, max_nodes=config.max_nodes)
    code = EXIT_OK
    t0 = time.perf_counter()
    runner = None
    try:
        if config.algorithm == "nise":
            runner = NiseRun(problem, config.mu_stop,
                             200 if config.max_iter is None else config.max_iter)
            fr = runner.run()
            calls = 2 + len(runner.weights)
        elif config.algorithm == "monise":
            max_iter = config.max_iter
            if config.solution_budget is not None:
                # oracle budget covers the m minima and the seed solve
                max_iter = max(0, config.solution_budget - problem.m - 1)
            runner = MoniseRun(problem, config.mu_stop, max_iter, solver)
            fr = runner.run()
            calls = problem.m + len(runner.weights)
        else:
            fr = random_weights_baseline(problem, config.solution_budget, config.seed)
            calls = config.solution_budget
    except SelectionError as exc:
        fr = exc.partial if exc.partial is not None else Frontier(status="failed")
        code = EXIT_TIMEOUT if fr.status == "timeout" else EXIT_SOLVER
        calls = problem.m + len(runner.weights) if runner is not None else 0
    except OracleError as exc:
        fr = exc.partial if isinstance(exc.partial, Frontier) else Frontier()
        fr.status = "failed"
        code = EXIT_SOLVER
        calls = len(getattr(runner, "weights", [])) if runner is not None else 0
    total = time.perf_counter() - t0

    sols, removed = _solutions(fr)
    hv = None
    if sols:
        pts = np.array([s["objectives"] for s in sols])
        hv = evaluate_hypervolume(pts, reference_point([pts]), MC_SAMPLES,
                                  config.seed).to_dict()
    report = RunReport(
        config=config.to_dict(),
        instance_id=instance_id(problem),
        m=problem.m,
        algorithm=config.algorithm,
        status=fr.status,
        solutions=sols,
        mu_history=[float(x) for x in fr.mu_history],
        oracle_seconds=fr.oracle_seconds,
        selection_seconds=fr.selection_seconds,
        total_seconds=total,
        oracle_calls=int(calls),
        failures=fr.failures,
        dominated_removed=removed,
        hypervolume=hv,
    )
    if config.output:
        Path(config.output).write_text(report.to_json())
    return report, code


# ---------------------------------------------------------------------------
# comparison


COLUMNS = ("algorithm", "m", "solutions", "hypervolume", "seconds")


@dataclass
class Comparison:
    reference: np.ndarray
    rows: list
    hypervolumes: list

    def to_text(self, delimiter: str = ",") -> str:
        lines = [delimiter.join(COLUMNS)]
        for row in self.rows:
            lines.append(delimiter.join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def compare_runs(reports: list, samples: int = MC_SAMPLES, seed: int = 0) -> Comparison:
    """Hypervolume of every report against one reference point taken from all fronts."""
    if not reports:
        raise ContractError("compare_runs needs at least one report")
    ids = {r.instance_id for r in reports}
    if len(ids) != 1:
        raise ContractError(f"reports come from different instances: {sorted(ids)}")
    fronts = [r.objective_matrix() for r in reports]
    ref = reference_point(fronts)
    rows, hvs = [], []
    for r, front in zip(reports, fronts):
        hv = evaluate_hypervolume(front, ref, samples, seed)
        hvs.append(hv)
        rows.append((r.algorithm, r.m, len(r.solutions), repr(hv.value),
                     f"{r.total_seconds:.6f}"))
    return Comparison(ref, rows, hvs)


# ---------------------------------------------------------------------------
# command line


def _read_points(path) -> np.ndarray:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return np.atleast_2d(np.loadtxt(path, delimiter=None if "," not in text else ","))
    if isinstance(data, dict):
        if "solutions" in data:
            data = [s["objectives"] for s in data["solutions"]]
        else:
            data = data.get("points", [])
    return np.atleast_2d(np.asarray(data, dtype=float))


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pareto-nise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write an instance file")
    g.add_argument("type", choices=["knapsack", "multilabel", "quadratic"])
    g.add_argument("--q", type=int, default=20, help="knapsack items")
    g.add_argument("--m", type=int, default=3, help="objectives (knapsack, quadratic)")
    g.add_argument("--c", type=float, default=0.5, help="knapsack capacity fraction")
    g.add_argument("--n", type=int, default=100, help="multilabel samples")
    g.add_argument("--d", type=int, default=3, help="multilabel features")
    g.add_argument("--L", type=int, default=2, help="multilabel labels")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)

    r = sub.add_parser("run", help="run one experiment and write a JSON report")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance file written by 'generate'")
    src.add_argument("--problem", choices=["knapsack", "multilabel", "quadratic"])
    src.add_argument("--config", help="RunConfig as JSON")
    r.add_argument("--q", type=int, default=20)
    r.add_argument("--m", type=int, default=3)
    r.add_argument("--c", type=float, default=0.5)
    r.add_argument("--n", type=int, default=100)
    r.add_argument("--d", type=int, default=3)
    r.add_argument("--L", type=int, default=2)
    r.add_argument("--instance-seed", type=int, default=0)
    r.add_argument("--algorithm", choices=ALGORITHMS, default="monise")
    r.add_argument("--mu-stop", type=float, default=1e-3)
    r.add_argument("--max-iter", type=int)
    r.add_argument("--budget", type=int, dest="solution_budget")
    r.add_argument("--max-nodes", type=int, help="branch-and-bound node budget")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--output")

    c = sub.add_parser("compare", help="hypervolume table for reports on one instance")
    c.add_argument("reports", nargs="+")
    c.add_argument("--delimiter", default=",")
    c.add_argument("--samples", type=int, default=MC_SAMPLES)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("-o", "--output")

    h = sub.add_parser("hv", help="hypervolume of a point file")
    h.add_argument("points", help="JSON list, report file, or whitespace/comma text")
    h.add_argument("--reference", type=_floats,
                   help="reference point; default is the worst value per objective")
    h.add_argument("--samples", type=int, default=MC_SAMPLES)
    h.add_argument("--seed", type=int, default=0)
    return p


def _config_from_args(args) -> RunConfig:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError("config", str(exc)) from exc
        return RunConfig.from_dict(data)
    if args.instance:
        spec = {"path": args.instance}
    elif args.problem == "knapsack":
        spec = {"type": "knapsack", "q": args.q, "m": args.m, "c": args.c,
                "seed": args.instance_seed}
    elif args.problem == "multilabel":
        spec = {"type": "multilabel", "n": args.n, "d": args.d, "L": args.L,
                "seed": args.instance_seed}
    elif args.problem == "quadratic":
        spec = {"type": "quadratic", "m": args.m}
    else:
        raise UsageError("problem", "give --instance, --problem or --config")
    return RunConfig(spec, args.algorithm, args.mu_stop, args.max_iter,
                     args.solution_budget, args.seed, args.output, args.max_nodes)


def _generate(args) -> int:
    try:
        if args.type == "knapsack":
            prob = knapsack_generate(args.q, args.m, args.c, args.seed)
        elif args.type == "multilabel":
            prob = synthetic_multilabel_generate(args.n, args.d, args.L, args.seed)
        else:
            prob = QuadraticSimplexProblem(args.m)
    except ContractError as exc:
        raise UsageError(args.type, str(exc)) from exc
    save_problem(prob, args.output)
    return EXIT_OK


def _run(args) -> int:
    config = _config_from_args(args)
    report, code = run_experiment(config)
    if not config.output:
        print(report.to_json())
    hv = report.hypervolume["value"] if report.hypervolume else float("nan")
    print(f"{report.algorithm}: {len(report.solutions)} solutions, status {report.status}, "
          f"hypervolume {hv:.6g}, {report.total_seconds:.2f} s", file=sys.stderr)
    return code


def _compare(args) -> int:
    try:
        reports = [load_report(p) for p in args.reports]
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise UsageError("reports", str(exc)) from exc
    table = compare_runs(reports, args.samples, args.seed).to_text(args.delimiter)
    if args.output:
        Path(args.output).write_text(table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def _hv(args) -> int:
    try:
        pts = _read_points(args.points)
    except (OSError, ValueError) as exc:
        raise UsageError("points", str(exc)) from exc
    ref = np.asarray(args.reference) if args.reference else reference_point([pts])
    res = evaluate_hypervolume(pts, ref, args.samples, args.seed)
    print(json.dumps(res.to_dict()))
    return EXIT_OK


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    handler = {"generate": _generate, "run": _run, "compare": _compare, "hv": _hv}[args.verb]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OracleError, SelectionError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
