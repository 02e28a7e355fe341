"""Command-line experiment runner.

Subcommands: ``gen-data``, ``solve``, ``compare``, ``robustness``, ``sweep``.
Experiment subcommands take ``--config FILE`` plus dotted overrides such as
``--solver.eta0 0.05``.  Exit codes: 0 success, 2 configuration or usage
error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import train_strategic_logreg
from .config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
    parse_override_args,
)
from .data import CsvSchema, SyntheticSpec, generate_synthetic, load_csv, write_csv
from .errors import (
    DataLoadError,
    InvalidArgumentError,
    NonConvergenceError,
    NumericalFailureError,
    UnsupportedModeError,
)
from .geometry import FeasibleSet
from .metrics import gap_function, robustness_curve
from .oracle import EstimatorMode, FiniteSumOracle
from .solvers import (
    RunResult,
    Schedule,
    SolverConfig,
    Trace,
    Variant,
    fixed_point_residual,
    estimate_smoothness,
    reference_saddle,
    run,
)
from .svg import Band, Series, band_chart, bar_chart, line_chart
from .toys import make_bilinear_toy
from .wdrsc import LINKS, QuadraticCost, StrategicDataset, build_objective, mask_from_indices

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "ZO_MINMAX_THREADS"
REFERENCE_RESIDUAL_MAX = 1e-8
CURVE_HEADER = ("classifier", "zeta", "margin_accuracy", "sign_accuracy")
COMBINED_HEADER = ("variant", "seed", "epoch", "queries", "suboptimality")
BANDS_HEADER = ("epoch", "variant", "mean", "std")
SWEEP_HEADER = ("n", "d", "status", "epochs", "queries", "suboptimality")


# -- small utilities ---------------------------------------------------------


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    return "" if v is None else f"{v:.17g}"


def worker_count(jobs: int) -> int:
    """Threads for ``jobs`` independent runs, capped by $ZO_MINMAX_THREADS."""
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(cap, jobs))


def parallel_map(fn, items: list) -> list:
    """Ordered results regardless of completion order."""
    workers = worker_count(len(items))
    if workers == 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def write_manifest(out_dir: Path, cfg: ExperimentConfig, command: str, started: str, runs: list[dict], files: list[str]):
    first = runs[0] if runs else {}
    manifest = {
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.solver.seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "final_gap": first.get("final_gap"),
        "queries": first.get("queries"),
        "runs": runs,
        "files": sorted(files),
        "config": cfg.to_dict(),
    }
    atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- problem assembly --------------------------------------------------------


@dataclass
class Problem:
    oracle: FiniteSumOracle
    feasible: FeasibleSet
    dataset: StrategicDataset | None = None
    reference: np.ndarray | None = None

    def evaluator(self):
        return None if self.reference is None else gap_function(self.oracle, self.reference)


def load_dataset(cfg: ExperimentConfig) -> StrategicDataset:
    ds_cfg = cfg.dataset
    if ds_cfg.path is not None:
        schema = CsvSchema(label_column=ds_cfg.label_column, standardize=ds_cfg.standardize)
        dataset = load_csv(ds_cfg.path, schema)
        if ds_cfg.strategic is not None:
            dataset = dataset.with_mask(mask_from_indices(dataset.d, range(ds_cfg.strategic)))
    else:
        spec = SyntheticSpec(ds_cfg.n, ds_cfg.d, ds_cfg.noise_std, ds_cfg.strategic, ds_cfg.seed)
        dataset, _ = generate_synthetic(spec)
    if cfg.model.mask is not None:
        if any(not 0 <= j < dataset.d for j in cfg.model.mask):
            raise ConfigError(f"model.mask indices must lie in [0, {dataset.d})")
        dataset = dataset.with_mask(mask_from_indices(dataset.d, cfg.model.mask))
    return dataset


def wdrsc_objective(cfg: ExperimentConfig, dataset: StrategicDataset):
    if cfg.objective.link not in LINKS:
        raise ConfigError(f"objective.link must be one of {sorted(LINKS)}")
    model = QuadraticCost(dataset, cfg.model.zeta)
    ob = cfg.objective
    return build_objective(dataset, model, LINKS[ob.link], ob.delta, ob.kappa, ob.alpha_max)


def build_problem(cfg: ExperimentConfig, dataset: StrategicDataset | None = None, with_reference=None) -> Problem:
    if cfg.problem == "toy-bilinear":
        oracle = make_bilinear_toy(cfg.dataset.n, cfg.dataset.d, cfg.dataset.seed)
        problem = Problem(oracle, oracle.feasible)
    else:
        dataset = dataset if dataset is not None else load_dataset(cfg)
        oracle = wdrsc_objective(cfg, dataset)
        problem = Problem(oracle, oracle.feasible, dataset)
    if cfg.reference.enabled if with_reference is None else with_reference:
        problem.reference = compute_reference(cfg, problem)
    return problem


def compute_reference(cfg: ExperimentConfig, problem: Problem) -> np.ndarray:
    ref_cfg = cfg.reference
    smoothness = estimate_smoothness(problem.oracle, problem.feasible)
    point = reference_saddle(
        problem.oracle, problem.feasible, ref_cfg.tol, ref_cfg.max_iters, ref_cfg.method, smoothness=smoothness
    )
    residual = fixed_point_residual(problem.oracle, problem.feasible, point, 1.0 / (4.0 * smoothness))
    if residual > max(REFERENCE_RESIDUAL_MAX, ref_cfg.tol):
        raise NonConvergenceError(f"reference residual {residual:.3e} above {REFERENCE_RESIDUAL_MAX}", residual)
    return point


def initial_point(cfg: ExperimentConfig, problem: Problem) -> np.ndarray:
    if cfg.solver.init == "far":
        if not hasattr(problem.oracle, "initial_point"):
            raise ConfigError("solver.init = far needs the wdrsc problem")
        return problem.oracle.initial_point("far")
    return np.zeros(problem.oracle.dim)


def solver_config(cfg: ExperimentConfig, problem: Problem, variant: str, seed: int, epochs: int | None = None) -> SolverConfig:
    s = cfg.solver
    schedule = Schedule(s.eta0, s.eps0, s.chi, s.eta_exponent, s.eps_exponent)
    return SolverConfig(
        variant=Variant(variant),
        epochs=epochs or s.epochs,
        schedule=schedule,
        feasible=problem.feasible,
        estimator_mode=EstimatorMode(s.estimator_mode),
        seed=seed,
        init=initial_point(cfg, problem),
        eval_every=s.eval_every,
        snapshot_every=cfg.outputs.snapshot_every,
    )


class PartialRunError(Exception):
    """Carries the trace recorded before a numerical failure."""

    def __init__(self, cause: NumericalFailureError, trace: Trace):
        super().__init__(str(cause))
        self.cause = cause
        self.trace = trace


def run_logged(config: SolverConfig, problem: Problem, stop=None) -> RunResult:
    seen = Trace()

    def record(rec):
        seen.append(rec)
        return bool(stop(rec)) if stop is not None else False

    try:
        return run(config, problem.oracle, evaluate=problem.evaluator(), stop=record)
    except NumericalFailureError as exc:
        raise PartialRunError(exc, seen) from exc


def variants_of(cfg: ExperimentConfig) -> list[str]:
    if cfg.solver.variant == "all":
        return [v.value for v in Variant]
    return [cfg.solver.variant]


def _final_gap(trace: Trace):
    return trace.records[-1].suboptimality if trace.records else None


def _variant_path(base: str, variant: str, many: bool) -> str:
    if not many:
        return base
    stem, dot, ext = base.rpartition(".")
    return f"{stem}_{variant}.{ext}" if dot else f"{base}_{variant}"


# -- commands ----------------------------------------------------------------


def cmd_gen_data(args) -> int:
    started = _now()
    out = Path(args.out)
    spec = SyntheticSpec(args.n, args.d, args.noise_std, args.strategic, args.seed)
    dataset, theta_star = generate_synthetic(spec)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, out / "data.csv")
    sidecar = {
        "theta_star": [float(v) for v in theta_star],
        "strategic": [int(j) for j in np.flatnonzero(dataset.strategic_mask)],
    }
    atomic_write(out / "theta_star.json", json.dumps(sidecar, indent=2) + "\n")
    cfg = ExperimentConfig()
    cfg.dataset.n, cfg.dataset.d, cfg.dataset.seed = args.n, args.d, args.seed
    cfg.dataset.noise_std, cfg.dataset.strategic = args.noise_std, spec.strategic
    cfg.solver.seed = args.seed
    write_manifest(out, cfg, "gen-data", started, [], ["data.csv", "theta_star.json"])
    print(f"wrote {dataset.n} rows to {out / 'data.csv'}")
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig) -> int:
    started = _now()
    out = Path(cfg.outputs.dir)
    problem = build_problem(cfg)
    variants = variants_of(cfg)
    many = len(variants) > 1

    def job(variant):
        try:
            return variant, run_logged(solver_config(cfg, problem, variant, cfg.solver.seed), problem), None
        except PartialRunError as exc:
            return variant, None, exc

    results = parallel_map(job, variants)
    files, runs, series, failure = [], [], [], None
    for variant, result, err in results:
        name = _variant_path(cfg.outputs.trace_csv, variant, many)
        trace = result.trace if result is not None else err.trace
        atomic_write(out / name, trace.to_csv(include_wall_time=cfg.outputs.wall_time))
        files.append(name)
        if err is not None:
            failure = failure or err
            continue
        runs.append({"variant": variant, "seed": cfg.solver.seed, "final_gap": _final_gap(trace), "queries": result.queries, "trace": name})
        series.append(Series(Variant(variant).label, [r.epoch for r in trace], [r.suboptimality or 0.0 for r in trace]))
        if variant == variants[0]:
            files.append(_write_solution(out, cfg, problem, variant, result.point))
    if cfg.outputs.plot_svg and series and problem.reference is not None:
        atomic_write(out / cfg.outputs.plot_svg, line_chart(series, title="suboptimality"))
        files.append(cfg.outputs.plot_svg)
    write_manifest(out, cfg, "solve", started, runs, files)
    if failure is not None:
        raise failure.cause
    for r in runs:
        gap = "n/a" if r["final_gap"] is None else f"{r['final_gap']:.6g}"
        print(f"{r['variant']}: final gap {gap}, queries {r['queries']}")
    return EXIT_OK


def _write_solution(out: Path, cfg: ExperimentConfig, problem: Problem, variant: str, point: np.ndarray) -> str:
    payload = {"problem": cfg.problem, "variant": variant, "config_hash": cfg.hash(), "point": [float(v) for v in point]}
    if cfg.problem == "wdrsc":
        theta, alpha, gamma = problem.oracle.split(point)
        payload.update(theta=[float(v) for v in theta], alpha=float(alpha), gamma=[float(v) for v in gamma])
    atomic_write(out / "solution.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return "solution.json"


def band_rows(traces: dict[tuple[str, int], Trace], variants: list[str]) -> list[tuple]:
    """Per (epoch, variant): mean and sample std of suboptimality over seeds."""
    rows = []
    for variant in variants:
        per_seed = [t for (v, _), t in sorted(traces.items()) if v == variant]
        epochs = [r.epoch for r in per_seed[0]]
        values = np.array([[r.suboptimality for r in t] for t in per_seed], dtype=np.float64)
        std = values.std(axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(values.shape[1])
        for k, epoch in enumerate(epochs):
            rows.append((epoch, variant, float(values[:, k].mean()), float(std[k])))
    rows.sort(key=lambda r: (r[0], [v.value for v in Variant].index(r[1])))
    return rows


def cmd_compare(cfg: ExperimentConfig) -> int:
    if not cfg.reference.enabled:
        raise ConfigError("compare needs reference.enabled = true")
    started = _now()
    out = Path(cfg.outputs.dir)
    problem = build_problem(cfg)
    variants = [v.value for v in Variant]
    seeds = [cfg.solver.seed + r for r in range(cfg.compare.repeats)]
    jobs = [(v, s) for s in seeds for v in variants]

    def job(item):
        variant, seed = item
        return run_logged(solver_config(cfg, problem, variant, seed), problem)

    try:
        results = parallel_map(job, jobs)
    except PartialRunError as exc:
        raise exc.cause from None
    traces = {key: res.trace for key, res in zip(jobs, results)}
    combined = [
        (v, s, r.epoch, r.queries, _num(r.suboptimality)) for (v, s) in jobs for r in traces[(v, s)]
    ]
    files = [cfg.outputs.trace_csv]
    atomic_write(out / cfg.outputs.trace_csv, _rows_to_csv(COMBINED_HEADER, combined))
    plot = cfg.outputs.plot_svg or "compare.svg"
    if len(seeds) > 1:
        rows = band_rows(traces, variants)
        atomic_write(out / "bands.csv", _rows_to_csv(BANDS_HEADER, [(e, v, _num(m), _num(sd)) for e, v, m, sd in rows]))
        files.append("bands.csv")
        bands = []
        for v in variants:
            mine = [r for r in rows if r[1] == v]
            bands.append(
                Band(
                    Variant(v).label,
                    [r[0] for r in mine],
                    [r[2] for r in mine],
                    [r[2] - 2 * r[3] for r in mine],
                    [r[2] + 2 * r[3] for r in mine],
                )
            )
        atomic_write(out / plot, band_chart(bands, title="suboptimality, mean +- 2 std"))
    else:
        series = [
            Series(Variant(v).label, [r.epoch for r in traces[(v, seeds[0])]], [r.suboptimality for r in traces[(v, seeds[0])]])
            for v in variants
        ]
        atomic_write(out / plot, line_chart(series, title="suboptimality"))
    files.append(plot)
    runs = [
        {"variant": v, "seed": s, "final_gap": _final_gap(traces[(v, s)]), "queries": res.queries}
        for (v, s), res in zip(jobs, results)
    ]
    write_manifest(out, cfg, "compare", started, runs, files)
    for v in variants:
        finals = [_final_gap(traces[(v, s)]) for s in seeds]
        print(f"{v} ({Variant(v).label}): mean final gap {np.mean(finals):.6g} over {len(seeds)} seed(s)")
    return EXIT_OK


def cmd_robustness(cfg: ExperimentConfig) -> int:
    if cfg.problem != "wdrsc":
        raise ConfigError("robustness needs the wdrsc problem")
    started = _now()
    out = Path(cfg.outputs.dir)
    solution_path = out / cfg.robustness.solution
    if not solution_path.exists():
        raise FileNotFoundError(f"missing WDRSC classifier {solution_path}: run the solve stage first")
    try:
        solution = json.loads(solution_path.read_text(encoding="utf-8"))
        theta_robust = np.asarray(solution["theta"], dtype=np.float64)
    except (ValueError, KeyError) as exc:
        raise DataLoadError(f"{solution_path} is not a WDRSC solution file: {exc}") from None
    dataset = load_dataset(cfg)
    if theta_robust.size != dataset.d:
        raise ConfigError(f"solution has {theta_robust.size} weights, dataset has d={dataset.d}")
    theta_base = train_strategic_logreg(
        dataset, cfg.model.zeta, iters=cfg.robustness.baseline_iters, link=LINKS[cfg.objective.link]
    )
    atomic_write(out / "baseline.json", json.dumps({"theta": [float(v) for v in theta_base]}, indent=2) + "\n")
    classifiers = {"WDRSC": theta_robust, "LogReg-SC": theta_base}
    rows = robustness_curve(dataset, classifiers, cfg.robustness.zeta_grid)
    text = _rows_to_csv(CURVE_HEADER, [(name, _num(z), _num(m), _num(s)) for name, z, m, s in rows])
    atomic_write(out / cfg.robustness.curve_csv, text)
    files = ["baseline.json", cfg.robustness.curve_csv]
    if cfg.robustness.plot_svg:
        series = [
            Series(name, [r[1] for r in rows if r[0] == name], [r[3] for r in rows if r[0] == name]) for name in classifiers
        ]
        svg = line_chart(series, title="sign accuracy under perturbation", x_label="zeta", y_label="sign accuracy", log_y=False)
        atomic_write(out / cfg.robustness.plot_svg, svg)
        files.append(cfg.robustness.plot_svg)
    write_manifest(out, cfg, "robustness", started, [], files)
    for name, z, m, s in rows:
        print(f"{name:10s} zeta={z:<6g} margin={m:.4f} sign={s:.4f}")
    return EXIT_OK


def sweep_cell(cfg: ExperimentConfig, n: int, d: int) -> tuple:
    """(n, d, status, epochs, queries, final gap) for one grid cell."""
    spec = SyntheticSpec(n, d, cfg.dataset.noise_std, cfg.dataset.strategic, cfg.dataset.seed)
    dataset, _ = generate_synthetic(spec)
    oracle = wdrsc_objective(cfg, dataset)
    problem = Problem(oracle, oracle.feasible, dataset)
    problem.reference = compute_reference(cfg, problem)
    target = cfg.sweep.epsilon
    start = problem.feasible.project(initial_point(cfg, problem))
    initial_gap = problem.evaluator()(start)
    if initial_gap <= target:
        return n, d, "ok", 0, 0, initial_gap
    config = solver_config(cfg, problem, Variant.OGDA_RR.value, cfg.solver.seed, epochs=cfg.sweep.epoch_cap)
    result = run_logged(config, problem, stop=lambda rec: rec.suboptimality <= target)
    last = result.trace.records[-1]
    status = "ok" if last.suboptimality <= target else "cap"
    return n, d, status, last.epoch, last.queries, last.suboptimality


def cmd_sweep(cfg: ExperimentConfig) -> int:
    if cfg.problem != "wdrsc":
        raise ConfigError("sweep needs the wdrsc problem")
    started = _now()
    out = Path(cfg.outputs.dir)
    cells = [(n, d) for d in cfg.sweep.d_values for n in cfg.sweep.n_values]
    try:
        rows = parallel_map(lambda cell: sweep_cell(cfg, *cell), cells)
    except PartialRunError as exc:
        raise exc.cause from None
    atomic_write(out / cfg.sweep.table_csv, _rows_to_csv(SWEEP_HEADER, [(*r[:5], _num(r[5])) for r in rows]))
    files = [cfg.sweep.table_csv]
    if cfg.sweep.plot_svg:
        svg = bar_chart(
            [f"n={r[0]} d={r[1]}" for r in rows],
            [float(r[4]) if r[2] == "ok" else float("inf") for r in rows],
            title=f"queries to reach gap <= {cfg.sweep.epsilon:g}",
            marks=["cap" if r[2] == "cap" else "" for r in rows],
        )
        atomic_write(out / cfg.sweep.plot_svg, svg)
        files.append(cfg.sweep.plot_svg)
    runs = [{"n": r[0], "d": r[1], "status": r[2], "epochs": r[3], "queries": r[4], "final_gap": r[5]} for r in rows]
    write_manifest(out, cfg, "sweep", started, runs, files)
    for r in rows:
        print(f"n={r[0]:<5d} d={r[1]:<4d} {r[2]:>3s} epochs={r[3]:<6d} queries={r[4]}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zo-minmax", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic strategic dataset")
    gen.add_argument("--n", type=_positive_int, required=True)
    gen.add_argument("--d", type=_positive_int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise-std", type=_nonneg_float, default=0.1)
    gen.add_argument("--strategic", type=int, default=None, help="number of leading strategic features")
    gen.add_argument("--out", required=True, help="output directory")

    helps = {
        "solve": "run one solver variant (or all) and write its trace",
        "compare": "run all four variants against one reference",
        "robustness": "accuracy of the solved and baseline classifiers over a zeta grid",
        "sweep": "queries needed to reach a target gap over an (n, d) grid",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, epilog="Any config key can be overridden as --section.key VALUE, e.g. --solver.eta0 0.05.")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--problem", choices=("wdrsc", "toy-bilinear"))
        p.add_argument("--out", help="output directory (outputs.dir)")
        if name == "compare":
            p.add_argument("--repeats", type=_positive_int)
    return parser


def resolve_config(args, extra: list[str]) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = parse_override_args(extra)
    if args.problem:
        overrides.insert(0, ("problem", json.dumps(args.problem)))
    if args.out:
        overrides.insert(0, ("outputs.dir", json.dumps(args.out)))
    if getattr(args, "repeats", None):
        overrides.append(("compare.repeats", str(args.repeats)))
    return apply_overrides(cfg, overrides)


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "robustness": cmd_robustness, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "gen-data":
            if extra:
                parser.error(f"unrecognized arguments: {' '.join(extra)}")
            return cmd_gen_data(args)
        cfg = resolve_config(args, extra)
        return COMMANDS[args.command](cfg)
    except (NumericalFailureError, NonConvergenceError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, UnsupportedModeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DataLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
