"""Command line interface: one subcommand per reproducible artifact.

Every run validates its inputs up front, computes, stages outputs, commits
them atomically, and writes exactly one JSON manifest recording the resolved
parameters, input digests, seed, output paths, and wall-clock duration.
Exit codes: 0 success, 2 invalid inputs/usage, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .baselines import cossim, entropy_score, maxprob
from .data import DiscreteMeasure, FeatureTable, class_means, class_proportions
from .datasets import (
    ClusterSpec,
    ablation_scenario,
    epsilon_ablation,
    gen_clusters,
    overlap_experiment,
    reweight_sweep,
    unbalanced_scenario,
)
from .exceptions import OTConfError, ValidationError
from .metrics import risk_coverage_aurc, selective_accuracy
from .scoring import (
    misclassification_bound,
    normalize_and_reweight,
    postcheck_binary,
    postcheck_componentwise,
    score_report,
)
from .solver import SolverConfig, solve

PAPER_EPS_LIST = (1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 5e-1)


class _Outputs:
    """Stages files and renames them into place only after full success."""

    def __init__(self):
        self._pending: list[tuple[Path, Path]] = []

    def stage(self, final: Path, writer) -> None:
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.with_name(final.name + ".tmp")
        writer(tmp)
        self._pending.append((tmp, final))

    def commit(self) -> list[Path]:
        for tmp, final in self._pending:
            os.replace(tmp, final)
        return [final for _, final in self._pending]

    def discard(self) -> None:
        for tmp, _ in self._pending:
            tmp.unlink(missing_ok=True)


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{p}: file not found")
    return p


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _format_of(path: Path) -> str:
    return "otsf" if path.suffix == ".otsf" else "csv"


def _load_table(path: str) -> tuple[Path, FeatureTable]:
    p = _input(path)
    return p, io.load_features(p, _format_of(p))


def _load_labels(path: str) -> tuple[Path, np.ndarray]:
    p = _input(path)
    values = io.load_vector(p)
    if not np.all(values == np.floor(values)):
        raise ValidationError(f"{p}: labels must be integers")
    return p, values.astype(np.int64)


def _parse_floats(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(f) for f in text.split(",")], dtype=np.float64)
    except ValueError:
        raise ValidationError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _parse_points(text: str, name: str) -> np.ndarray:
    return np.array([_parse_floats(row, name) for row in text.split(";")])


def _json_writer(payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    return lambda p: Path(p).write_text(text)


def _solver_config(args, warm_start=None) -> SolverConfig:
    return SolverConfig(
        epsilon=args.epsilon,
        learning_rate=args.learning_rate,
        max_iter=args.max_iter,
        batch_size=args.batch_size,
        cost_exponent=args.cost_exponent,
        seed=args.seed,
        warm_start=warm_start,
        tol=args.tol,
        lr_decay=args.lr_decay,
    )


def _prototypes_from_source(source: FeatureTable, weights: np.ndarray | None) -> DiscreteMeasure:
    """Class means when the source is labeled, the raw rows otherwise."""
    if source.labels is not None:
        means = class_means(source)
        points = means.points
        default = means.weights
    else:
        points = source.features
        default = np.full(source.n, 1.0 / source.n)
    return DiscreteMeasure(points=points, weights=default if weights is None else weights)


def _pseudo_weighted_prototypes(source: FeatureTable, pseudo: np.ndarray) -> DiscreteMeasure:
    """Prototypes with weights set to the pseudo-label class proportions."""
    base = _prototypes_from_source(source, None)
    proportions = class_proportions(pseudo, base.m).proportions
    return DiscreteMeasure(points=base.points, weights=proportions)


# -- subcommand handlers ------------------------------------------------------


def _cmd_solve(args, out: _Outputs):
    target_path, target = _load_table(args.target)
    source_path, source = _load_table(args.source)
    inputs = [target_path, source_path]
    weights = None
    if args.weights:
        wpath = _input(args.weights)
        weights = io.load_vector(wpath)
        inputs.append(wpath)
    prototypes = _prototypes_from_source(source, weights)
    state = solve(target.features, prototypes, _solver_config(args))
    last = state.trace[-1]
    payload = {
        "dual_weights": [float(v) for v in state.weights],
        "steps": state.step,
        "final_residual": last.residual,
        "final_objective": last.objective,
    }
    out_path = Path(args.out)
    out.stage(out_path, _json_writer(payload))
    trace_path = Path(args.trace) if args.trace else Path(str(out_path) + ".trace.csv")
    out.stage(trace_path, lambda p: io.write_trace_csv(state.trace, p))
    return inputs


def _cmd_score(args, out: _Outputs):
    source_path, source = _load_table(args.source)
    target_path, target = _load_table(args.target)
    pseudo_path, pseudo = _load_labels(args.pseudo)
    if pseudo.shape[0] != target.n:
        raise ValidationError(
            f"{pseudo_path}: {pseudo.shape[0]} labels for {target.n} target samples"
        )
    prototypes = _pseudo_weighted_prototypes(source, pseudo)
    state = solve(target.features, prototypes, _solver_config(args))
    report = score_report(target.features, pseudo, prototypes, state.weights,
                          args.cost_exponent)
    out.stage(Path(args.out), lambda p: io.write_report_json(report, p))
    if args.csv:
        out.stage(Path(args.csv), lambda p: io.write_report_csv(report, p))
    print(f"mean_score {report.mean_score!r}")
    return [source_path, target_path, pseudo_path]


def _cmd_postcheck(args, out: _Outputs):
    source_path, source = _load_table(args.source)
    target_path, target = _load_table(args.target)
    pseudo_path, pseudo = _load_labels(args.pseudo)
    if source.labels is None:
        raise ValidationError(f"{source_path}: postcheck needs a labeled source")
    if source.n_classes != 2 or pseudo.max() > 1:
        raise ValidationError("postcheck is a binary check: exactly 2 classes required")
    if pseudo.shape[0] != target.n:
        raise ValidationError(
            f"{pseudo_path}: {pseudo.shape[0]} labels for {target.n} target samples"
        )
    x1 = target.features[pseudo == 0]
    x2 = target.features[pseudo == 1]
    if x1.shape[0] == 0 or x2.shape[0] == 0:
        raise ValidationError("each pseudo class needs at least one sample")
    s1 = source.features[source.labels == 0]
    s2 = source.features[source.labels == 1]
    cfg = _solver_config(args)

    if args.mode == "joint":
        proportions = class_proportions(pseudo, 2).proportions
        counts = np.array([s1.shape[0], s2.shape[0]])
        joint_weights = np.concatenate([
            np.full(counts[0], proportions[0] / counts[0]),
            np.full(counts[1], proportions[1] / counts[1]),
        ])
        joint = DiscreteMeasure(points=np.vstack([s1, s2]), weights=joint_weights)
        state = solve(target.features, joint, cfg)
        result = postcheck_binary(x1, x2, s1, s2, state.weights, args.cost_exponent)
    else:
        m1 = DiscreteMeasure(points=s1, weights=np.full(s1.shape[0], 1.0 / s1.shape[0]))
        m2 = DiscreteMeasure(points=s2, weights=np.full(s2.shape[0], 1.0 / s2.shape[0]))
        state1 = solve(x1, m1, cfg)
        state2 = solve(x2, m2, cfg)
        result = postcheck_componentwise(x1, x2, m1, m2, state1.weights, state2.weights,
                                         args.cost_exponent, epsilon=args.epsilon,
                                         residual_tol=args.residual_tol)
    payload = {
        "mode": args.mode,
        "holds": result.holds,
        "left_margin": result.left_margin,
        "right_margin": result.right_margin,
        "gap": result.gap,
    }
    out.stage(Path(args.out), _json_writer(payload))
    print(f"holds {result.holds}")
    return [source_path, target_path, pseudo_path]


def _cmd_baseline(args, out: _Outputs):
    inputs = []
    if args.score in ("maxprob", "ent"):
        if not args.probs:
            raise ValidationError(f"--score {args.score} requires --probs")
        probs_path = _input(args.probs)
        inputs.append(probs_path)
        probs = io.load_matrix(probs_path)
        scores = maxprob(probs) if args.score == "maxprob" else entropy_score(probs)
    else:
        if not (args.features and args.centroids and args.pseudo):
            raise ValidationError("--score cossim requires --features, --centroids and --pseudo")
        feat_path, table = _load_table(args.features)
        cent_path = _input(args.centroids)
        centroids = io.load_matrix(cent_path)
        pseudo_path, pseudo = _load_labels(args.pseudo)
        inputs += [feat_path, cent_path, pseudo_path]
        if pseudo.max() >= centroids.shape[0]:
            raise ValidationError("pseudo label outside the centroid range")
        scores = cossim(table.features, centroids[pseudo])
    lines = ["score"] + [repr(float(s)) for s in np.atleast_1d(scores)]
    out.stage(Path(args.out), lambda p: Path(p).write_text("\n".join(lines) + "\n"))
    return inputs


def _load_confidences(path: str) -> tuple[Path, np.ndarray]:
    p = _input(path)
    if p.suffix == ".json":
        return p, io.read_report_json(p).scores
    return p, io.load_vector(p)


def _cmd_eval(args, out: _Outputs):
    scores_path, confidences = _load_confidences(args.scores)
    losses_path = _input(args.losses)
    losses = io.load_vector(losses_path)
    curve = risk_coverage_aurc(losses, confidences)
    out.stage(Path(args.out), lambda p: io.write_curve_csv(curve, p))
    if args.svg:
        out.stage(Path(args.svg), lambda p: io.write_line_svg(
            curve.coverage, curve.risk, p, title="risk-coverage",
            xlabel="coverage", ylabel="risk"))
    print(f"aurc {curve.aurc!r}")
    if args.coverage is not None:
        if not np.all((losses == 0) | (losses == 1)):
            raise ValidationError("--coverage needs 0/1 losses to report accuracy")
        acc = selective_accuracy(losses == 0, confidences, args.coverage)
        print(f"selective_accuracy {acc!r}")
    return [scores_path, losses_path]


def _cmd_reweight(args, out: _Outputs):
    scores_path = _input(args.scores)
    report = io.read_report_json(scores_path)
    inputs = [scores_path]
    companion = None
    if args.companion:
        comp_path = _input(args.companion)
        companion = io.load_vector(comp_path)
        inputs.append(comp_path)
    _, weights = normalize_and_reweight(report.scores, companion)
    lines = ["weight"] + [repr(float(v)) for v in weights]
    out.stage(Path(args.out), lambda p: Path(p).write_text("\n".join(lines) + "\n"))
    return inputs


def _cmd_synth(args, out: _Outputs):
    out_dir = Path(args.out)
    if args.scenario == "clusters":
        spec = ClusterSpec(
            centers=_parse_points(args.centers, "centers"),
            spread=_parse_floats(args.spread, "spread"),
            counts=_parse_floats(args.counts, "counts").astype(np.int64),
            shape=args.shape,
            seed=args.seed,
        )
        table = gen_clusters(spec)
        name = "features.otsf" if args.format == "otsf" else "features.csv"
        out.stage(out_dir / name, lambda p: io.save_features(table, p, args.format))
        return []

    result = overlap_experiment(args.seed, drop_fraction=args.drop_fraction)
    out.stage(out_dir / "source.csv", lambda p: io.save_features(result.source, p))
    out.stage(out_dir / "target.csv", lambda p: io.save_features(result.target, p))
    out.stage(out_dir / "report.json", lambda p: io.write_report_json(result.report, p))
    out.stage(out_dir / "scatter.svg", lambda p: io.write_scatter_svg(
        result.target.features, result.report.scores, p,
        title="confidence scores", xlabel="x", ylabel="y"))
    summary = {
        "full_accuracy": result.full_accuracy,
        "retained_accuracy": result.retained_accuracy,
        "gap_before": result.gap_before,
        "gap_after": result.gap_after,
        "mean_score": result.report.mean_score,
    }
    out.stage(out_dir / "summary.json", _json_writer(summary))
    print(f"full_accuracy {result.full_accuracy!r}")
    print(f"retained_accuracy {result.retained_accuracy!r}")
    return []


def _cmd_sweep(args, out: _Outputs):
    out_dir = Path(args.out)
    inputs: list[Path] = []
    if args.kind == "epsilon":
        if args.target and args.source:
            target_path, target = _load_table(args.target)
            source_path, source = _load_table(args.source)
            inputs += [target_path, source_path]
            prototypes = _prototypes_from_source(source, None)
            features = target.features
            config = _solver_config(args)
        else:
            features_table, prototypes, config = ablation_scenario(args.seed)
            features = features_table.features
        eps_list = [float(e) for e in args.eps_list.split(",")] if args.eps_list \
            else list(PAPER_EPS_LIST)
        runs = epsilon_ablation(features, prototypes, config, eps_list)
        summary = []
        for run in runs:
            trace = run.state.trace
            tag = f"{run.epsilon:.0e}".replace("-0", "-").replace("+0", "+")
            out.stage(out_dir / f"trace_{tag}.csv",
                      lambda p, t=trace: io.write_trace_csv(t, p))
            update_norms = [rec.update_norm for rec in trace]
            summary.append({
                "epsilon": run.epsilon,
                "initial_residual": run.initial_residual,
                "final_residual": trace[-1].residual,
                "peak_update_norm": max(update_norms),
                "final_update_norm": update_norms[-1],
                "mean_entropy": run.mean_entropy,
                "top_gap": run.top_gap,
                "steps": run.state.step,
            })
        out.stage(out_dir / "summary.json", _json_writer({"runs": summary}))
        print(f"ran {len(runs)} regularization settings")
        return inputs

    if args.target and args.source:
        target_path, target = _load_table(args.target)
        source_path, source = _load_table(args.source)
        inputs += [target_path, source_path]
    else:
        source, target = unbalanced_scenario(args.seed)
    grid = np.linspace(0.0, 1.0, round(1.0 / args.grid_step) + 1)
    sweep = reweight_sweep(source, target, grid)
    lines = ["p,cost"] + [f"{repr(float(p))},{repr(float(c))}"
                          for p, c in zip(sweep.grid, sweep.costs)]
    out.stage(out_dir / "costs.csv", lambda p: Path(p).write_text("\n".join(lines) + "\n"))
    out.stage(out_dir / "summary.json", _json_writer({
        "argmin_p": sweep.argmin_p,
        "min_cost": float(sweep.costs.min()),
    }))
    print(f"argmin_p {sweep.argmin_p!r}")
    return inputs


def _cmd_bound(args, out: _Outputs):
    value = misclassification_bound(
        _parse_floats(args.f1, "f1"), _parse_floats(args.f2, "f2"),
        args.w_star, args.g,
        _parse_floats(args.m1, "m1"), _parse_floats(args.m2, "m2"),
        args.sigma,
    )
    payload = {
        "bound": value,
        "f1": args.f1, "f2": args.f2, "m1": args.m1, "m2": args.m2,
        "w_star": args.w_star, "g": args.g, "sigma": args.sigma,
    }
    out.stage(Path(args.out), _json_writer(payload))
    print(f"bound {value!r}")
    return []


# -- parser -------------------------------------------------------------------


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, default=1e-4,
                        help="entropic regularization (default 1e-4)")
    parser.add_argument("--learning-rate", type=float, default=0.5)
    parser.add_argument("--max-iter", type=int, default=1000)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--cost-exponent", type=int, default=1, choices=(1, 2),
                        help="p in the ||x-z||^p ground cost (default 1)")
    parser.add_argument("--tol", type=float, default=1e-4,
                        help="early-stop residual threshold (0 disables)")
    parser.add_argument("--lr-decay", type=float, default=0.0)
    parser.add_argument("--seed", type=int, required=True,
                        help="RNG seed (mandatory: runs must be reproducible)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otconf",
        description="Transport-based confidence scores for pseudo-labeled data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the semi-discrete dual, emit weights + trace")
    p.add_argument("--target", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--weights", help="CSV of prototype weights (default: from source)")
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="trace CSV path (default: <out>.trace.csv)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("score", help="score pseudo-labeled targets end to end")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--pseudo", required=True, help="CSV of pseudo labels, one per sample")
    _add_solver_flags(p)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also write a per-sample CSV report")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("postcheck", help="binary label-preservation check")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--pseudo", required=True)
    p.add_argument("--mode", choices=("joint", "componentwise"), default="joint")
    p.add_argument("--residual-tol", type=float, default=1e-2)
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_postcheck)

    p = sub.add_parser("baseline", help="reference confidence scores")
    p.add_argument("--score", choices=("maxprob", "ent", "cossim"), required=True)
    p.add_argument("--probs", help="n x K probability CSV (maxprob, ent)")
    p.add_argument("--features", help="feature file (cossim)")
    p.add_argument("--centroids", help="K x d centroid CSV (cossim)")
    p.add_argument("--pseudo", help="pseudo labels CSV (cossim)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("eval", help="risk-coverage curve, AURC, selective accuracy")
    p.add_argument("--scores", required=True, help="report JSON or confidence CSV")
    p.add_argument("--losses", required=True, help="per-sample loss CSV")
    p.add_argument("--coverage", type=float, help="also report accuracy at this coverage")
    p.add_argument("--out", required=True, help="curve CSV path")
    p.add_argument("--svg", help="also write an SVG line plot")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("reweight", help="export training weights from scores")
    p.add_argument("--scores", required=True, help="report JSON")
    p.add_argument("--companion", help="companion confidence CSV in [0, 1]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reweight)

    p = sub.add_parser("synth", help="synthetic generators and experiments")
    p.add_argument("--scenario", choices=("clusters", "overlap"), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--centers", default="0,0;3,0", help="cluster centers 'x,y;x,y'")
    p.add_argument("--spread", default="1,1", help="per-cluster radius/sigma")
    p.add_argument("--counts", default="200,200")
    p.add_argument("--shape", choices=("disk", "gaussian"), default="disk")
    p.add_argument("--format", choices=("csv", "otsf"), default="csv")
    p.add_argument("--drop-fraction", type=float, default=0.3)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sweep", help="regularization ablation / reweighting sweep")
    p.add_argument("--kind", choices=("epsilon", "reweight"), required=True)
    p.add_argument("--target", help="target feature file (default: built-in scenario)")
    p.add_argument("--source", help="source feature file (default: built-in scenario)")
    p.add_argument("--eps-list", help="comma-separated epsilons (epsilon sweep)")
    p.add_argument("--grid-step", type=float, default=0.05, help="reweight grid step")
    _add_solver_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bound", help="misclassification bound for two prototypes")
    p.add_argument("--f1", required=True, help="prototype 1, comma-separated")
    p.add_argument("--f2", required=True)
    p.add_argument("--m1", required=True, help="class-1 mean")
    p.add_argument("--m2", required=True)
    p.add_argument("--w-star", type=float, required=True, help="dual weight gap w1-w2")
    p.add_argument("--g", type=float, required=True, help="score threshold")
    p.add_argument("--sigma", type=float, required=True, help="subgaussian scale")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bound)

    return parser


def _manifest_path(args) -> Path:
    out = Path(args.out)
    if args.command in ("synth", "sweep"):
        return out / "manifest.json"
    return Path(str(out) + ".manifest.json")


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    started = time.monotonic()
    outputs = _Outputs()
    try:
        inputs = args.func(args, outputs)
        final_paths = outputs.commit()
    except (ValidationError, FileNotFoundError) as exc:
        outputs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OTConfError as exc:
        outputs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        outputs.discard()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    manifest = {
        "command": args.command,
        "parameters": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")
        },
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": getattr(args, "seed", None),
        "outputs": [str(p) for p in final_paths],
        "duration_seconds": round(time.monotonic() - started, 6),
    }
    manifest_path = _manifest_path(args)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return 0


def main() -> int:
    return dispatch(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
