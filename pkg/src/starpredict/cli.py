"""Command-line pipeline: simulate -> ingest-check -> features/graph/embed
-> train/evaluate/sweep/report.

Every subcommand is driven by one TOML config (all knobs defaulted, so a
bare `starpredict simulate` followed by `starpredict evaluate` works with
no flags) and writes byte-deterministic outputs for a fixed seed. The
effective, fully resolved config is written next to the outputs so any run
can be reproduced from its artifacts alone.

Exit codes: 0 success, 2 validation (including usage), 3 I/O, 4 internal.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import classify, cograph, evaluate, featurize, synthgen
from . import embed as embedding
from .config import PipelineConfig, load_config, write_config
from .errors import StarPredictError, ValidationError
from .evaluate import ABLATIONS
from .ingest import CohortBundle, parse_labels, scan_events

SUMMARY_SCHEMA_VERSION = 1

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

EFFECTIVE_CONFIG_NAME = "effective-config.toml"


def pipeline_errors(fn):
    """Map pipeline exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except StarPredictError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)
        except Exception as exc:  # noqa: BLE001 - map bugs to exit 4
            click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)

    return wrapper


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="TOML config file (defaults apply when omitted).",
)
@click.option(
    "--jobs",
    type=int,
    default=None,
    help="Worker threads for independent evaluation jobs "
    "(default: available CPUs). Outputs do not depend on this.",
)
@click.pass_context
def main(ctx, config_path, jobs):
    """At-risk student prediction pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["jobs"] = jobs


def _cfg(ctx) -> PipelineConfig:
    return load_config(ctx.obj.get("config_path"))


def _jobs(ctx) -> int:
    jobs = ctx.obj.get("jobs")
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise ValidationError("--jobs must be >= 1")
    return jobs


def _outdir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _bundle(cfg: PipelineConfig) -> CohortBundle:
    events, bad = scan_events(cfg.paths.events, cfg.calendar)
    if bad:
        shown = "; ".join(bad[:5])
        raise ValidationError(
            f"{cfg.paths.events}: {len(bad)} malformed rows: {shown}"
        )
    labels = parse_labels(cfg.paths.labels)
    return CohortBundle(events=events, labels=labels, calendar=cfg.calendar)


def _resolve_week(cfg: PipelineConfig, cutoff_week: int | None) -> int:
    week = cfg.calendar.week_count if cutoff_week is None else cutoff_week
    if not 1 <= week <= cfg.calendar.week_count:
        raise ValidationError(
            f"cutoff week {week} out of range 1..{cfg.calendar.week_count}"
        )
    return week


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit_effective_config(cfg: PipelineConfig, outdir: Path) -> None:
    write_config(cfg, outdir / EFFECTIVE_CONFIG_NAME)


def _fmt_metric(mean: float, sd: float) -> str:
    if math.isnan(mean):
        return "n/a"
    return f"{mean:.4f}±{sd:.4f}"


def _echo_report_table(reports) -> None:
    click.echo(f"{'ablation':<10} {'week':>4}  {'auc':<16} {'acc_star':<16} folds")
    for rep in reports:
        used = len(rep.outcomes)
        total = used + len(rep.skipped)
        click.echo(
            f"{rep.ablation:<10} {rep.week:>4}  "
            f"{_fmt_metric(rep.auc_mean, rep.auc_sd):<16} "
            f"{_fmt_metric(rep.acc_star_mean, rep.acc_star_sd):<16} "
            f"{used}/{total}"
        )


@main.command("simulate")
@click.option("--n-students", type=int, default=None, help="Override cohort size.")
@click.option("--star-fraction", type=float, default=None, help="Override STAR share.")
@click.option("--seed", type=int, default=None, help="Override the simulation seed.")
@click.pass_context
@pipeline_errors
def cmd_simulate(ctx, n_students, star_fraction, seed):
    """Generate a synthetic cohort and write its event/label CSVs."""
    cfg = _cfg(ctx)
    overrides = {
        key: value
        for key, value in {
            "n_students": n_students,
            "star_fraction": star_fraction,
            "rng_seed": seed,
        }.items()
        if value is not None
    }
    if overrides:
        cfg = dataclasses.replace(
            cfg, synth=dataclasses.replace(cfg.synth, **overrides)
        )
    outdir = _outdir(cfg)
    bundle = synthgen.generate(cfg.synth, cfg.calendar)
    for path in (cfg.paths.events, cfg.paths.labels):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    synthgen.write_events(bundle.events, cfg.paths.events)
    synthgen.write_labels(bundle.labels, cfg.paths.labels)
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "command": "simulate",
        "n_students": cfg.synth.n_students,
        "star_count": cfg.synth.star_count,
        "n_events": len(bundle.events),
        "classes": synthgen.describe(bundle),
    }
    _write_json(outdir / "simulate-summary.json", summary)
    _emit_effective_config(cfg, outdir)
    click.echo(f"wrote {cfg.paths.events} ({len(bundle.events)} events)")
    click.echo(
        f"wrote {cfg.paths.labels} "
        f"({len(bundle.labels)} labels, {cfg.synth.star_count} STAR)"
    )


@main.command("ingest-check")
@click.option("--max-bad-rows", type=int, default=0, show_default=True)
@click.pass_context
@pipeline_errors
def cmd_ingest_check(ctx, max_bad_rows):
    """Validate the event and label CSVs against the calendar."""
    cfg = _cfg(ctx)
    events, bad = scan_events(cfg.paths.events, cfg.calendar)
    for message in bad[:10]:
        click.echo(f"bad row: {message}", err=True)
    if len(bad) > max_bad_rows:
        raise ValidationError(
            f"{cfg.paths.events}: {len(bad)} malformed rows "
            f"(max allowed {max_bad_rows})"
        )
    labels = parse_labels(cfg.paths.labels)
    bundle = CohortBundle(events=events, labels=labels, calendar=cfg.calendar)
    arrays = bundle.arrays
    labeled = set(bundle.label_students)
    event_students = set(arrays.students)
    n_lms = int((arrays.stream == 0).sum())
    n_lib = int((arrays.stream == 1).sum())
    n_star = int(bundle.star_vector(bundle.label_students).sum())
    click.echo(f"events: {len(events)} ({n_lms} lms, {n_lib} library)")
    click.echo(f"students with events: {len(event_students)}")
    click.echo(f"labels: {len(labels)} ({n_star} STAR)")
    click.echo(f"malformed rows skipped: {len(bad)}")
    unlabeled = len(event_students - labeled)
    if unlabeled:
        click.echo(f"note: {unlabeled} students have events but no label")
    silent = len(labeled - event_students)
    if silent:
        click.echo(f"note: {silent} labeled students have no events")


@main.command("features")
@click.option("--cutoff-week", type=int, default=None,
              help="Use events before this week's end (default: full semester).")
@click.pass_context
@pipeline_errors
def cmd_features(ctx, cutoff_week):
    """Assemble the per-student feature table at a cutoff week."""
    cfg = _cfg(ctx)
    week = _resolve_week(cfg, cutoff_week)
    bundle = _bundle(cfg)
    table = featurize.assemble_features(bundle, week, cfg.feature_config())
    outdir = _outdir(cfg)
    path = outdir / f"features-week{week:02d}.csv"
    featurize.write_features(table, path)
    _emit_effective_config(cfg, outdir)
    widths = {name: sl.stop - sl.start for name, sl in table.blocks.items()}
    click.echo(
        f"wrote {path} ({len(table.students)} students x "
        f"{table.n_features} features; blocks {widths})"
    )


@main.command("graph")
@click.option("--cutoff-week", type=int, default=None)
@click.pass_context
@pipeline_errors
def cmd_graph(ctx, cutoff_week):
    """Build the library co-occurrence graph and export its edges."""
    cfg = _cfg(ctx)
    week = _resolve_week(cfg, cutoff_week)
    bundle = _bundle(cfg)
    g = featurize.build_graph(bundle, cfg.calendar.week_cutoff(week), cfg.cooc)
    stats = cograph.degree_stats(g)
    outdir = _outdir(cfg)
    edges_path = outdir / f"graph-week{week:02d}-edges.csv"
    cograph.write_edges(g, edges_path)
    payload = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "command": "graph",
        "week": week,
        "node_count": stats.node_count,
        "isolated_count": stats.isolated_count,
        "edge_count": stats.edge_count,
        "weight_histogram": [
            [w, c] for w, c in sorted(stats.weight_histogram.items())
        ],
    }
    _write_json(outdir / f"graph-week{week:02d}-stats.json", payload)
    _emit_effective_config(cfg, outdir)
    click.echo(
        f"wrote {edges_path} ({stats.edge_count} edges over "
        f"{stats.node_count} nodes, {stats.isolated_count} isolated)"
    )


@main.command("embed")
@click.option("--cutoff-week", type=int, default=None)
@click.pass_context
@pipeline_errors
def cmd_embed(ctx, cutoff_week):
    """Random-walk embedding of the co-occurrence graph."""
    cfg = _cfg(ctx)
    week = _resolve_week(cfg, cutoff_week)
    bundle = _bundle(cfg)
    g = featurize.build_graph(bundle, cfg.calendar.week_cutoff(week), cfg.cooc)
    walkset = embedding.generate_walks(g, cfg.walks)
    emb = embedding.train_skipgram(walkset, cfg.skipgram)
    outdir = _outdir(cfg)
    path = outdir / f"embedding-week{week:02d}.csv"
    embedding.write_embedding(emb, path)
    _emit_effective_config(cfg, outdir)
    click.echo(
        f"wrote {path} ({len(emb.students)} students x {cfg.skipgram.dim} dims)"
    )


@main.command("train")
@click.option("--cutoff-week", type=int, default=None)
@click.option("--ablation", type=click.Choice(sorted(ABLATIONS)), default="EPARS",
              show_default=True, help="Feature/augmentation recipe to train with.")
@click.pass_context
@pipeline_errors
def cmd_train(ctx, cutoff_week, ablation):
    """Fit one boosted-tree model on the whole labeled cohort."""
    cfg = _cfg(ctx)
    week = _resolve_week(cfg, cutoff_week)
    bundle = _bundle(cfg)
    spec = ABLATIONS[ablation]
    table = featurize.assemble_features(bundle, week, cfg.feature_config())
    y = bundle.star_vector(table.students).astype(np.int64)
    train_mask = np.ones(len(y), dtype=bool)
    cols = evaluate.select_columns(
        table, spec, y, train_mask, cfg.evaluate.significance
    )
    X = table.matrix[:, cols]
    scaler = evaluate.Standardizer(X)
    X_std = scaler.transform(X)
    if spec.augment:
        X_fit, y_fit = evaluate.balance_training_set(X_std, y, cfg.augment)
    else:
        X_fit, y_fit = X_std, y
    model = classify.fit(X_fit, y_fit, cfg.gbdt)
    outdir = _outdir(cfg)
    model_path = outdir / f"model-{ablation}-week{week:02d}.json"
    classify.save_model(model, model_path)
    meta = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "command": "train",
        "ablation": ablation,
        "week": week,
        "columns": [table.column_names[c] for c in cols],
        "standardizer_mean": scaler.mean.tolist(),
        "standardizer_sd": scaler.sd.tolist(),
        "training_rows": int(X_fit.shape[0]),
        "final_loss": model.loss_curve[-1],
    }
    _write_json(outdir / f"model-{ablation}-week{week:02d}-meta.json", meta)
    with open(outdir / f"model-{ablation}-week{week:02d}-loss.csv", "w",
              encoding="utf-8") as fh:
        fh.write("round,loss\n")
        for i, loss in enumerate(model.loss_curve):
            fh.write(f"{i},{repr(float(loss))}\n")
    _emit_effective_config(cfg, outdir)
    click.echo(
        f"wrote {model_path} ({len(model.trees)} trees, "
        f"final training loss {model.loss_curve[-1]:.6f})"
    )


def _fold_plan(cfg: PipelineConfig, bundle: CohortBundle) -> evaluate.FoldPlan:
    star_by_student = {lab.student: lab.is_star for lab in bundle.labels}
    return evaluate.plan_folds(
        star_by_student,
        cfg.evaluate.n_folds,
        cfg.evaluate.n_repeats,
        cfg.evaluate.rng_seed,
    )


@main.command("evaluate")
@click.option("--cutoff-week", type=int, default=None)
@click.option("--weekly", is_flag=True,
              help="Evaluate at every cutoff week instead of one.")
@click.pass_context
@pipeline_errors
def cmd_evaluate(ctx, cutoff_week, weekly):
    """Cross-validated ablation comparison; writes fold and summary reports."""
    cfg = _cfg(ctx)
    jobs = _jobs(ctx)
    bundle = _bundle(cfg)
    settings = cfg.eval_settings()
    plan = _fold_plan(cfg, bundle)
    if weekly:
        weeks = list(range(1, cfg.calendar.week_count + 1))
    else:
        weeks = [_resolve_week(cfg, cutoff_week)]
    specs = [ABLATIONS[name] for name in cfg.evaluate.ablations]

    def _features_for(week: int):
        return featurize.assemble_features(bundle, week, settings.features)

    def _run(job):
        spec, week = job
        return evaluate.run_ablation(
            bundle, spec, plan, week, settings, features=features_by_week[week]
        )

    job_list = [(spec, week) for spec in specs for week in weeks]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            features_by_week = dict(zip(weeks, pool.map(_features_for, weeks)))
            reports = list(pool.map(_run, job_list))
    else:
        features_by_week = {week: _features_for(week) for week in weeks}
        reports = [_run(job) for job in job_list]

    outdir = _outdir(cfg)
    evaluate.write_fold_report(outdir / "report-folds.csv", reports)
    evaluate.write_summary_report(outdir / "report-summary.csv", reports)
    main_week = weeks[-1]
    y = bundle.star_vector(bundle.label_students).astype(np.int64)
    anova_rows = evaluate.anova_table(features_by_week[main_week], y)
    evaluate.write_anova_table(outdir / f"anova-week{main_week:02d}.csv", anova_rows)
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "command": "evaluate",
        "weeks": weeks,
        "n_folds": plan.n_folds,
        "n_repeats": plan.n_repeats,
        "results": [
            {
                "ablation": rep.ablation,
                "week": rep.week,
                "folds_used": len(rep.outcomes),
                "folds_skipped": len(rep.skipped),
                "auc_mean": rep.auc_mean,
                "auc_sd": rep.auc_sd,
                "acc_star_mean": rep.acc_star_mean,
                "acc_star_sd": rep.acc_star_sd,
            }
            for rep in reports
        ],
    }
    _write_json(outdir / "evaluate-summary.json", summary)
    _emit_effective_config(cfg, outdir)
    _echo_report_table(reports)
    click.echo(f"wrote {outdir / 'report-folds.csv'}")
    click.echo(f"wrote {outdir / 'report-summary.csv'}")


_SWEEP_VALUE_TYPES = {"S": int, "delta": float, "sigma": int}


def _sweep_config(cfg: PipelineConfig, param: str, value) -> PipelineConfig:
    if param == "S":
        return dataclasses.replace(
            cfg, regularity=dataclasses.replace(cfg.regularity, max_scale=value)
        )
    if param == "delta":
        return dataclasses.replace(
            cfg, cooc=dataclasses.replace(cfg.cooc, delta=value)
        )
    return dataclasses.replace(
        cfg, cooc=dataclasses.replace(cfg.cooc, sigma=value)
    )


@main.command("sweep")
@click.option("--param", type=click.Choice(sorted(_SWEEP_VALUE_TYPES)),
              required=True, help="Hyper-parameter to vary.")
@click.option("--values", required=True,
              help="Comma-separated values, e.g. '2,3,4,5'.")
@click.option("--cutoff-week", type=int, default=None)
@click.option("--ablation", type=click.Choice(sorted(ABLATIONS)), default="EPARS",
              show_default=True)
@click.pass_context
@pipeline_errors
def cmd_sweep(ctx, param, values, cutoff_week, ablation):
    """Re-run one evaluation per hyper-parameter value, all else fixed."""
    cfg = _cfg(ctx)
    jobs = _jobs(ctx)
    cast = _SWEEP_VALUE_TYPES[param]
    try:
        parsed = [cast(v.strip()) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(
            f"--values must be a comma-separated list of {cast.__name__}s, "
            f"got {values!r}"
        ) from None
    if not parsed:
        raise ValidationError("--values must name at least one value")
    week = _resolve_week(cfg, cutoff_week)
    bundle = _bundle(cfg)
    plan = _fold_plan(cfg, bundle)
    spec = ABLATIONS[ablation]

    def _run(value):
        cfg_v = _sweep_config(cfg, param, value)
        settings = cfg_v.eval_settings()
        return evaluate.run_ablation(bundle, spec, plan, week, settings)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run, parsed))
    else:
        reports = [_run(value) for value in parsed]

    outdir = _outdir(cfg)
    path = outdir / f"sweep-{param}.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("param,value,auc,acc_star\n")
        for value, rep in zip(parsed, reports):
            fh.write(
                f"{param},{value},{evaluate._fmt(rep.auc_mean)},"
                f"{evaluate._fmt(rep.acc_star_mean)}\n"
            )
    _emit_effective_config(cfg, outdir)
    click.echo(f"{'param':<6} {'value':>8}  {'auc':<16} {'acc_star':<16}")
    for value, rep in zip(parsed, reports):
        click.echo(
            f"{param:<6} {value:>8}  "
            f"{_fmt_metric(rep.auc_mean, rep.auc_sd):<16} "
            f"{_fmt_metric(rep.acc_star_mean, rep.acc_star_sd):<16}"
        )
    click.echo(f"wrote {path}")


@main.command("report")
@click.option("--input", "folds_csv", type=click.Path(dir_okay=False),
              default=None,
              help="Fold report CSV (default: <output_dir>/report-folds.csv).")
@click.pass_context
@pipeline_errors
def cmd_report(ctx, folds_csv):
    """Aggregate a fold report into the summary table."""
    cfg = _cfg(ctx)
    outdir = _outdir(cfg)
    path = Path(folds_csv) if folds_csv else outdir / "report-folds.csv"
    header = "ablation,week,repeat,fold,auc,acc_star"
    by_key: dict[tuple[str, int], evaluate.MetricReport] = {}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != header:
            raise ValidationError(f"{path}: expected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValidationError(f"{path} line {lineno}: expected 6 fields")
            ablation, week_s, repeat_s, fold_s, auc_s, acc_s = parts
            try:
                key = (ablation, int(week_s))
                repeat, fold = int(repeat_s), int(fold_s)
            except ValueError:
                raise ValidationError(
                    f"{path} line {lineno}: bad week/repeat/fold"
                ) from None
            rep = by_key.setdefault(
                key, evaluate.MetricReport(ablation=key[0], week=key[1])
            )
            if auc_s == "" and acc_s == "":
                rep.skipped.append(
                    evaluate.SkippedFold(repeat, fold, "recorded skip")
                )
                continue
            try:
                rep.outcomes.append(
                    evaluate.FoldOutcome(repeat, fold, float(auc_s), float(acc_s))
                )
            except ValueError:
                raise ValidationError(
                    f"{path} line {lineno}: bad metric value"
                ) from None
    reports = list(by_key.values())  # first-appearance order, as evaluate wrote it
    if not reports:
        raise ValidationError(f"{path}: no fold rows to aggregate")
    evaluate.write_summary_report(outdir / "report-summary.csv", reports)
    _echo_report_table(reports)
    click.echo(f"wrote {outdir / 'report-summary.csv'}")


if __name__ == "__main__":
    main()
