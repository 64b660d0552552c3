"""Command-line entry points for generation, evaluation, dataset tooling,
and the annotation service."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .backends.config import BackendConfig, build_suite, load_backend_config
from .dataset import (build_triplets, corpus_stats, ingest, load_records,
                      save_split, split_tasks, write_records, write_triplets_tsv)
from .engine import MethodConfig, run_batch
from .plan_model import (ImageStore, METHODS, SOURCES, open_bundle,
                         save_bundle)
from .report import aggregate_report
from .synth import load_goals_file, load_references_file

log = logging.getLogger("mplan")


def _load_suite(backends: str | None, seed: int):
    if backends is None or backends == "mock":
        cfg = BackendConfig(kind="mock", seed=seed)
    else:
        cfg = load_backend_config(backends)
        cfg.seed = seed
    return build_suite(cfg)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Text-image plan generation and evaluation toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--goals", "goals_path", required=True, type=click.Path(exists=True),
              help="JSON list of task goals.")
@click.option("--method", default="ours", type=click.Choice(METHODS))
@click.option("--backends", default="mock",
              help="'mock' or a path to a backend TOML config.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--workers", default=4, type=int)
@click.option("--max-steps", default=12, type=int)
@click.option("--min-steps", default=1, type=int)
def generate(goals_path, method, backends, out_dir, seed, workers, max_steps,
             min_steps):
    """Generate one plan bundle per goal; exit 0 iff every task succeeded."""
    goals = load_goals_file(goals_path)
    suite = _load_suite(backends, seed)
    cfg = MethodConfig(method=method, seed=seed, max_steps=max_steps,
                       min_steps=min_steps)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = ImageStore(out / ".cache" / "blobs")
    results = run_batch(goals, cfg, suite, store, workers=workers)

    succeeded, failed = [], []
    for goal, result in results:
        if isinstance(result, Exception):
            failed.append({"task_id": goal.id, "error": str(result)})
            log.error("task %s failed: %s", goal.id, result)
            continue
        save_bundle(result, out / goal.id, store)
        succeeded.append(goal.id)
    manifest = {
        "method": method, "seed": seed, "backend_fingerprint": suite.fingerprint,
        "succeeded": sorted(succeeded), "failed": failed,
    }
    (out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    click.echo(f"{len(succeeded)} bundle(s) written to {out}")
    if failed:
        click.echo(f"{len(failed)} task(s) failed:", err=True)
        for item in failed:
            click.echo(f"  {item['task_id']}: {item['error']}", err=True)
        sys.exit(1)


@main.command("eval")
@click.option("--bundles", "bundles_dir", required=True, type=click.Path(exists=True),
              help="Directory of bundle directories (each with plan.json).")
@click.option("--references", "references_path", required=True,
              type=click.Path(exists=True), help="JSONL of reference plans.")
@click.option("--backends", default="mock")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output path prefix; writes <out>.json and <out>.txt.")
@click.option("--clip-rectified/--clip-unrectified", default=True)
@click.option("--external", "external_path", default=None,
              type=click.Path(exists=True),
              help="JSON of externally produced rows to carry in the table.")
def eval_cmd(bundles_dir, references_path, backends, seed, out_path,
             clip_rectified, external_path):
    """Compute the twelve-column metric report over saved bundles."""
    references = load_references_file(references_path)
    loaded = []
    missing = []
    for manifest in sorted(Path(bundles_dir).glob("*/plan.json")):
        bundle, store = open_bundle(manifest.parent)
        if bundle.goal.id not in references:
            missing.append(bundle.goal.id)
            continue
        loaded.append((bundle, store))
    if missing:
        click.echo("missing references for: " + ", ".join(sorted(missing)), err=True)
        sys.exit(1)
    if not loaded:
        click.echo("no bundles found", err=True)
        sys.exit(1)
    suite = _load_suite(backends, seed)
    report = aggregate_report(loaded, references, suite,
                              clip_rectified=clip_rectified)
    if external_path:
        from .report import load_external_rows

        report.rows.extend(load_external_rows(external_path))
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    out.with_suffix(".txt").write_text(report.render_text() + "\n", encoding="utf-8")
    click.echo(report.render_text())


@main.command("ingest")
@click.option("--dump", "dump_dir", required=True, type=click.Path(exists=True))
@click.option("--source", required=True, type=click.Choice(SOURCES))
@click.option("--out", "out_dir", required=True, type=click.Path())
def ingest_cmd(dump_dir, source, out_dir):
    """Normalize a local dump into records.jsonl plus a blob store."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = ImageStore(out / "blobs")
    records = ingest(dump_dir, source, store)
    write_records(records, out / "records.jsonl")
    click.echo(f"{len(records)} record(s) written to {out / 'records.jsonl'}")


@main.command("triplets")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def triplets_cmd(records_path, out_path):
    """Emit (prev_digest, text, next_digest) rows for image-edit tuning."""
    records = load_records(records_path)
    triplets = build_triplets(records)
    write_triplets_tsv(triplets, out_path)
    click.echo(f"{len(triplets)} triplet(s) written to {out_path}")


@main.command("split")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--ratios", default="0.9,0.05,0.05")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def split_cmd(records_path, ratios, seed, out_path):
    """Deterministic by-task train/val/test split."""
    records = load_records(records_path)
    parts = tuple(float(x) for x in ratios.split(","))
    manifest = split_tasks([r.reference.goal.id for r in records], parts, seed)
    save_split(manifest, out_path)
    click.echo(f"split {len(manifest.train)}/{len(manifest.val)}/{len(manifest.test)} "
               f"written to {out_path}")


@main.command("stats")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
def stats_cmd(records_path):
    """Print corpus statistics as JSON."""
    records = load_records(records_path)
    stats = corpus_stats(records)
    click.echo(json.dumps({
        "task_count": stats.task_count,
        "category_count": stats.category_count,
        "mean_steps_per_task": round(stats.mean_steps_per_task, 4),
        "mean_words_per_step": round(stats.mean_words_per_step, 4),
    }, indent=2, sort_keys=True))


@main.command("pair")
@click.option("--bundles-a", required=True, type=click.Path(exists=True),
              help="Bundle directories for candidate A (conventionally ours).")
@click.option("--bundles-b", required=True, type=click.Path(exists=True))
@click.option("--references", "references_path", required=True,
              type=click.Path(exists=True))
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def pair_cmd(bundles_a, bundles_b, references_path, seed, out_path):
    """Build a blinded pairings file from two bundle runs on shared tasks."""
    import random

    from .plan_model import reference_to_dict

    references = load_references_file(references_path)
    a_dirs = {p.parent.name: p.parent for p in sorted(Path(bundles_a).glob("*/plan.json"))}
    b_dirs = {p.parent.name: p.parent for p in sorted(Path(bundles_b).glob("*/plan.json"))}
    shared = sorted(set(a_dirs) & set(b_dirs) & set(references))
    rng = random.Random(seed)
    pairings = []
    for i, task_id in enumerate(shared):
        pairings.append({
            "session_id": f"session-{i:04d}",
            "task_id": task_id,
            "bundle_a": str(a_dirs[task_id]),
            "bundle_b": str(b_dirs[task_id]),
            "blind_seed": rng.randrange(1 << 30),
            "reference": reference_to_dict(references[task_id]),
        })
    Path(out_path).write_text(
        json.dumps({"pairings": pairings}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    click.echo(f"{len(pairings)} pairing(s) written to {out_path}")


@main.command("serve")
@click.option("--pairings", "pairings_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "annotations_path", required=True, type=click.Path())
@click.option("--port", default=8808, type=int)
@click.option("--host", default="127.0.0.1")
@click.option("--raters", default=3, type=int)
@click.option("--ui", "ui_dir", default=None, type=click.Path(exists=True),
              help="Also serve the built browser tool from this directory.")
def serve_cmd(pairings_path, annotations_path, port, host, raters, ui_dir):
    """Serve the annotation API (and collect verdicts) for the browser tool."""
    from .service import serve

    click.echo(f"serving annotations on http://{host}:{port}")
    serve(pairings_path, annotations_path, port=port, raters=raters, host=host,
          ui_dir=ui_dir)


if __name__ == "__main__":
    main()
