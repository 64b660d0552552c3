#!/usr/bin/env python3
"""End-to-end demo on mock backends: generate plans with two methods,
evaluate them, and print the metric table."""

import argparse
import tempfile
from pathlib import Path

from mplan.backends import mock_suite
from mplan.engine import MethodConfig, run_batch
from mplan.plan_model import ImageStore, save_bundle
from mplan.report import aggregate_report
from mplan.synth import make_goals, make_reference


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--goals", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None,
                        help="Keep bundles here instead of a temp dir.")
    args = parser.parse_args()

    workdir = args.out or Path(tempfile.mkdtemp(prefix="mplan-demo-"))
    suite = mock_suite(seed=args.seed)
    store = ImageStore(workdir / "blobs")
    goals = make_goals(args.goals, seed=args.seed)
    references = {g.id: make_reference(g, seed=args.seed) for g in goals}

    evaluated = []
    for method in ("ours", "vanilla"):
        cfg = MethodConfig(method=method, seed=args.seed, max_steps=8)
        for goal, result in run_batch(goals, cfg, suite, store, workers=4):
            if isinstance(result, Exception):
                print(f"{method} {goal.id}: FAILED ({result})")
                continue
            save_bundle(result, workdir / method / goal.id, store)
            evaluated.append((result, store))
            print(f"{method} {goal.id}: {len(result.steps)} steps")

    report = aggregate_report(evaluated, references, suite)
    print()
    print(report.render_text())
    print(f"\nbundles kept under {workdir}")


if __name__ == "__main__":
    main()
