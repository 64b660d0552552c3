#!/usr/bin/env python3
"""Generate two mock runs over a handful of goals, pair them blind, and serve
the annotation API (point the browser tool at it)."""

import argparse
import json
import random
from pathlib import Path

from mplan.backends import mock_suite
from mplan.engine import MethodConfig, run_variant
from mplan.plan_model import ImageStore, reference_to_dict, save_bundle
from mplan.service import serve
from mplan.synth import make_goals, make_reference


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--goals", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--port", type=int, default=8808)
    parser.add_argument("--workdir", type=Path, default=Path("annotation-demo"))
    args = parser.parse_args()

    suite = mock_suite(seed=args.seed)
    store = ImageStore(args.workdir / "blobs")
    goals = make_goals(args.goals, seed=args.seed)
    rng = random.Random(args.seed)

    pairings = []
    for i, goal in enumerate(goals):
        dirs = {}
        for method in ("ours", "vanilla"):
            cfg = MethodConfig(method=method, seed=args.seed, max_steps=6)
            bundle = run_variant(goal, cfg, suite, store)
            out = args.workdir / method / goal.id
            save_bundle(bundle, out, store)
            dirs[method] = str(out)
        pairings.append({
            "session_id": f"session-{i:04d}",
            "task_id": goal.id,
            "bundle_a": dirs["ours"],
            "bundle_b": dirs["vanilla"],
            "blind_seed": rng.randrange(1 << 30),
            "reference": reference_to_dict(make_reference(goal, seed=args.seed)),
        })

    pairings_path = args.workdir / "pairings.json"
    pairings_path.write_text(json.dumps({"pairings": pairings}, indent=2) + "\n")
    print(f"{len(pairings)} pairings; serving on http://127.0.0.1:{args.port}")
    serve(pairings_path, args.workdir / "annotations.jsonl", port=args.port)


if __name__ == "__main__":
    main()
