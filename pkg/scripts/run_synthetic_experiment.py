#!/usr/bin/env python3
"""Train and evaluate the full pipeline on the synthetic corpus.

Generates the corpus, trains every stream plus the fusion network on the
80% partition, reports held-out metrics per stream and combined, and runs
the leave-one-stream-out ablation. Optionally saves the trained bundle.
"""

from __future__ import annotations

import argparse
import json
import time

from smishfuse.bundle import save_bundle
from smishfuse.corpus import split
from smishfuse.evaluation import evaluate, render_ablation, render_table, run_ablation
from smishfuse.pipeline import train_pipeline
from smishfuse.synthetic import SyntheticSpec, experiment_config, generate_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-messages", type=int, default=4000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--bundle", default=None, help="save the trained bundle here")
    parser.add_argument("--out", default=None, help="write the JSON report here")
    parser.add_argument(
        "--ablation-mode", choices=("retrain", "zero"), default="retrain"
    )
    parser.add_argument(
        "--skip-ablation", action="store_true", help="stop after the held-out evaluation"
    )
    args = parser.parse_args()

    started = time.time()
    spec = SyntheticSpec(n_messages=args.n_messages, seed=args.seed)
    messages = generate_corpus(spec)
    config = experiment_config(seed=args.seed)
    parts = split(messages, config.data.train_fraction, config.seed)
    print(f"corpus: {len(messages)} messages, {len(parts.train)} train / {len(parts.test)} test")

    pipeline = train_pipeline(parts.train, config)
    print(f"trained all streams in {time.time() - started:.0f}s")

    report = evaluate(pipeline, parts.test)
    print(render_table(report))

    payload = {"evaluation": report.as_dict(), "runtime_seconds": None}
    if not args.skip_ablation:
        ablation = run_ablation(pipeline, parts.train, parts.test, mode=args.ablation_mode)
        print(render_ablation(ablation))
        payload["ablation"] = ablation.as_dict()

    if args.bundle:
        save_bundle(pipeline, args.bundle)
        print(f"bundle saved to {args.bundle}")

    payload["runtime_seconds"] = round(time.time() - started, 1)
    print(f"total runtime: {payload['runtime_seconds']}s")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"report written to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
