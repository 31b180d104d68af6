#!/usr/bin/env python3
"""Generate the four-signal synthetic corpus and write it as JSONL.

Each positive message carries exactly one detector cue (country mention,
phone number, currency trigram, or scripted phrase) and negatives carry
near-miss decoys, so the corpus isolates what each feature stream can see.
"""

from __future__ import annotations

import argparse
import collections

from smishfuse.corpus import write_corpus_jsonl
from smishfuse.synthetic import SyntheticSpec, generate_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="synthetic_corpus.jsonl", help="output JSONL path")
    parser.add_argument("--n-messages", type=int, default=4000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument(
        "--positive-fraction", type=float, default=0.5, help="share of smishing messages"
    )
    args = parser.parse_args()

    spec = SyntheticSpec(
        n_messages=args.n_messages,
        seed=args.seed,
        positive_fraction=args.positive_fraction,
    )
    messages = generate_corpus(spec)
    n = write_corpus_jsonl(messages, args.out)
    labels = collections.Counter(m.ternary_label for m in messages)
    print(f"wrote {n} messages to {args.out}")
    for label, count in sorted(labels.items()):
        print(f"  {label}: {count}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
