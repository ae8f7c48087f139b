#!/usr/bin/env python3
"""Hardness and domain-confusion trajectories for one or more variants.

Re-creates the training-dynamics analysis on the synthetic benchmark: the
per-epoch mean recorded hardness should fall as alignment proceeds, and
the domain confusion degree should climb once the discriminators can no
longer separate the aligned features.

    python scripts/hardness_trajectory.py --variants sga-s,baseline-a
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from adalign import train  # noqa: E402
from run_two_moons import build_config  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/trajectory")
    parser.add_argument("--variants", default="baseline-a,sga-l,sga-s")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--points", type=int, default=1000)
    parser.add_argument("--rotation", type=float, default=30.0)
    parser.add_argument("--noise", type=float, default=0.05)
    parser.add_argument("--data-seed", type=int, default=100)
    parser.add_argument("--epochs", type=int, default=96)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--lr", type=float, default=0.2)
    parser.add_argument("--lr-drop-point", type=float, default=0.9)
    parser.add_argument("--grl-lambda", type=float, default=1.0)
    parser.add_argument("--sigma", type=float, default=0.35)
    parser.add_argument("--width", type=int, default=16)
    parser.add_argument("--stage-depth", type=int, default=2)
    parser.add_argument("--hidden", type=int, default=16)
    args = parser.parse_args()

    base = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = {}
    for variant in args.variants.split(","):
        cfg = dataclasses.replace(base, variant=variant).with_seed(args.seed)
        result = train(cfg, out / variant)
        per_epoch = {}
        for rec in result.records:
            if rec["phase"] == "train":
                per_epoch.setdefault(rec["epoch"], []).append(rec["avg_gamma"])
        curves[variant] = {
            "hardness": [float(np.mean(per_epoch[e])) for e in sorted(per_epoch)],
            "confusion": [e.domain_confusion_degree for e in result.epoch_evals],
            "target_accuracy": [e.target_accuracy for e in result.epoch_evals],
        }
        h = curves[variant]["hardness"]
        print(f"{variant:12s} hardness {h[0]:.3f} -> {h[-1]:.3f}  "
              f"target acc {curves[variant]['target_accuracy'][-1]:.3f}")
    (out / "curves.json").write_text(json.dumps(curves, indent=2))
    print(f"curves: {out / 'curves.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
