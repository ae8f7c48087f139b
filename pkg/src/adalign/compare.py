"""Multi-variant, multi-seed comparison runs with a CSV + text summary.

Mirrors the usual avg/best reporting convention: each run is scored by the
final-quarter average of its per-epoch target accuracy ("avg") and the
final-quarter maximum ("best"); variants aggregate the mean avg and the
best best over seeds. The hardness slope is a least-squares fit of the
per-epoch mean recorded hardness against the epoch index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .harness import TrainConfig, TrainResult, train


@dataclass
class VariantSummary:
    variant: str
    seeds: list[int]
    mean_target_accuracy: float
    best_target_accuracy: float
    mean_source_accuracy: float
    hardness_slope: float
    confusion_first_epoch: float | None
    confusion_final_epoch: float | None

    def to_row(self) -> dict:
        return {
            "variant": self.variant,
            "seeds": ";".join(str(s) for s in self.seeds),
            "mean_target_accuracy": self.mean_target_accuracy,
            "best_target_accuracy": self.best_target_accuracy,
            "mean_source_accuracy": self.mean_source_accuracy,
            "hardness_slope": self.hardness_slope,
            "confusion_first_epoch": self.confusion_first_epoch,
            "confusion_final_epoch": self.confusion_final_epoch,
        }


def final_quarter(values: list[float]) -> list[float]:
    n = len(values)
    return values[max(0, n - max(1, n // 4)):]


def run_scores(result: TrainResult) -> dict:
    """Per-run metrics from the epoch evaluation history and the log."""
    target_curve = [e.target_accuracy for e in result.epoch_evals]
    source_curve = [e.source_accuracy for e in result.epoch_evals]
    confusion_curve = [e.domain_confusion_degree for e in result.epoch_evals]
    tail = final_quarter(target_curve)

    train_records = [r for r in result.records if r["phase"] == "train"]
    per_epoch: dict[int, list[float]] = {}
    for r in train_records:
        per_epoch.setdefault(r["epoch"], []).append(r["avg_gamma"])
    epochs = sorted(per_epoch)
    hardness_curve = [float(np.mean(per_epoch[e])) for e in epochs]
    if len(hardness_curve) >= 2:
        slope = float(np.polyfit(np.arange(len(hardness_curve)),
                                 hardness_curve, 1)[0])
    else:
        slope = 0.0
    return {
        "avg_target_accuracy": float(np.mean(tail)),
        "best_target_accuracy": float(np.max(tail)),
        "final_source_accuracy": source_curve[-1],
        "hardness_slope": slope,
        "confusion_curve": confusion_curve,
        "hardness_curve": hardness_curve,
    }


def compare_variants(configs: list[TrainConfig], seeds: list[int],
                     out_dir) -> list[VariantSummary]:
    """Train every config for every seed and summarize per variant.

    All configs must target the same dataset so the comparison is fair.
    Writes summary.csv under out_dir and returns the summaries in config
    order.
    """
    if len(configs) < 2:
        raise ConfigError("compare needs at least 2 variant configs")
    if len(seeds) < 1:
        raise ConfigError("compare needs at least 1 seed")
    datasets = {json.dumps(c.to_dict()["dataset"], sort_keys=True)
                if c.dataset is not None else c.dataset_path
                for c in configs}
    if len(datasets) > 1:
        raise ConfigError("all variants must use the same dataset")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for config in configs:
        per_seed = []
        for seed in seeds:
            run_dir = out_dir / f"{config.variant}-seed{seed}"
            result = train(config.with_seed(seed), run_dir)
            per_seed.append(run_scores(result))
        confusion_first = [s["confusion_curve"][0] for s in per_seed]
        confusion_final = [s["confusion_curve"][-1] for s in per_seed]
        has_confusion = all(c is not None for c in confusion_first)
        summaries.append(VariantSummary(
            variant=config.variant,
            seeds=list(seeds),
            mean_target_accuracy=float(np.mean(
                [s["avg_target_accuracy"] for s in per_seed])),
            best_target_accuracy=float(np.max(
                [s["best_target_accuracy"] for s in per_seed])),
            mean_source_accuracy=float(np.mean(
                [s["final_source_accuracy"] for s in per_seed])),
            hardness_slope=float(np.mean(
                [s["hardness_slope"] for s in per_seed])),
            confusion_first_epoch=(
                float(np.mean(confusion_first)) if has_confusion else None),
            confusion_final_epoch=(
                float(np.mean(confusion_final)) if has_confusion else None),
        ))

    write_summary_csv(summaries, out_dir / "summary.csv")
    return summaries


CSV_COLUMNS = ("variant", "seeds", "mean_target_accuracy",
               "best_target_accuracy", "mean_source_accuracy",
               "hardness_slope", "confusion_first_epoch",
               "confusion_final_epoch")


def write_summary_csv(summaries: list[VariantSummary], path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for s in summaries:
        row = s.to_row()
        lines.append(",".join("" if row[c] is None else str(row[c])
                              for c in CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def format_table(summaries: list[VariantSummary]) -> str:
    headers = ("variant", "target acc (mean)", "target acc (best)",
               "hardness slope", "confusion end")
    rows = []
    for s in summaries:
        conf = "-" if s.confusion_final_epoch is None \
            else f"{s.confusion_final_epoch:.3f}"
        rows.append((s.variant, f"{s.mean_target_accuracy:.4f}",
                     f"{s.best_target_accuracy:.4f}",
                     f"{s.hardness_slope:+.5f}", conf))
    widths = [max(len(h), *(len(r[i]) for r in rows))
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(v.ljust(w) for v, w in zip(row, widths))
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(headers), sep] + [fmt(r) for r in rows])
