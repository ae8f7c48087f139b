"""Self-guided progressive sampling.

Every training iteration records the batch's average hardness; once a
threshold exists, iterations whose average hardness exceeds it are gated
out (no backward pass, no parameter update). After each epoch the
threshold moves to the median of that epoch's recorded values, so the
curriculum admits harder pairs as the model adapts. An initial ungated
pre-epoch seeds the threshold.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, StateError

logger = logging.getLogger(__name__)

MODE_PRE_EPOCH = "pre-epoch"
MODE_GATED = "gated"


@dataclass(frozen=True)
class GateDecision:
    """Outcome of one gate test: selected iff avg_gamma <= alpha_used."""

    selected: bool
    avg_gamma: float
    alpha_used: float


@dataclass
class SpsState:
    """Scheduler state: current threshold, this epoch's record, epoch index.

    The record is append-only within an epoch and cleared by epoch_end;
    its length always equals the iterations elapsed in the current epoch.
    """

    alpha: float | None = None
    mmd_rec: list[float] = field(default_factory=list)
    epoch_index: int = 0
    mode: str = MODE_PRE_EPOCH

    def record(self, avg_gamma: float) -> "SpsState":
        """Append one iteration's average hardness (gated or not)."""
        avg_gamma = float(avg_gamma)
        if not np.isfinite(avg_gamma) or avg_gamma < 0.0:
            raise DataError(f"recorded hardness must be finite and >= 0, "
                            f"got {avg_gamma}")
        self.mmd_rec.append(avg_gamma)
        return self

    def gate(self, avg_gamma: float) -> GateDecision:
        """Decide whether this iteration updates parameters."""
        if self.mode != MODE_GATED or self.alpha is None:
            raise StateError("gate() requires a threshold; run the pre-epoch first")
        avg_gamma = float(avg_gamma)
        return GateDecision(selected=avg_gamma <= self.alpha,
                            avg_gamma=avg_gamma, alpha_used=self.alpha)

    def epoch_end(self) -> "SpsState":
        """Move the threshold to this epoch's median and start a new epoch."""
        if not self.mmd_rec:
            raise StateError("epoch_end() called after an epoch of zero iterations")
        if self.mode == MODE_GATED and all(v > self.alpha for v in self.mmd_rec):
            logger.warning(
                "epoch %d: every iteration was gated out (min hardness %.4g "
                "> alpha %.4g); threshold still updates", self.epoch_index,
                min(self.mmd_rec), self.alpha)
        self.alpha = float(statistics.median(self.mmd_rec))
        self.mmd_rec = []
        self.epoch_index += 1
        self.mode = MODE_GATED
        return self

    def snapshot(self) -> dict:
        return {
            "alpha": self.alpha,
            "recorded": len(self.mmd_rec),
            "epoch_index": self.epoch_index,
            "mode": self.mode,
        }


def run_pre_epoch(trainer, state: SpsState) -> SpsState:
    """One ungated epoch to seed the threshold.

    Trains for a full epoch with every pair used, recording hardness each
    iteration; the median of the record becomes the initial threshold.
    When the trainer is configured to retrain from scratch, its parameters
    (and data order) are then reset to their initial seed state.
    """
    if state.mode != MODE_PRE_EPOCH or state.mmd_rec:
        raise StateError("run_pre_epoch needs a fresh scheduler state")
    snapshot = trainer.snapshot_params()
    trainer.run_epoch(state=state, gated=False)
    state.epoch_end()
    if trainer.reset_after_pre_epoch:
        trainer.restore_params(snapshot)
    return state
