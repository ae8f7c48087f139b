"""Adversarial alignment losses.

The domain discriminators sit behind a gradient-reversal node, so a single
minimization trains them to separate the domains while pushing the feature
generator to confuse them. Their loss is a focal binary cross-entropy whose
exponent is the current batch's kernel hardness: hard-to-align pairs (large
MMD) produce confidently-separable features, and the focal factor damps
exactly those, keeping the adversarial pressure on pairs near the domain
boundary. The per-batch hardness also enters the total loss directly as a
minimized term.

Conventions baked in here:
  - both domain terms use the minimization form -(1 - p_t)^gamma * log(p_t);
    the adversarial push-pull comes entirely from the reversal scale;
  - the focal exponent is a constant of the iteration (detached), while the
    hardness loss term stays differentiable;
  - per-stage losses aggregate by summation by default ("mean" available).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import PROB_EPS, Tensor, gradient_reverse
from .errors import ConfigError, DataError, NumericError
from .hardness import HardnessReport, KernelConfig, stage_hardness_tensors
from .networks import MultiStageGenerator, SgaModule, TaskHead

STAGE_REDUCTIONS = ("sum", "mean")


@dataclass
class DomainBatch:
    """Paired mini-batch: labeled source rows, unlabeled target rows."""

    source_x: Tensor
    source_y: np.ndarray
    target_x: Tensor

    def __post_init__(self):
        self.source_y = np.asarray(self.source_y)
        if self.source_x.ndim != 2 or self.target_x.ndim != 2:
            raise DataError("batch features must be 2-d")
        if self.source_x.shape[0] < 1 or self.target_x.shape[0] < 1:
            raise DataError("both domains need at least one sample")
        if self.source_y.shape != (self.source_x.shape[0],):
            raise DataError(
                f"source labels shape {self.source_y.shape} does not match "
                f"{self.source_x.shape[0]} source rows")


@dataclass
class LossBreakdown:
    """Components of one batch loss; total = l_det + l_adv + beta * l_gamma,
    with absent terms contributing nothing."""

    l_det: Tensor
    l_adv: Tensor | None
    l_gamma: Tensor | None
    beta: float
    total: Tensor

    def as_floats(self) -> dict:
        return {
            "l_det": float(self.l_det),
            "l_adv": None if self.l_adv is None else float(self.l_adv),
            "l_gamma": None if self.l_gamma is None else float(self.l_gamma),
            "beta": self.beta,
            "total": float(self.total),
        }


def focal_domain_loss(p: Tensor, y: int, gamma: float) -> Tensor:
    """Batch-mean focal loss -(1 - p_t)^gamma * log(p_t) for one domain label.

    gamma = 0 reduces exactly to binary cross-entropy; larger gamma damps
    confidently classified samples. p is clamped away from {0, 1} before
    the log, so the result is always finite. Fused into one tape node (it
    runs six times per training iteration).
    """
    gamma = float(gamma)
    if gamma < 0 or not np.isfinite(gamma):
        raise ConfigError(f"focal exponent must be finite and >= 0, got {gamma}")
    if y not in (0, 1):
        raise DataError(f"domain label must be 0 or 1, got {y}")
    raw = p.data if y == 1 else 1.0 - p.data
    p_t = np.clip(raw, PROB_EPS, 1.0 - PROB_EPS)
    one_minus = 1.0 - p_t
    modulator = np.power(one_minus, gamma)
    log_pt = np.log(p_t)
    out = Tensor(np.asarray(np.mean(-(modulator * log_pt))))

    tape = ag.active_tape()
    if tape is not None:
        i_p = tape._bind(p)
        n = p_t.size
        inside = (raw > PROB_EPS) & (raw < 1.0 - PROB_EPS)
        sign = 1.0 if y == 1 else -1.0

        def backward(g):
            # d/dp_t of -(1-p_t)^gamma log(p_t), zero where the clamp bit
            if gamma == 0.0:
                d_pt = -1.0 / p_t
            else:
                d_pt = gamma * np.power(one_minus, gamma - 1.0) * log_pt \
                    - modulator / p_t
            grad = (float(g) / n) * sign * np.where(inside, d_pt, 0.0)
            return ((i_p, grad),)

        tape._record(out, backward)
    return out


def adversarial_stage_loss(module: SgaModule, fs: Tensor, ft: Tensor,
                           gamma: float) -> Tensor:
    """Focal domain loss over both domains for one stage's discriminator.

    Features pass through gradient reversal first: minimizing this trains
    the discriminator to tell the domains apart while the reversed gradient
    trains the generator to confuse it.
    """
    p_s = module.probabilities(gradient_reverse(fs, module.grl_lambda))
    p_t = module.probabilities(gradient_reverse(ft, module.grl_lambda))
    return focal_domain_loss(p_s, 1, gamma) + focal_domain_loss(p_t, 0, gamma)


def detection_stand_in_loss(logits: Tensor, labels) -> Tensor:
    """Mean softmax cross-entropy over source samples."""
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise DataError(f"expected {n} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise DataError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.min() < 0 or labels.max() >= c:
        raise DataError(f"labels must lie in [0, {c}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    # constant row-max shift; cancels exactly in (logsumexp - picked)
    shift_rows = logits.data.max(axis=1, keepdims=True)
    shifted = logits - Tensor(shift_rows) @ Tensor(np.ones((1, c)))
    lse = ag.log(ag.reduce_sum(ag.exp(shifted), axis=1))
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    picked = ag.reduce_sum(shifted * Tensor(onehot), axis=1)
    return ag.reduce_mean(lse - picked)


def _combine(terms: list[Tensor], reduction: str) -> Tensor:
    if reduction not in STAGE_REDUCTIONS:
        raise ConfigError(f"stage reduction must be one of {STAGE_REDUCTIONS}, "
                          f"got {reduction!r}")
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    if reduction == "mean":
        total = total * (1.0 / len(terms))
    return total


def batch_loss(batch: DomainBatch, generator: MultiStageGenerator,
               task_head: TaskHead, modules: list[SgaModule], beta: float,
               kernel_cfg: KernelConfig, *,
               focal_exponent: float | None = None,
               with_adversarial: bool = True,
               with_hardness_loss: bool = True,
               stage_reduction: str = "sum") -> tuple[LossBreakdown, HardnessReport]:
    """Assemble the full batch loss and the per-stage hardness report.

    focal_exponent=None uses each stage's own hardness as its focal
    exponent (detached); a float pins the exponent for every stage, which
    is how the fixed-focal and plain cross-entropy baselines are built.
    with_adversarial / with_hardness_loss drop the corresponding terms
    entirely (they are then absent from the breakdown, not zero).
    """
    src_stages = generator.forward(batch.source_x)
    tgt_stages = generator.forward(batch.target_x)
    if with_adversarial and len(modules) != len(src_stages):
        raise ConfigError(f"{len(modules)} discriminator modules for "
                          f"{len(src_stages)} generator stages")

    gammas = stage_hardness_tensors(list(zip(src_stages, tgt_stages)), kernel_cfg)
    report = HardnessReport.from_stage_values(float(g) for g in gammas)

    l_det = detection_stand_in_loss(task_head.logits(src_stages[-1]), batch.source_y)
    total = l_det

    l_adv = None
    if with_adversarial:
        stage_losses = []
        for module, fs, ft, g in zip(modules, src_stages, tgt_stages, gammas):
            exponent = float(g) if focal_exponent is None else float(focal_exponent)
            stage_losses.append(adversarial_stage_loss(module, fs, ft, exponent))
        l_adv = _combine(stage_losses, stage_reduction)
        total = total + l_adv

    l_gamma = None
    if with_hardness_loss:
        l_gamma = _combine(gammas, stage_reduction)
        total = total + float(beta) * l_gamma

    breakdown = LossBreakdown(l_det, l_adv, l_gamma, float(beta), total)
    if not np.isfinite(float(total)):
        raise NumericError(f"non-finite batch loss: {breakdown.as_floats()}")
    return breakdown, report
