"""Kernel two-sample hardness: RBF-MMD between feature batches.

The hardness of a source/target feature pair is the biased empirical MMD
under an RBF kernel. It is non-negative by construction, zero for
identical batches, bounded by 2, and differentiable through the feature
batches when a tape is active. The kernel bandwidth is either fixed or
recomputed per batch with the median heuristic on detached features, so
it acts as a constant of the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import (ConfigError, DataError, EmptyInputError,
                     NumericError, ShapeError)

BANDWIDTH_MODES = ("median-heuristic", "fixed")


@dataclass(frozen=True)
class KernelConfig:
    """RBF bandwidth policy: per-batch median heuristic, or a fixed sigma."""

    bandwidth_mode: str = "median-heuristic"
    fixed_sigma: float = 1.0

    def __post_init__(self):
        if self.bandwidth_mode not in BANDWIDTH_MODES:
            raise ConfigError(
                f"bandwidth_mode must be one of {BANDWIDTH_MODES}, "
                f"got {self.bandwidth_mode!r}")
        if self.bandwidth_mode == "fixed" and not self.fixed_sigma > 0:
            raise ConfigError(f"fixed_sigma must be positive, got {self.fixed_sigma}")


@dataclass(frozen=True)
class HardnessReport:
    """Per-stage hardness values and their arithmetic mean for one batch pair."""

    per_stage_gamma: tuple[float, ...]
    avg_gamma: float

    def __post_init__(self):
        if len(self.per_stage_gamma) == 0:
            raise EmptyInputError("hardness report needs at least one stage")
        for i, g in enumerate(self.per_stage_gamma):
            if not np.isfinite(g) or g < 0.0:
                raise DataError(f"stage {i}: hardness must be finite and >= 0, got {g}")
            if g > 2.0:
                raise DataError(f"stage {i}: hardness {g} exceeds the RBF bound 2")
        expected = sum(self.per_stage_gamma) / len(self.per_stage_gamma)
        if self.avg_gamma != expected:
            raise DataError(
                f"avg_gamma {self.avg_gamma} is not the mean of the stage values")

    @classmethod
    def from_stage_values(cls, values) -> "HardnessReport":
        values = tuple(float(v) for v in values)
        return cls(values, sum(values) / len(values) if values else 0.0)


def _check_feature_batch(t: Tensor, name: str) -> None:
    if t.ndim != 2:
        raise ShapeError(f"{name} must be a 2-d batch, got shape {t.shape}")
    if t.shape[0] == 0:
        raise EmptyInputError(f"{name} is an empty batch")


def _row_norms_sq(a: Tensor) -> Tensor:
    return ag.reshape(ag.reduce_sum(a * a, axis=1), (a.shape[0], 1))


def _kernel_from_norms(a: Tensor, b: Tensor, aa: Tensor, bb: Tensor,
                       sigma: float) -> Tensor:
    n_a, n_b = a.shape[0], b.shape[0]
    gram = a @ ag.transpose(b)
    d2 = aa @ Tensor(np.ones((1, n_b))) \
        + Tensor(np.ones((n_a, 1))) @ ag.transpose(bb) - 2.0 * gram
    # cancellation can leave tiny negative distances; the true quantity is
    # >= 0, and clamping also keeps exp's argument <= 0 for any sigma
    d2 = ag.clamp(d2, 0.0, np.inf)
    return ag.exp(d2 * (-1.0 / (2.0 * sigma * sigma)))


def rbf_kernel_matrix(a: Tensor, b: Tensor, sigma: float) -> Tensor:
    """K[i, j] = exp(-||a_i - b_j||^2 / (2 sigma^2)).

    Differentiable w.r.t. both batches when a tape is active. Pairwise
    squared distances come from the norm expansion
    ||x - y||^2 = ||x||^2 + ||y||^2 - 2 x.y, with the rank-one terms
    spread across rows/columns by matrix products against ones vectors.
    """
    sigma = float(sigma)
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    _check_feature_batch(a, "a")
    _check_feature_batch(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(
            f"feature dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    return _kernel_from_norms(a, b, _row_norms_sq(a), _row_norms_sq(b), sigma)


def median_heuristic_sigma(a: Tensor | np.ndarray, b: Tensor | np.ndarray) -> float:
    """sqrt(median squared pairwise distance over the pooled batch / 2).

    Works on detached values only; the result is treated as a constant of
    the iteration. Falls back to 1.0 when the median distance is zero.
    """
    a = a.data if isinstance(a, Tensor) else np.asarray(a, dtype=np.float64)
    b = b.data if isinstance(b, Tensor) else np.asarray(b, dtype=np.float64)
    pooled = np.concatenate([a, b], axis=0)
    n = pooled.shape[0]
    if n < 2:
        raise ConfigError(f"median heuristic needs >= 2 pooled points, got {n}")
    diffs = pooled[:, None, :] - pooled[None, :, :]
    d2 = np.sum(diffs * diffs, axis=2)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(d2[iu]))
    if med == 0.0:
        return 1.0
    return float(np.sqrt(med / 2.0))


def resolve_sigma(fs: Tensor, ft: Tensor, cfg: KernelConfig) -> float:
    if cfg.bandwidth_mode == "fixed":
        return cfg.fixed_sigma
    return median_heuristic_sigma(fs, ft)


def _masked_kernel(a, b, norms_a, norms_b, inv_two_sigma_sq):
    """Kernel matrix plus the mask of strictly positive distances."""
    d2 = (norms_a[:, None] + norms_b[None, :]) - 2.0 * (a @ b.T)
    mask = d2 > 0.0
    k = np.exp(np.maximum(d2, 0.0) * (-inv_two_sigma_sq))
    return k, mask


def mmd_hardness(fs: Tensor, ft: Tensor, cfg: KernelConfig) -> Tensor:
    """Biased empirical MMD between two feature batches (scalar Tensor).

    gamma^2 = mean(K_ss) + mean(K_tt) - 2 mean(K_st); the square root is
    clamped at zero (subgradient 0 there) because cancellation can push
    the estimate a hair negative. The cross term is evaluated from both
    K(fs, ft) and K(ft, fs) so that swapping the arguments produces a
    bit-identical value and identical batches cancel to exactly zero.

    Recorded as a single tape node with a closed-form backward: the loss
    sits inside every training iteration, and fusing it keeps the tape
    small.
    """
    _check_feature_batch(fs, "source features")
    _check_feature_batch(ft, "target features")
    if fs.shape[1] != ft.shape[1]:
        raise ShapeError(
            f"feature dimensions differ: {fs.shape[1]} vs {ft.shape[1]}")
    sigma = resolve_sigma(fs, ft, cfg)
    n_s, n_t = fs.shape[0], ft.shape[0]
    c = 1.0 / (2.0 * sigma * sigma)
    a, b = fs.data, ft.data
    ss = (a * a).sum(axis=1)
    tt = (b * b).sum(axis=1)

    k_ss, m_ss = _masked_kernel(a, a, ss, ss, c)
    k_tt, m_tt = _masked_kernel(b, b, tt, tt, c)
    k_st, m_st = _masked_kernel(a, b, ss, tt, c)
    k_ts, m_ts = _masked_kernel(b, a, tt, ss, c)

    term_ss = k_ss.sum() * (1.0 / (n_s * n_s))
    term_tt = k_tt.sum() * (1.0 / (n_t * n_t))
    cross = (k_st.sum() + k_ts.sum()) * (1.0 / (n_s * n_t))
    g2 = (term_ss + term_tt) - cross
    if not np.isfinite(g2):
        raise NumericError("hardness estimate is not finite")
    gamma = np.sqrt(g2) if g2 > 0.0 else 0.0
    out = Tensor(np.float64(gamma).reshape(()))

    tape = ag.active_tape()
    if tape is not None:
        i_fs = tape._bind(fs)
        i_ft = tape._bind(ft)

        def backward(g):
            if g2 <= 0.0:
                return ((i_fs, np.zeros_like(a)), (i_ft, np.zeros_like(b)))
            # d gamma / d x = (d gamma^2 / d x) / (2 gamma); the kernel
            # derivative is 2c * k * (y - x), masked where d2 was clamped
            km_ss = k_ss * m_ss
            km_tt = k_tt * m_tt
            km_st = k_st * m_st
            km_ts = k_ts * m_ts
            s_ss = km_ss + km_ss.T
            s_tt = km_tt + km_tt.T
            d_fs = (2.0 * c / (n_s * n_s)) * (s_ss @ a - s_ss.sum(1)[:, None] * a)
            d_fs -= (2.0 * c / (n_s * n_t)) * (
                (km_st @ b - km_st.sum(1)[:, None] * a)
                + (km_ts.T @ b - km_ts.sum(0)[:, None] * a))
            d_ft = (2.0 * c / (n_t * n_t)) * (s_tt @ b - s_tt.sum(1)[:, None] * b)
            d_ft -= (2.0 * c / (n_s * n_t)) * (
                (km_st.T @ a - km_st.sum(0)[:, None] * b)
                + (km_ts @ a - km_ts.sum(1)[:, None] * b))
            scale = float(g) / (2.0 * gamma)
            return ((i_fs, scale * d_fs), (i_ft, scale * d_ft))

        tape._record(out, backward)
    return out


def stage_hardness_tensors(stage_features, cfg: KernelConfig) -> list[Tensor]:
    """mmd_hardness per (source, target) stage pair, stage index on errors."""
    if len(stage_features) == 0:
        raise EmptyInputError("no stage feature pairs given")
    gammas = []
    for i, (fs, ft) in enumerate(stage_features):
        try:
            gammas.append(mmd_hardness(fs, ft, cfg))
        except (ShapeError, EmptyInputError) as err:
            raise type(err)(f"stage {i}: {err}") from err
    return gammas


def multi_stage_hardness(stage_features, cfg: KernelConfig) -> HardnessReport:
    """Hardness per stage plus the average used by the progressive sampler."""
    gammas = stage_hardness_tensors(stage_features, cfg)
    return HardnessReport.from_stage_values(float(g) for g in gammas)
