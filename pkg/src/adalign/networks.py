"""Small feed-forward networks: multi-stage feature generator, task head,
and per-stage domain discriminators bound to a gradient-reversal scale.

Weights are initialized with symmetric uniform fan-in scaling from a seeded
generator, so a fixed seed reproduces the exact same model.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import PROB_EPS, Tensor
from .errors import ConfigError


def _init_linear(rng: np.random.Generator, fan_in: int, fan_out: int,
                 gain: float = 1.0):
    # symmetric uniform fan-in scaling; gain sqrt(6) is the usual choice
    # in front of relu
    bound = gain / np.sqrt(fan_in)
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    b = Tensor(rng.uniform(-bound, bound, size=(1, fan_out)))
    return w, b


def _init_linear_glorot(rng: np.random.Generator, fan_in: int, fan_out: int):
    # variance-preserving for tanh stacks; plain fan-in scaling shrinks
    # features by ~1/sqrt(3) per stage, which starves SGD of gradient
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    b = Tensor(np.zeros((1, fan_out)))
    return w, b


def _with_bias(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    ones = Tensor(np.ones((x.shape[0], 1)))
    return x @ w + ones @ b


class MultiStageGenerator:
    """Feed-forward feature extractor; every stage output is an alignment site.

    Each stage is a small stack of tanh layers (a single layer cannot warp
    one domain onto the other without collapsing information, so stages
    need internal depth); forward() returns the feature at the end of each
    stage.
    """

    def __init__(self, in_dim: int, stage_widths: list[int],
                 rng: np.random.Generator, layers_per_stage: int = 2):
        if len(stage_widths) == 0:
            raise ConfigError("generator needs at least one stage")
        if layers_per_stage < 1:
            raise ConfigError(
                f"layers_per_stage must be >= 1, got {layers_per_stage}")
        self.stage_widths = list(stage_widths)
        self.layers_per_stage = layers_per_stage
        self.stages = []
        prev = in_dim
        for width in stage_widths:
            stack = []
            for _ in range(layers_per_stage):
                stack.append(_init_linear_glorot(rng, prev, width))
                prev = width
            self.stages.append(stack)

    def forward(self, x: Tensor) -> list[Tensor]:
        feats = []
        h = x
        for stack in self.stages:
            for w, b in stack:
                h = ag.tanh(_with_bias(h, w, b))
            feats.append(h)
        return feats

    def named_parameters(self):
        out = []
        for i, stack in enumerate(self.stages):
            for j, (w, b) in enumerate(stack):
                out.append((f"generator.stage{i}.layer{j}.w", w))
                out.append((f"generator.stage{i}.layer{j}.b", b))
        return out


class TaskHead:
    """Linear classifier over the last generator stage."""

    def __init__(self, in_dim: int, classes: int, rng: np.random.Generator):
        if classes < 2:
            raise ConfigError(f"need at least 2 classes, got {classes}")
        self.classes = classes
        self.w, self.b = _init_linear(rng, in_dim, classes)

    def logits(self, features: Tensor) -> Tensor:
        return _with_bias(features, self.w, self.b)

    def named_parameters(self):
        return [("head.w", self.w), ("head.b", self.b)]


class SgaModule:
    """One domain discriminator head bound to one feature stage.

    A two-layer perceptron (feature dim -> hidden -> 1) with sigmoid output,
    clamped into (0, 1). grl_lambda is the gradient-reversal scale applied
    to features before they reach this discriminator during training.
    """

    def __init__(self, stage_index: int, in_dim: int, hidden: int,
                 grl_lambda: float, rng: np.random.Generator):
        if grl_lambda <= 0:
            raise ConfigError(f"grl_lambda must be positive, got {grl_lambda}")
        self.stage_index = stage_index
        self.grl_lambda = float(grl_lambda)
        gain = float(np.sqrt(6.0))
        self.w1, self.b1 = _init_linear(rng, in_dim, hidden, gain=gain)
        self.w2, self.b2 = _init_linear(rng, hidden, 1, gain=gain)

    def probabilities(self, features: Tensor) -> Tensor:
        """Domain probability per row, clamped into (0, 1)."""
        h = ag.relu(_with_bias(features, self.w1, self.b1))
        p = ag.sigmoid(_with_bias(h, self.w2, self.b2))
        return ag.clamp(p, PROB_EPS, 1.0 - PROB_EPS)

    def named_parameters(self):
        i = self.stage_index
        return [(f"discriminator{i}.w1", self.w1), (f"discriminator{i}.b1", self.b1),
                (f"discriminator{i}.w2", self.w2), (f"discriminator{i}.b2", self.b2)]
