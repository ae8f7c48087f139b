"""Training harness: end-to-end pipeline, evaluation, and structured logs.

A run is a pure function of its config: model init, batch order, and every
update are seeded, logs carry no timestamps, and checkpoints serialize
floats exactly, so identical (config, seed) reproduce byte-identical
artifacts.

Variant ladder (each step flips exactly one switch):
  source-only  classification loss only
  baseline-a   + adversarial discriminators, plain cross-entropy (exponent 0)
  baseline-b   focal exponent fixed at 5
  sga-g        focal exponent = per-stage batch hardness
  sga-l        + hardness term in the total loss
  sga-s        + progressive sampling (median-threshold gating)
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import STAGE_REDUCTIONS, batch_loss
from .autograd import Tape, Tensor, grads_for, sgd_step
from .data import (
    DatasetSpec,
    DomainDataset,
    batch_iterator,
    generate,
    load as load_dataset,
    steps_per_epoch,
)
from .errors import ConfigError, NumericError
from .hardness import KernelConfig, multi_stage_hardness
from .networks import MultiStageGenerator, SgaModule, TaskHead
from .scheduler import SpsState, run_pre_epoch

VARIANTS = ("source-only", "baseline-a", "baseline-b", "sga-g", "sga-l", "sga-s")
LOG_SCHEMA = "adalign-metrics/1"
CHECKPOINT_VERSION = 1

_MODEL_STREAM = 101


@dataclass(frozen=True)
class TrainConfig:
    """Everything a run needs; serializable as flat JSON with unknown keys
    rejected."""

    dataset: DatasetSpec | None = None
    dataset_path: str | None = None
    variant: str = "sga-s"
    epochs: int = 40
    batch_size: int = 16
    lr_initial: float = 0.05
    lr_drop_factor: float = 0.1
    lr_drop_point: float = 0.5
    beta: float = 0.25
    grl_lambda: float = 1.0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    stages: int = 3
    seed: int = 0
    generator_width: int = 32
    generator_stage_depth: int = 2
    discriminator_hidden: int = 32
    stage_reduction: str = "sum"
    pre_epoch_reset: bool = True

    def __post_init__(self):
        if (self.dataset is None) == (self.dataset_path is None):
            raise ConfigError("exactly one of dataset / dataset_path is required")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, "
                              f"got {self.variant!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.lr_drop_point <= 1.0:
            raise ConfigError(f"lr_drop_point must lie in (0, 1], "
                              f"got {self.lr_drop_point}")
        if self.lr_initial <= 0 or self.lr_drop_factor <= 0:
            raise ConfigError("learning rates must be positive")
        if self.stages < 1:
            raise ConfigError(f"stages must be >= 1, got {self.stages}")
        if self.stage_reduction not in STAGE_REDUCTIONS:
            raise ConfigError(f"stage_reduction must be one of "
                              f"{STAGE_REDUCTIONS}, got {self.stage_reduction!r}")

    # -- variant switches --------------------------------------------------
    @property
    def adversarial(self) -> bool:
        return self.variant != "source-only"

    @property
    def focal_exponent(self) -> float | None:
        """Fixed exponent for the baselines; None = hardness-guided."""
        if self.variant == "baseline-a":
            return 0.0
        if self.variant == "baseline-b":
            return 5.0
        return None

    @property
    def hardness_loss(self) -> bool:
        return self.variant in ("sga-l", "sga-s")

    @property
    def progressive_sampling(self) -> bool:
        return self.variant == "sga-s"

    def with_seed(self, run_seed: int) -> "TrainConfig":
        """Re-seed the whole pipeline (training and dataset draw)."""
        updates: dict = {"seed": run_seed}
        if self.dataset is not None:
            updates["dataset"] = dataclasses.replace(
                self.dataset, seed=self.dataset.seed + run_seed)
        return dataclasses.replace(self, **updates)

    # -- (de)serialization ---------------------------------------------------
    _KEYS = ("dataset", "dataset_path", "variant", "epochs", "batch_size",
             "lr_initial", "lr_drop_factor", "lr_drop_point", "beta",
             "grl_lambda", "kernel", "stages", "seed", "generator_width",
             "generator_stage_depth", "discriminator_hidden",
             "stage_reduction", "pre_epoch_reset")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        raw = dict(raw)
        unknown = set(raw) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" in raw and raw["dataset"] is not None:
            raw["dataset"] = DatasetSpec.from_dict(raw["dataset"])
        if "kernel" in raw:
            kernel_raw = dict(raw["kernel"])
            unknown = set(kernel_raw) - {"bandwidth_mode", "fixed_sigma"}
            if unknown:
                raise ConfigError(f"unknown kernel keys: {sorted(unknown)}")
            raw["kernel"] = KernelConfig(**kernel_raw)
        return cls(**raw)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "dataset": None if self.dataset is None else self.dataset.to_dict(),
            "dataset_path": self.dataset_path,
            "variant": self.variant,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr_initial": self.lr_initial,
            "lr_drop_factor": self.lr_drop_factor,
            "lr_drop_point": self.lr_drop_point,
            "beta": self.beta,
            "grl_lambda": self.grl_lambda,
            "kernel": {"bandwidth_mode": self.kernel.bandwidth_mode,
                       "fixed_sigma": self.kernel.fixed_sigma},
            "stages": self.stages,
            "seed": self.seed,
            "generator_width": self.generator_width,
            "generator_stage_depth": self.generator_stage_depth,
            "discriminator_hidden": self.discriminator_hidden,
            "stage_reduction": self.stage_reduction,
            "pre_epoch_reset": self.pre_epoch_reset,
        }


@dataclass
class IterationRecord:
    """One JSONL line per training iteration; all fields finite."""

    phase: str  # "pre" or "train"
    epoch: int
    step: int
    per_stage_gamma: list[float]
    avg_gamma: float
    focal_exponents: list[float] | None
    alpha: float | None
    selected: bool | None
    loss: dict | None
    learning_rate: float

    def to_dict(self) -> dict:
        for key, value in (("avg_gamma", self.avg_gamma),
                           ("learning_rate", self.learning_rate)):
            if not np.isfinite(value):
                raise NumericError(f"non-finite {key} in iteration record")
        return {
            "phase": self.phase,
            "epoch": self.epoch,
            "step": self.step,
            "per_stage_gamma": self.per_stage_gamma,
            "avg_gamma": self.avg_gamma,
            "focal_exponents": self.focal_exponents,
            "alpha": self.alpha,
            "selected": self.selected,
            "loss": self.loss,
            "learning_rate": self.learning_rate,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class EvalReport:
    """Accuracies, discriminator confusion, and current hardness level."""

    source_accuracy: float
    target_accuracy: float
    domain_confusion_degree: float | None
    mean_hardness: float

    def __post_init__(self):
        for name in ("source_accuracy", "target_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        c = self.domain_confusion_degree
        if c is not None and not 0.0 <= c <= 1.0:
            raise ConfigError(f"confusion degree must lie in [0, 1], got {c}")

    def to_dict(self) -> dict:
        return {
            "source_accuracy": self.source_accuracy,
            "target_accuracy": self.target_accuracy,
            "domain_confusion_degree": self.domain_confusion_degree,
            "mean_hardness": self.mean_hardness,
        }


class TrainedModel:
    """Generator + task head + discriminator modules, plus their config."""

    def __init__(self, generator: MultiStageGenerator, head: TaskHead,
                 modules: list[SgaModule], config: TrainConfig):
        self.generator = generator
        self.head = head
        self.modules = modules
        self.config = config

    def named_parameters(self):
        out = list(self.generator.named_parameters())
        out += self.head.named_parameters()
        for m in self.modules:
            out += m.named_parameters()
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]


def build_model(config: TrainConfig, in_dim: int, classes: int) -> TrainedModel:
    rng = np.random.default_rng([config.seed, _MODEL_STREAM])
    widths = [config.generator_width] * config.stages
    generator = MultiStageGenerator(in_dim, widths, rng,
                                    layers_per_stage=config.generator_stage_depth)
    head = TaskHead(widths[-1], classes, rng)
    modules = []
    if config.adversarial:
        modules = [SgaModule(i, w, config.discriminator_hidden,
                             config.grl_lambda, rng)
                   for i, w in enumerate(widths)]
    return TrainedModel(generator, head, modules, config)


def resolve_dataset(config: TrainConfig) -> DomainDataset:
    if config.dataset_path is not None:
        return load_dataset(config.dataset_path)
    return generate(config.dataset)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(model: TrainedModel, path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "params": {
            name: {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()}
            for name, t in model.named_parameters()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, separators=(",", ":"))


def load_checkpoint(path) -> TrainedModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigError(
            f"unsupported checkpoint version {payload.get('format_version')}")
    config = TrainConfig.from_dict(payload["config"])
    params = payload["params"]
    in_dim = params["generator.stage0.layer0.w"]["shape"][0]
    classes = params["head.w"]["shape"][1]
    model = build_model(config, in_dim, classes)
    for name, tensor in model.named_parameters():
        if name not in params:
            raise ConfigError(f"checkpoint is missing parameter {name}")
        entry = params[name]
        data = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if tuple(data.shape) != tensor.shape:
            raise ConfigError(f"checkpoint shape mismatch for {name}")
        tensor.data = data
    return model


# -- evaluation ---------------------------------------------------------------

def _forward_features(model: TrainedModel, x: np.ndarray):
    return model.generator.forward(Tensor(x))


def evaluate(model: TrainedModel, dataset: DomainDataset,
             mean_hardness: float | None = None) -> EvalReport:
    """Accuracy on both domains, discriminator confusion, hardness level.

    Target accuracy uses the quarantined labels (evaluation is their only
    consumer). The confusion degree is the fraction of pooled samples the
    last-stage discriminator cannot call with margin: max(p, 1-p) <= 0.6.
    When mean_hardness is not supplied (e.g. standalone eval), it is
    measured fresh as the average stage hardness over the full dataset.
    """
    feats_s = _forward_features(model, dataset.source_x)
    feats_t = _forward_features(model, dataset.target_x)

    pred_s = np.argmax(model.head.logits(feats_s[-1]).data, axis=1)
    source_acc = float(np.mean(pred_s == dataset.source_y))
    pred_t = np.argmax(model.head.logits(feats_t[-1]).data, axis=1)
    target_acc = float(np.mean(pred_t == dataset.target_labels_for_eval()))

    confusion = None
    if model.modules:
        last = model.modules[-1]
        p_s = last.probabilities(feats_s[-1]).data.reshape(-1)
        p_t = last.probabilities(feats_t[-1]).data.reshape(-1)
        p = np.concatenate([p_s, p_t])
        confusion = float(np.mean(np.maximum(p, 1.0 - p) <= 0.6))

    if mean_hardness is None:
        report = multi_stage_hardness(list(zip(feats_s, feats_t)),
                                      model.config.kernel)
        mean_hardness = report.avg_gamma

    return EvalReport(source_acc, target_acc, confusion, float(mean_hardness))


# -- training -----------------------------------------------------------------

@dataclass
class TrainResult:
    model: TrainedModel
    log_path: Path
    checkpoint_path: Path
    records: list[dict]
    epoch_evals: list[EvalReport]

    @property
    def final_eval(self) -> EvalReport:
        return self.epoch_evals[-1]


class Trainer:
    """Owns the model, data order, learning-rate schedule, and the log."""

    def __init__(self, config: TrainConfig, dataset: DomainDataset):
        self.config = config
        self.dataset = dataset
        classes = int(dataset.source_y.max()) + 1
        self.model = build_model(config, dataset.dim, classes)
        self.params = self.model.parameters()
        self.reset_after_pre_epoch = config.pre_epoch_reset
        self.steps = steps_per_epoch(dataset, config.batch_size)
        if self.steps < 1:
            raise ConfigError("dataset too small for one batch per epoch")
        self.total_train_iterations = config.epochs * self.steps
        self.train_iteration = 0  # schedule position; pre-epoch excluded
        self.epoch_counter = 0    # data-order position
        self.records: list[dict] = []
        self._log_fh = None

    # -- plumbing ---------------------------------------------------------
    def attach_log(self, fh) -> None:
        self._log_fh = fh
        header = {"schema": LOG_SCHEMA, "config": self.config.to_dict()}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")

    def snapshot_params(self):
        return [p.data.copy() for p in self.params]

    def restore_params(self, snapshot) -> None:
        """Back to the initial seed state: parameters, schedule, data order."""
        for p, data in zip(self.params, snapshot):
            p.data = data.copy()
        self.train_iteration = 0
        self.epoch_counter = 0

    def _batch_seed(self) -> int:
        return (self.config.seed * 1_000_003 + 7919 * self.epoch_counter) % 2**63

    def _learning_rate(self, phase: str) -> float:
        cfg = self.config
        if phase == "pre":
            return cfg.lr_initial
        frac = self.train_iteration / max(1, self.total_train_iterations)
        if frac >= cfg.lr_drop_point:
            return cfg.lr_initial * cfg.lr_drop_factor
        return cfg.lr_initial

    def _emit(self, record: IterationRecord) -> None:
        payload = record.to_dict()
        self.records.append(payload)
        if self._log_fh is not None:
            self._log_fh.write(json.dumps(payload, separators=(",", ":")) + "\n")

    # -- core loop -----------------------------------------------------------
    def run_epoch(self, state: SpsState | None = None, gated: bool = False,
                  epoch_index: int = 0) -> list[float]:
        """One pass over the data; returns the epoch's avg-hardness values."""
        cfg = self.config
        phase = "pre" if (state is not None and not gated) else "train"
        hardness_values = []
        batches = batch_iterator(self.dataset, cfg.batch_size, self._batch_seed())
        for step, batch in enumerate(batches):
            lr = self._learning_rate(phase)
            try:
                with Tape() as tape:
                    breakdown, report = batch_loss(
                        batch, self.model.generator, self.model.head,
                        self.model.modules, cfg.beta, cfg.kernel,
                        focal_exponent=cfg.focal_exponent,
                        with_adversarial=cfg.adversarial,
                        with_hardness_loss=cfg.hardness_loss,
                        stage_reduction=cfg.stage_reduction)

                alpha = None
                selected = None
                if state is not None:
                    state.record(report.avg_gamma)
                    if gated:
                        decision = state.gate(report.avg_gamma)
                        alpha = decision.alpha_used
                        selected = decision.selected

                update = selected if selected is not None else True
                if update:
                    gmap = tape.backward(breakdown.total)
                    sgd_step(self.params, grads_for(gmap, self.params), lr)
            except NumericError as err:
                err.record = {
                    "phase": phase, "epoch": epoch_index, "step": step,
                    "learning_rate": lr,
                }
                raise

            if not cfg.adversarial:
                exponents = None
            elif cfg.focal_exponent is not None:
                exponents = [cfg.focal_exponent] * cfg.stages
            else:
                exponents = list(report.per_stage_gamma)
            self._emit(IterationRecord(
                phase=phase,
                epoch=epoch_index,
                step=step,
                per_stage_gamma=list(report.per_stage_gamma),
                avg_gamma=report.avg_gamma,
                focal_exponents=exponents,
                alpha=alpha,
                selected=selected,
                loss=breakdown.as_floats(),
                learning_rate=lr,
            ))
            hardness_values.append(report.avg_gamma)
            if phase == "train":
                self.train_iteration += 1
        self.epoch_counter += 1
        return hardness_values


def train(config: TrainConfig, out_dir) -> TrainResult:
    """Run the variant's full pipeline; returns the model and artifact paths.

    Writes metrics.jsonl (header + one record per iteration), a checkpoint,
    and per-epoch evaluation history. Deterministic for a fixed config.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = resolve_dataset(config)
    trainer = Trainer(config, dataset)
    log_path = out_dir / "metrics.jsonl"
    epoch_evals: list[EvalReport] = []

    with open(log_path, "w") as log_fh:
        trainer.attach_log(log_fh)
        state = None
        if config.progressive_sampling:
            state = SpsState()
            run_pre_epoch(trainer, state)
        for epoch in range(config.epochs):
            values = trainer.run_epoch(state=state, gated=state is not None,
                                       epoch_index=epoch)
            if state is not None:
                state.epoch_end()
            epoch_mean = float(np.mean(values))
            epoch_evals.append(evaluate(trainer.model, dataset,
                                        mean_hardness=epoch_mean))

    checkpoint_path = out_dir / "checkpoint.json"
    save_checkpoint(trainer.model, checkpoint_path)
    with open(out_dir / "evals.json", "w") as fh:
        json.dump([e.to_dict() for e in epoch_evals], fh,
                  separators=(",", ":"))
    return TrainResult(trainer.model, log_path, checkpoint_path,
                       trainer.records, epoch_evals)
