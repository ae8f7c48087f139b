"""Hardness-guided adversarial domain adaptation with progressive sampling."""

from .autograd import GradientMap, Tape, Tensor, gradient_reverse, sgd_step
from .alignment import (
    DomainBatch,
    LossBreakdown,
    adversarial_stage_loss,
    batch_loss,
    detection_stand_in_loss,
    focal_domain_loss,
)
from .compare import compare_variants, format_table
from .data import DatasetSpec, DomainDataset, ShiftSpec, batch_iterator, generate
from .harness import (
    EvalReport,
    IterationRecord,
    TrainConfig,
    TrainedModel,
    TrainResult,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .hardness import (
    HardnessReport,
    KernelConfig,
    median_heuristic_sigma,
    mmd_hardness,
    multi_stage_hardness,
    rbf_kernel_matrix,
)
from .networks import MultiStageGenerator, SgaModule, TaskHead
from .scheduler import GateDecision, SpsState, run_pre_epoch

__version__ = "0.1.0"

__all__ = [
    "DatasetSpec", "DomainBatch", "DomainDataset", "EvalReport",
    "GateDecision", "GradientMap", "HardnessReport", "IterationRecord",
    "KernelConfig", "LossBreakdown", "MultiStageGenerator", "SgaModule",
    "ShiftSpec", "SpsState", "Tape", "TaskHead", "Tensor", "TrainConfig",
    "TrainResult", "TrainedModel", "adversarial_stage_loss", "batch_iterator",
    "batch_loss", "compare_variants", "detection_stand_in_loss", "evaluate",
    "focal_domain_loss", "format_table", "generate", "gradient_reverse",
    "load_checkpoint", "median_heuristic_sigma", "mmd_hardness",
    "multi_stage_hardness", "rbf_kernel_matrix", "run_pre_epoch",
    "save_checkpoint", "sgd_step", "train",
]
