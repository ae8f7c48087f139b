"""Synthetic two-domain datasets with controllable shift, plus CSV I/O.

Each dataset pairs a labeled source sample with an unlabeled target sample
drawn from the same family and pushed through a configurable shift
(rotation about the cloud centroid, translation, different noise level).
Target labels exist for evaluation only: they live behind an accessor that
counts reads, so tests can assert the training path never touches them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alignment import DomainBatch
from .autograd import Tensor
from .errors import ConfigError, ParseError

FAMILIES = ("gaussian-blobs", "two-moons")
_BLOB_RADIUS = 4.0


@dataclass(frozen=True)
class ShiftSpec:
    """Transform applied to the target domain relative to the source."""

    rotation_degrees: float = 0.0
    translation: tuple[float, ...] = (0.0, 0.0)
    noise_sigma: float | None = None  # None: same noise level as the source

    def __post_init__(self):
        if not 0.0 <= self.rotation_degrees <= 180.0:
            raise ConfigError(
                f"shift.rotation_degrees must lie in [0, 180], "
                f"got {self.rotation_degrees}")
        if self.noise_sigma is not None and not self.noise_sigma > 0:
            raise ConfigError(
                f"shift.noise_sigma must be positive, got {self.noise_sigma}")
        object.__setattr__(self, "translation", tuple(float(v) for v in self.translation))


@dataclass(frozen=True)
class DatasetSpec:
    family: str = "two-moons"
    classes: int = 2
    points_per_domain: int = 1000
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    seed: int = 0
    dim: int = 2
    noise_sigma: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.classes < 2:
            raise ConfigError(f"classes must be >= 2, got {self.classes}")
        if self.points_per_domain < 2 * self.classes:
            raise ConfigError(
                f"points_per_domain must be >= 2 * classes "
                f"({2 * self.classes}), got {self.points_per_domain}")
        if self.family == "two-moons" and self.classes != 2:
            raise ConfigError("two-moons is a binary family; classes must be 2")
        if self.family == "two-moons" and self.dim != 2:
            raise ConfigError("two-moons features are 2-d; dim must be 2")
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2, got {self.dim}")
        if not self.noise_sigma > 0:
            raise ConfigError(f"noise_sigma must be positive, got {self.noise_sigma}")
        if len(self.shift.translation) != self.dim:
            raise ConfigError(
                f"shift.translation has {len(self.shift.translation)} entries "
                f"for dim {self.dim}")

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetSpec":
        raw = dict(raw)
        shift_raw = raw.pop("shift", {})
        known_shift = {"rotation_degrees", "translation", "noise_sigma"}
        unknown = set(shift_raw) - known_shift
        if unknown:
            raise ConfigError(f"unknown shift keys: {sorted(unknown)}")
        known = {"family", "classes", "points_per_domain", "seed", "dim",
                 "noise_sigma"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown dataset keys: {sorted(unknown)}")
        shift = dict(shift_raw)
        if "translation" in shift:
            shift["translation"] = tuple(shift["translation"])
        elif "dim" in raw:
            shift["translation"] = (0.0,) * int(raw["dim"])
        return cls(shift=ShiftSpec(**shift), **raw)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "classes": self.classes,
            "points_per_domain": self.points_per_domain,
            "shift": {
                "rotation_degrees": self.shift.rotation_degrees,
                "translation": list(self.shift.translation),
                "noise_sigma": self.shift.noise_sigma,
            },
            "seed": self.seed,
            "dim": self.dim,
            "noise_sigma": self.noise_sigma,
        }


class DomainDataset:
    """Labeled source domain plus an unlabeled target domain.

    Target labels are quarantined: they are reachable only through
    `target_labels_for_eval()`, which counts its reads.
    """

    def __init__(self, source_x: np.ndarray, source_y: np.ndarray,
                 target_x: np.ndarray, target_y: np.ndarray):
        self.source_x = np.asarray(source_x, dtype=np.float64)
        self.source_y = np.asarray(source_y, dtype=np.int64)
        self.target_x = np.asarray(target_x, dtype=np.float64)
        self._target_y = np.asarray(target_y, dtype=np.int64)
        self.label_reads = 0

    @property
    def dim(self) -> int:
        return self.source_x.shape[1]

    def target_labels_for_eval(self) -> np.ndarray:
        """Held-out target labels; evaluation-only access, counted."""
        self.label_reads += 1
        return self._target_y.copy()

    def __repr__(self) -> str:
        return (f"DomainDataset(source={self.source_x.shape}, "
                f"target={self.target_x.shape})")


def _balanced_counts(n: int, classes: int) -> list[int]:
    base = n // classes
    counts = [base] * classes
    for c in range(n % classes):
        counts[c] += 1
    return counts


def _draw_moons(rng: np.random.Generator, n: int, noise: float):
    n_outer, n_inner = _balanced_counts(n, 2)
    t_out = rng.uniform(0.0, math.pi, size=n_outer)
    t_in = rng.uniform(0.0, math.pi, size=n_inner)
    outer = np.stack([np.cos(t_out), np.sin(t_out)], axis=1)
    inner = np.stack([1.0 - np.cos(t_in), 1.0 - np.sin(t_in) - 0.5], axis=1)
    x = np.concatenate([outer, inner], axis=0)
    y = np.concatenate([np.zeros(n_outer, dtype=np.int64),
                        np.ones(n_inner, dtype=np.int64)])
    x = x + rng.normal(0.0, noise, size=x.shape)
    perm = rng.permutation(n)
    return x[perm], y[perm]


def _draw_blobs(rng: np.random.Generator, n: int, classes: int, dim: int,
                noise: float):
    centers = np.zeros((classes, dim))
    for c in range(classes):
        angle = 2.0 * math.pi * c / classes
        centers[c, 0] = _BLOB_RADIUS * math.cos(angle)
        centers[c, 1] = _BLOB_RADIUS * math.sin(angle)
    xs, ys = [], []
    for c, count in enumerate(_balanced_counts(n, classes)):
        xs.append(centers[c] + rng.normal(0.0, noise, size=(count, dim)))
        ys.append(np.full(count, c, dtype=np.int64))
    x = np.concatenate(xs, axis=0)
    y = np.concatenate(ys)
    perm = rng.permutation(n)
    return x[perm], y[perm]


def _draw_family(rng, spec: DatasetSpec, noise: float):
    if spec.family == "two-moons":
        return _draw_moons(rng, spec.points_per_domain, noise)
    return _draw_blobs(rng, spec.points_per_domain, spec.classes, spec.dim, noise)


def _apply_shift(x: np.ndarray, shift: ShiftSpec) -> np.ndarray:
    out = x.copy()
    if shift.rotation_degrees != 0.0:
        theta = math.radians(shift.rotation_degrees)
        rot = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        centroid = out[:, :2].mean(axis=0)
        out[:, :2] = (out[:, :2] - centroid) @ rot.T + centroid
    translation = np.asarray(shift.translation)
    if translation.any():
        out = out + translation
    return out


def generate(spec: DatasetSpec) -> DomainDataset:
    """Deterministic dataset for a spec: labeled source, shifted target."""
    rng = np.random.default_rng(spec.seed)
    source_x, source_y = _draw_family(rng, spec, spec.noise_sigma)
    target_noise = spec.shift.noise_sigma or spec.noise_sigma
    target_x, target_y = _draw_family(rng, spec, target_noise)
    target_x = _apply_shift(target_x, spec.shift)
    return DomainDataset(source_x, source_y, target_x, target_y)


# -- CSV I/O -----------------------------------------------------------------

def save(dataset: DomainDataset, path) -> None:
    """Plain-text CSV: header `domain,label,f0,f1,...`, one row per sample.

    Floats are written with 17 significant digits, so a round trip is
    bitwise exact. Target rows carry their held-out label; loading puts it
    straight back into quarantine.
    """
    d = dataset.dim
    header = "domain,label," + ",".join(f"f{i}" for i in range(d))
    lines = [header]
    for x, y in zip(dataset.source_x, dataset.source_y):
        lines.append("source,%d," % y + ",".join("%.17g" % v for v in x))
    for x, y in zip(dataset.target_x, dataset._target_y):
        lines.append("target,%d," % y + ",".join("%.17g" % v for v in x))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> DomainDataset:
    """Inverse of save(); raises ParseError with the offending line number."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty dataset file", line=1)
    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "domain" or header[1] != "label":
        raise ParseError(f"malformed header {lines[0]!r}", line=1)
    for i, name in enumerate(header[2:]):
        if name != f"f{i}":
            raise ParseError(f"unexpected feature column {name!r}", line=1)
    d = len(header) - 2
    rows = {"source": ([], []), "target": ([], [])}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != d + 2:
            raise ParseError(
                f"expected {d + 2} fields, got {len(parts)}", line=lineno)
        domain = parts[0]
        if domain not in rows:
            raise ParseError(f"unknown domain {domain!r}", line=lineno)
        try:
            label = int(parts[1])
            feats = [float(v) for v in parts[2:]]
        except ValueError as err:
            raise ParseError(str(err), line=lineno) from err
        rows[domain][0].append(feats)
        rows[domain][1].append(label)
    if not rows["source"][0] or not rows["target"][0]:
        raise ParseError("file must contain both source and target rows",
                         line=len(lines))
    return DomainDataset(
        np.array(rows["source"][0]), np.array(rows["source"][1]),
        np.array(rows["target"][0]), np.array(rows["target"][1]))


def batch_iterator(dataset: DomainDataset, batch_size: int, seed: int):
    """Paired mini-batches for one epoch: floor(n / batch_size) iterations.

    Source and target are shuffled independently (random pairing), each
    shuffle seeded, so the batch sequence is a pure function of the seed.
    """
    n_s = dataset.source_x.shape[0]
    n_t = dataset.target_x.shape[0]
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if batch_size > min(n_s, n_t):
        raise ConfigError(
            f"batch_size {batch_size} exceeds domain size {min(n_s, n_t)}")
    rng = np.random.default_rng(seed)
    src_order = rng.permutation(n_s)
    tgt_order = rng.permutation(n_t)
    steps = min(n_s, n_t) // batch_size
    for step in range(steps):
        lo, hi = step * batch_size, (step + 1) * batch_size
        si = src_order[lo:hi]
        ti = tgt_order[lo:hi]
        yield DomainBatch(
            source_x=Tensor(dataset.source_x[si]),
            source_y=dataset.source_y[si],
            target_x=Tensor(dataset.target_x[ti]),
        )


def steps_per_epoch(dataset: DomainDataset, batch_size: int) -> int:
    return min(dataset.source_x.shape[0], dataset.target_x.shape[0]) // batch_size
