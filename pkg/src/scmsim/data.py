"""Synthetic hierarchical source with the Markov structure s1 -> s2 -> x.

Coarse class means are drawn once per HierSpec seed; each fine class mean is
its parent's mean plus a smaller offset; an observation is its fine mean
plus isotropic noise, affinely squashed into [0,1]^k so reconstruction
PSNR has MAX = 1. Given s2 the observation is independent of s1, so the
chain s1 -> s2 -> x holds by construction. Difficulty is controlled by
the separation/noise scales; the defaults leave a near-perfect Bayes
reference so trained pipelines have headroom.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class HierSpec:
    l1: int = 4
    l2: int = 8
    k: int = 32
    coarse_sep: float = 10.0
    fine_sep: float = 2.0
    noise_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.l1 < 1 or self.l2 < 1 or self.l2 % self.l1 != 0:
            raise ContractError(f"need L1 | L2, got L1={self.l1}, L2={self.l2}")
        if self.k < 2:
            raise ContractError(f"need k >= 2, got {self.k}")
        if self.coarse_sep <= 0 or self.fine_sep <= 0:
            raise ContractError("separation scales must be positive")
        if self.noise_sd <= 0:
            raise ContractError(f"noise_sd must be positive, got {self.noise_sd}")

    @property
    def span(self) -> float:
        return self.coarse_sep + 3.0 * self.noise_sd


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    s1: int
    s2: int


@dataclass
class ClassMeans:
    coarse: np.ndarray  # [L1, k]
    fine: np.ndarray    # [L2, k]


def coarse_of(s2: int, spec: HierSpec) -> int:
    if not 0 <= s2 < spec.l2:
        raise IndexError(f"fine label {s2} outside [0, {spec.l2})")
    return int(s2) // (spec.l2 // spec.l1)


def class_means(spec: HierSpec) -> ClassMeans:
    """Coarse and fine cluster means, a pure function of spec.seed."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(1)[0])
    coarse = rng.normal(0.0, spec.coarse_sep, size=(spec.l1, spec.k))
    offsets = rng.normal(0.0, spec.fine_sep, size=(spec.l2, spec.k))
    fine = np.empty((spec.l2, spec.k))
    for s2 in range(spec.l2):
        fine[s2] = coarse[coarse_of(s2, spec)] + offsets[s2]
    return ClassMeans(coarse=coarse, fine=fine)


def squash(x: np.ndarray, spec: HierSpec) -> np.ndarray:
    """Affine map into [0,1] with clamping; span covers +-3 sigma excursions."""
    return np.clip(0.5 + x / (2.0 * spec.span), 0.0, 1.0)


def generate(spec: HierSpec, n: int, stream_seed=None) -> list[Sample]:
    """Draw n samples; deterministic given (spec, stream_seed).

    stream_seed defaults to spec.seed. Labels are uniform over the fine
    classes; the class means depend only on spec.seed, so disjoint splits
    share geometry while drawing fresh noise.
    """
    if n < 1:
        raise ContractError(f"need n >= 1 samples, got {n}")
    means = class_means(spec)
    if stream_seed is None:
        stream_seed = spec.seed
    rng = np.random.default_rng(stream_seed)
    s2 = rng.integers(0, spec.l2, size=n)
    noise = rng.normal(0.0, spec.noise_sd, size=(n, spec.k))
    raw = means.fine[s2] + noise
    x = squash(raw, spec)
    return [Sample(x=x[i], s1=coarse_of(int(s2[i]), spec), s2=int(s2[i]))
            for i in range(n)]


def to_arrays(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a sample list into (x [N,k], s1 [N], s2 [N])."""
    if not samples:
        raise ContractError("empty sample list")
    x = np.stack([s.x for s in samples])
    s1 = np.array([s.s1 for s in samples], dtype=np.int64)
    s2 = np.array([s.s2 for s in samples], dtype=np.int64)
    return x, s1, s2


def bayes_reference(spec: HierSpec, n_test: int, stream_seed=None) -> tuple[float, float]:
    """Nearest-fine-mean accuracy with the true means (squashed domain).

    Upper-bounds what any learned pipeline can reach on this source.
    """
    if stream_seed is None:
        stream_seed = np.random.SeedSequence([spec.seed, 0xB4])
    samples = generate(spec, n_test, stream_seed)
    x, s1, s2 = to_arrays(samples)
    centers = squash(class_means(spec).fine, spec)
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    pred_fine = np.argmin(d2, axis=1)
    pred_coarse = pred_fine // (spec.l2 // spec.l1)
    return (float(np.mean(pred_coarse == s1)), float(np.mean(pred_fine == s2)))


def export_csv(path, samples: list[Sample]):
    if not samples:
        raise ContractError("refusing to export an empty dataset")
    k = samples[0].x.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s1", "s2"] + [f"x_{i}" for i in range(k)])
        for s in samples:
            writer.writerow([s.s1, s.s2] + [repr(float(v)) for v in s.x])


def import_csv(path) -> list[Sample]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["s1", "s2"]:
            raise ContractError(f"unrecognized dataset header in {path}")
        out = []
        for row in reader:
            s1, s2 = int(row[0]), int(row[1])
            x = np.array([float(v) for v in row[2:]], dtype=np.float64)
            out.append(Sample(x=x, s1=s1, s2=s2))
    if not out:
        raise ContractError(f"no samples in {path}")
    return out
