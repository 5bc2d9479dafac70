"""Square QAM alphabets and their power-weighted superposition.

Constituent constellations are normalized to unit average power under the
uniform symbol distribution; superposition then scales the inner alphabet by
sqrt(a*P) and the outer by sqrt((1-a)*P), so the uniform-symbol expected
power of the combined alphabet is exactly P (the constituents are zero-mean
and independent, so cross-terms vanish).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class Constellation:
    """Unit-power square M-QAM: points are the I/Q grid of ``levels``."""

    order: int
    levels: np.ndarray  # sqrt(M) amplitude levels per I/Q axis, ascending
    points: np.ndarray  # M complex points, I-major over levels x levels


@dataclass(frozen=True)
class SuperConstellation:
    """Inner constellation scaled by sqrt(a*P) plus outer scaled by sqrt((1-a)*P).

    Constructed through :func:`superpose`, which enforces a in (0.5, 1);
    direct construction is permitted for boundary diagnostics (e.g. a = 0.5,
    where outer points of adjacent inner clusters coincide).
    """

    inner: Constellation
    outer: Constellation
    paf: float
    power: float
    points: np.ndarray = field(init=False)

    def __post_init__(self):
        inner_scaled = math.sqrt(self.paf * self.power) * self.inner.points
        outer_scaled = math.sqrt((1.0 - self.paf) * self.power) * self.outer.points
        pts = (inner_scaled[:, None] + outer_scaled[None, :]).reshape(-1)
        object.__setattr__(self, "points", pts)


def make_square_qam(m: int) -> Constellation:
    """Unit-average-power square M-QAM with odd-integer level spacing.

    Requires M to be a perfect square with an even number of levels per axis
    (M in {4, 16, 64, ...}); grids with a zero level (e.g. M=9) are not
    square QAM and are rejected.
    """
    if m < 4:
        raise ContractError(f"unsupported QAM order {m}: need M >= 4")
    side = math.isqrt(m)
    if side * side != m:
        raise ContractError(f"unsupported QAM order {m}: not a perfect square")
    if side % 2 != 0:
        raise ContractError(f"unsupported QAM order {m}: odd level count per axis")
    raw = np.arange(-(side - 1), side, 2, dtype=np.float64)
    # unit average power: E|c|^2 = 2 * mean(levels^2)
    levels = raw / math.sqrt(2.0 * np.mean(raw * raw))
    points = (levels[:, None] + 1j * levels[None, :]).reshape(-1)
    return Constellation(order=m, levels=levels, points=points)


def superpose(inner: Constellation, outer: Constellation, a: float, p: float) -> SuperConstellation:
    """Combine two unit-power alphabets with power allocation factor ``a``."""
    if not 0.5 < a < 1.0:
        raise ContractError(f"power allocation factor must lie in (0.5, 1), got {a}")
    if p <= 0:
        raise ContractError(f"transmit power must be positive, got {p}")
    return SuperConstellation(inner=inner, outer=outer, paf=float(a), power=float(p))


def min_distance(sc: SuperConstellation) -> float:
    """Minimum pairwise Euclidean distance among the combined points."""
    pts = sc.points
    d = np.abs(pts[:, None] - pts[None, :])
    d[np.diag_indices(len(pts))] = np.inf
    return float(d.min())


def per_dim_levels(sc: SuperConstellation, tol: float = 1e-9) -> np.ndarray:
    """Distinct I-axis amplitudes of the super-constellation, ascending.

    Values closer than ``tol`` are treated as one level (collisions occur at
    boundary PAF values).
    """
    vals = np.sort(np.unique(sc.points.real))
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    return np.asarray(out)


def avg_power(points: np.ndarray) -> float:
    """Mean |c|^2 under the uniform symbol distribution."""
    return float(np.mean(np.abs(points) ** 2))
