"""Discrete measures and their exact transport primitives.

Implements the weighted point-cloud container, the closed-form one-dimensional
Wasserstein cost (computed by a merged-CDF walk over both quantile functions),
the monotone coupling that realizes it, and an exact assignment-based W2 for
small equal-size uniform clouds.

Classes
-------
    WeightedCloud      Validated (points, weights) pair.
    OneDimCoupling     Monotone transport plan between two 1D clouds.

Functions
---------
    wasserstein_1d     p-th power of the 1D Wasserstein distance.
    coupling_1d        The monotone coupling realizing ``wasserstein_1d``.
    exact_w2           Exact W2 via a linear assignment solve.
    save_cloud_csv / load_cloud_csv
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import (
    CloudParseError,
    ContractError,
    ResourceLimitError,
    UnsupportedInputError,
)

__all__ = [
    "WeightedCloud",
    "OneDimCoupling",
    "wasserstein_1d",
    "wasserstein_1d_many",
    "coupling_1d",
    "exact_w2",
    "save_cloud_csv",
    "load_cloud_csv",
    "EXACT_W2_MAX_POINTS",
]

WEIGHT_SUM_TOL = 1e-9
EXACT_W2_MAX_POINTS = 2048
_UNIFORM_TOL = 1e-12


@dataclass(frozen=True)
class WeightedCloud:
    """A discrete measure: ``n`` points in ``R^d`` with probability weights.

    Weights must be non-negative and sum to 1 within ``1e-9``.  Invalid input
    is rejected, never silently repaired.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ContractError(f"points must be (n, d) with n, d >= 1, got shape {points.shape}")
        if weights.shape != (points.shape[0],):
            raise ContractError(
                f"weights must have shape ({points.shape[0]},), got {weights.shape}"
            )
        if not np.isfinite(points).all():
            raise ContractError("points contain non-finite values")
        if not np.isfinite(weights).all() or (weights < 0).any():
            raise ContractError("weights must be finite and non-negative")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ContractError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, points: np.ndarray) -> "WeightedCloud":
        """Build a uniformly weighted cloud over ``points``."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise ContractError(f"points must be 2-dimensional, got shape {points.shape}")
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def is_uniform(self, tol: float = _UNIFORM_TOL) -> bool:
        """True when every weight equals ``1/n`` within ``tol``."""
        return bool(np.abs(self.weights - 1.0 / self.n).max() <= tol)


@dataclass(frozen=True)
class OneDimCoupling:
    """Monotone transport plan between two 1D clouds.

    ``(source_index[s], target_index[s], mass[s])`` triples are ordered by
    source quantile; masses are positive and sum to 1 (up to the weight-sum
    slack of the inputs).
    """

    source_index: np.ndarray
    target_index: np.ndarray
    mass: np.ndarray
    n_source: int
    n_target: int

    def __post_init__(self):
        si = np.asarray(self.source_index, dtype=np.intp)
        ti = np.asarray(self.target_index, dtype=np.intp)
        mass = np.asarray(self.mass, dtype=np.float64)
        if not (si.shape == ti.shape == mass.shape) or si.ndim != 1:
            raise ContractError("coupling components must be 1D arrays of equal length")
        if (mass <= 0).any() or not np.isfinite(mass).all():
            raise ContractError("coupling masses must be positive and finite")
        if si.size and ((si < 0).any() or (si >= self.n_source).any()):
            raise ContractError("source indices out of range")
        if ti.size and ((ti < 0).any() or (ti >= self.n_target).any()):
            raise ContractError("target indices out of range")
        object.__setattr__(self, "source_index", si)
        object.__setattr__(self, "target_index", ti)
        object.__setattr__(self, "mass", mass)

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the (source, target) weight vectors this plan transports."""
        wa = np.zeros(self.n_source)
        wb = np.zeros(self.n_target)
        np.add.at(wa, self.source_index, self.mass)
        np.add.at(wb, self.target_index, self.mass)
        return wa, wb


def _require_1d_pair(a: WeightedCloud, b: WeightedCloud, p: float) -> None:
    if a.dim != 1 or b.dim != 1:
        raise ContractError(f"expected 1D clouds, got dims {a.dim} and {b.dim}")
    if p < 1:
        raise ContractError(f"order p must be >= 1, got {p}")


def _sorted_view(cloud: WeightedCloud) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, weights and original indices in quantile order.

    The sort is stable on (value, original index), so ties keep input order.
    """
    values = cloud.points[:, 0]
    order = np.argsort(values, kind="stable")
    return values[order], cloud.weights[order], order


def _segment_walk(
    va: np.ndarray, wa: np.ndarray, vb: np.ndarray, wb: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Walk the merged CDF grid of two sorted 1D measures.

    Returns per-segment sorted-order indices ``(ia, ib)`` and masses.  The
    segments partition the quantile axis, so summing ``mass * cost(ia, ib)``
    evaluates any coordinate-wise transport cost under the monotone plan.
    """
    cwa = np.cumsum(wa)
    cwb = np.cumsum(wb)
    cuts = np.sort(np.concatenate([cwa[:-1], cwb[:-1]]), kind="stable")
    end = max(cwa[-1], cwb[-1])
    edges = np.concatenate([[0.0], cuts, [end]])
    mass = np.clip(np.diff(edges), 0.0, None)
    left = edges[:-1]
    ia = np.minimum(np.searchsorted(cwa, left, side="right"), va.size - 1)
    ib = np.minimum(np.searchsorted(cwb, left, side="right"), vb.size - 1)
    return ia, ib, mass


def wasserstein_1d(a: WeightedCloud, b: WeightedCloud, p: float) -> float:
    """p-th power of the 1D Wasserstein distance between two clouds.

    Evaluates the quantile-function form: the integral over the unit interval
    of the p-th power of the gap between both inverse CDFs, computed exactly
    by walking the merged CDF grid.
    """
    _require_1d_pair(a, b, p)
    va, wa, _ = _sorted_view(a)
    vb, wb, _ = _sorted_view(b)
    ia, ib, mass = _segment_walk(va, wa, vb, wb)
    return float(np.sum(mass * np.abs(va[ia] - vb[ib]) ** p))


def wasserstein_1d_many(
    proj_a: np.ndarray,
    weights_a: np.ndarray,
    proj_b: np.ndarray,
    weights_b: np.ndarray,
    p: float,
) -> np.ndarray:
    """Row-wise 1D Wasserstein cost for stacked projections.

    ``proj_a`` is ``(L, n)`` and ``proj_b`` is ``(L, m)``; the weight vectors
    are shared across rows.  Uniform equal-size inputs take a fully vectorized
    sorted-difference path; everything else falls back to the segment walk per
    row.
    """
    proj_a = np.asarray(proj_a, dtype=np.float64)
    proj_b = np.asarray(proj_b, dtype=np.float64)
    if p < 1:
        raise ContractError(f"order p must be >= 1, got {p}")
    n, m = proj_a.shape[1], proj_b.shape[1]
    uniform = (
        n == m
        and np.abs(weights_a - 1.0 / n).max() <= _UNIFORM_TOL
        and np.abs(weights_b - 1.0 / m).max() <= _UNIFORM_TOL
    )
    if uniform:
        diff = np.sort(proj_a, axis=1) - np.sort(proj_b, axis=1)
        return np.abs(diff) ** p @ np.full(n, 1.0 / n)

    order_a = np.argsort(proj_a, axis=1, kind="stable")
    order_b = np.argsort(proj_b, axis=1, kind="stable")
    sa = np.take_along_axis(proj_a, order_a, axis=1)
    sb = np.take_along_axis(proj_b, order_b, axis=1)
    out = np.empty(proj_a.shape[0])
    for row in range(proj_a.shape[0]):
        wa = weights_a[order_a[row]]
        wb = weights_b[order_b[row]]
        ia, ib, mass = _segment_walk(sa[row], wa, sb[row], wb)
        out[row] = np.sum(mass * np.abs(sa[row][ia] - sb[row][ib]) ** p)
    return out


def coupling_1d(a: WeightedCloud, b: WeightedCloud) -> OneDimCoupling:
    """Monotone coupling between two 1D clouds, in original point indices.

    Consecutive segments landing on the same (source, target) pair are merged,
    and zero-mass segments are dropped.
    """
    _require_1d_pair(a, b, 1.0)
    va, wa, order_a = _sorted_view(a)
    vb, wb, order_b = _sorted_view(b)
    ia, ib, mass = _segment_walk(va, wa, vb, wb)

    keep = mass > 0
    src = order_a[ia[keep]]
    tgt = order_b[ib[keep]]
    mass = mass[keep]
    if src.size:
        new_run = np.empty(src.size, dtype=bool)
        new_run[0] = True
        new_run[1:] = (src[1:] != src[:-1]) | (tgt[1:] != tgt[:-1])
        starts = np.flatnonzero(new_run)
        mass = np.add.reduceat(mass, starts)
        src = src[starts]
        tgt = tgt[starts]
    return OneDimCoupling(src, tgt, mass, a.n, b.n)


def exact_w2(a: WeightedCloud, b: WeightedCloud) -> float:
    """Exact 2-Wasserstein distance via a linear assignment solve.

    Supports equal-size uniformly weighted clouds only, and at most
    ``EXACT_W2_MAX_POINTS`` points; the cost of the assignment solve grows
    cubically.  Returns the distance itself, not its square.
    """
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.n != b.n:
        raise UnsupportedInputError(f"exact_w2 needs equal sizes, got {a.n} and {b.n}")
    if not (a.is_uniform() and b.is_uniform()):
        raise UnsupportedInputError("exact_w2 supports uniform weights only")
    if a.n > EXACT_W2_MAX_POINTS:
        raise ResourceLimitError(f"exact_w2 capped at {EXACT_W2_MAX_POINTS} points, got {a.n}")
    cost = cdist(a.points, b.points, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


_HEADER_WEIGHT = "weight"


def save_cloud_csv(cloud: WeightedCloud, path) -> None:
    """Write a cloud as CSV: header, one row per point, trailing weight column.

    Floats are written with 17 significant digits so the round trip is
    bitwise.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(cloud.dim)] + [_HEADER_WEIGHT])
        for row, w in zip(cloud.points, cloud.weights):
            writer.writerow([format(v, ".17g") for v in row] + [format(w, ".17g")])


def load_cloud_csv(path) -> WeightedCloud:
    """Read a cloud written by :func:`save_cloud_csv` or a compatible file.

    The header row is required; a trailing ``weight`` column is optional and
    uniform weights are assumed when it is absent.  Weights may be off by
    float round-off from serialization, so the sum is accepted within ``1e-6``
    and renormalized; larger deviations are rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CloudParseError(1, "empty file, header row required") from None
        if not header:
            raise CloudParseError(1, "empty header row")
        has_weights = header[-1].strip().lower() == _HEADER_WEIGHT
        d = len(header) - 1 if has_weights else len(header)
        if d < 1:
            raise CloudParseError(1, "no coordinate columns in header")

        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CloudParseError(
                    line_no, f"expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise CloudParseError(line_no, str(exc)) from None
    if not rows:
        raise CloudParseError(2, "no data rows")

    data = np.asarray(rows, dtype=np.float64)
    points = data[:, :d]
    if has_weights:
        weights = data[:, d]
        total = weights.sum()
        if abs(total - 1.0) > 1e-6:
            raise ContractError(f"weight column sums to {total!r}, expected 1 within 1e-6")
        if (weights < 0).any():
            raise ContractError("weight column contains negative entries")
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            # Off by more than serialization round-off: rescale to a valid
            # measure instead of rejecting (the bitwise round trip only has to
            # hold for clouds that were valid when written).
            weights = weights / total
        return WeightedCloud(points, weights)
    return WeightedCloud.uniform(points)
