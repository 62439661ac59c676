"""Particle flows driven by sliced Wasserstein gradients.

The flow moves source points by vanilla gradient descent on the p-th-power
sliced objective against a fixed target, with a fresh slice bank every
iteration.  Also provides the closed-form expectation of the gradient over
all slices (order 2), the matching per-mass optimal step size, and
learning-rate sweeps with shared seeds.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DivergenceError
from .measures import (
    WeightedCloud,
    exact_w2,
    wasserstein_1d_many,
    _segment_walk,
    _sorted_view,
)
from .rng import derive_seed, stream
from .slicing import SliceSet, sample_random_path_slices, sample_uniform_sphere
from .variants import (
    KIND_CLASSICAL,
    KIND_ENERGY,
    KIND_RANDOM_PATH,
    KIND_RECIPROCAL,
    ENERGY_EXP,
    WeightingScheme,
)

__all__ = [
    "FlowConfig",
    "FlowTrace",
    "SweepRow",
    "sw_gradient",
    "expected_gradient",
    "optimal_lr",
    "run_flow",
    "lr_sweep",
    "save_trace_csv",
    "save_sweep_csv",
]

_UNIFORM_TOL = 1e-12


@dataclass(frozen=True)
class FlowConfig:
    """Settings for one flow run.

    ``lr`` may be a scalar or a per-point vector; ``eval_every`` controls how
    often the exact W2 to the target is checkpointed.  ``resample`` draws a
    fresh slice bank every iteration (the default); switching it off reuses
    one bank drawn up front, for studying the difference.
    """

    p: float = 2.0
    n_slices: int = 50
    lr: float | np.ndarray = 1.0
    iters: int = 10000
    seed: int = 0
    eval_every: int = 500
    variant: WeightingScheme = field(default_factory=WeightingScheme.classical)
    resample: bool = True

    def __post_init__(self):
        if self.p < 1:
            raise ContractError(f"order p must be >= 1, got {self.p}")
        if self.n_slices < 1 or self.iters < 1 or self.eval_every < 1:
            raise ContractError("n_slices, iters and eval_every must all be >= 1")
        lr = self.lr
        if isinstance(lr, np.ndarray):
            if lr.ndim != 1 or not np.isfinite(lr).all() or (lr <= 0).any():
                raise ContractError("per-point lr must be a 1D positive finite vector")
        elif not (math.isfinite(lr) and lr > 0):
            raise ContractError(f"lr must be positive and finite, got {lr}")


@dataclass(frozen=True)
class FlowTrace:
    """What a flow run produced: checkpointed W2 values and the final cloud."""

    config: FlowConfig
    checkpoint_iters: np.ndarray
    checkpoint_w2: np.ndarray
    final: WeightedCloud
    wall_time: float = 0.0

    def __post_init__(self):
        iters = np.asarray(self.checkpoint_iters, dtype=np.intp)
        w2 = np.asarray(self.checkpoint_w2, dtype=np.float64)
        if iters.shape != w2.shape or iters.ndim != 1:
            raise ContractError("checkpoint arrays must be 1D and aligned")
        if iters.size and (np.diff(iters) <= 0).any():
            raise ContractError("checkpoint iterations must be strictly increasing")
        if self.wall_time < 0:
            raise ContractError(f"wall_time must be >= 0, got {self.wall_time}")
        object.__setattr__(self, "checkpoint_iters", iters)
        object.__setattr__(self, "checkpoint_w2", w2)

    @property
    def final_w2(self) -> float:
        return float(self.checkpoint_w2[-1])


@dataclass(frozen=True)
class SweepRow:
    """One learning rate's outcome in a sweep."""

    lr: float
    final_w2: float
    diverged: bool
    diverged_at: int | None = None
    wall_time_s: float = 0.0


def save_trace_csv(trace: FlowTrace, path) -> None:
    """Write a flow's checkpoint curve as CSV: one (iteration, w2) row each."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "w2"])
        for it, w2 in zip(trace.checkpoint_iters, trace.checkpoint_w2):
            writer.writerow([int(it), format(w2, ".17g")])


def save_sweep_csv(rows: list[SweepRow], path) -> None:
    """Write sweep outcomes as CSV, one learning rate per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lr", "final_w2", "diverged", "wall_time_s"])
        for row in rows:
            writer.writerow(
                [
                    format(row.lr, ".17g"),
                    format(row.final_w2, ".17g"),
                    str(row.diverged).lower(),
                    format(row.wall_time_s, ".17g"),
                ]
            )


def _slice_coefficients(
    source: WeightedCloud, target: WeightedCloud, p: float, directions: np.ndarray
) -> np.ndarray:
    """Per-point, per-slice derivative of the 1D cost w.r.t. the projection.

    Returns ``C`` of shape ``(n, L)`` so the gradient of any weighted slice
    combination is ``(C * w) @ directions``.  Couplings are held fixed
    (envelope differentiation); at p = 1, exact projection ties get a zero
    subgradient.
    """
    proj_a = source.points @ directions.T
    proj_b = target.points @ directions.T
    n, m = source.n, target.n
    uniform = (
        n == m
        and np.abs(source.weights - 1.0 / n).max() <= _UNIFORM_TOL
        and np.abs(target.weights - 1.0 / m).max() <= _UNIFORM_TOL
    )
    if uniform:
        order_a = np.argsort(proj_a, axis=0, kind="stable")
        sa = np.take_along_axis(proj_a, order_a, axis=0)
        sb = np.sort(proj_b, axis=0)
        gaps = sa - sb
        coef = (p / n) * np.abs(gaps) ** (p - 1.0) * np.sign(gaps)
        out = np.empty_like(coef)
        np.put_along_axis(out, order_a, coef, axis=0)
        return out

    out = np.zeros_like(proj_a)
    for col in range(directions.shape[0]):
        a1 = WeightedCloud(proj_a[:, col : col + 1], source.weights)
        b1 = WeightedCloud(proj_b[:, col : col + 1], target.weights)
        va, wa, order_a = _sorted_view(a1)
        vb, wb, order_b = _sorted_view(b1)
        ia, ib, mass = _segment_walk(va, wa, vb, wb)
        gaps = va[ia] - vb[ib]
        coef = p * mass * np.abs(gaps) ** (p - 1.0) * np.sign(gaps)
        np.add.at(out[:, col], order_a[ia], coef)
    return out


def _weighted_gradient(
    source: WeightedCloud,
    target: WeightedCloud,
    p: float,
    directions: np.ndarray,
    agg_weights: np.ndarray,
) -> np.ndarray:
    coef = _slice_coefficients(source, target, p, directions)
    return (coef * agg_weights) @ directions


def sw_gradient(
    source: WeightedCloud, target: WeightedCloud, p: float, slices: SliceSet
) -> np.ndarray:
    """Gradient of the Monte Carlo sliced objective w.r.t. the source points.

    Differentiates the uniform average of per-slice 1D costs with the
    monotone couplings held fixed; the result has one row per source point.
    """
    if source.dim != target.dim:
        raise ContractError(f"dimension mismatch: {source.dim} vs {target.dim}")
    if slices.dim != source.dim:
        raise ContractError(f"slice dimension {slices.dim} does not match clouds ({source.dim})")
    if p < 1:
        raise ContractError(f"order p must be >= 1, got {p}")
    agg = np.full(slices.count, 1.0 / slices.count)
    return _weighted_gradient(source, target, p, slices.directions, agg)


def expected_gradient(
    source: WeightedCloud,
    target: WeightedCloud,
    p: float = 2.0,
    probe_count: int = 64,
    seed: int = 0,
) -> np.ndarray:
    """Slice-averaged limit of the order-2 gradient.

    Averaging the gradient over all directions turns the outer product of the
    slice with itself into identity-over-dimension, leaving
    ``(2/d) (q_i x_i - sum_j y_j coupling_bar_ij)`` where the coupling is
    averaged over a fixed probe bank of slices.  Only order 2 has this closed
    form.
    """
    if p != 2.0:
        raise ContractError(f"expected_gradient is defined for p = 2 only, got {p}")
    if source.dim != target.dim:
        raise ContractError(f"dimension mismatch: {source.dim} vs {target.dim}")
    d = source.dim
    probes = sample_uniform_sphere(d, probe_count, derive_seed(seed, "probe"))
    gamma_bar = np.zeros((source.n, target.n))
    for theta in probes.directions:
        a1 = WeightedCloud((source.points @ theta)[:, None], source.weights)
        b1 = WeightedCloud((target.points @ theta)[:, None], target.weights)
        va, wa, order_a = _sorted_view(a1)
        vb, wb, order_b = _sorted_view(b1)
        ia, ib, mass = _segment_walk(va, wa, vb, wb)
        np.add.at(gamma_bar, (order_a[ia], order_b[ib]), mass)
    gamma_bar /= probe_count
    return (2.0 / d) * (source.weights[:, None] * source.points - gamma_bar @ target.points)


def optimal_lr(dim: int, mass: float) -> float:
    """Step size that cancels the expectation-mode gradient in one step.

    The order-2 expected gradient scales a point's displacement by
    ``2 * mass / dim``, so its inverse is the per-point optimal rate.
    """
    if dim < 1:
        raise ContractError(f"need dim >= 1, got {dim}")
    if not (0.0 < mass <= 1.0):
        raise ContractError(f"mass must be in (0, 1], got {mass}")
    return dim / (2.0 * mass)


def _agg_weights(
    scheme: WeightingScheme,
    source: WeightedCloud,
    target: WeightedCloud,
    p: float,
    slices: SliceSet,
) -> np.ndarray:
    """Aggregation weights for a slice bank under a scheme, held fixed."""
    count = slices.count
    if scheme.kind in (KIND_CLASSICAL, KIND_RANDOM_PATH):
        return np.full(count, 1.0 / count)
    if scheme.kind == KIND_ENERGY:
        proj_a = slices.directions @ source.points.T
        proj_b = slices.directions @ target.points.T
        costs = wasserstein_1d_many(proj_a, source.weights, proj_b, target.weights, p)
        if scheme.f_tag == ENERGY_EXP:
            shifted = np.exp(costs - costs.max())
        else:
            shifted = costs + 1.0
        return shifted / shifted.sum()
    align = np.linalg.norm(slices.directions @ scheme.subspace.basis, axis=1)
    align_p = align**p
    rho = np.where(align_p > 0.0, 1.0 / align_p, 0.0)
    return rho / count


def _checkpoint_distance(
    current: WeightedCloud, target: WeightedCloud, seed: int, label: int
) -> float:
    """Exact W2 to the target, subsampling to uniform clouds when needed."""
    cap = 2048
    direct = (
        current.n == target.n
        and current.n <= cap
        and current.is_uniform()
        and target.is_uniform()
    )
    if direct:
        return exact_w2(current, target)
    rng = stream(seed, "checkpoint", label)
    size = min(cap, max(current.n, target.n))
    idx_a = rng.choice(current.n, size=size, p=current.weights / current.weights.sum())
    idx_b = rng.choice(target.n, size=size, p=target.weights / target.weights.sum())
    return exact_w2(
        WeightedCloud.uniform(current.points[idx_a]),
        WeightedCloud.uniform(target.points[idx_b]),
    )


def run_flow(source: WeightedCloud, target: WeightedCloud, config: FlowConfig) -> FlowTrace:
    """Gradient descent of the source cloud toward the target.

    With ``resample`` on, every iteration draws a fresh slice bank from a
    stream keyed by ``(seed, iteration)``; with it off, one bank drawn up
    front is reused throughout.  Each step moves the points down the
    (scheme-weighted) envelope gradient and checks for non-finite
    coordinates, raising :class:`DivergenceError` with the offending
    iteration.  The exact W2 to the target is recorded before the first
    step, every ``eval_every`` iterations, and at the end.
    """
    if source.dim != target.dim:
        raise ContractError(f"dimension mismatch: {source.dim} vs {target.dim}")
    started = time.perf_counter()
    lr = config.lr
    if isinstance(lr, np.ndarray) and lr.shape != (source.n,):
        raise ContractError(f"per-point lr must have shape ({source.n},), got {lr.shape}")
    scheme = config.variant
    d = source.dim
    points = source.points.copy()
    weights = source.weights

    fixed_slices = None
    if not config.resample:
        fixed_seed = derive_seed(config.seed, "iter", 1)
        if scheme.kind == KIND_RANDOM_PATH:
            fixed_slices = sample_random_path_slices(
                source, target, config.n_slices, scheme.kappa, fixed_seed
            )
        else:
            fixed_slices = sample_uniform_sphere(d, config.n_slices, fixed_seed)

    check_iters = [0]
    check_w2 = [_checkpoint_distance(source, target, config.seed, 0)]
    # Overflow on the way to divergence is expected and detected explicitly,
    # so numeric warnings inside the loop are noise.
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, config.iters + 1):
            current = WeightedCloud(points, weights)
            if fixed_slices is not None:
                slices = fixed_slices
            else:
                slice_seed = derive_seed(config.seed, "iter", t)
                if scheme.kind == KIND_RANDOM_PATH:
                    slices = sample_random_path_slices(
                        current, target, config.n_slices, scheme.kappa, slice_seed
                    )
                else:
                    slices = sample_uniform_sphere(d, config.n_slices, slice_seed)
            agg = _agg_weights(scheme, current, target, config.p, slices)
            grad = _weighted_gradient(current, target, config.p, slices.directions, agg)
            step = lr[:, None] * grad if isinstance(lr, np.ndarray) else lr * grad
            points = points - step
            if not np.isfinite(points).all():
                raise DivergenceError(t)
            if t % config.eval_every == 0 or t == config.iters:
                if check_iters[-1] != t:
                    check_iters.append(t)
                    check_w2.append(
                        _checkpoint_distance(WeightedCloud(points, weights), target, config.seed, t)
                    )
    return FlowTrace(
        config=config,
        checkpoint_iters=np.asarray(check_iters),
        checkpoint_w2=np.asarray(check_w2),
        final=WeightedCloud(points, weights),
        wall_time=time.perf_counter() - started,
    )


def _sweep_one(source: WeightedCloud, target: WeightedCloud, config: FlowConfig, lr: float) -> SweepRow:
    started = time.perf_counter()
    try:
        trace = run_flow(source, target, replace(config, lr=lr))
    except DivergenceError as exc:
        return SweepRow(
            lr=lr,
            final_w2=math.nan,
            diverged=True,
            diverged_at=exc.iteration,
            wall_time_s=time.perf_counter() - started,
        )
    return SweepRow(lr=lr, final_w2=trace.final_w2, diverged=False, wall_time_s=trace.wall_time)


def lr_sweep(
    source: WeightedCloud,
    target: WeightedCloud,
    lr_grid: list[float],
    config: FlowConfig,
    threads: int = 1,
) -> list[SweepRow]:
    """Run the same flow at each learning rate in the grid.

    All rows share the config's seed, so rows differ only in the rate.
    Divergence is recorded per row, not raised.  Rows come back in grid
    order and are identical for any thread count.
    """
    if not lr_grid:
        raise ContractError("lr grid must not be empty")
    if threads < 1:
        raise ContractError(f"threads must be >= 1, got {threads}")
    if threads == 1:
        return [_sweep_one(source, target, config, lr) for lr in lr_grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_sweep_one, source, target, config, lr) for lr in lr_grid]
        return [f.result() for f in futures]
