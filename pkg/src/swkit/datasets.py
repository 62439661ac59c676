"""Benchmark point clouds and embeddings.

Three planar shapes (a spiral, a ring of Gaussian modes, and a closed
three-lobed curve), each jittered and normalized to unit root-mean-square
radius; tools to embed any cloud into a higher dimension by zero-padding and
rotating; and the subspace-supported Gaussian pair used to validate the
scale-factor identity end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .measures import WeightedCloud, load_cloud_csv, save_cloud_csv
from .rng import derive_seed, stream
from .slicing import Subspace, random_rotation

__all__ = [
    "swiss_roll_2d",
    "eight_gaussians_2d",
    "knot_2d",
    "embed",
    "embedding_subspace",
    "EmbeddedPair",
    "gaussian_pair_subspace",
    "load_cloud_csv",
    "save_cloud_csv",
]


def _normalize_rms(points: np.ndarray) -> np.ndarray:
    """Scale points so the root-mean-square radius is exactly 1."""
    rms = math.sqrt(float(np.mean(np.sum(points**2, axis=1))))
    if rms == 0.0:
        raise ContractError("cannot normalize a cloud collapsed at the origin")
    return points / rms


def _check_n(n: int) -> None:
    if n < 1:
        raise ContractError(f"need n >= 1, got {n}")


def swiss_roll_2d(n: int, seed: int = 0, jitter: float = 0.1) -> WeightedCloud:
    """Planar spiral: radius grows linearly with angle over 1.5 turns.

    Angles are drawn uniformly on [1.5 pi, 4.5 pi], Gaussian jitter of scale
    ``jitter`` is added in the raw coordinates, and the cloud is normalized to
    unit RMS radius.  Uniform weights.
    """
    _check_n(n)
    rng = stream(seed, "swiss-roll")
    angle = rng.uniform(1.5 * math.pi, 4.5 * math.pi, size=n)
    points = np.column_stack([angle * np.cos(angle), angle * np.sin(angle)])
    points += jitter * rng.standard_normal((n, 2))
    return WeightedCloud.uniform(_normalize_rms(points))


def eight_gaussians_2d(
    n: int, seed: int = 0, mode_radius: float = 4.0, mode_std: float = 1.0
) -> WeightedCloud:
    """Equal mixture of eight Gaussian modes on a circle.

    Mode centers sit at angles ``2 pi j / 8`` on a circle of radius
    ``mode_radius``; each mode is isotropic with scale ``mode_std``.  Points
    are assigned to modes by stratified counts (exactly ``n/8`` each when n is
    divisible by 8, largest-remainder otherwise), then the whole cloud is
    normalized to unit RMS radius.
    """
    _check_n(n)
    rng = stream(seed, "eight-gaussians")
    base, extra = divmod(n, 8)
    counts = [base + (1 if j < extra else 0) for j in range(8)]
    angles = 2.0 * math.pi * np.arange(8) / 8.0
    centers = mode_radius * np.column_stack([np.cos(angles), np.sin(angles)])
    chunks = [
        centers[j] + mode_std * rng.standard_normal((counts[j], 2))
        for j in range(8)
        if counts[j] > 0
    ]
    return WeightedCloud.uniform(_normalize_rms(np.concatenate(chunks)))


def knot_2d(n: int, seed: int = 0, jitter: float = 0.05) -> WeightedCloud:
    """Closed three-lobed curve, sampled by stratified parameter values.

    The curve is ``(sin t + 2 sin 2t, cos t - 2 cos 2t)`` with one parameter
    value drawn per stratum of ``[0, 2 pi)``, plus Gaussian jitter, normalized
    to unit RMS radius.  The normalized cloud fits inside ``[-1.5, 1.5]^2``.
    """
    _check_n(n)
    rng = stream(seed, "knot")
    t = 2.0 * math.pi * (np.arange(n) + rng.uniform(size=n)) / n
    points = np.column_stack([np.sin(t) + 2.0 * np.sin(2.0 * t), np.cos(t) - 2.0 * np.cos(2.0 * t)])
    points += jitter * rng.standard_normal((n, 2))
    return WeightedCloud.uniform(_normalize_rms(points))


def embed(cloud: WeightedCloud, ambient_dim: int, seed: int = 0) -> WeightedCloud:
    """Lift a cloud into a higher dimension: zero-pad, then rotate.

    The rotation is a deterministic function of ``(ambient_dim, seed)``, so
    embedding source and target with the same arguments places them in the
    same rotated subspace.  Weights are unchanged.
    """
    if ambient_dim < cloud.dim:
        raise ContractError(
            f"ambient dimension {ambient_dim} is below the cloud dimension {cloud.dim}"
        )
    if ambient_dim == cloud.dim:
        return cloud
    padded = np.hstack([cloud.points, np.zeros((cloud.n, ambient_dim - cloud.dim))])
    rotation = random_rotation(ambient_dim, seed)
    return WeightedCloud(padded @ rotation.T, cloud.weights)


def embedding_subspace(ambient_dim: int, dim: int, seed: int = 0) -> Subspace:
    """The subspace that :func:`embed` maps a ``dim``-dimensional cloud into."""
    if not 1 <= dim <= ambient_dim:
        raise ContractError(f"need 1 <= dim <= ambient_dim, got {dim}, {ambient_dim}")
    rotation = random_rotation(ambient_dim, seed)
    return Subspace(rotation[:, :dim])


@dataclass(frozen=True)
class EmbeddedPair:
    """A source/target pair living on a known subspace, in both coordinates."""

    reduced_source: WeightedCloud
    reduced_target: WeightedCloud
    ambient_source: WeightedCloud
    ambient_target: WeightedCloud
    subspace: Subspace


def gaussian_pair_subspace(
    d: int, k: int, n: int = 500, separation: float = 5.0, seed: int = 0
) -> EmbeddedPair:
    """Isotropic Gaussian pair on a random k-dimensional subspace of ``R^d``.

    The reduced clouds are standard normal samples with means at the origin
    and at ``separation`` along the first axis; the ambient clouds are the
    same samples pushed through a random orthonormal basis, so both pairs
    represent the same measures in different coordinates.
    """
    if not 1 <= k <= d:
        raise ContractError(f"need 1 <= k <= d, got k={k}, d={d}")
    if n < 1:
        raise ContractError(f"need n >= 1, got {n}")
    rng = stream(seed, "gaussian-pair")
    src = rng.standard_normal((n, k))
    tgt = rng.standard_normal((n, k))
    tgt[:, 0] += separation
    subspace = Subspace.random(d, k, derive_seed(seed, "embed-basis"))
    return EmbeddedPair(
        reduced_source=WeightedCloud.uniform(src),
        reduced_target=WeightedCloud.uniform(tgt),
        ambient_source=WeightedCloud.uniform(src @ subspace.basis.T),
        ambient_target=WeightedCloud.uniform(tgt @ subspace.basis.T),
        subspace=subspace,
    )
