"""Color transfer by flowing one palette onto another.

The pipeline: flatten both images to RGB clouds in the unit cube, compress
each to a palette by k-means, flow the source palette toward the target
palette under the sliced objective (cluster masses as weights), then recolor
every pixel by its cluster's displacement.  Supported formats are 8-bit RGB
PNG and binary PPM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ContractError, UnsupportedInputError
from .flow import FlowConfig, run_flow
from .measures import WeightedCloud, exact_w2
from .rng import derive_seed, stream

__all__ = [
    "Palette",
    "read_image",
    "write_image",
    "image_to_cloud",
    "kmeans_palette",
    "transfer_colors",
    "synthetic_image_pair",
]

_FORMATS = {"PNG", "PPM"}
_ASSIGN_CHUNK = 1 << 16


def read_image(path) -> np.ndarray:
    """Load an 8-bit RGB image as floats in [0, 1], shape (H, W, 3).

    PNG and binary PPM only; anything that is not plain 8-bit RGB (palettes,
    alpha, 16-bit, grayscale) is rejected rather than silently converted.
    """
    with Image.open(path) as img:
        if img.format not in _FORMATS:
            raise UnsupportedInputError(
                f"unsupported image format {img.format!r}, expected PNG or PPM"
            )
        if img.mode != "RGB":
            raise UnsupportedInputError(
                f"unsupported image mode {img.mode!r}, expected 8-bit RGB"
            )
        data = np.asarray(img, dtype=np.uint8)
    return data.astype(np.float64) / 255.0


def write_image(path, image: np.ndarray) -> None:
    """Write floats in [0, 1] as an 8-bit RGB PNG or PPM.

    Values are quantized by round-half-to-even onto the 255-level grid; the
    format follows the file suffix.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ContractError(f"image must be (H, W, 3), got shape {image.shape}")
    if not np.isfinite(image).all() or image.min() < 0.0 or image.max() > 1.0:
        raise ContractError("image values must be finite and within [0, 1]")
    suffix = str(path).rsplit(".", 1)[-1].lower()
    if suffix not in ("png", "ppm"):
        raise UnsupportedInputError(f"unsupported output suffix {suffix!r}, expected png or ppm")
    data = np.rint(image * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG" if suffix == "png" else "PPM")


def image_to_cloud(image: np.ndarray) -> WeightedCloud:
    """Flatten an image array into a uniformly weighted RGB cloud."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ContractError(f"image must be (H, W, 3), got shape {image.shape}")
    return WeightedCloud.uniform(image.reshape(-1, 3))


@dataclass(frozen=True)
class Palette:
    """A cluster compression of a cloud: centroids, masses, and assignment.

    ``sse_trace`` holds the within-cluster squared error after each
    assignment pass; Lloyd iterations never increase it.
    """

    centroids: np.ndarray
    mass: np.ndarray
    labels: np.ndarray
    sse_trace: tuple[float, ...]

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        mass = np.asarray(self.mass, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.intp)
        if centroids.ndim != 2 or mass.shape != (centroids.shape[0],):
            raise ContractError("centroids must be (N, d) with one mass per centroid")
        if labels.ndim != 1 or (labels < 0).any() or (labels >= centroids.shape[0]).any():
            raise ContractError("labels must index the centroids")
        if (mass < 0).any() or abs(mass.sum() - 1.0) > 1e-9:
            raise ContractError("cluster masses must be non-negative and sum to 1")
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "labels", labels)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def cloud(self) -> WeightedCloud:
        """The palette as a discrete measure weighted by cluster mass."""
        return WeightedCloud(self.centroids, self.mass)


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels and squared distances, chunked to bound memory."""
    n = points.shape[0]
    labels = np.empty(n, dtype=np.intp)
    d2 = np.empty(n)
    center_sq = np.sum(centers**2, axis=1)
    for start in range(0, n, _ASSIGN_CHUNK):
        chunk = points[start : start + _ASSIGN_CHUNK]
        dist = center_sq[None, :] - 2.0 * (chunk @ centers.T)
        idx = np.argmin(dist, axis=1)
        labels[start : start + _ASSIGN_CHUNK] = idx
        d2[start : start + _ASSIGN_CHUNK] = (
            dist[np.arange(chunk.shape[0]), idx] + np.sum(chunk**2, axis=1)
        )
    return labels, np.clip(d2, 0.0, None)


def kmeans_palette(
    cloud: WeightedCloud, n_clusters: int, seed: int = 0, max_iter: int = 50
) -> Palette:
    """Compress a cloud into a palette by weighted k-means.

    D-squared seeding, then Lloyd passes (at most ``max_iter``) with empty
    clusters re-seeded onto the points currently worst represented.  Stops
    early once the assignment is stable.
    """
    if not 1 <= n_clusters <= cloud.n:
        raise ContractError(
            f"n_clusters must be in [1, {cloud.n}], got {n_clusters}"
        )
    if max_iter < 1:
        raise ContractError(f"max_iter must be >= 1, got {max_iter}")
    points = cloud.points
    w = cloud.weights
    rng = stream(seed, "kmeans")

    centers = np.empty((n_clusters, cloud.dim))
    probs = w / w.sum()
    centers[0] = points[rng.choice(cloud.n, p=probs)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, n_clusters):
        scores = w * d2
        total = scores.sum()
        if total > 0:
            centers[j] = points[rng.choice(cloud.n, p=scores / total)]
        else:
            centers[j] = points[rng.choice(cloud.n, p=probs)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))

    labels = np.full(cloud.n, -1, dtype=np.intp)
    sse_trace: list[float] = []
    for _ in range(max_iter):
        new_labels, d2 = _assign(points, centers)
        sse_trace.append(float(np.sum(w * d2)))
        if (new_labels == labels).all():
            break
        labels = new_labels
        cluster_w = np.bincount(labels, weights=w, minlength=n_clusters)
        occupied = cluster_w > 0
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, w[:, None] * points)
        centers[occupied] = sums[occupied] / cluster_w[occupied, None]
        empty = np.flatnonzero(~occupied)
        if empty.size:
            # Re-seed each empty cluster on a distinct worst-represented point.
            worst = np.argsort(d2, kind="stable")[::-1][: empty.size]
            centers[empty] = points[worst]

    mass = np.bincount(labels, weights=w, minlength=n_clusters)
    mass = mass / mass.sum()
    return Palette(centers, mass, labels, tuple(sse_trace))


def _subsample_uniform(
    cloud: WeightedCloud, size: int, rng: np.random.Generator
) -> WeightedCloud:
    idx = rng.choice(cloud.n, size=size, p=cloud.weights / cloud.weights.sum())
    return WeightedCloud.uniform(cloud.points[idx])


def transfer_colors(
    source_image: np.ndarray,
    target_image: np.ndarray,
    n_clusters: int,
    config: FlowConfig,
) -> tuple[np.ndarray, dict]:
    """Recolor the source image with the target's palette.

    Both images are compressed with the same derived k-means seed (so equal
    inputs yield equal palettes and an exact no-op round trip), the source
    palette is flowed onto the target palette with cluster masses as weights,
    and each pixel moves by its cluster centroid's displacement, clamped to
    the unit cube and quantized to the 255-level grid.

    Returns the recolored image and a report with the exact W2 between
    uniform subsamples (at most 2048 points) of the transported cloud and the
    target cloud.
    """
    source_cloud = image_to_cloud(source_image)
    target_cloud = image_to_cloud(target_image)
    palette_seed = derive_seed(config.seed, "palette")
    source_palette = kmeans_palette(source_cloud, n_clusters, palette_seed)
    target_palette = kmeans_palette(target_cloud, n_clusters, palette_seed)

    trace = run_flow(source_palette.cloud(), target_palette.cloud(), config)
    displacement = trace.final.points - source_palette.centroids

    moved = source_cloud.points + displacement[source_palette.labels]
    moved = np.clip(moved, 0.0, 1.0)
    out_image = moved.reshape(source_image.shape)
    quantized = np.rint(out_image * 255.0) / 255.0

    rng = stream(config.seed, "report")
    size = min(2048, source_cloud.n, target_cloud.n)
    transported = _subsample_uniform(image_to_cloud(quantized), size, rng)
    reference = _subsample_uniform(target_cloud, size, rng)
    report = {
        "n_clusters": int(n_clusters),
        "p": config.p,
        "n_slices": int(config.n_slices),
        "iters": int(config.iters),
        "lr": config.lr if isinstance(config.lr, float) else "per-point",
        "seed": int(config.seed),
        "subsample": int(size),
        "w2_after": exact_w2(transported, reference),
        "checkpoint_iters": [int(t) for t in trace.checkpoint_iters],
        "checkpoint_w2": [float(v) for v in trace.checkpoint_w2],
    }
    return out_image, report


def synthetic_image_pair(seed: int = 0, size: int = 96) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic source/target images with clearly different palettes.

    Two smooth two-tone gradients with mild noise, sized ``(size, size, 3)``,
    values kept inside [0, 1].  Useful for self-contained pipeline tests.
    """
    if size < 8:
        raise ContractError(f"size must be >= 8, got {size}")
    rng = stream(seed, "synthetic-pair")
    u = np.linspace(0.0, 1.0, size)
    gx, gy = np.meshgrid(u, u, indexing="xy")

    blue = np.array([0.10, 0.15, 0.70])
    amber = np.array([0.85, 0.55, 0.10])
    source = blue[None, None, :] * (1.0 - gx[..., None]) + amber[None, None, :] * gx[..., None]
    source += 0.15 * np.sin(3.0 * math.pi * gy)[..., None] * np.array([0.05, 0.10, 0.05])
    source += 0.02 * rng.standard_normal(source.shape)

    green = np.array([0.15, 0.60, 0.20])
    violet = np.array([0.55, 0.10, 0.65])
    target = green[None, None, :] * (1.0 - gy[..., None]) + violet[None, None, :] * gy[..., None]
    target += 0.15 * np.cos(2.0 * math.pi * gx)[..., None] * np.array([0.08, 0.04, 0.08])
    target += 0.02 * rng.standard_normal(target.shape)

    return np.clip(source, 0.0, 1.0), np.clip(target, 0.0, 1.0)
