"""Slice sampling and subspace geometry.

A slice is a direction used to project clouds onto the line.  This module
samples slice sets from the uniform sphere (and its unnormalized Gaussian
twin), measures how informative a slice is for a given subspace, reduces
ambient slices to subspace coordinates, and samples data-driven slices along
perturbed point-difference paths.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ContractError, DegeneratePairError
from .measures import WeightedCloud
from .rng import block_streams, stream

__all__ = [
    "SliceSet",
    "Subspace",
    "sample_uniform_sphere",
    "sample_gaussian_raw",
    "iter_direction_blocks",
    "project",
    "phi_es",
    "reduce_slice",
    "random_rotation",
    "sample_random_path_slices",
    "save_slices_csv",
    "UNIT_NORM_TOL",
    "SLICE_NORM_TOL",
    "REDUCE_EPS",
]

UNIT_NORM_TOL = 1e-6
SLICE_NORM_TOL = 1e-9
REDUCE_EPS = 1e-12
_GRAM_TOL = 1e-9

DIST_UNIFORM = "uniform-sphere"
DIST_GAUSSIAN = "gaussian-raw"


def _random_path_tag(kappa: float) -> str:
    return f"random-path({'inf' if math.isinf(kappa) else format(kappa, 'g')})"


@dataclass(frozen=True)
class SliceSet:
    """A bank of ``L`` slicing directions in ``R^d``.

    ``distribution`` records how the directions were drawn:
    ``"uniform-sphere"``, ``"gaussian-raw"``, or ``"random-path(<kappa>)"``.
    Directions are unit length (within ``1e-9``) for every tag except
    ``"gaussian-raw"``.
    """

    directions: np.ndarray
    seed: int
    distribution: str = DIST_UNIFORM

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=np.float64)
        if directions.ndim != 2 or directions.shape[0] < 1 or directions.shape[1] < 1:
            raise ContractError(
                f"directions must be (L, d) with L, d >= 1, got shape {directions.shape}"
            )
        if not np.isfinite(directions).all():
            raise ContractError("directions contain non-finite values")
        if self.distribution != DIST_GAUSSIAN:
            norms = np.linalg.norm(directions, axis=1)
            err = float(np.abs(norms - 1.0).max())
            if err > SLICE_NORM_TOL:
                raise ContractError(
                    f"directions must be unit length within {SLICE_NORM_TOL}, "
                    f"worst deviation {err:.3g}"
                )
        object.__setattr__(self, "directions", directions)

    @property
    def count(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]


@dataclass(frozen=True)
class Subspace:
    """A ``k``-dimensional linear subspace of ``R^d`` with orthonormal basis.

    ``basis`` has the basis vectors as columns; its Gram matrix must equal the
    identity within ``1e-9``.
    """

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[1] < 1 or basis.shape[1] > basis.shape[0]:
            raise ContractError(
                f"basis must be (d, k) with 1 <= k <= d, got shape {basis.shape}"
            )
        if not np.isfinite(basis).all():
            raise ContractError("basis contains non-finite values")
        gram_err = float(np.abs(basis.T @ basis - np.eye(basis.shape[1])).max())
        if gram_err > _GRAM_TOL:
            raise ContractError(
                f"basis columns must be orthonormal within {_GRAM_TOL}, "
                f"worst Gram deviation {gram_err:.3g}"
            )
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def random(cls, d: int, k: int, seed: int) -> "Subspace":
        """Draw a uniformly random ``k``-dimensional subspace of ``R^d``."""
        if not 1 <= k <= d:
            raise ContractError(f"need 1 <= k <= d, got k={k}, d={d}")
        rng = stream(seed, "subspace")
        gauss = rng.standard_normal((d, k))
        q, r = np.linalg.qr(gauss)
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
        return cls(q)


def iter_direction_blocks(
    d: int, count: int, seed: int, raw: bool = False
) -> Iterator[np.ndarray]:
    """Yield blocks of sampled directions without materializing all of them.

    Each block comes from its own counter-based stream keyed by
    ``(seed, block index)``, so the assembled sequence is identical no matter
    how many blocks are generated at a time (or on how many threads).  With
    ``raw=True`` the unnormalized Gaussian draws are yielded instead; the
    normalized and raw sequences use the same draws, paired row by row.
    """
    if d < 1 or count < 1:
        raise ContractError(f"need d >= 1 and count >= 1, got d={d}, count={count}")
    for start, stop, rng in block_streams(seed, count):
        gauss = rng.standard_normal((stop - start, d))
        if raw:
            yield gauss
            continue
        norms = np.linalg.norm(gauss, axis=1, keepdims=True)
        if (norms == 0).any():
            raise ContractError("degenerate zero-norm Gaussian draw")
        yield gauss / norms


def sample_uniform_sphere(d: int, count: int, seed: int) -> SliceSet:
    """Sample ``count`` directions uniformly from the unit sphere in ``R^d``.

    Normalized Gaussian draws; deterministic for fixed ``(d, count, seed)``.
    """
    directions = np.concatenate(list(iter_direction_blocks(d, count, seed)))
    return SliceSet(directions, seed, DIST_UNIFORM)


def sample_gaussian_raw(d: int, count: int, seed: int) -> SliceSet:
    """Sample unnormalized standard Gaussian directions.

    Uses the same draws as :func:`sample_uniform_sphere` for the same seed, so
    the two sets are paired by normalization.
    """
    directions = np.concatenate(list(iter_direction_blocks(d, count, seed, raw=True)))
    return SliceSet(directions, seed, DIST_GAUSSIAN)


def project(cloud: WeightedCloud, direction: np.ndarray) -> WeightedCloud:
    """Push a cloud through one unit-length slicing direction.

    Returns the 1D cloud of projections with weights unchanged.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (cloud.dim,):
        raise ContractError(
            f"direction must have shape ({cloud.dim},), got {direction.shape}"
        )
    norm = float(np.linalg.norm(direction))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ContractError(
            f"direction must be unit length within {UNIT_NORM_TOL}, got norm {norm!r}"
        )
    return WeightedCloud((cloud.points @ direction)[:, None], cloud.weights)


def phi_es(subspace: Subspace, direction: np.ndarray) -> float:
    """Alignment of a unit direction with a subspace: length of its projection.

    Equals 1 exactly when the direction lies in the subspace, 0 when it is
    orthogonal to it, and is invariant under any rotation of the basis within
    the subspace.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (subspace.dim,):
        raise ContractError(
            f"direction must have shape ({subspace.dim},), got {direction.shape}"
        )
    return float(np.linalg.norm(subspace.basis.T @ direction))


def reduce_slice(subspace: Subspace, direction: np.ndarray) -> tuple[np.ndarray, float]:
    """Map an ambient slice to its subspace twin and alignment scale.

    Returns ``(unit direction in subspace coordinates, scale)`` where the
    scale is the projection length.  Directions essentially orthogonal to the
    subspace (scale below ``1e-12``) reduce to the zero vector with scale 0.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (subspace.dim,):
        raise ContractError(
            f"direction must have shape ({subspace.dim},), got {direction.shape}"
        )
    t = subspace.basis.T @ direction
    scale = float(np.linalg.norm(t))
    if scale < REDUCE_EPS:
        return np.zeros(subspace.k), 0.0
    return t / scale, scale


def save_slices_csv(slices: SliceSet, path) -> None:
    """Write a slice set as CSV for audit: header, one direction per row.

    Floats are written with 17 significant digits so the round trip is
    bitwise.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(slices.dim)])
        for row in slices.directions:
            writer.writerow([format(v, ".17g") for v in row])


def random_rotation(d: int, seed: int) -> np.ndarray:
    """Draw a rotation uniformly at random (Haar) over the orthogonal group.

    QR of a Gaussian matrix with the sign of R's diagonal folded in, which
    makes the factorization unique and the distribution exactly Haar.
    """
    if d < 1:
        raise ContractError(f"need d >= 1, got {d}")
    rng = stream(seed, "rotation")
    gauss = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gauss)
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def _vmf_cosines(rng: np.random.Generator, kappa: float, d: int, count: int) -> np.ndarray:
    """Sample cosines between vMF draws and their mean direction on S^(d-1).

    Rejection sampler with a Beta envelope; concentration 0 reduces exactly to
    the uniform-sphere cosine law.
    """
    m = d - 1
    b = m / (math.sqrt(4.0 * kappa * kappa + m * m) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * math.log(1.0 - x0 * x0)
    out = np.empty(count)
    todo = np.arange(count)
    for _ in range(1000):
        z = rng.beta(0.5 * m, 0.5 * m, size=todo.size)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=todo.size)
        ok = kappa * w + m * np.log1p(-x0 * w) - c >= np.log(u)
        out[todo[ok]] = w[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    raise ContractError(f"cosine rejection sampler stalled at kappa={kappa}, d={d}")


def _unit_tangents(
    rng: np.random.Generator, bases: np.ndarray
) -> np.ndarray:
    """Uniform unit vectors orthogonal to each base row."""
    count, d = bases.shape
    tangents = np.empty_like(bases)
    todo = np.arange(count)
    for _ in range(100):
        gauss = rng.standard_normal((todo.size, d))
        gauss -= np.sum(gauss * bases[todo], axis=1, keepdims=True) * bases[todo]
        norms = np.linalg.norm(gauss, axis=1)
        ok = norms > REDUCE_EPS
        tangents[todo[ok]] = gauss[ok] / norms[ok, None]
        todo = todo[~ok]
        if todo.size == 0:
            return tangents
    raise ContractError("tangent sampler stalled")


def sample_random_path_slices(
    a: WeightedCloud,
    b: WeightedCloud,
    count: int,
    kappa: float,
    seed: int,
) -> SliceSet:
    """Sample data-driven slices along perturbed point-difference directions.

    Draws one point from each cloud (by weight), takes the unit vector from
    one to the other, and perturbs it with a von Mises-Fisher kick of
    concentration ``kappa``.  ``kappa = inf`` keeps the difference directions
    untouched; ``kappa = 0`` forgets them entirely and is plain uniform
    sampling.  Coincident draws are resampled up to 100 times before giving
    up.
    """
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if count < 1:
        raise ContractError(f"need count >= 1, got {count}")
    if math.isnan(kappa) or kappa < 0:
        raise ContractError(f"concentration must be >= 0 or inf, got {kappa}")
    d = a.dim
    rng = stream(seed, "random-path")

    pa = a.weights / a.weights.sum()
    pb = b.weights / b.weights.sum()
    ia = rng.choice(a.n, size=count, p=pa)
    ib = rng.choice(b.n, size=count, p=pb)
    diff = a.points[ia] - b.points[ib]
    norms = np.linalg.norm(diff, axis=1)
    for _ in range(100):
        bad = np.flatnonzero(norms == 0.0)
        if bad.size == 0:
            break
        ia = rng.choice(a.n, size=bad.size, p=pa)
        ib = rng.choice(b.n, size=bad.size, p=pb)
        diff[bad] = a.points[ia] - b.points[ib]
        norms[bad] = np.linalg.norm(diff[bad], axis=1)
    else:
        raise DegeneratePairError(
            "kept drawing identical point pairs; are the clouds equal point masses?"
        )
    bases = diff / norms[:, None]

    if math.isinf(kappa):
        return SliceSet(bases, seed, _random_path_tag(kappa))

    if d == 1:
        # S^0 is just {-1, +1}: flip each base with the two-point vMF law.
        p_keep = 1.0 / (1.0 + np.exp(-2.0 * kappa))
        signs = np.where(rng.uniform(size=count) < p_keep, 1.0, -1.0)
        return SliceSet(bases * signs[:, None], seed, _random_path_tag(kappa))

    cosines = _vmf_cosines(rng, kappa, d, count)
    tangents = _unit_tangents(rng, bases)
    sines = np.sqrt(np.clip(1.0 - cosines * cosines, 0.0, None))
    directions = cosines[:, None] * bases + sines[:, None] * tangents
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return SliceSet(directions, seed, _random_path_tag(kappa))
