"""Detection of the two parallel rebar-layer planes.

RANSAC finds the dominant plane and hence the shared normal; projecting
every point onto that normal gives scalar offsets which a two-cluster
least-squares split separates into the near and far layers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, LayersTooClose, NoConsensus, ParseError
from .geometry import Plane, fit_plane_least_squares, plane_signed_distance


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 500
    inlier_threshold: float = 0.005
    min_inlier_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0 < self.min_inlier_fraction <= 1:
            raise ValueError("min_inlier_fraction must be in (0, 1]")


@dataclass
class ParallelPlanePair:
    """Two parallel planes sharing one normal exactly.

    offset_near belongs to the layer closer to the camera along +z.
    """

    normal: np.ndarray
    offset_near: float
    offset_far: float
    inlier_counts: tuple
    rms_residuals: tuple

    def near_plane(self):
        return Plane(self.normal, self.offset_near)

    def far_plane(self):
        return Plane(self.normal, self.offset_far)

    def mid_plane(self):
        """Plane halfway between the layers; ties happen between them."""
        return Plane(self.normal, 0.5 * (self.offset_near + self.offset_far))


def ransac_dominant_plane(cloud, params):
    """RANSAC plane fit: returns (plane, inlier index array).

    Deterministic given params.seed. Iterations that draw collinear triples
    are skipped. Raises NoConsensus when the best inlier fraction stays
    below params.min_inlier_fraction.
    """
    pts = cloud.points
    n = pts.shape[0]
    if n < 3:
        raise NoConsensus(f"cloud of size {n} cannot support a plane")
    rng = np.random.default_rng(params.seed)
    best_count = 0
    best_plane = None
    for _ in range(params.iterations):
        i, j, k = rng.choice(n, size=3, replace=False)
        a, b = pts[j] - pts[i], pts[k] - pts[i]
        normal = np.cross(a, b)
        norm = np.linalg.norm(normal)
        if norm <= 1e-12 * (np.linalg.norm(a) * np.linalg.norm(b) + 1e-300):
            continue  # collinear sample
        normal = normal / norm
        candidate = Plane(normal, float(normal @ pts[i]))
        dist = plane_signed_distance(candidate, pts)
        count = int(np.count_nonzero(np.abs(dist) <= params.inlier_threshold))
        if count > best_count:
            best_count = count
            best_plane = candidate
    if best_plane is None or best_count / n < params.min_inlier_fraction:
        raise NoConsensus(
            f"best inlier fraction {best_count / n:.3f} "
            f"< {params.min_inlier_fraction}"
        )
    inliers = np.flatnonzero(
        np.abs(plane_signed_distance(best_plane, pts)) <= params.inlier_threshold
    )
    refit = fit_plane_least_squares(pts[inliers])
    inliers = np.flatnonzero(
        np.abs(plane_signed_distance(refit, pts)) <= params.inlier_threshold
    )
    return refit, inliers


def kmeans_split_offsets(offsets, seed=None):
    """Optimal two-cluster split of scalar values, plus the cluster means.

    Returns ((low_indices, high_indices), (low_mean, high_mean)). The split
    minimizes the within-cluster sum of squares over all sorted-threshold
    partitions, which is the exact two-means optimum in one dimension; it
    needs no random restarts, so ``seed`` is accepted only for interface
    stability. Raises DegenerateInput when all values are equal.
    """
    v = np.asarray(offsets, dtype=float).ravel()
    if v.size < 2:
        raise DegenerateInput("need at least 2 values")
    if np.all(v == v[0]):
        raise DegenerateInput("all offsets are equal")
    order = np.argsort(v, kind="stable")
    s = v[order]
    n = s.size
    # within-cluster sums of squares from prefix sums:
    # sum((x - mu)^2) = sum(x^2) - (sum x)^2 / count
    csum = np.cumsum(s)
    csq = np.cumsum(s * s)
    counts = np.arange(1, n, dtype=float)
    left = csq[:-1] - csum[:-1] ** 2 / counts
    rsum = csum[-1] - csum[:-1]
    rsq = csq[-1] - csq[:-1]
    right = rsq - rsum**2 / (n - counts)
    split = int(np.argmin(left + right)) + 1
    low = np.sort(order[:split])
    high = np.sort(order[split:])
    return (low, high), (float(v[low].mean()), float(v[high].mean()))


def detect_parallel_planes(cloud, params):
    """Find the two parallel rebar-layer planes in a conditioned cloud.

    The dominant RANSAC plane fixes the shared normal; every point's offset
    along it is split into two layers whose offsets are refit as the mean
    offset (least squares under the fixed normal). Raises LayersTooClose
    when the layer offsets are within twice the inlier threshold.
    """
    plane, _ = ransac_dominant_plane(cloud, params)
    normal = plane.normal
    offsets = cloud.points @ normal
    (low, high), (mean_low, mean_high) = kmeans_split_offsets(offsets, params.seed)
    z_low = cloud.points[low, 2].mean()
    z_high = cloud.points[high, 2].mean()
    if z_low <= z_high:
        near_idx, far_idx = low, high
        offset_near, offset_far = mean_low, mean_high
    else:
        near_idx, far_idx = high, low
        offset_near, offset_far = mean_high, mean_low
    if abs(offset_near - offset_far) < 2 * params.inlier_threshold:
        raise LayersTooClose(
            f"layer offsets {offset_near:.4f} and {offset_far:.4f} are within "
            f"2x inlier threshold"
        )
    counts = []
    rms = []
    for idx, off in ((near_idx, offset_near), (far_idx, offset_far)):
        res = offsets[idx] - off
        counts.append(int(np.count_nonzero(np.abs(res) <= params.inlier_threshold)))
        rms.append(float(np.sqrt(np.mean(res**2))))
    return ParallelPlanePair(
        normal=normal,
        offset_near=offset_near,
        offset_far=offset_far,
        inlier_counts=(counts[0], counts[1]),
        rms_residuals=(rms[0], rms[1]),
    )


def write_plane_pair(path, pair, frame="camera"):
    """Plane parameters file: normal, both offsets, frame; 9 digits."""
    n = pair.normal
    with open(path, "w") as f:
        f.write(f"normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
        f.write(f"offset_near {pair.offset_near:.9g}\n")
        f.write(f"offset_far {pair.offset_far:.9g}\n")
        f.write(f"frame {frame}\n")


def read_plane_pair(path):
    """Read a plane parameters file; returns (pair, frame).

    Inlier counts and residuals are not serialized and come back zeroed.
    """
    with open(path) as f:
        lines = f.read().splitlines()
    fields = {}
    for i, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        fields[parts[0]] = (i, parts[1:])
    for key in ("normal", "offset_near", "offset_far", "frame"):
        if key not in fields:
            raise ParseError(len(lines), f"missing '{key}' line")
    try:
        normal = np.array([float(v) for v in fields["normal"][1]])
        offset_near = float(fields["offset_near"][1][0])
        offset_far = float(fields["offset_far"][1][0])
    except (ValueError, IndexError):
        raise ParseError(fields["normal"][0], "malformed plane parameters") from None
    if normal.shape != (3,):
        raise ParseError(fields["normal"][0], "normal must have 3 components")
    norm = np.linalg.norm(normal)
    if norm == 0:
        raise ParseError(fields["normal"][0], "zero normal")
    pair = ParallelPlanePair(
        normal=normal / norm,
        offset_near=offset_near / norm,
        offset_far=offset_far / norm,
        inlier_counts=(0, 0),
        rms_residuals=(0.0, 0.0),
    )
    return pair, fields["frame"][1][0]
