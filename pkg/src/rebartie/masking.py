"""Plane-mask generation: alignment, near-plane selection, rasterization,
and background removal on the RGB image."""

import numpy as np
from scipy import ndimage

from .cloud import PointCloud
from .errors import MissingProvenance, SizeMismatch
from .geometry import plane_signed_distance, project, rotation_aligning
from .pnm import read_pgm, write_pgm

_Y_AXIS = np.array([0.0, 1.0, 0.0])


def align_to_xoz(plane, from_frame="camera", to_frame="aligned"):
    """Rotation bringing the plane normal onto +y, so the plane becomes
    y = offset."""
    return rotation_aligning(plane.normal, _Y_AXIS, from_frame, to_frame)


def select_near_plane(cloud, plane, tau=0.015):
    """Keep points within tau of the plane (absolute signed distance)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    dist = plane_signed_distance(plane, cloud.points)
    return cloud.take(np.flatnonzero(np.abs(dist) <= tau))


def rasterize_mask(selected, width, height, dilation_radius=2):
    """Rasterize a cloud's provenance pixels into a boolean mask.

    Each source pixel is set true, then dilated with a square structuring
    element of the given radius (0 = no dilation).
    """
    if selected.provenance is None:
        raise MissingProvenance("cloud has no source-pixel provenance")
    mask = np.zeros((height, width), dtype=bool)
    if len(selected):
        us = selected.provenance[:, 0].astype(int)
        vs = selected.provenance[:, 1].astype(int)
        if us.min() < 0 or us.max() >= width or vs.min() < 0 or vs.max() >= height:
            raise ValueError("provenance pixel outside image bounds")
        mask[vs, us] = True
    if dilation_radius > 0:
        size = 2 * dilation_radius + 1
        mask = ndimage.binary_dilation(mask, structure=np.ones((size, size), bool))
    return mask


def apply_mask(image, mask):
    """Black out image pixels where the mask is false."""
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    if image.shape[:2] != mask.shape:
        raise SizeMismatch(f"image {image.shape[:2]} vs mask {mask.shape}")
    return np.where(mask[..., None], image, 0).astype(image.dtype)


def attach_projected_provenance(cloud, cam):
    """Rebuild provenance by projecting points through the camera.

    Serialized clouds (and voxel centroids) carry no source pixels; this
    recovers them for mask rasterization. Points behind the camera or
    projecting outside the image are dropped.
    """
    pts = cloud.points
    front = pts[:, 2] > 0
    uv = np.full((pts.shape[0], 2), -1.0)
    if front.any():
        uv[front] = project(cam, pts[front])
    pix = np.floor(uv + 0.5).astype(int)
    ok = (
        front
        & (pix[:, 0] >= 0)
        & (pix[:, 0] < cam.width)
        & (pix[:, 1] >= 0)
        & (pix[:, 1] < cam.height)
    )
    return PointCloud(pts[ok], cloud.frame, pix[ok])


def write_mask(path, mask):
    """Mask file: binary PGM, 0 = false, 255 = true."""
    write_pgm(path, np.asarray(mask, dtype=bool).astype(np.uint8) * 255)


def read_mask(path):
    return read_pgm(path) > 0
