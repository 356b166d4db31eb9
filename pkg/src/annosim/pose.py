"""3D pose containers and distances.

A pose is a (K, 3) array of keypoint positions in mm. Comparisons between
poses of different subjects or frames are done after root alignment:
subtracting one designated keypoint so the pose becomes translation-free.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange


def as_pose(pose) -> np.ndarray:
    """Coerce to a float (K, 3) array, validating the shape."""
    p = np.asarray(pose, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
        raise DimensionMismatch(f"pose must have shape (K, 3), got {p.shape}")
    return p


def align_root(pose, root_index: int) -> np.ndarray:
    """Subtract the root keypoint; the root row becomes exactly zero."""
    p = as_pose(pose)
    if not 0 <= root_index < p.shape[0]:
        raise IndexOutOfRange(
            f"root index {root_index} outside [0, {p.shape[0]})"
        )
    return p - p[root_index]


def pose_distance(a, b) -> float:
    """Mean per-keypoint Euclidean distance between two equal-shape poses."""
    pa, pb = as_pose(a), as_pose(b)
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"pose shapes differ: {pa.shape} vs {pb.shape}")
    return float(np.mean(np.linalg.norm(pa - pb, axis=1)))


def nearest_pose_distance(pose, pool: np.ndarray) -> float:
    """Min over pool rows of pose_distance(pose, row); pool is (L, K, 3)."""
    p = as_pose(pose)
    q = np.asarray(pool, dtype=float)
    if q.ndim != 3 or q.shape[1:] != p.shape:
        raise DimensionMismatch(
            f"pool shape {q.shape} incompatible with pose {p.shape}"
        )
    if q.shape[0] == 0:
        raise DimensionMismatch("pool is empty")
    d = np.linalg.norm(q - p[None], axis=2).mean(axis=1)
    return float(d.min())


def mkpe(predicted, truth) -> float:
    """Mean keypoint position error over frames, in world coordinates.

    predicted and truth are (F, K, 3) stacks (or sequences of poses); no
    alignment is applied, so translation errors count.
    """
    pa = np.asarray(predicted, dtype=float)
    pb = np.asarray(truth, dtype=float)
    if pa.shape != pb.shape or pa.ndim != 3 or pa.shape[-1] != 3:
        raise DimensionMismatch(
            f"expected matching (F, K, 3) stacks, got {pa.shape} vs {pb.shape}"
        )
    if pa.shape[0] == 0:
        raise DimensionMismatch("mkpe of zero frames")
    return float(np.mean(np.linalg.norm(pa - pb, axis=2)))
