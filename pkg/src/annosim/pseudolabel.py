"""Self-training pseudo-label schedules.

Each iteration, up to `amount` unlabeled frames whose triangulations are
trustworthy (every keypoint kept all views as inliers) are promoted to
pseudo-labels and fed back into the next training pool. Candidates are
visited in ascending order of the frame reprojection residual, lowest
residual first, with frame id breaking ties.

Variants:
- alternating: frames pseudo-labeled last iteration are skipped, so the
  sets of consecutive iterations are disjoint.
- enlarge: last iteration's still-unlabeled pseudo-frames are kept and up
  to `amount` new frames are added.
- constant: the best `amount` frames are re-picked with no exclusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection, DimensionMismatch, InvariantViolation
from .geometry import FrameTriangulation, project_many
from .heatmap import HeatmapSpec, render_gaussian
from .selection import PoolState

VARIANTS = ("alternating", "enlarge", "constant")


@dataclass
class PseudoLabel:
    """One pseudo-labeled frame: its triangulated pose and bookkeeping.

    heatmaps holds the rendered [view][keypoint] training targets when the
    caller materializes them (make_pseudo_targets); the campaign driver
    leaves them None since only the pose feeds the next pool summary.
    """

    frame_id: int
    points: np.ndarray  # (K, 3) mm
    epsilon: float
    iteration: int
    heatmaps: list | None = None


def eligible(ft: FrameTriangulation, n_views: int) -> bool:
    """A frame is acceptable only when every keypoint kept every view."""
    return ft.inlier_count == n_views


def select_pseudo_labels(
    pool: PoolState,
    prev_pseudo,
    amount: int,
    triangulations,
    n_views: int,
    variant: str = "alternating",
) -> list:
    """Choose this iteration's pseudo-label set; returns frame ids.

    triangulations maps every unlabeled frame id to its FrameTriangulation;
    prev_pseudo is last iteration's set. The result is ordered by
    increasing residual and never exceeds `amount` new frames (enlarge
    keeps carryovers on top of that).
    """
    if variant not in VARIANTS:
        raise InvariantViolation(f"unknown self-training variant {variant!r}")
    if amount < 0:
        raise InvariantViolation("pseudo-label amount must be >= 0")
    pool.check()
    prev = set(prev_pseudo)
    missing = pool.unlabeled - set(triangulations)
    if missing:
        raise InvariantViolation(
            f"triangulations missing for {len(missing)} unlabeled frames"
        )

    ordered = sorted(pool.unlabeled, key=lambda f: (triangulations[f].epsilon, f))

    if variant == "enlarge":
        chosen = sorted(
            prev & pool.unlabeled, key=lambda f: (triangulations[f].epsilon, f)
        )
    else:
        chosen = []
    taken = set(chosen)
    kept_count = len(chosen)

    for fid in ordered:
        if len(chosen) - kept_count >= amount:
            break
        if fid in taken:
            continue
        if variant == "alternating" and fid in prev:
            continue
        if eligible(triangulations[fid], n_views):
            chosen.append(fid)
            taken.add(fid)
    return chosen


def make_pseudo_targets(
    ft: FrameTriangulation,
    cameras,
    spec: HeatmapSpec = HeatmapSpec(),
    image_size: tuple = (1000.0, 1000.0),
) -> list:
    """Render single-peak training heatmaps at the reprojected 3D points.

    Requires a fully trusted frame (all keypoints triangulated with every
    view an inlier); returns [view][keypoint] Heatmaps.
    """
    if any(kt is None for kt in ft.per_keypoint):
        raise InvariantViolation("pseudo targets need all keypoints triangulated")
    if ft.inlier_count != len(cameras):
        raise InvariantViolation("pseudo targets need every view as an inlier")
    points = ft.points  # (K, 3)
    projections = np.stack([c.projection for c in cameras])
    uv = project_many(projections, points)  # (n_views, K, 2)
    if not np.all(np.isfinite(uv)):
        raise DegenerateProjection("pseudo target reprojects at infinity")
    scale_u = spec.width / float(image_size[0])
    scale_v = spec.height / float(image_size[1])
    out = []
    for v in range(len(cameras)):
        out.append(
            [
                render_gaussian((uv[v, k, 0] * scale_u, uv[v, k, 1] * scale_v), spec)
                for k in range(points.shape[0])
            ]
        )
    return out


@dataclass
class DriftSummary:
    """Distance between pseudo-label poses and ground truth, in mm."""

    count: int
    mean_mm: float
    median_mm: float
    max_mm: float


def drift_stats(pseudo_points, gt_points) -> DriftSummary:
    """Per-frame mean keypoint distance between pseudo and true poses.

    Both arguments map frame id to a (K, 3) pose; ids must match. An empty
    mapping yields count 0 and NaN statistics.
    """
    if set(pseudo_points) != set(gt_points):
        raise DimensionMismatch("pseudo and ground-truth frame ids differ")
    if not pseudo_points:
        return DriftSummary(count=0, mean_mm=float("nan"), median_mm=float("nan"), max_mm=float("nan"))
    drifts = []
    for fid in sorted(pseudo_points):
        a = np.asarray(pseudo_points[fid], dtype=float)
        b = np.asarray(gt_points[fid], dtype=float)
        if a.shape != b.shape:
            raise DimensionMismatch(f"frame {fid}: pose shapes differ")
        drifts.append(float(np.mean(np.linalg.norm(a - b, axis=1))))
    d = np.asarray(drifts)
    return DriftSummary(
        count=len(drifts),
        mean_mm=float(d.mean()),
        median_mm=float(np.median(d)),
        max_mm=float(d.max()),
    )
