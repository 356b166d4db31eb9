"""Multi-view pinhole geometry.

Projection, homogeneous DLT triangulation, exhaustive-pair robust
triangulation with refit on inliers, and symmetric epipolar distance.

All 3D coordinates are millimeters in a shared world frame; image
coordinates are pixels. The robust triangulation of many keypoints is
backed by one batched kernel (stacked 4x4 SVDs) so that a whole frame, or a
whole pool of frames, costs a handful of LAPACK calls instead of thousands.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoincidentCenters,
    DegenerateProjection,
    DimensionMismatch,
    IllConditioned,
    InsufficientViews,
    InvariantViolation,
    NoConsensus,
)

# Homogeneous depth below this is treated as degenerate.
_W_EPS = 1e-9
# If the two smallest singular values of a DLT system are this close, the
# null space is not one-dimensional and the solution is meaningless.
_NULLSPACE_RATIO = 0.99
_ORTHO_TOL = 1e-9

# Default penalty charged per (view, keypoint) when a keypoint fails to
# triangulate: squared diagonal of a 1000x1000 px image. Callers with a
# different image size pass their own value.
DEFAULT_FAILURE_PENALTY_PX2 = 2.0e6


@dataclass
class CameraParams:
    """One calibrated pinhole camera: x ~ intrinsics @ [rotation | translation] @ X.

    rotation maps world to camera coordinates; translation is in mm. The
    3x4 projection matrix is precomputed once at construction.
    """

    id: int
    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.intrinsics = np.asarray(self.intrinsics, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        k, r = self.intrinsics, self.rotation
        if k.shape != (3, 3) or r.shape != (3, 3):
            raise DimensionMismatch(
                f"camera {self.id}: intrinsics and rotation must be 3x3"
            )
        if not np.all(np.isfinite(k)) or not np.all(np.isfinite(r)) or not np.all(
            np.isfinite(self.translation)
        ):
            raise InvariantViolation(f"camera {self.id}: non-finite parameters")
        if np.any(np.abs(k[np.tril_indices(3, -1)]) > 0):
            raise InvariantViolation(
                f"camera {self.id}: intrinsics must be upper triangular"
            )
        if np.any(np.diag(k) <= 0):
            raise InvariantViolation(
                f"camera {self.id}: intrinsics diagonal must be positive"
            )
        if not np.allclose(r.T @ r, np.eye(3), atol=_ORTHO_TOL):
            raise InvariantViolation(f"camera {self.id}: rotation not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise InvariantViolation(f"camera {self.id}: rotation determinant not +1")
        self.projection = k @ np.hstack([r, self.translation[:, None]])

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (mm)."""
        return -self.rotation.T @ self.translation


def project(camera: CameraParams, point: np.ndarray) -> np.ndarray:
    """Project one world point (3,) to pixel coordinates (2,)."""
    p = np.asarray(point, dtype=float).reshape(3)
    x = camera.projection @ np.append(p, 1.0)
    if abs(x[2]) <= _W_EPS:
        raise DegenerateProjection(
            f"camera {camera.id}: point {p} has homogeneous depth {x[2]:.3e}"
        )
    return x[:2] / x[2]


def project_many(projections: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Project points (..., 3) through stacked matrices (V, 3, 4) -> (V, ..., 2).

    Degenerate rows (|depth| <= 1e-9) come back as +inf so callers can mask
    them; points behind a camera still get their algebraic projection.
    """
    pts = np.asarray(points, dtype=float)
    ph = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1)
    x = np.einsum("vij,...j->v...i", projections, ph)
    w = x[..., 2]
    bad = np.abs(w) <= _W_EPS
    safe_w = np.where(bad, 1.0, w)
    uv = x[..., :2] / safe_w[..., None]
    uv[bad] = np.inf
    return uv


@dataclass
class KeypointTriangulation:
    """Robust triangulation result for one keypoint across N views."""

    point: np.ndarray  # (3,), mm
    inlier_mask: np.ndarray  # (N,), bool, at least two True
    reproj_error_px2: float  # mean squared pixel error over inlier views


@dataclass
class FrameTriangulation:
    """All keypoints of one frame, plus frame-level aggregates.

    per_keypoint holds None for keypoints with no consensus. epsilon is the
    mean reprojection residual over every (view, keypoint) pair, outlier
    views included, with failed keypoints charged the failure penalty.
    inlier_count is the minimum across keypoints of the number of inlier
    views (failed keypoints count as zero).
    """

    per_keypoint: list
    epsilon: float
    inlier_count: int

    @property
    def points(self) -> np.ndarray:
        """(K, 3) triangulated points with NaN rows for failed keypoints."""
        k = len(self.per_keypoint)
        out = np.full((k, 3), np.nan)
        for i, kt in enumerate(self.per_keypoint):
            if kt is not None:
                out[i] = kt.point
        return out


def _dlt_rows(projections: np.ndarray, points: np.ndarray) -> np.ndarray:
    """DLT constraint rows u*P3-P1, v*P3-P2 for each view: (B, N, 2, 4)."""
    u = points[..., 0:1]
    v = points[..., 1:2]
    p0, p1, p2 = projections[:, 0], projections[:, 1], projections[:, 2]
    return np.stack([u * p2 - p0, v * p2 - p1], axis=-2)


def _solve_nullspace(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest right singular vectors of stacked systems (..., M, 4).

    Returns (solutions (..., 4) scaled to w=1, ok (...,)) where ok is False
    when the two smallest singular values are too close (no clean null
    direction) or the homogeneous coordinate vanishes. Scaling to w=1
    removes the null vector's sign ambiguity so depth signs are meaningful
    downstream; rows with ok=False keep the raw unit vector.
    """
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    x = vt[..., -1, :]
    s1 = s[..., -1]
    s2 = s[..., -2]
    ok = (s2 > 0) & (s1 <= _NULLSPACE_RATIO * s2)
    w = x[..., 3]
    ok &= np.abs(w) > _W_EPS * np.linalg.norm(x, axis=-1)
    safe_w = np.where(np.abs(w) > _W_EPS, w, 1.0)
    return x / safe_w[..., None], ok


def triangulate_dlt(observations) -> np.ndarray:
    """Homogeneous DLT from a sequence of (CameraParams, (u, v)) pairs.

    Stacks two constraint rows per view and returns the smallest right
    singular vector, dehomogenized. Raises InsufficientViews for fewer than
    two observations and IllConditioned when the null space is ambiguous.
    """
    if len(observations) < 2:
        raise InsufficientViews(
            f"triangulation needs at least 2 views, got {len(observations)}"
        )
    projections = np.stack([cam.projection for cam, _ in observations])
    points = np.asarray([uv for _, uv in observations], dtype=float)
    if points.shape != (len(observations), 2):
        raise DimensionMismatch("each observation must be a 2-vector")
    rows = _dlt_rows(projections, points[None, :, :])[0].reshape(-1, 4)
    x, ok = _solve_nullspace(rows)
    if not ok:
        raise IllConditioned("DLT system has no one-dimensional null space")
    return x[:3] / x[3]


def _reproj_dist2(
    projections: np.ndarray, xh: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Squared pixel distance from each view's observation to the reprojection.

    xh: homogeneous points (..., 4); points: (..., N, 2) observations with
    leading dims broadcast against xh's. Views where the point is at or
    behind the camera get +inf (not observable, never an inlier).
    """
    x = np.einsum("nij,...j->...ni", projections, xh)
    w = x[..., 2]
    bad = w <= _W_EPS
    safe_w = np.where(bad, 1.0, w)
    uv = x[..., :2] / safe_w[..., None]
    d2 = np.sum((uv - points) ** 2, axis=-1)
    d2[bad] = np.inf
    return d2


class _BatchTriangulation:
    """Vectorized robust triangulation of B independent keypoints.

    Shared by the single-keypoint, single-frame, and whole-pool entry
    points so every code path uses identical arithmetic. Fields are (B,...)
    arrays; rows with ok=False had no consensus.
    """

    __slots__ = ("points", "inlier_mask", "dist2", "ok", "mean_inlier_err")

    def __init__(self, points, inlier_mask, dist2, ok, mean_inlier_err):
        self.points = points
        self.inlier_mask = inlier_mask
        self.dist2 = dist2
        self.ok = ok
        self.mean_inlier_err = mean_inlier_err


def _robust_triangulate_batch(
    projections: np.ndarray, points: np.ndarray, threshold_px: float
) -> _BatchTriangulation:
    """Exhaustive-pair robust triangulation for B keypoints at once.

    projections: (N, 3, 4); points: (B, N, 2). For every keypoint, each of
    the C(N,2) view pairs yields a DLT hypothesis; the hypothesis with the
    most views within threshold_px wins (ties: lower mean inlier squared
    error, then lower pair index). The winner is refit on its inliers by
    zeroing the constraint rows of outlier views, then mask and errors are
    recomputed against the refit point.
    """
    n_views = projections.shape[0]
    pairs = np.array(list(itertools.combinations(range(n_views), 2)))
    rows = _dlt_rows(projections, points)  # (B, N, 2, 4)

    # Hypotheses: one 4x4 DLT system per pair.
    a_pairs = rows[:, pairs].reshape(points.shape[0], len(pairs), 4, 4)
    xh, valid = _solve_nullspace(a_pairs)  # (B, P, 4), (B, P)
    d2 = _reproj_dist2(projections, xh, points[:, None, :, :])  # (B, P, N)
    inliers = d2 <= threshold_px**2
    inliers[~valid] = False
    counts = inliers.sum(axis=2)  # (B, P)

    with np.errstate(invalid="ignore"):
        mean_err = np.where(
            counts > 0, np.sum(np.where(inliers, d2, 0.0), axis=2) / np.maximum(counts, 1), np.inf
        )

    # Lexicographic best: max count, then min mean error, then first pair.
    best_count = counts.max(axis=1)
    at_max = counts == best_count[:, None]
    err_masked = np.where(at_max, mean_err, np.inf)
    best_err = err_masked.min(axis=1)
    best_pair = np.argmax(at_max & (err_masked == best_err[:, None]), axis=1)

    b_idx = np.arange(points.shape[0])
    hyp_mask = inliers[b_idx, best_pair]  # (B, N)
    hyp_xh = xh[b_idx, best_pair]  # (B, 4)
    ok = best_count >= 2

    # Refit on inliers: zero the rows of outlier views, solve the full
    # (2N, 4) system. Zeroed rows contribute nothing, so this is exactly
    # the DLT on the inlier subset.
    refit_a = rows * hyp_mask[:, :, None, None]
    refit_xh, refit_ok = _solve_nullspace(refit_a.reshape(-1, 2 * n_views, 4))
    # Keep the pair hypothesis where the refit is degenerate.
    use = refit_ok & ok
    final_xh = np.where(use[:, None], refit_xh, hyp_xh)

    d2_final = _reproj_dist2(projections, final_xh, points)  # (B, N)
    final_mask = d2_final <= threshold_px**2
    final_mask[~ok] = False
    final_counts = final_mask.sum(axis=1)
    ok &= final_counts >= 2

    with np.errstate(invalid="ignore"):
        final_err = np.where(
            ok,
            np.sum(np.where(final_mask, d2_final, 0.0), axis=1)
            / np.maximum(final_counts, 1),
            np.inf,
        )
    w = final_xh[:, 3]
    pts = final_xh[:, :3] / np.where(np.abs(w) > _W_EPS, w, 1.0)[:, None]
    pts[~ok] = np.nan
    final_mask[~ok] = False
    return _BatchTriangulation(pts, final_mask, d2_final, ok, final_err)


def robust_triangulate(
    cameras, points, threshold_px: float = 5.0
) -> KeypointTriangulation:
    """Robustly triangulate one keypoint seen in N >= 2 views.

    points: (N, 2) pixel observations aligned with cameras. Raises
    NoConsensus when no view pair explains at least two observations
    within threshold_px.
    """
    pts = np.asarray(points, dtype=float)
    if len(cameras) < 2:
        raise InsufficientViews(
            f"robust triangulation needs at least 2 views, got {len(cameras)}"
        )
    if pts.shape != (len(cameras), 2):
        raise DimensionMismatch(
            f"expected points of shape ({len(cameras)}, 2), got {pts.shape}"
        )
    if threshold_px <= 0:
        raise InvariantViolation("threshold_px must be positive")
    projections = np.stack([c.projection for c in cameras])
    batch = _robust_triangulate_batch(projections, pts[None], threshold_px)
    if not batch.ok[0]:
        raise NoConsensus("no view pair reaches two inliers")
    return KeypointTriangulation(
        point=batch.points[0],
        inlier_mask=batch.inlier_mask[0],
        reproj_error_px2=float(batch.mean_inlier_err[0]),
    )


def aggregate_epsilon(
    dist2: np.ndarray,
    failed: np.ndarray,
    mc_error: str = "squared",
    failure_penalty_px2: float = DEFAULT_FAILURE_PENALTY_PX2,
) -> float:
    """Frame-level reprojection residual from per-(view, keypoint) distances.

    dist2: (K, N) squared pixel distances to the triangulated points;
    failed: (K,) bool marking keypoints with no consensus, whose N entries
    are replaced by the penalty. mc_error picks the residual form:
    "squared" averages dist2, "euclidean" averages sqrt(dist2); the penalty
    is given in squared-pixel units in both modes.
    """
    if mc_error not in ("squared", "euclidean"):
        raise InvariantViolation(f"unknown mc_error mode {mc_error!r}")
    d2 = np.where(failed[:, None], failure_penalty_px2, dist2)
    if mc_error == "euclidean":
        return float(np.mean(np.sqrt(d2)))
    return float(np.mean(d2))


def _frame_results(
    batch: _BatchTriangulation,
    n_keypoints: int,
    n_views: int,
    mc_error: str,
    failure_penalty_px2: float,
) -> list:
    """Slice a pooled batch of F*K keypoints into per-frame results."""
    out = []
    n_frames = batch.points.shape[0] // n_keypoints
    for f in range(n_frames):
        sl = slice(f * n_keypoints, (f + 1) * n_keypoints)
        ok = batch.ok[sl]
        per_kp = [
            KeypointTriangulation(
                point=batch.points[sl][k],
                inlier_mask=batch.inlier_mask[sl][k],
                reproj_error_px2=float(batch.mean_inlier_err[sl][k]),
            )
            if ok[k]
            else None
            for k in range(n_keypoints)
        ]
        eps = aggregate_epsilon(
            batch.dist2[sl], ~ok, mc_error, failure_penalty_px2
        )
        counts = batch.inlier_mask[sl].sum(axis=1)
        out.append(
            FrameTriangulation(
                per_keypoint=per_kp,
                epsilon=eps,
                inlier_count=int(counts.min()) if n_keypoints else 0,
            )
        )
    return out


def frame_triangulate(
    cameras,
    predictions: np.ndarray,
    threshold_px: float = 5.0,
    mc_error: str = "squared",
    failure_penalty_px2: float = DEFAULT_FAILURE_PENALTY_PX2,
) -> FrameTriangulation:
    """Robustly triangulate every keypoint of one frame.

    predictions: (N, K, 2), view-major. Keypoints without consensus become
    None entries and are charged failure_penalty_px2 in epsilon.
    """
    preds = np.asarray(predictions, dtype=float)
    if preds.ndim != 3 or preds.shape[0] != len(cameras) or preds.shape[2] != 2:
        raise DimensionMismatch(
            f"expected predictions of shape (n_views, K, 2), got {preds.shape}"
        )
    return triangulate_frames(
        cameras, preds[None], threshold_px, mc_error, failure_penalty_px2
    )[0]


def triangulate_frames(
    cameras,
    predictions: np.ndarray,
    threshold_px: float = 5.0,
    mc_error: str = "squared",
    failure_penalty_px2: float = DEFAULT_FAILURE_PENALTY_PX2,
    chunk: int = 4096,
) -> list:
    """frame_triangulate over a stack of frames (F, N, K, 2) in one kernel.

    Processes keypoints in chunks to bound peak memory; results are
    identical to calling frame_triangulate per frame.
    """
    preds = np.asarray(predictions, dtype=float)
    if preds.ndim != 4 or preds.shape[1] != len(cameras) or preds.shape[3] != 2:
        raise DimensionMismatch(
            f"expected predictions of shape (F, n_views, K, 2), got {preds.shape}"
        )
    if len(cameras) < 2:
        raise InsufficientViews("triangulation needs at least 2 cameras")
    if threshold_px <= 0:
        raise InvariantViolation("threshold_px must be positive")
    n_frames, n_views, n_kp = preds.shape[:3]
    if n_frames == 0:
        return []
    projections = np.stack([c.projection for c in cameras])
    # (F, N, K, 2) -> (F*K, N, 2): each keypoint is an independent problem.
    flat = preds.transpose(0, 2, 1, 3).reshape(n_frames * n_kp, n_views, 2)
    parts = []
    for start in range(0, flat.shape[0], max(chunk, n_kp)):
        sub = flat[start : start + max(chunk, n_kp)]
        parts.append(_robust_triangulate_batch(projections, sub, threshold_px))
    batch = _BatchTriangulation(
        points=np.concatenate([p.points for p in parts]),
        inlier_mask=np.concatenate([p.inlier_mask for p in parts]),
        dist2=np.concatenate([p.dist2 for p in parts]),
        ok=np.concatenate([p.ok for p in parts]),
        mean_inlier_err=np.concatenate([p.mean_inlier_err for p in parts]),
    )
    return _frame_results(batch, n_kp, n_views, mc_error, failure_penalty_px2)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def fundamental_matrix(cam_a: CameraParams, cam_b: CameraParams) -> np.ndarray:
    """Fundamental matrix mapping points in view a to epipolar lines in b."""
    if np.linalg.norm(cam_a.center - cam_b.center) <= 1e-9:
        raise CoincidentCenters(
            f"cameras {cam_a.id} and {cam_b.id} share a center"
        )
    center_a_h = np.append(cam_a.center, 1.0)
    epipole_b = cam_b.projection @ center_a_h
    return _skew(epipole_b) @ cam_b.projection @ np.linalg.pinv(cam_a.projection)


def epipolar_distance(
    cam_a: CameraParams,
    cam_b: CameraParams,
    point_a: np.ndarray,
    point_b: np.ndarray,
) -> float:
    """Symmetric point-to-epipolar-line distance in pixels.

    Mean of: distance of point_b to the line induced by point_a in view b,
    and distance of point_a to the line induced by point_b in view a.
    """
    f = fundamental_matrix(cam_a, cam_b)
    pa = np.append(np.asarray(point_a, dtype=float).reshape(2), 1.0)
    pb = np.append(np.asarray(point_b, dtype=float).reshape(2), 1.0)
    line_b = f @ pa
    line_a = f.T @ pb
    nb = np.hypot(line_b[0], line_b[1])
    na = np.hypot(line_a[0], line_a[1])
    if nb <= _W_EPS or na <= _W_EPS:
        raise IllConditioned("epipolar line degenerates to a point")
    return float((abs(pb @ line_b) / nb + abs(pa @ line_a) / na) / 2.0)
