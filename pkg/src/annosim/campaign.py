"""Annotation-campaign driver and report emission.

One campaign = one dataset, one strategy, one seed. Each iteration:

1. infer 2D keypoints (and heatmaps when the strategy needs them) for the
   whole unlabeled pool with the current predictor state,
2. robustly triangulate every unlabeled frame,
3. optionally promote the most consistent frames to pseudo-labels,
4. select a batch to annotate and move it to the labeled set,
5. recompute the predictor's pool summary ("retraining"),
6. evaluate MKPE on the held-out split from fresh predictions.

All randomness is keyed by (campaign seed, iteration, frame id), and the
per-frame inference work is order-independent, so reports are byte-stable
for a given config and seed regardless of worker count. The initial
labeled set depends only on the seed, never the strategy, so strategies
are compared from identical starting pools.
"""

from __future__ import annotations

import dataclasses
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import batch_entropy, cost_report, kmeans_poses
from .config import CampaignConfig, save_resolved
from .dataset import Dataset, load_dataset
from .errors import IllConditioned, InsufficientViews, InvariantViolation
from .geometry import project_many, triangulate_dlt, triangulate_frames
from .pose import align_root
from .predictor import NoiseModel, infer, summarize_pool
from .pseudolabel import DriftSummary, PseudoLabel, drift_stats, select_pseudo_labels
from .selection import PoolState, score_bsb, score_mpe, select_batch

CSV_COLUMNS = (
    "iteration",
    "labeled_count",
    "labeled_fraction",
    "mkpe_mm",
    "mean_epsilon",
    "pseudo_count",
    "pseudo_drift_mean_mm",
    "entropy",
    "hours_elapsed",
)


@dataclass
class IterationRow:
    """One report row; None fields serialize as empty CSV cells."""

    iteration: int
    labeled_count: int
    labeled_fraction: float
    mkpe_mm: float
    mean_epsilon: float | None
    pseudo_count: int
    pseudo_drift_mean_mm: float | None
    entropy: float
    hours_elapsed: float


@dataclass
class IterationDetail:
    """Instrumentation kept out of the CSV: selection sets, drift, timing."""

    iteration: int
    selected: list
    pseudo: list  # PseudoLabel entries chosen this iteration
    pseudo_all_views_inliers: bool
    drift: DriftSummary
    unlabeled_mkpe_mm: float
    eval_skipped_keypoints: int
    wall_seconds: float


@dataclass
class CampaignResult:
    strategy: str
    seed: int
    rows: list
    details: list

    def pseudo_id_history(self) -> list:
        """Per-iteration pseudo-label id sets, for schedule checks."""
        return [set(p.frame_id for p in d.pseudo) for d in self.details]


def _mix_model_seed(noise: NoiseModel, campaign_seed: int) -> NoiseModel:
    """Derive the per-campaign predictor seed from the noise seed and the
    campaign seed, so different seeds get independent noise streams."""
    mixed = int(
        np.random.SeedSequence([int(noise.seed), int(campaign_seed)]).generate_state(
            1, np.uint64
        )[0]
    )
    return dataclasses.replace(noise, seed=mixed)


class _Runtime:
    """Per-campaign immutable context shared by the iteration steps."""

    def __init__(self, dataset: Dataset, config: CampaignConfig, seed: int):
        self.dataset = dataset
        self.config = config
        self.seed = int(seed)
        self.cameras = dataset.cameras
        self.n_views = len(dataset.cameras)
        self.kp = dataset.keypoint_count
        self.train_ids = sorted(dataset.train_ids)
        self.heldout_ids = sorted(dataset.heldout_ids)
        self.image_size = dataset.image_size()
        self.penalty_px2 = self.image_size[0] ** 2 + self.image_size[1] ** 2
        self.model = _mix_model_seed(config.noise, seed)

        if config.cs_root_index >= self.kp:
            raise InvariantViolation(
                f"cs_root_index {config.cs_root_index} outside pose of {self.kp} keypoints"
            )
        if config.analysis.root_index >= self.kp:
            raise InvariantViolation(
                f"analysis.root_index {config.analysis.root_index} outside pose"
            )
        need = config.init_labeled + config.iterations * config.batch_per_iter
        if need > len(self.train_ids):
            raise InvariantViolation(
                f"budget needs {need} train frames, split has {len(self.train_ids)}"
            )

        # Ground-truth projections for every frame, computed once.
        projections = np.stack([c.projection for c in self.cameras])
        order = sorted(f.id for f in dataset.frames)
        self._index = {fid: i for i, fid in enumerate(order)}
        all_poses = dataset.poses(order)
        self._gt2d = project_many(projections, all_poses)  # (V, F, K, 2)
        if not np.all(np.isfinite(self._gt2d)):
            raise InvariantViolation("a ground-truth keypoint projects degenerately")

        # Fixed clustering of the train split for the entropy diagnostic.
        aligned = np.stack(
            [
                align_root(dataset.frame(f).pose, config.analysis.root_index)
                for f in self.train_ids
            ]
        )
        self.cluster_model = kmeans_poses(
            aligned, config.analysis.clusters, seed=config.analysis.seed
        )

    def gt2d(self, frame_id: int) -> np.ndarray:
        return self._gt2d[:, self._index[frame_id]]

    def gt_pose(self, frame_id: int) -> np.ndarray:
        return self.dataset.frame(frame_id).pose

    def selection_entropy(self, frame_ids) -> float:
        aligned = np.stack(
            [
                align_root(self.gt_pose(f), self.config.analysis.root_index)
                for f in frame_ids
            ]
        )
        return batch_entropy(self.cluster_model, aligned)

    def infer_frames(self, frame_ids, summary, iteration, score_with=None):
        """Predict all frames; returns (points (F, V, K, 2), score map).

        score_with is "bsb"/"mpe" to also compute heatmap scores, which is
        the only part that needs rendering. Work is distributed over the
        configured worker threads; per-frame results depend only on the
        frame key, so the output is identical for any worker count.
        """
        cfg = self.config

        def one(fid):
            fp = infer(
                fid,
                self.gt_pose(fid),
                self.cameras,
                summary,
                self.model,
                iteration,
                spec=cfg.heatmap,
                image_size=self.image_size,
                include_heatmaps=score_with is not None,
                gt2d=self.gt2d(fid),
            )
            if score_with == "bsb":
                score = score_bsb(fid, fp.heatmap_stack, cfg.peaks).value
            elif score_with == "mpe":
                score = score_mpe(fid, fp.heatmap_stack, cfg.peaks).value
            else:
                score = None
            return fp.points, score

        ids = list(frame_ids)
        if cfg.workers > 1 and len(ids) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(one, ids))
        else:
            results = [one(f) for f in ids]
        points = np.stack([r[0] for r in results]) if ids else np.empty(
            (0, self.n_views, self.kp, 2)
        )
        scores = {fid: r[1] for fid, r in zip(ids, results)}
        return points, scores

    def triangulate(self, points):
        return triangulate_frames(
            self.cameras,
            points,
            threshold_px=self.config.ransac_threshold_px,
            mc_error=self.config.mc_error,
            failure_penalty_px2=self.penalty_px2,
        )

    def predicted_pose(self, ft, points_2d) -> np.ndarray:
        """Best-effort (K, 3) predicted pose: robust points, with an
        all-view DLT fill-in for keypoints that lost consensus."""
        pts = ft.points
        missing = np.isnan(pts[:, 0])
        for k in np.nonzero(missing)[0]:
            obs = list(zip(self.cameras, points_2d[:, k]))
            try:
                pts[k] = triangulate_dlt(obs)
            except (InsufficientViews, IllConditioned):
                pass  # stays NaN, handled by the caller
        return pts

    def aligned_predicted_pose(self, ft, points_2d) -> np.ndarray:
        """Root-aligned predicted pose; unresolvable keypoints sit at the
        origin so distances stay finite."""
        pts = self.predicted_pose(ft, points_2d)
        root = self.config.cs_root_index
        if np.isnan(pts[root, 0]):
            return np.zeros_like(pts)
        aligned = pts - pts[root]
        aligned[np.isnan(aligned[:, 0])] = 0.0
        return aligned

    def evaluate_mkpe(self, summary, iteration) -> tuple:
        """Held-out MKPE from fresh predictions: (mm, skipped keypoints)."""
        points, _ = self.infer_frames(self.heldout_ids, summary, iteration)
        fts = self.triangulate(points)
        errors = []
        skipped = 0
        for fid, ft, preds in zip(self.heldout_ids, fts, points):
            gt = self.gt_pose(fid)
            est = self.predicted_pose(ft, preds)
            valid = ~np.isnan(est[:, 0])
            skipped += int((~valid).sum())
            if valid.any():
                errors.append(np.linalg.norm(est[valid] - gt[valid], axis=1))
        if not errors:
            raise InvariantViolation("held-out evaluation produced no keypoints")
        return float(np.concatenate(errors).mean()), skipped


def _unlabeled_mkpe(runtime, frame_ids, fts) -> float:
    """Mean over frames of the per-frame triangulation MKPE (valid
    keypoints only); the benchmark pseudo-label drift is measured the same
    way, so the two are directly comparable."""
    per_frame = []
    for fid, ft in zip(frame_ids, fts):
        pts = ft.points
        valid = ~np.isnan(pts[:, 0])
        if valid.any():
            gt = runtime.gt_pose(fid)
            per_frame.append(
                float(np.linalg.norm(pts[valid] - gt[valid], axis=1).mean())
            )
    return float(np.mean(per_frame)) if per_frame else float("nan")


def run_campaign(dataset: Dataset, config: CampaignConfig, seed: int) -> CampaignResult:
    """Execute one campaign and return its rows and instrumentation."""
    rt = _Runtime(dataset, config, seed)
    cfg = config
    n_train = len(rt.train_ids)

    # Initial pool: seed-determined, strategy-independent.
    init_rng = np.random.default_rng(np.random.SeedSequence((rt.seed, 0)))
    picked = init_rng.choice(n_train, size=cfg.init_labeled, replace=False)
    initial = sorted(rt.train_ids[i] for i in picked)
    pool = PoolState(
        labeled=set(initial),
        unlabeled=set(rt.train_ids) - set(initial),
        pseudo=set(),
        iteration=0,
    )
    pool.check()

    def retrain(pseudo_points):
        poses = [rt.gt_pose(f) for f in sorted(pool.labeled)]
        poses += [pseudo_points[f] for f in sorted(pseudo_points)]
        return summarize_pool(poses, n_train, root_index=cfg.cs_root_index)

    summary = retrain({})
    mkpe0, skipped0 = rt.evaluate_mkpe(summary, iteration=0)
    rows = [
        IterationRow(
            iteration=0,
            labeled_count=len(pool.labeled),
            labeled_fraction=len(pool.labeled) / n_train,
            mkpe_mm=mkpe0,
            mean_epsilon=None,
            pseudo_count=0,
            pseudo_drift_mean_mm=None,
            entropy=rt.selection_entropy(initial),
            hours_elapsed=cost_report(0, len(pool.labeled), cfg.cost).al_hours,
        )
    ]
    details = []
    prev_pseudo = set()

    for iteration in range(1, cfg.iterations + 1):
        t0 = time.perf_counter()
        pool.iteration = iteration
        unlabeled = sorted(pool.unlabeled)
        score_with = cfg.strategy if cfg.strategy in ("bsb", "mpe") else None
        points, scores = rt.infer_frames(unlabeled, summary, iteration, score_with)
        fts = rt.triangulate(points)
        ft_map = dict(zip(unlabeled, fts))
        pts_map = dict(zip(unlabeled, points))
        mean_eps = float(np.mean([ft.epsilon for ft in fts]))

        # Self-training: promote consistent frames before selecting.
        pseudo_entries = []
        pseudo_points = {}
        drift = DriftSummary(0, float("nan"), float("nan"), float("nan"))
        amount = cfg.pseudo_amount() if cfg.st.enabled else 0
        if amount > 0:
            chosen = select_pseudo_labels(
                pool, prev_pseudo, amount, ft_map, rt.n_views, cfg.st.variant
            )
            pool.pseudo = set(chosen)
            pool.check()
            for fid in chosen:
                ft = ft_map[fid]
                pseudo_points[fid] = ft.points
                pseudo_entries.append(
                    PseudoLabel(
                        frame_id=fid,
                        points=ft.points,
                        epsilon=ft.epsilon,
                        iteration=iteration,
                    )
                )
            drift = drift_stats(
                pseudo_points, {f: rt.gt_pose(f) for f in pseudo_points}
            )
        else:
            pool.pseudo = set()

        # Active-learning selection over the remaining candidates.
        if cfg.strategy == "rand":
            batch = select_batch(
                "rand",
                pool,
                cfg.batch_per_iter,
                seed=(rt.seed, iteration),
            )
        elif cfg.strategy in ("bsb", "mpe"):
            batch = select_batch(cfg.strategy, pool, cfg.batch_per_iter, scores=scores)
        elif cfg.strategy == "mvc":
            eps_scores = {f: ft_map[f].epsilon for f in pool.candidates()}
            batch = select_batch("mvc", pool, cfg.batch_per_iter, scores=eps_scores)
        else:  # coreset
            labeled_ids = sorted(pool.labeled)
            lab_points, _ = rt.infer_frames(labeled_ids, summary, iteration)
            lab_fts = rt.triangulate(lab_points)
            labeled_poses = np.stack(
                [
                    rt.aligned_predicted_pose(ft, pts)
                    for ft, pts in zip(lab_fts, lab_points)
                ]
            )
            candidate_poses = {
                f: rt.aligned_predicted_pose(ft_map[f], pts_map[f])
                for f in pool.candidates()
            }
            batch = select_batch(
                "coreset",
                pool,
                cfg.batch_per_iter,
                candidate_poses=candidate_poses,
                labeled_poses=labeled_poses,
            )
        pool.annotate(batch)

        summary = retrain(pseudo_points)
        mkpe_i, skipped = rt.evaluate_mkpe(summary, iteration)
        all_inliers = all(
            ft_map[f].inlier_count == rt.n_views for f in pseudo_points
        )
        rows.append(
            IterationRow(
                iteration=iteration,
                labeled_count=len(pool.labeled),
                labeled_fraction=len(pool.labeled) / n_train,
                mkpe_mm=mkpe_i,
                mean_epsilon=mean_eps,
                pseudo_count=len(pseudo_points),
                pseudo_drift_mean_mm=drift.mean_mm if drift.count else None,
                entropy=rt.selection_entropy(batch),
                hours_elapsed=cost_report(iteration, len(pool.labeled), cfg.cost).al_hours,
            )
        )
        details.append(
            IterationDetail(
                iteration=iteration,
                selected=list(batch),
                pseudo=pseudo_entries,
                pseudo_all_views_inliers=all_inliers,
                drift=drift,
                unlabeled_mkpe_mm=_unlabeled_mkpe(rt, unlabeled, fts),
                eval_skipped_keypoints=skipped,
                wall_seconds=time.perf_counter() - t0,
            )
        )
        prev_pseudo = set(pseudo_points)

    return CampaignResult(strategy=cfg.strategy, seed=rt.seed, rows=rows, details=details)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def report_csv_text(result: CampaignResult) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in result.rows:
        lines.append(
            ",".join(
                _cell(v)
                for v in (
                    r.iteration,
                    r.labeled_count,
                    r.labeled_fraction,
                    r.mkpe_mm,
                    r.mean_epsilon,
                    r.pseudo_count,
                    r.pseudo_drift_mean_mm,
                    r.entropy,
                    r.hours_elapsed,
                )
            )
        )
    return "\n".join(lines) + "\n"


def aggregate_csv_text(results) -> str:
    """Across-seed mean and sample variance of MKPE per iteration."""
    if not results:
        raise InvariantViolation("aggregate of zero campaign results")
    n_rows = {len(r.rows) for r in results}
    if len(n_rows) != 1:
        raise InvariantViolation("campaign results have differing row counts")
    lines = ["iteration,labeled_count,mkpe_mean_mm,mkpe_var_mm2"]
    for i in range(n_rows.pop()):
        rows = [r.rows[i] for r in results]
        counts = {r.labeled_count for r in rows}
        if len(counts) != 1:
            raise InvariantViolation("labeled counts differ across seeds")
        vals = np.array([r.mkpe_mm for r in rows])
        var = repr(float(vals.var(ddof=1))) if len(vals) > 1 else ""
        lines.append(
            f"{rows[0].iteration},{counts.pop()},{repr(float(vals.mean()))},{var}"
        )
    return "\n".join(lines) + "\n"


def run(config: CampaignConfig, out_dir) -> list:
    """Run the configured campaign for every seed and write the run
    directory: resolved config, one report CSV per seed, and the
    across-seed aggregate. Returns the CampaignResult list."""
    dataset = load_dataset(config.dataset)
    os.makedirs(out_dir, exist_ok=True)
    save_resolved(config, os.path.join(out_dir, "config.yaml"))
    results = []
    for seed in config.seeds:
        result = run_campaign(dataset, config, seed)
        path = os.path.join(out_dir, f"report_seed{seed}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(report_csv_text(result))
        results.append(result)
    with open(os.path.join(out_dir, "aggregate.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(aggregate_csv_text(results))
    return results
