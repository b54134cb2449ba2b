#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
State-feature alignment analysis.

Frame pairs are drawn within single demonstrations at fixed temporal gaps.
For every pair we compare the z-normalized 6-DoF pose distance with two
feature distances of mean-pooled encoder tokens (cosine and norm difference),
controlling for raw image change through a grayscale thumbnail MSE. The score
is the partial Spearman correlation: Pearson correlation of the rank residuals
of feature and pose distance after least-squares regression on the ranked
pixel distance.
"""

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from config import AlignConfig
from exceptions import DatasetError, InputError, UndefinedResultError
from models import MOTION_DIM, FramePair, Trajectory
from performance import PhaseTimer
from services.feature_cache import FeatureCache, encode_frames
from services.networks import Encoder, encoder_digest
from utils import PathLike, check_directory, make_rng
from validators import validate_same_length, validate_shape

logger = logging.getLogger(__name__)

ALIGN_VIEW = "static"
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)
METRICS = ("cosine", "scale")

PAIR_COLUMNS = ("encoder", "traj_id", "i", "j", "gap", "d_cos", "d_scale", "d_pose", "d_pix")
SUMMARY_COLUMNS = ("encoder", "metric", "rho_partial", "n_pairs", "n_dropped")
PAIRS_NAME = "pairs.csv"
SUMMARY_NAME = "alignment_summary.csv"

# stream tag for pair sampling under the analysis seed
_PAIR_STREAM = 4


@dataclass
class AlignmentRow:
    """Partial Spearman score of one (encoder, metric)."""

    encoder: str
    metric: str
    rho_partial: float
    n_pairs: int
    n_dropped: int


@dataclass
class AlignmentReport:
    rows: List[AlignmentRow] = field(default_factory=list)
    pairs: Dict[str, List[FramePair]] = field(default_factory=dict)
    sigma: Optional[np.ndarray] = None

    def score(self, encoder: str, metric: str = "cosine") -> float:
        for row in self.rows:
            if row.encoder == encoder and row.metric == metric:
                return row.rho_partial
        raise KeyError((encoder, metric))


def sample_pairs(
    trajectories: Sequence[Trajectory], config: AlignConfig, seed: Optional[int] = None
) -> List[FramePair]:
    """
    Sample pairs_per_gap frame pairs for every gap.

    For gap g the draw is uniform over all valid (trajectory, t) with
    t + g < T. Gaps no trajectory supports are skipped with a warning.
    """
    seed = config.seed if seed is None else seed
    pairs: List[FramePair] = []
    for gap in config.gaps:
        table = [(traj.traj_id, t) for traj in trajectories for t in range(traj.length - gap)]
        if not table:
            logger.warning(f"No trajectory is longer than gap {gap}; gap omitted")
            continue
        rng = make_rng(seed, _PAIR_STREAM, gap)
        for row in rng.integers(0, len(table), size=config.pairs_per_gap):
            traj_id, t = table[int(row)]
            pairs.append(FramePair(traj_id=traj_id, i=t, j=t + gap, gap=gap))
    return pairs


def pose_sigma(poses: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Per-dimension population std of N x 6 poses, floored."""
    poses = np.asarray(poses, dtype=np.float64)
    validate_shape("poses", poses.shape, (-1, MOTION_DIM))
    if len(poses) == 0:
        raise DatasetError("no frames to compute pose statistics from")
    return np.maximum(poses.std(axis=0), floor)


def pose_distance(s_i, s_j, sigma, floor: float = 1e-8) -> float:
    """Euclidean norm of (s_i - s_j) / sigma over the six pose dims."""
    s_i, s_j, sigma = (np.asarray(v, dtype=np.float64) for v in (s_i, s_j, sigma))
    for name, value in (("s_i", s_i), ("s_j", s_j), ("sigma", sigma)):
        validate_shape(name, value.shape, (MOTION_DIM,))
    if np.any(sigma < floor):
        raise InputError("sigma", sigma.tolist(), f"components must be >= {floor}")
    return float(np.linalg.norm((s_i - s_j) / sigma))


def pooled(tokens: np.ndarray) -> np.ndarray:
    """Mean over the token axis: P x C -> C (or B x P x C -> B x C)."""
    return np.asarray(tokens, dtype=np.float64).mean(axis=-2)


def pooled_distances(h_i: np.ndarray, h_j: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cosine and scale distances between pooled features, row-wise.

    d_cos is NaN where either pooled norm is zero.
    """
    h_i, h_j = np.atleast_2d(h_i), np.atleast_2d(h_j)
    if h_i.shape != h_j.shape:
        raise InputError("h_j", h_j.shape, f"must match {h_i.shape}")
    norm_i = np.linalg.norm(h_i, axis=-1)
    norm_j = np.linalg.norm(h_j, axis=-1)
    denom = norm_i * norm_j
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.einsum("nc,nc->n", h_i, h_j) / denom
    d_cos = np.where(denom > 0, np.clip(1.0 - cos, 0.0, 2.0), np.nan)
    return d_cos, np.abs(norm_i - norm_j)


def feature_distances(z_i: np.ndarray, z_j: np.ndarray) -> Tuple[Optional[float], float]:
    """
    (d_cos, d_scale) between two token maps.

    d_cos is None when a pooled feature has zero norm.
    """
    z_i, z_j = np.asarray(z_i), np.asarray(z_j)
    if z_i.shape != z_j.shape or z_i.ndim != 2:
        raise InputError("tokens", (z_i.shape, z_j.shape), "expected two P x C arrays of equal shape")
    d_cos, d_scale = pooled_distances(pooled(z_i), pooled(z_j))
    cos = float(d_cos[0])
    return (None if np.isnan(cos) else cos), float(d_scale[0])


def thumbnail(image: np.ndarray, thumb: int = 16) -> np.ndarray:
    """Grayscale (luma) image in [0, 1], area-downsampled to thumb x thumb."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError("image", image.shape, "expected H x W x 3")
    height, width = image.shape[:2]
    if height % thumb or width % thumb:
        raise InputError("thumb", thumb, f"must divide the image size {height}x{width}")
    gray = image.astype(np.float64) @ LUMA_WEIGHTS / 255.0
    return gray.reshape(thumb, height // thumb, thumb, width // thumb).mean(axis=(1, 3))


def pixel_control(img_i: np.ndarray, img_j: np.ndarray, thumb: int = 16) -> float:
    """Mean squared difference of the two grayscale thumbnails."""
    if np.shape(img_i) != np.shape(img_j):
        raise InputError("img_j", np.shape(img_j), f"must match {np.shape(img_i)}")
    diff = thumbnail(img_i, thumb) - thumbnail(img_j, thumb)
    return float(np.mean(diff * diff))


def _residualize(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Residual of y after OLS on [1, x]."""
    xc = x - x.mean()
    yc = y - y.mean()
    ss = float(xc @ xc)
    beta = float(xc @ yc) / ss if ss > 0 else 0.0
    return yc - beta * xc


def partial_spearman(d_feat, d_pose, d_pix) -> float:
    """
    Pixel-controlled partial Spearman correlation in [-1, 1].

    Ties get average ranks. A constant control leaves the centered ranks
    unchanged, so the score reduces to the plain Spearman correlation.

    Raises:
        InputError: unequal lengths, fewer than 3 entries or non-finite values
        UndefinedResultError: constant d_feat or d_pose, or a residual that is identically zero
    """
    vectors = [np.asarray(v, dtype=np.float64).ravel() for v in (d_feat, d_pose, d_pix)]
    n = validate_same_length("distances", vectors)
    if n < 3:
        raise InputError("distances", n, "need at least 3 pairs")
    if not all(np.isfinite(v).all() for v in vectors):
        raise InputError("distances", "non-finite", "all distances must be finite")

    r_feat, r_pose, r_pix = (rankdata(v, method="average") for v in vectors)
    for name, ranks in (("d_feat", r_feat), ("d_pose", r_pose)):
        if np.ptp(ranks) == 0:
            raise UndefinedResultError(f"{name} is constant; partial correlation is undefined")

    e_feat = _residualize(r_feat, r_pix)
    e_pose = _residualize(r_pose, r_pix)
    e_feat = e_feat - e_feat.mean()
    e_pose = e_pose - e_pose.mean()
    denom = np.sqrt(float(e_feat @ e_feat) * float(e_pose @ e_pose))
    if denom == 0:
        raise UndefinedResultError("residuals vanish after controlling for d_pix")
    return float(np.clip(float(e_feat @ e_pose) / denom, -1.0, 1.0))


def _frame_table(pairs: Sequence[FramePair]) -> List[Tuple[int, int]]:
    frames = {(p.traj_id, p.i) for p in pairs} | {(p.traj_id, p.j) for p in pairs}
    return sorted(frames)


def score_pairs(
    pairs: Sequence[FramePair], encoder_id: str
) -> List[AlignmentRow]:
    """Partial Spearman rows for both feature metrics; pairs with undefined d_cos are dropped and counted."""
    rows = []
    for metric in METRICS:
        if metric == "cosine":
            kept = [p for p in pairs if p.has_cosine]
            feat = [p.d_cos for p in kept]
        else:
            kept = list(pairs)
            feat = [p.d_scale for p in kept]
        rho = partial_spearman(feat, [p.d_pose for p in kept], [p.d_pix for p in kept])
        rows.append(AlignmentRow(encoder_id, metric, rho, len(kept), len(pairs) - len(kept)))
    return rows


def alignment_report(
    dataset,
    encoders: Sequence[Tuple[str, Encoder]],
    config: AlignConfig = AlignConfig(),
) -> AlignmentReport:
    """
    Score every encoder on one shared pair set.

    Args:
        dataset: loaded Dataset; frames come from config.split
        encoders: (encoder id, encoder) pairs

    Raises:
        ConfigurationError: thumb_size does not divide the dataset image size
        DatasetError: no frames or no pairs
        UndefinedResultError: a degenerate distance vector
    """
    config.check_image_size(dataset.manifest.image_size)
    trajectories = dataset.trajectories(config.split)
    if not trajectories:
        raise DatasetError(f"split '{config.split}' has no trajectories for alignment")
    by_id = {traj.traj_id: traj for traj in trajectories}
    pairs = sample_pairs(trajectories, config)
    if not pairs:
        raise DatasetError("no frame pairs could be sampled for the requested gaps")

    frames = _frame_table(pairs)
    frame_index = {frame: k for k, frame in enumerate(frames)}
    poses = np.stack([by_id[i].poses[t] for i, t in frames])
    sigma = pose_sigma(poses, config.sigma_floor)
    images = [by_id[i].observations[ALIGN_VIEW][t] for i, t in frames]

    base = []
    for p in pairs:
        a, b = frame_index[(p.traj_id, p.i)], frame_index[(p.traj_id, p.j)]
        base.append(
            replace(
                p,
                d_pose=pose_distance(poses[a], poses[b], sigma, config.sigma_floor),
                d_pix=pixel_control(images[a], images[b], config.thumb_size),
            )
        )

    report = AlignmentReport(sigma=sigma)
    keys = [(i, t, ALIGN_VIEW) for i, t in frames]
    for encoder_id, encoder in encoders:
        with PhaseTimer(f"align {encoder_id}"):
            tokens = encode_frames(encoder, keys, images, FeatureCache(), encoder_digest(encoder))
        features = pooled(tokens)
        left = np.array([frame_index[(p.traj_id, p.i)] for p in base])
        right = np.array([frame_index[(p.traj_id, p.j)] for p in base])
        d_cos, d_scale = pooled_distances(features[left], features[right])
        scored = [
            replace(p, d_cos=None if np.isnan(c) else float(c), d_scale=float(s))
            for p, c, s in zip(base, d_cos, d_scale)
        ]
        report.pairs[encoder_id] = scored
        rows = score_pairs(scored, encoder_id)
        report.rows.extend(rows)
        dropped = rows[0].n_dropped
        logger.info(
            f"Alignment {encoder_id}: cosine {rows[0].rho_partial:.4f} scale {rows[1].rho_partial:.4f} "
            f"over {len(scored)} pairs ({dropped} dropped)"
        )
    return report


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_alignment(report: AlignmentReport, out_dir: PathLike) -> Tuple[Path, Path]:
    """Write pairs.csv and alignment_summary.csv."""
    out_dir = check_directory(out_dir)
    pairs_path = out_dir / PAIRS_NAME
    summary_path = out_dir / SUMMARY_NAME
    with open(pairs_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(PAIR_COLUMNS)
        for encoder_id, pairs in report.pairs.items():
            for p in pairs:
                writer.writerow(
                    [encoder_id, p.traj_id, p.i, p.j, p.gap]
                    + [_cell(v) for v in (p.d_cos, p.d_scale, p.d_pose, p.d_pix)]
                )
    with open(summary_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for row in report.rows:
            writer.writerow([row.encoder, row.metric, repr(row.rho_partial), row.n_pairs, row.n_dropped])
    return pairs_path, summary_path


def read_alignment_summary(path: PathLike) -> List[AlignmentRow]:
    with open(path, newline="", encoding="utf-8") as f:
        return [
            AlignmentRow(
                encoder=row["encoder"],
                metric=row["metric"],
                rho_partial=float(row["rho_partial"]),
                n_pairs=int(row["n_pairs"]),
                n_dropped=int(row["n_dropped"]),
            )
            for row in csv.DictReader(f)
        ]


__all__ = [
    "AlignmentReport",
    "AlignmentRow",
    "alignment_report",
    "feature_distances",
    "partial_spearman",
    "pixel_control",
    "pose_distance",
    "pose_sigma",
    "read_alignment_summary",
    "sample_pairs",
    "score_pairs",
    "write_alignment",
]
