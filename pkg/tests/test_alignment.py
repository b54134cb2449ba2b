"""
Tests for the state-feature alignment analysis
"""
import numpy as np
import pytest
from scipy.stats import spearmanr

from config import AlignConfig
from exceptions import ConfigurationError, InputError, UndefinedResultError
from models import FramePair
from services.alignment_service import (
    PAIRS_NAME,
    SUMMARY_NAME,
    alignment_report,
    feature_distances,
    partial_spearman,
    pixel_control,
    pose_distance,
    pose_sigma,
    read_alignment_summary,
    sample_pairs,
    score_pairs,
    thumbnail,
    write_alignment,
)
from services.networks import Encoder
from tests.conftest import make_trajectory


class TestDistances:
    """Test pose, feature and pixel distances"""

    @pytest.mark.unit
    def test_pose_distance(self):
        """Test a 3-4-5 displacement under unit scales"""
        assert pose_distance(np.zeros(6), [3, 4, 0, 0, 0, 0], np.ones(6)) == pytest.approx(5.0)

    @pytest.mark.unit
    def test_pose_distance_scaled(self):
        """Test per-dimension normalization"""
        sigma = [2, 1, 1, 1, 1, 1]
        assert pose_distance(np.zeros(6), [2, 0, 0, 0, 0, 0], sigma) == pytest.approx(1.0)

    @pytest.mark.unit
    def test_pose_distance_is_a_metric(self):
        """Test non-negativity, identity, symmetry and the triangle inequality on random poses"""
        rng = np.random.default_rng(7)
        for _ in range(25):
            a, b, c = rng.normal(size=(3, 6))
            sigma = rng.uniform(0.1, 1.0, size=6)
            ab, ba = pose_distance(a, b, sigma), pose_distance(b, a, sigma)
            assert pose_distance(a, a, sigma) == 0.0
            assert ab >= 0.0
            assert ab == pytest.approx(ba)
            assert pose_distance(a, c, sigma) <= ab + pose_distance(b, c, sigma) + 1e-12

    @pytest.mark.unit
    def test_pose_sigma_floor(self):
        """Test constant dimensions are floored"""
        poses = np.zeros((4, 6))
        poses[:, 0] = [0, 1, 0, 1]
        sigma = pose_sigma(poses, floor=1e-8)
        assert sigma[0] == pytest.approx(0.5)
        assert sigma[1] == 1e-8

    @pytest.mark.unit
    def test_sigma_below_floor(self):
        """Test scales under the floor are rejected"""
        with pytest.raises(InputError):
            pose_distance(np.zeros(6), np.ones(6), np.zeros(6))

    @pytest.mark.unit
    def test_feature_distances(self):
        """Test identical tokens are at distance zero"""
        tokens = np.random.default_rng(0).normal(size=(16, 8))
        d_cos, d_scale = feature_distances(tokens, tokens)
        assert d_cos == pytest.approx(0.0, abs=1e-12)
        assert d_scale == 0.0

    @pytest.mark.unit
    def test_cosine_range(self):
        """Test d_cos stays in [0, 2] and opposite pooled features reach 2"""
        rng = np.random.default_rng(5)
        for _ in range(25):
            d_cos, d_scale = feature_distances(rng.normal(size=(4, 8)), rng.normal(size=(4, 8)))
            assert 0.0 <= d_cos <= 2.0
            assert d_scale >= 0.0
        tokens = rng.normal(size=(4, 8))
        d_cos, _ = feature_distances(tokens, -tokens)
        assert d_cos == pytest.approx(2.0)

    @pytest.mark.unit
    def test_scaled_features(self):
        """Test scaling changes d_scale but not d_cos"""
        tokens = np.random.default_rng(1).normal(size=(4, 8))
        d_cos, d_scale = feature_distances(tokens, 2 * tokens)
        assert d_cos == pytest.approx(0.0, abs=1e-12)
        assert d_scale == pytest.approx(np.linalg.norm(tokens.mean(axis=0)))

    @pytest.mark.unit
    def test_zero_features(self):
        """Test cosine distance is undefined for a zero pooled feature"""
        d_cos, _ = feature_distances(np.zeros((4, 8)), np.ones((4, 8)))
        assert d_cos is None

    @pytest.mark.unit
    def test_pixel_control_extremes(self):
        """Test black against white is 1 and an image against itself is 0"""
        black = np.zeros((16, 16, 3), dtype=np.uint8)
        white = np.full((16, 16, 3), 255, dtype=np.uint8)
        assert pixel_control(black, white, 4) == pytest.approx(1.0)
        assert pixel_control(white, white, 4) == 0.0

    @pytest.mark.unit
    def test_thumbnail(self):
        """Test area downsampling and size checks"""
        image = np.zeros((16, 16, 3), dtype=np.uint8)
        image[:8] = 255
        thumb = thumbnail(image, 2)
        assert thumb.shape == (2, 2)
        assert thumb[0, 0] == pytest.approx(1.0)
        assert thumb[1, 1] == 0.0
        with pytest.raises(InputError):
            thumbnail(image, 5)


class TestPartialSpearman:
    """Test the pixel-controlled partial Spearman correlation"""

    @pytest.mark.unit
    def test_perfect_agreement(self):
        """Test identical feature and pose rankings give 1"""
        rng = np.random.default_rng(0)
        pose = rng.random(50)
        assert partial_spearman(pose, pose, rng.random(50)) == pytest.approx(1.0)

    @pytest.mark.unit
    def test_perfect_disagreement(self):
        """Test reversed rankings give -1"""
        rng = np.random.default_rng(1)
        pose = rng.random(50)
        assert partial_spearman(-pose, pose, rng.random(50)) == pytest.approx(-1.0)

    @pytest.mark.unit
    def test_constant_control(self):
        """Test a constant control reduces to the plain Spearman correlation"""
        rng = np.random.default_rng(2)
        feat, pose = rng.random(40), rng.random(40)
        expected = spearmanr(feat, pose).correlation
        assert partial_spearman(feat, pose, np.ones(40)) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.unit
    def test_monotone_invariance(self):
        """Test monotone transforms leave the score unchanged"""
        rng = np.random.default_rng(3)
        feat, pose, pix = rng.random(30), rng.random(30), rng.random(30)
        rho = partial_spearman(feat, pose, pix)
        assert partial_spearman(np.exp(feat), pose ** 3, pix * 10) == pytest.approx(rho, abs=1e-12)

    @pytest.mark.unit
    def test_constant_feature(self):
        """Test a constant distance vector is undefined"""
        with pytest.raises(UndefinedResultError):
            partial_spearman(np.ones(10), np.arange(10), np.arange(10)[::-1])

    @pytest.mark.unit
    def test_control_explains_everything(self):
        """Test residuals that vanish after the control are undefined"""
        x = np.arange(10.0)
        with pytest.raises(UndefinedResultError):
            partial_spearman(x, x ** 2, x)

    @pytest.mark.unit
    def test_too_short(self):
        """Test fewer than three pairs"""
        with pytest.raises(InputError):
            partial_spearman([1, 2], [1, 2], [1, 2])

    @pytest.mark.unit
    def test_non_finite(self):
        """Test non-finite distances"""
        with pytest.raises(InputError):
            partial_spearman([1, 2, np.nan], [1, 2, 3], [1, 2, 3])


class TestPairs:
    """Test pair sampling and scoring"""

    @pytest.mark.unit
    def test_sample_pairs(self):
        """Test pairs per gap, gap offsets and determinism"""
        trajs = [make_trajectory(length=6, traj_id=i, seed=i) for i in range(3)]
        config = AlignConfig(gaps=[1, 3], pairs_per_gap=5, seed=2)
        pairs = sample_pairs(trajs, config)
        assert len(pairs) == 10
        assert all(p.j - p.i == p.gap and p.j < 6 for p in pairs)
        assert pairs == sample_pairs(trajs, config)

    @pytest.mark.unit
    def test_unsupported_gap_skipped(self):
        """Test gaps longer than every trajectory are omitted"""
        config = AlignConfig(gaps=[1, 10], pairs_per_gap=4)
        pairs = sample_pairs([make_trajectory(length=5)], config)
        assert {p.gap for p in pairs} == {1}

    @pytest.mark.unit
    def test_score_pairs_drops_undefined_cosine(self):
        """Test undefined cosine distances are dropped and counted"""
        rng = np.random.default_rng(4)
        pairs = [
            FramePair(0, k, k + 1, 1, d_cos=float(rng.random()), d_scale=float(rng.random()),
                      d_pose=float(rng.random()), d_pix=float(rng.random()))
            for k in range(10)
        ]
        pairs[0].d_cos = None
        cosine, scale = score_pairs(pairs, "enc")
        assert (cosine.metric, cosine.n_pairs, cosine.n_dropped) == ("cosine", 9, 1)
        assert (scale.metric, scale.n_pairs, scale.n_dropped) == ("scale", 10, 0)


class TestAlignmentReport:
    """Test the end-to-end analysis"""

    @pytest.mark.integration
    def test_report(self, tmp_path, tiny_dataset, tiny_encoder_config, tiny_align_config):
        """Test every encoder is scored on one shared pair set and written out"""
        encoders = [
            ("random:0", Encoder(tiny_encoder_config, init_seed=0)),
            ("random:1", Encoder(tiny_encoder_config, init_seed=1)),
        ]
        report = alignment_report(tiny_dataset, encoders, tiny_align_config)
        assert len(report.rows) == 4
        assert all(-1.0 <= row.rho_partial <= 1.0 for row in report.rows)
        shared = [(p.traj_id, p.i, p.j) for p in report.pairs["random:0"]]
        assert shared == [(p.traj_id, p.i, p.j) for p in report.pairs["random:1"]]
        assert len(shared) == 24
        with pytest.raises(KeyError):
            report.score("random:2")

        pairs_path, summary_path = write_alignment(report, tmp_path)
        assert pairs_path.name == PAIRS_NAME
        assert summary_path.name == SUMMARY_NAME
        assert read_alignment_summary(summary_path) == report.rows

    @pytest.mark.integration
    def test_deterministic(self, tiny_dataset, tiny_encoder_config, tiny_align_config):
        """Test repeated analyses agree"""
        encoder = Encoder(tiny_encoder_config, init_seed=3)
        a = alignment_report(tiny_dataset, [("e", encoder)], tiny_align_config)
        b = alignment_report(tiny_dataset, [("e", encoder)], tiny_align_config)
        assert a.rows == b.rows

    @pytest.mark.integration
    def test_thumb_size_checked_first(self, tiny_dataset):
        """Test a thumbnail size that does not divide the images fails before any pair is scored"""
        config = AlignConfig(gaps=[1], pairs_per_gap=4, thumb_size=5, split="all")
        with pytest.raises(ConfigurationError, match="thumb_size"):
            alignment_report(tiny_dataset, [], config)
