"""
Tests for the property suite
"""
import numpy as np
import pytest

from services.alignment_service import partial_spearman
from services.verification import (
    VerificationReport,
    _run,
    average_ranks,
    brute_force_partial_spearman,
    check_additivity,
    check_inference_parity,
    check_ptr,
    check_spearman,
    run_property_suite,
)


class TestChecks:
    """Test individual property checks on small sample counts"""

    @pytest.mark.unit
    def test_ptr(self):
        """Test involution, gripper order and motion sums"""
        assert check_ptr(n_samples=200) == "200 samples"

    @pytest.mark.unit
    def test_average_ranks(self):
        """Test ties share their average rank"""
        assert average_ranks([3.0, 1.0, 3.0, 2.0]).tolist() == [3.5, 1.0, 3.5, 2.0]

    @pytest.mark.unit
    def test_oracle_agrees(self):
        """Test the fast score matches the definitional oracle"""
        rng = np.random.default_rng(0)
        pose = rng.random(60)
        feat = pose + rng.random(60)
        pix = rng.integers(0, 5, size=60).astype(float)
        expected = brute_force_partial_spearman(feat, pose, pix)
        assert partial_spearman(feat, pose, pix) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.unit
    def test_spearman(self):
        """Test the oracle and invariance check passes"""
        assert check_spearman(instances=6, n=50).startswith("6 instances")

    @pytest.mark.unit
    def test_additivity(self):
        """Test pose deltas equal summed motion"""
        assert check_additivity(rollouts=30).startswith("30 rollouts")

    @pytest.mark.integration
    def test_inference_parity(self):
        """Test stripping or perturbing the inverse-dynamics head leaves rollouts unchanged"""
        assert check_inference_parity(episodes=1, cap=5).endswith("actions identical")


class TestReport:
    """Test result collection"""

    @pytest.mark.unit
    def test_failure_is_collected(self):
        """Test a failing check is recorded rather than raised"""
        report = VerificationReport()
        _run(report, "ok", lambda: "fine")

        def broken():
            raise AssertionError("boom")

        _run(report, "broken", broken)
        assert not report.passed
        data = report.to_dict()
        assert [c["name"] for c in data["checks"]] == ["ok", "broken"]
        assert data["checks"][1]["detail"] == "boom"

    @pytest.mark.slow
    def test_full_suite(self):
        """Test the complete suite passes at default sample counts"""
        assert run_property_suite().passed
