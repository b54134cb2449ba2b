#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Property suite behind the `verify` command.

    ptr            involution, gripper-order reversal, motion-sum negation
    gradients      finite-difference checks of encoder, policy, invdyn and probe
    spearman       brute-force oracle equivalence and monotone invariance
    additivity     pose change equals summed motion on clamp-free rollouts
    parity         policy rollouts with and without the inverse-dynamics head
"""

import logging
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
import torch

from config import EncoderConfig, HeadConfig, SimConfig, TrainConfig
from models import ACTION_DIM, GRIPPER_INDEX, MOTION_DIM, Action, ActionStats, InvDynSample
from services.alignment_service import partial_spearman
from services.checkpoint_service import Checkpoint, load_checkpoint, save_checkpoint
from services.gradcheck import COMPONENTS, grad_check, l1_subgradient_at_zero
from services.networks import VisuomotorModel
from services.probe_service import rollout_eval
from services.sampling import gripper_sequence, ptr_reverse
from services.simulator import reset, step
from services.training_service import policy_fn_from_model
from utils import make_rng

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-10
ADDITIVITY_TOLERANCE = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    elapsed_s: float = 0.0


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail, "elapsed_s": round(c.elapsed_s, 3)}
                for c in self.checks
            ],
        }


def random_invdyn_sample(rng: np.random.Generator, image_size: int = 4) -> InvDynSample:
    horizon = int(rng.integers(1, 9))
    chunk = rng.uniform(-0.05, 0.05, size=(horizon, ACTION_DIM)).astype(np.float32)
    chunk[:, GRIPPER_INDEX] = rng.integers(0, 2, size=horizon)
    views = {}
    for key in ("first", "second"):
        views[key] = {
            v: rng.integers(0, 256, size=(image_size, image_size, 3), dtype=np.uint8)
            for v in ("static", "wrist")
        }
    return InvDynSample(
        obs_first=views["first"],
        obs_second=views["second"],
        chunk=chunk,
        reversed=bool(rng.integers(2)),
        source=(int(rng.integers(1000)), int(rng.integers(1000))),
    )


def check_ptr(n_samples: int = 10_000, seed: int = 0) -> str:
    rng = make_rng(seed, 100)
    for k in range(n_samples):
        sample = random_invdyn_sample(rng)
        rev = ptr_reverse(sample)
        if not ptr_reverse(rev).equals(sample):
            raise AssertionError(f"sample {k}: ptr_reverse is not an involution")
        if not np.array_equal(gripper_sequence(rev.chunk), gripper_sequence(sample.chunk)[::-1]):
            raise AssertionError(f"sample {k}: gripper order not reversed")
        for d in range(MOTION_DIM):
            if math.fsum(rev.chunk[:, d].tolist()) != -math.fsum(sample.chunk[:, d].tolist()):
                raise AssertionError(f"sample {k}: motion sum not negated in dim {d}")
        if rev.reversed == sample.reversed:
            raise AssertionError(f"sample {k}: reversed flag not toggled")
    return f"{n_samples} samples"


def check_gradients(trials: int = 5, seed: int = 0) -> str:
    errors = []
    for component in COMPONENTS:
        report = grad_check(component, trials=trials, seed=seed)
        if not report.passed:
            worst = max(report.block_errors, key=report.block_errors.get)
            raise AssertionError(f"{component}: {worst} relative error {report.max_error:.2e}")
        errors.append(f"{component} {report.max_error:.1e}")
    subgradient = l1_subgradient_at_zero()
    if subgradient != 0.0:
        raise AssertionError(f"L1 subgradient at zero is {subgradient}, expected 0")
    return ", ".join(errors)


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Rank by direct counting: 1 + #smaller + (#equal - 1) / 2."""
    values = np.asarray(values, dtype=np.float64)
    ranks = np.empty(len(values))
    for k, v in enumerate(values):
        smaller = np.count_nonzero(values < v)
        equal = np.count_nonzero(values == v)
        ranks[k] = 1.0 + smaller + (equal - 1) / 2.0
    return ranks


def brute_force_partial_spearman(d_feat, d_pose, d_pix) -> float:
    """Definitional oracle: rank, least-squares residuals against [1, rank(d_pix)], Pearson."""
    r_feat, r_pose, r_pix = (average_ranks(v) for v in (d_feat, d_pose, d_pix))
    design = np.column_stack([np.ones(len(r_pix)), r_pix])
    resid = []
    for y in (r_feat, r_pose):
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid.append(y - design @ coef)
    return float(np.corrcoef(resid[0], resid[1])[0, 1])


def _random_triple(rng: np.random.Generator, n: int) -> Tuple[np.ndarray, ...]:
    pose = rng.random(n)
    feat = 0.5 * pose + rng.random(n)
    pix = rng.integers(0, 20, size=n).astype(np.float64) if rng.random() < 0.5 else rng.random(n)
    return feat, pose, pix


def check_spearman(instances: int = 100, n: int = 200, seed: int = 0) -> str:
    rng = make_rng(seed, 101)
    transforms: List[Callable[[np.ndarray], np.ndarray]] = [np.exp, lambda v: v**3 + 2.0 * v, np.log1p]
    worst = 0.0
    for k in range(instances):
        feat, pose, pix = _random_triple(rng, n)
        rho = partial_spearman(feat, pose, pix)
        delta = abs(rho - brute_force_partial_spearman(feat, pose, pix))
        worst = max(worst, delta)
        if delta > ORACLE_TOLERANCE:
            raise AssertionError(f"instance {k}: oracle mismatch {delta:.2e}")
        transform = transforms[k % len(transforms)]
        for position in range(3):
            vectors = [feat, pose, pix]
            vectors[position] = transform(vectors[position])
            if partial_spearman(*vectors) != rho:
                raise AssertionError(f"instance {k}: not invariant to a monotone transform of input {position}")
    return f"{instances} instances, max |delta| {worst:.1e}"


def check_additivity(rollouts: int = 1000, seed: int = 0, config: SimConfig = SimConfig()) -> str:
    rng = make_rng(seed, 102)
    worst = 0.0
    for r in range(rollouts):
        state = reset(int(rng.integers(2**31)), None, config)
        start = state.ee.as_array()
        total = np.zeros(MOTION_DIM)
        for _ in range(int(rng.integers(1, 21))):
            motion = rng.uniform(-config.max_step, config.max_step, size=MOTION_DIM) * 0.2
            pose = state.ee.as_array() + motion
            inside = (
                np.all(pose[:2] >= 0.0)
                and np.all(pose[:2] <= 1.0)
                and 0.0 <= pose[2] <= config.z_max
                and np.all(np.abs(pose[3:]) < math.pi)
            )
            if not inside:
                break
            action = Action(tuple(motion[:3].tolist()), tuple(motion[3:].tolist()), 0)
            state = step(state, action, config)
            total += motion
        delta = float(np.max(np.abs(state.ee.as_array() - start - total)))
        worst = max(worst, delta)
        if delta > ADDITIVITY_TOLERANCE:
            raise AssertionError(f"rollout {r}: pose delta differs from summed motion by {delta:.2e}")
    return f"{rollouts} rollouts, max error {worst:.1e}"


def _parity_config() -> TrainConfig:
    return TrainConfig(
        horizon=2,
        steps=1,
        seed=3,
        encoder=EncoderConfig(image_size=64, patch_size=16, channels=8, depth=1),
        heads=HeadConfig(invdyn_dim=8, policy_token_dim=4, policy_hidden_dim=16, instruction_dim=4),
    )


def check_inference_parity(seed: int = 0, episodes: int = 2, cap: int = 15) -> str:
    config = _parity_config()
    model = VisuomotorModel.build(config, with_invdyn=True)
    stats = ActionStats(mean=[0.0] * MOTION_DIM, std=[0.02] * MOTION_DIM, floored=[False] * MOTION_DIM)
    checkpoint = Checkpoint(config=config, step=0, model=model, action_stats=stats)
    tasks = ["pick:red", "reach:blue"]

    def trace(ckpt: Checkpoint) -> List[np.ndarray]:
        actions: List[np.ndarray] = []
        policy = policy_fn_from_model(ckpt.model, ckpt.action_stats)

        def recording(obs, instr):
            action = policy(obs, instr)
            actions.append(action.to_array())
            return action

        rollout_eval(recording, tasks, n_rollouts=episodes, episode_cap=cap, rollout_seed=seed)
        return actions

    with tempfile.TemporaryDirectory() as tmp:
        path = save_checkpoint(checkpoint, Path(tmp) / "checkpoint.sal")
        full = load_checkpoint(path)
        stripped = load_checkpoint(save_checkpoint(full.strip_invdyn(), Path(tmp) / "stripped.sal"))
    if stripped.has_invdyn or not full.has_invdyn:
        raise AssertionError("stripped checkpoint still carries the inverse-dynamics head")

    reference = trace(full)
    with torch.no_grad():
        for param in full.model.invdyn.parameters():
            param.add_(1.0)
    for label, ckpt in (("stripped", stripped), ("perturbed invdyn", full)):
        actions = trace(ckpt)
        if len(actions) != len(reference) or not all(
            np.array_equal(a, b) for a, b in zip(actions, reference)
        ):
            raise AssertionError(f"{label} rollouts differ from the full checkpoint")
    return f"{len(reference)} actions identical"


def _run(report: VerificationReport, name: str, check: Callable[[], str]) -> None:
    start = time.perf_counter()
    try:
        detail = check()
        passed = True
    except AssertionError as e:
        detail, passed = str(e), False
    elapsed = time.perf_counter() - start
    report.checks.append(CheckResult(name, passed, detail, elapsed))
    level = logging.INFO if passed else logging.ERROR
    logger.log(level, f"[{'PASS' if passed else 'FAIL'}] {name}: {detail} ({elapsed:.1f}s)")


def run_property_suite(seed: int = 0) -> VerificationReport:
    """Run every property check; failures are collected, not raised."""
    report = VerificationReport()
    _run(report, "ptr", lambda: check_ptr(seed=seed))
    _run(report, "gradients", lambda: check_gradients(seed=seed))
    _run(report, "spearman", lambda: check_spearman(seed=seed))
    _run(report, "additivity", lambda: check_additivity(seed=seed))
    _run(report, "parity", lambda: check_inference_parity(seed=seed))
    return report
