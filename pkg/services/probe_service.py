#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Frozen-encoder probes.

    train_bc_probe     per-task behavior cloning head on static-view tokens
    rollout_eval       closed-loop success rate of a policy over seeded episodes
    train_state_probe  8-dim proprioceptive state regression head

Probe heads for different encoders share init seeds, data order and configs.
The encoder digest is compared before and after every probe run.
"""

import csv
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from config import VIEW_NAMES, BCProbeConfig, SimConfig, StateProbeConfig
from exceptions import DatasetError, FrozenEncoderError, UndefinedResultError
from models import ACTION_DIM, STATE_DIM, Action, ActionStats, Instruction, Observation, Trajectory
from performance import PhaseTimer
from services.dataset_service import compute_action_stats, split_ids
from services.expert import expert_action
from services.feature_cache import FeatureCache, encode_batch, encode_frames
from services.networks import Encoder, ProbeHead, chunk_loss, encoder_digest, fan_in_uniform_, freeze
from services.rendering import observe
from services.sampling import IndexSampler
from services.simulator import DEFAULT_SIM, is_success, reset_episode, step
from services.training_service import chunk_to_action, normalize_chunks
from utils import PathLike, atomic_write_text, derive_seed, make_rng
from validators import parse_instruction

logger = logging.getLogger(__name__)

PROBE_VIEW = "static"
RESULTS_NAME = "probe_results.csv"
RESULT_COLUMNS = (
    "encoder_id",
    "task",
    "success_rate",
    "bc_train_loss",
    "bc_val_loss",
    "state_train_loss",
    "state_val_loss",
)

# stream tags under the probe seed
_SAMPLING_STREAM = 1
_HEAD_STREAM = 20
_DROPOUT_STREAM = 21
_VAL_SUBSET_STREAM = 22

PolicyFn = Callable[[Observation, Instruction], Action]


@dataclass
class ProbeResult:
    """Trained probe head with its loss curves and reported summaries."""

    head: ProbeHead
    train_losses: List[float]
    val_curve: List[Tuple[int, float]]
    train_loss: float
    val_loss: float
    encoder_digest: str
    action_stats: Optional[ActionStats] = None
    baseline_val_loss: Optional[float] = None
    final_val_loss: Optional[float] = None

    @property
    def val_losses(self) -> List[float]:
        return [loss for _, loss in self.val_curve]


@dataclass
class RolloutReport:
    """Success fraction per task and over all episodes."""

    success: Dict[str, List[bool]] = field(default_factory=dict)

    @property
    def per_task(self) -> Dict[str, float]:
        return {task: float(np.mean(flags)) for task, flags in self.success.items()}

    @property
    def aggregate(self) -> float:
        flags = [flag for task_flags in self.success.values() for flag in task_flags]
        return float(np.mean(flags)) if flags else 0.0


@dataclass
class ProbeRow:
    """One line of the probe results table."""

    encoder_id: str
    task: str
    success_rate: Optional[float] = None
    bc_train_loss: Optional[float] = None
    bc_val_loss: Optional[float] = None
    state_train_loss: Optional[float] = None
    state_val_loss: Optional[float] = None


def summarize_losses(
    train_losses: Sequence[float], val_losses: Sequence[float], window: Optional[int] = None
) -> Tuple[float, float]:
    """
    Reported (train, val) loss of a probe run.

    The train loss is the mean over all steps, or over the last `window` steps
    when a window is given; the val loss is the mean of the periodic
    validation evaluations.

    Raises:
        UndefinedResultError: no train losses or no validation evaluations
    """
    if len(train_losses) == 0:
        raise UndefinedResultError("no training steps were recorded")
    if len(val_losses) == 0:
        raise UndefinedResultError("no validation evaluations were recorded")
    recorded = list(train_losses)
    if window is not None:
        recorded = recorded[-window:]
    return float(np.mean(recorded)), float(np.mean(val_losses))


@contextmanager
def frozen_encoder(encoder: Encoder) -> Iterator[str]:
    """
    Freeze an encoder for the duration of a probe and verify its digest afterwards.

    Raises:
        FrozenEncoderError: parameters changed inside the block
    """
    before = encoder_digest(encoder)
    flags = [param.requires_grad for param in encoder.parameters()]
    was_training = encoder.training
    freeze(encoder)
    try:
        yield before
    finally:
        for param, flag in zip(encoder.parameters(), flags):
            param.requires_grad_(flag)
        encoder.train(was_training)
    after = encoder_digest(encoder)
    if after != before:
        raise FrozenEncoderError(before, after)


class FrozenFeatures:
    """Static-view tokens of dataset frames; the cache must not be shared across datasets."""

    def __init__(
        self,
        encoder: Encoder,
        trajectories: Sequence[Trajectory],
        digest: str,
        cache: Optional[FeatureCache] = None,
        view: str = PROBE_VIEW,
    ):
        self.encoder = encoder
        self.trajectories = {traj.traj_id: traj for traj in trajectories}
        self.digest = digest
        self.cache = cache if cache is not None else FeatureCache()
        self.view = view

    def __call__(self, frames: Sequence[Tuple[int, int]]) -> torch.Tensor:
        keys = [(traj_id, t, self.view) for traj_id, t in frames]
        images = [self.trajectories[traj_id].observations[self.view][t] for traj_id, t in frames]
        return torch.from_numpy(encode_frames(self.encoder, keys, images, self.cache, self.digest))


def _new_head(encoder: Encoder, d_out: int, config: Union[BCProbeConfig, StateProbeConfig]) -> ProbeHead:
    head = ProbeHead(
        encoder.num_tokens,
        encoder.channels,
        d_out,
        proj_dim=config.proj_dim,
        hidden_dim=config.hidden_dim,
        dropout=config.dropout,
    )
    return fan_in_uniform_(head, derive_seed(config.seed, _HEAD_STREAM))


def _due(step: int, every: int) -> bool:
    return (step + 1) % every == 0


@torch.no_grad()
def _evaluate(head: ProbeHead, loss_fn: Callable[[torch.Tensor], torch.Tensor]) -> float:
    head.eval()
    try:
        return float(loss_fn(head).item())
    finally:
        head.train()


def _final_validation(
    head: ProbeHead,
    loss_fn: Callable[[torch.Tensor], torch.Tensor],
    val_curve: List[Tuple[int, float]],
    steps: int,
) -> float:
    """
    Validation loss of the trained head.

    It enters the reported mean only when the run was shorter than one
    evaluation interval.
    """
    final = _evaluate(head, loss_fn)
    head.eval()
    if not val_curve:
        val_curve.append((steps, final))
    return final


def train_bc_probe(
    encoder: Encoder,
    trajectories: Sequence[Trajectory],
    config: BCProbeConfig = BCProbeConfig(),
    cache: Optional[FeatureCache] = None,
) -> ProbeResult:
    """
    Train a behavior cloning probe on one task's demonstrations.

    Args:
        encoder: frozen encoder; its parameters are never updated
        trajectories: demonstrations of a single task
        config: probe settings (H_BC, steps, eval cadence, validation fraction)

    Returns:
        ProbeResult with the full train curve and the validation evaluations

    Raises:
        DatasetError: too few demonstrations for a train/validation split
        FrozenEncoderError: the encoder changed during training
    """
    trajectories = list(trajectories)
    if len(trajectories) < 2:
        raise DatasetError(
            f"BC probe needs at least 2 demonstrations for a validation split, got {len(trajectories)}"
        )
    train_idx, val_idx = split_ids(len(trajectories), config.val_fraction, config.seed)
    train_trajs = [trajectories[i] for i in train_idx]
    val_trajs = [trajectories[i] for i in val_idx]
    horizon = config.horizon
    sampler = IndexSampler(train_trajs, horizon)
    try:
        val_frames = IndexSampler(val_trajs, horizon).all_indices()
    except DatasetError:
        raise DatasetError(f"no validation demonstration is long enough for horizon {horizon}")
    stats = compute_action_stats(train_trajs)

    def targets(trajs: Sequence[Trajectory], frames: Sequence[Tuple[int, int]]) -> torch.Tensor:
        chunks = np.stack([trajs[i].actions[t : t + horizon] for i, t in frames])
        return normalize_chunks(chunks, stats)

    val_ids = [(val_trajs[i].traj_id, t) for i, t in val_frames]
    val_target = targets(val_trajs, val_frames)

    with frozen_encoder(encoder) as digest, torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(config.seed, _DROPOUT_STREAM))
        features = FrozenFeatures(encoder, trajectories, digest, cache)
        val_tokens = features(val_ids)
        head = _new_head(encoder, horizon * ACTION_DIM, config)
        head.train()
        optimizer = torch.optim.Adam(head.parameters(), lr=config.lr)
        rng = make_rng(config.seed, _SAMPLING_STREAM)

        def val_loss(model: ProbeHead) -> torch.Tensor:
            pred = model(val_tokens).view(-1, horizon, ACTION_DIM)
            return chunk_loss(pred, val_target, config.lambda_g)

        train_losses: List[float] = []
        val_curve: List[Tuple[int, float]] = []
        with PhaseTimer(f"bc probe {trajectories[0].instruction.key}"):
            for step_index in range(config.steps):
                frames = sampler.sample(rng, config.batch_size)
                tokens = features([(train_trajs[i].traj_id, t) for i, t in frames])
                pred = head(tokens).view(-1, horizon, ACTION_DIM)
                loss = chunk_loss(pred, targets(train_trajs, frames), config.lambda_g)
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                train_losses.append(float(loss.item()))
                if _due(step_index, config.eval_every):
                    val_curve.append((step_index + 1, _evaluate(head, val_loss)))
                    logger.debug(f"bc probe step {step_index + 1}: val {val_curve[-1][1]:.5f}")
        final = _final_validation(head, val_loss, val_curve, config.steps)

    train_loss, val_mean = summarize_losses(
        train_losses, [v for _, v in val_curve], config.train_loss_window
    )
    logger.info(
        f"BC probe {trajectories[0].instruction.key}: train {train_loss:.5f} val {val_mean:.5f}"
    )
    return ProbeResult(
        head=head,
        train_losses=train_losses,
        val_curve=val_curve,
        train_loss=train_loss,
        val_loss=val_mean,
        encoder_digest=digest,
        action_stats=stats,
        final_val_loss=final,
    )


def probe_policy_fn(
    encoder: Encoder, result: ProbeResult, sim: SimConfig = DEFAULT_SIM
) -> PolicyFn:
    """Closed-loop policy from a BC probe: first action of each predicted chunk, then re-plan."""
    head = result.head
    head.eval()
    horizon = head.d_out // ACTION_DIM

    @torch.no_grad()
    def act(obs: Observation, instr: Instruction) -> Action:
        tokens = torch.from_numpy(encode_batch(encoder, obs[PROBE_VIEW][None]))
        pred = head(tokens).view(-1, horizon, ACTION_DIM)
        return chunk_to_action(pred[0].numpy(), result.action_stats, sim.max_step)

    return act


def expert_policy_fn(sim: SimConfig = DEFAULT_SIM) -> PolicyFn:
    """Scripted expert as a policy; reads the privileged state attached to the observation."""

    def act(obs: Observation, instr: Instruction) -> Action:
        return expert_action(obs.state, instr, sim)

    return act


def random_policy_fn(seed: int = 0, sim: SimConfig = DEFAULT_SIM) -> PolicyFn:
    """Uniform random motion within the step cap and a random gripper command."""
    rng = make_rng(seed)

    def act(obs: Observation, instr: Instruction) -> Action:
        motion = rng.uniform(-sim.max_step, sim.max_step, size=6)
        return Action(tuple(motion[:3].tolist()), tuple(motion[3:].tolist()), int(rng.integers(2)))

    return act


def rollout_eval(
    policy_fn: PolicyFn,
    tasks: Sequence[Union[str, Instruction]],
    n_rollouts: int = 20,
    episode_cap: int = 200,
    rollout_seed: int = 1_000_000,
    sim: SimConfig = DEFAULT_SIM,
    views: Sequence[str] = VIEW_NAMES,
) -> RolloutReport:
    """
    Run seeded closed-loop episodes per task.

    Episode r of every task starts from seed rollout_seed + r; an episode
    succeeds when the goal predicate holds within episode_cap steps.

    Args:
        policy_fn: maps (Observation, Instruction) to the next Action
        tasks: instruction keys or Instructions
        views: views rendered for the policy (empty for state-based policies)
    """
    report = RolloutReport()
    for task in tasks:
        instr = parse_instruction(task)
        flags = []
        for r in range(n_rollouts):
            state, _ = reset_episode(rollout_seed + r, instr, sim)
            success = is_success(state, instr, sim)
            for _ in range(episode_cap):
                if success:
                    break
                obs = observe(state, sim, views)
                obs.state = state
                state = step(state, policy_fn(obs, instr), sim)
                success = is_success(state, instr, sim)
            flags.append(success)
        report.success[instr.key] = flags
        logger.info(f"Rollouts {instr.key}: {sum(flags)}/{n_rollouts} successful")
    return report


def _state_frames(trajectories: Sequence[Trajectory]) -> List[Tuple[int, int]]:
    frames = []
    for traj in trajectories:
        if traj.states.ndim != 2 or traj.states.shape[1] != STATE_DIM:
            raise DatasetError(
                f"trajectory {traj.traj_id} has no {STATE_DIM}-dim proprio stream",
                {"shape": list(traj.states.shape)},
            )
        frames.extend((traj.traj_id, t) for t in range(traj.length))
    return frames


def train_state_probe(
    encoder: Encoder,
    dataset,
    config: StateProbeConfig = StateProbeConfig(),
    cache: Optional[FeatureCache] = None,
) -> ProbeResult:
    """
    Train an 8-output state probe with mean absolute error on the training split.

    Validation runs on (a seeded subset of) the validation split every
    eval_every steps; the trained head is evaluated once more for
    final_val_loss. The per-dimension median of the training targets gives the
    constant-predictor baseline.

    Raises:
        DatasetError: empty split or missing proprio streams
        FrozenEncoderError: the encoder changed during training
    """
    train_trajs = dataset.trajectories("train")
    val_trajs = dataset.trajectories("val")
    if not train_trajs or not val_trajs:
        raise DatasetError("state probe needs non-empty train and validation splits")
    by_id = {traj.traj_id: traj for traj in (*train_trajs, *val_trajs)}
    train_frames = _state_frames(train_trajs)
    val_frames = _state_frames(val_trajs)
    if len(val_frames) > config.max_val_frames:
        keep = make_rng(config.seed, _VAL_SUBSET_STREAM).choice(
            len(val_frames), size=config.max_val_frames, replace=False
        )
        val_frames = [val_frames[i] for i in sorted(keep)]

    def targets(frames: Sequence[Tuple[int, int]]) -> torch.Tensor:
        return torch.from_numpy(
            np.stack([by_id[i].states[t] for i, t in frames]).astype(np.float32)
        )

    val_target = targets(val_frames)
    train_target_all = targets(train_frames)
    median = train_target_all.median(dim=0).values
    baseline = float((val_target - median).abs().mean().item())

    batch = config.batch_size

    with frozen_encoder(encoder) as digest, torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(config.seed, _DROPOUT_STREAM))
        features = FrozenFeatures(encoder, list(by_id.values()), digest, cache)
        val_tokens = features(val_frames)
        head = _new_head(encoder, STATE_DIM, config)
        head.train()
        optimizer = torch.optim.Adam(head.parameters(), lr=config.lr)
        rng = make_rng(config.seed, _SAMPLING_STREAM)

        def val_loss(model: ProbeHead) -> torch.Tensor:
            return (model(val_tokens) - val_target).abs().mean()

        train_losses: List[float] = []
        val_curve: List[Tuple[int, float]] = []
        step_index = 0
        with PhaseTimer("state probe"):
            for _ in range(config.epochs):
                order = rng.permutation(len(train_frames))
                for start in range(0, len(order), batch):
                    rows = order[start : start + batch]
                    frames = [train_frames[i] for i in rows]
                    images = np.stack([by_id[i].observations[PROBE_VIEW][t] for i, t in frames])
                    tokens = torch.from_numpy(encode_batch(encoder, images))
                    loss = (head(tokens) - train_target_all[torch.from_numpy(rows)]).abs().mean()
                    optimizer.zero_grad(set_to_none=True)
                    loss.backward()
                    optimizer.step()
                    train_losses.append(float(loss.item()))
                    if _due(step_index, config.eval_every):
                        val_curve.append((step_index + 1, _evaluate(head, val_loss)))
                    step_index += 1
        final = _final_validation(head, val_loss, val_curve, step_index)

    train_loss, val_mean = summarize_losses(train_losses, [v for _, v in val_curve])
    logger.info(
        f"State probe: train {train_loss:.5f} val {val_mean:.5f} "
        f"(final {final:.5f}, median baseline {baseline:.5f})"
    )
    return ProbeResult(
        head=head,
        train_losses=train_losses,
        val_curve=val_curve,
        train_loss=train_loss,
        val_loss=val_mean,
        encoder_digest=digest,
        baseline_val_loss=baseline,
        final_val_loss=final,
    )


def task_groups(trajectories: Sequence[Trajectory]) -> Dict[str, List[Trajectory]]:
    """Demonstrations grouped by instruction key, keys sorted."""
    groups: Dict[str, List[Trajectory]] = {}
    for traj in trajectories:
        groups.setdefault(traj.instruction.key, []).append(traj)
    return dict(sorted(groups.items()))


def run_bc_probes(
    encoder: Encoder,
    encoder_id: str,
    trajectories: Sequence[Trajectory],
    config: BCProbeConfig = BCProbeConfig(),
    sim: SimConfig = DEFAULT_SIM,
) -> List[ProbeRow]:
    """One BC probe per task, each evaluated with rollouts from its final head."""
    rows = []
    for task, task_trajs in task_groups(trajectories).items():
        result = train_bc_probe(encoder, task_trajs, config)
        report = rollout_eval(
            probe_policy_fn(encoder, result, sim),
            [task],
            n_rollouts=config.n_rollouts,
            episode_cap=config.episode_cap,
            rollout_seed=config.rollout_seed,
            sim=sim,
            views=(PROBE_VIEW,),
        )
        rows.append(
            ProbeRow(
                encoder_id=encoder_id,
                task=task,
                success_rate=report.per_task[task],
                bc_train_loss=result.train_loss,
                bc_val_loss=result.val_loss,
            )
        )
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_probe_results(rows: Sequence[ProbeRow], path: PathLike) -> Path:
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        data = asdict(row)
        lines.append(",".join(_cell(data[column]) for column in RESULT_COLUMNS))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_probe_results(path: PathLike) -> List[ProbeRow]:
    def number(text: str) -> Optional[float]:
        return float(text) if text != "" else None

    with open(path, newline="", encoding="utf-8") as f:
        return [
            ProbeRow(
                encoder_id=row["encoder_id"],
                task=row["task"],
                **{column: number(row[column]) for column in RESULT_COLUMNS[2:]},
            )
            for row in csv.DictReader(f)
        ]


__all__ = [
    "ProbeResult",
    "ProbeRow",
    "RESULT_COLUMNS",
    "RolloutReport",
    "expert_policy_fn",
    "frozen_encoder",
    "probe_policy_fn",
    "random_policy_fn",
    "read_probe_results",
    "rollout_eval",
    "run_bc_probes",
    "summarize_losses",
    "task_groups",
    "train_bc_probe",
    "train_state_probe",
    "write_probe_results",
]
