#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Desk-scale comparison of the bc, aux and aux-ptr variants.

Layout under the output directory:

    data/main, data/low, data/probe/<task>     generated datasets
    seed-<s>/<variant>/                        training run (train_log.csv, checkpoint.sal)
    seed-<s>/probe_results.csv                 state and BC probe rows of every encoder
    seed-<s>/alignment/                        pairs.csv, alignment_summary.csv
    seed-<s>/low/<variant>/                    low-data runs and their probe rows
    trend_summary.csv                          per-criterion values and pass flags
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import VARIANTS, ExperimentConfig
from models import Trajectory
from performance import PhaseTimer
from services.alignment_service import alignment_report, write_alignment
from services.checkpoint_service import load_encoder
from services.dataset_service import Dataset, generate_dataset, load_dataset
from services.networks import Encoder
from services.probe_service import (
    RESULTS_NAME,
    ProbeRow,
    run_bc_probes,
    train_state_probe,
    write_probe_results,
)
from services.training_service import train_policy
from utils import PathLike, check_directory

logger = logging.getLogger(__name__)

TREND_NAME = "trend_summary.csv"
TREND_COLUMNS = ("criterion", "description", "values", "passed")
LOW_DATA_VARIANTS = ("aux", "aux-ptr")
STATE_TASK = "all"
# success-rate slack of the aux-vs-bc comparison, as a fraction
AUX_SLACK = 0.02


@dataclass
class SeedOutcome:
    """Metrics of one seed across variants."""

    seed: int
    state_val_loss: Dict[str, float] = field(default_factory=dict)
    cosine_rho: Dict[str, float] = field(default_factory=dict)
    success: Dict[str, float] = field(default_factory=dict)
    low_data_success: Dict[str, float] = field(default_factory=dict)


@dataclass
class TrendCheck:
    criterion: str
    description: str
    values: str
    passed: bool


@dataclass
class ExperimentSummary:
    outcomes: List[SeedOutcome]
    checks: List[TrendCheck]
    path: Path

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


def _task_dirname(task: str) -> str:
    return task.replace(":", "_")


def prepare_datasets(config: ExperimentConfig, out_dir: Path) -> Tuple[Dataset, Dataset, List[Trajectory]]:
    """Main, low-data and per-task probe datasets; existing directories are reused."""

    def ensure(path: Path, **update) -> Dataset:
        if not (path / "manifest.json").exists():
            generate_dataset(config.generate.model_copy(update=update), path)
        return load_dataset(path)

    data_dir = out_dir / "data"
    main = ensure(data_dir / "main", n_traj=config.n_demos)
    low = ensure(data_dir / "low", n_traj=config.low_data_demos)
    probe: List[Trajectory] = []
    for k, task in enumerate(config.probe_tasks):
        dataset = ensure(
            data_dir / "probe" / _task_dirname(task),
            n_traj=config.probe_demos_per_task,
            tasks=[task],
            seed=config.generate.seed + 1 + k,
        )
        probe.extend(dataset.trajectories())
    return main, low, probe


def _mean_success(rows: Sequence[ProbeRow]) -> float:
    return float(np.mean([row.success_rate for row in rows]))


def run_seed(
    config: ExperimentConfig,
    seed: int,
    main: Dataset,
    low: Dataset,
    probe_trajs: Sequence[Trajectory],
    out_dir: Path,
) -> SeedOutcome:
    seed_dir = check_directory(out_dir / f"seed-{seed}")
    outcome = SeedOutcome(seed)
    bc_config = config.bc_probe.model_copy(update={"seed": seed})
    state_config = config.state_probe.model_copy(update={"seed": seed})
    rows: List[ProbeRow] = []
    encoders: List[Tuple[str, Encoder]] = []

    for variant in VARIANTS:
        encoder_id = f"{variant}-s{seed}"
        train_config = config.train.for_variant(variant).model_copy(update={"seed": seed})
        with PhaseTimer(f"experiment {encoder_id}"):
            result = train_policy(train_config, main, seed_dir / variant)
            encoder = result.checkpoint.model.encoder
            encoders.append((encoder_id, encoder))

            state = train_state_probe(encoder, main, state_config)
            outcome.state_val_loss[variant] = state.val_loss
            rows.append(
                ProbeRow(encoder_id, STATE_TASK, state_train_loss=state.train_loss, state_val_loss=state.val_loss)
            )
            bc_rows = run_bc_probes(encoder, encoder_id, probe_trajs, bc_config, config.generate.sim)
            outcome.success[variant] = _mean_success(bc_rows)
            rows.extend(bc_rows)

    random_encoder, random_id = load_encoder(f"random:{seed}", config.train.encoder)
    encoders.append((random_id, random_encoder))
    write_probe_results(rows, seed_dir / RESULTS_NAME)

    align_config = config.align.model_copy(update={"seed": seed})
    report = alignment_report(main, encoders, align_config)
    write_alignment(report, seed_dir / "alignment")
    for variant in VARIANTS:
        outcome.cosine_rho[variant] = report.score(f"{variant}-s{seed}", "cosine")
    outcome.cosine_rho["random"] = report.score(random_id, "cosine")

    low_rows: List[ProbeRow] = []
    for variant in LOW_DATA_VARIANTS:
        encoder_id = f"low-{variant}-s{seed}"
        train_config = config.train.for_variant(variant).model_copy(update={"seed": seed})
        result = train_policy(train_config, low, seed_dir / "low" / variant)
        bc_rows = run_bc_probes(
            result.checkpoint.model.encoder, encoder_id, probe_trajs, bc_config, config.generate.sim
        )
        outcome.low_data_success[variant] = _mean_success(bc_rows)
        low_rows.extend(bc_rows)
    write_probe_results(low_rows, seed_dir / "low" / RESULTS_NAME)

    logger.info(
        f"Seed {seed}: state val {outcome.state_val_loss}, cosine rho {outcome.cosine_rho}, "
        f"success {outcome.success}, low-data success {outcome.low_data_success}"
    )
    return outcome


def _fmt(values: Sequence[float]) -> str:
    return " ".join(f"{v:.4f}" for v in values)


def _count(flags: Sequence[bool]) -> int:
    return int(sum(bool(f) for f in flags))


def trend_checks(outcomes: Sequence[SeedOutcome]) -> List[TrendCheck]:
    """
    Directional comparisons over seeds.

    state:      aux-ptr state-probe val loss below bc in all but at most one seed
    alignment:  aux-ptr cosine rho above bc in all but at most one seed, and
                both trained encoders above the random encoder in every seed
    ablation:   mean success aux >= bc - slack and aux-ptr >= bc
    low-data:   mean low-data success aux-ptr >= aux
    """
    n = len(outcomes)
    need = max(n - 1, 1)
    state_wins = [o.state_val_loss["aux-ptr"] < o.state_val_loss["bc"] for o in outcomes]
    rho_wins = [o.cosine_rho["aux-ptr"] > o.cosine_rho["bc"] for o in outcomes]
    over_random = [
        o.cosine_rho["bc"] > o.cosine_rho["random"] and o.cosine_rho["aux-ptr"] > o.cosine_rho["random"]
        for o in outcomes
    ]
    success = {v: float(np.mean([o.success[v] for o in outcomes])) for v in VARIANTS}
    low = {v: float(np.mean([o.low_data_success[v] for o in outcomes])) for v in LOW_DATA_VARIANTS}

    return [
        TrendCheck(
            "state",
            f"aux-ptr state-probe val loss < bc in >= {need}/{n} seeds",
            f"bc {_fmt([o.state_val_loss['bc'] for o in outcomes])}; "
            f"aux-ptr {_fmt([o.state_val_loss['aux-ptr'] for o in outcomes])}",
            _count(state_wins) >= need,
        ),
        TrendCheck(
            "alignment",
            f"aux-ptr cosine rho > bc in >= {need}/{n} seeds; trained > random in {n}/{n}",
            f"bc {_fmt([o.cosine_rho['bc'] for o in outcomes])}; "
            f"aux-ptr {_fmt([o.cosine_rho['aux-ptr'] for o in outcomes])}; "
            f"random {_fmt([o.cosine_rho['random'] for o in outcomes])}",
            _count(rho_wins) >= need and all(over_random),
        ),
        TrendCheck(
            "ablation",
            "mean success aux >= bc - 0.02 and aux-ptr >= bc",
            " ".join(f"{v} {success[v]:.4f}" for v in VARIANTS),
            success["aux"] >= success["bc"] - AUX_SLACK and success["aux-ptr"] >= success["bc"],
        ),
        TrendCheck(
            "low-data",
            "mean low-data success aux-ptr >= aux",
            " ".join(f"{v} {low[v]:.4f}" for v in LOW_DATA_VARIANTS),
            low["aux-ptr"] >= low["aux"],
        ),
    ]


def write_trend_summary(checks: Sequence[TrendCheck], path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TREND_COLUMNS)
        for check in checks:
            writer.writerow([check.criterion, check.description, check.values, str(check.passed).lower()])
    return path


def run_experiment(config: ExperimentConfig, out_dir: PathLike) -> ExperimentSummary:
    """
    Generate data, train every variant for every seed, probe, align and
    summarize the directional comparisons.
    """
    out_dir = check_directory(out_dir)
    with PhaseTimer("experiment datasets"):
        main, low, probe_trajs = prepare_datasets(config, out_dir)
    outcomes = [run_seed(config, seed, main, low, probe_trajs, out_dir) for seed in config.seeds]
    checks = trend_checks(outcomes)
    path = write_trend_summary(checks, out_dir / TREND_NAME)
    for check in checks:
        level = logging.INFO if check.passed else logging.WARNING
        logger.log(level, f"[{'PASS' if check.passed else 'FAIL'}] {check.criterion}: {check.values}")
    return ExperimentSummary(outcomes, checks, path)


__all__ = [
    "ExperimentSummary",
    "SeedOutcome",
    "TrendCheck",
    "prepare_datasets",
    "run_experiment",
    "run_seed",
    "trend_checks",
    "write_trend_summary",
]
