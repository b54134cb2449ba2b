#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Finite-difference gradient verification.

Each trial builds a small random configuration in double precision, computes
analytic gradients with autograd and compares them against central
differences on sampled coordinates of every parameter block. The L1 term uses
the subgradient 0 at a zero residual (torch.sign convention); trial targets are
placed away from the kink so the central difference is well defined.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np
import torch
from torch import nn

from config import EncoderConfig, HeadConfig
from exceptions import ConfigurationError
from models import ACTION_DIM, GRIPPER_INDEX, MOTION_DIM, VOCABULARY
from services.networks import Encoder, InvDynHead, PolicyHead, ProbeHead, chunk_loss, fan_in_uniform_
from utils import make_rng

logger = logging.getLogger(__name__)

COMPONENTS = ("encoder", "policy", "invdyn", "probe")
DEFAULT_TOLERANCE = 1e-3
FD_STEP = 1e-5
ERROR_FLOOR = 1e-12


@dataclass
class GradCheckReport:
    """Max relative error per parameter block over all trials."""

    component: str
    trials: int
    block_errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def max_error(self) -> float:
        return max(self.block_errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def to_dict(self) -> Dict:
        return {
            "component": self.component,
            "trials": self.trials,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "block_errors": dict(sorted(self.block_errors.items())),
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|a - n| / max(max|a|, max|n|, 1e-12)."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    if analytic.size == 0:
        return 0.0
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), ERROR_FLOOR)
    return float(np.abs(analytic - numeric).max() / scale)


def _random_setup(rng: np.random.Generator):
    image, patch = [(4, 2), (8, 4), (8, 2)][int(rng.integers(3))]
    encoder_cfg = EncoderConfig(
        image_size=image,
        patch_size=patch,
        channels=int(rng.integers(3, 6)),
        depth=int(rng.integers(1, 3)),
        seed=int(rng.integers(0, 2**31)),
    )
    horizon = int(rng.integers(1, 4))
    batch = int(rng.integers(2, 4))
    return encoder_cfg, horizon, batch


def _targets_away_from_kink(pred: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
    offsets = rng.uniform(0.1, 0.5, size=tuple(pred.shape)) * rng.choice([-1.0, 1.0], size=tuple(pred.shape))
    target = pred.detach().clone() + torch.from_numpy(offsets)
    target[..., GRIPPER_INDEX] = torch.from_numpy(rng.integers(0, 2, size=tuple(pred.shape[:-1])).astype(np.float64))
    return target


def _build_trial(component: str, rng: np.random.Generator) -> Tuple[Callable[[], torch.Tensor], List[Tuple[str, nn.Parameter]]]:
    encoder_cfg, horizon, batch = _random_setup(rng)
    p, c = encoder_cfg.num_tokens, encoder_cfg.channels
    encoder = Encoder(encoder_cfg).double()
    size = encoder_cfg.image_size
    images = [torch.from_numpy(rng.uniform(0, 1, size=(batch, size, size, 3))) for _ in range(2)]

    if component in ("encoder", "invdyn"):
        head = fan_in_uniform_(InvDynHead(p, c, horizon, dim=int(rng.integers(3, 6))), int(rng.integers(2**31))).double()

        def forward():
            return head(encoder(images[0]), encoder(images[1]))

    elif component == "policy":
        heads = HeadConfig(policy_token_dim=3, policy_hidden_dim=6, instruction_dim=4)
        head = fan_in_uniform_(PolicyHead(p, c, horizon, ["static"], heads), int(rng.integers(2**31))).double()
        ids = torch.from_numpy(rng.integers(0, len(VOCABULARY), size=batch))

        def forward():
            return head({"static": encoder(images[0])}, ids)

    else:
        head = fan_in_uniform_(
            ProbeHead(p, c, horizon * ACTION_DIM, proj_dim=4, hidden_dim=5, dropout=0.1),
            int(rng.integers(2**31)),
        ).double()

        def forward():
            return head(encoder(images[0])).view(batch, horizon, ACTION_DIM)

    encoder.eval()
    head.eval()
    with torch.no_grad():
        target = _targets_away_from_kink(forward(), rng)

    def loss() -> torch.Tensor:
        return chunk_loss(forward(), target, lambda_g=0.01)

    module = encoder if component == "encoder" else head
    prefix = "encoder" if component == "encoder" else component
    params = [(f"{prefix}.{name}", param) for name, param in module.named_parameters()]
    return loss, params


def grad_check(
    component: str,
    trials: int = 5,
    seed: int = 0,
    coords_per_block: int = 8,
    step: float = FD_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradCheckReport:
    """
    Compare analytic and central-difference gradients for one component.

    Args:
        component: one of encoder, policy, invdyn, probe
        trials: number of random small configurations

    Returns:
        GradCheckReport with the max relative error per parameter block
    """
    if component not in COMPONENTS:
        raise ConfigurationError("component", f"must be one of {', '.join(COMPONENTS)}")
    report = GradCheckReport(component=component, trials=trials, tolerance=tolerance)

    for trial in range(trials):
        rng = make_rng(seed, trial)
        loss_fn, params = _build_trial(component, rng)
        for _, param in params:
            param.grad = None
        loss_fn().backward()

        with torch.no_grad():
            for name, param in params:
                flat = param.view(-1)
                count = min(coords_per_block, flat.numel())
                coords = rng.choice(flat.numel(), size=count, replace=False)
                analytic = param.grad.view(-1)[torch.from_numpy(coords)].numpy().copy()
                numeric = np.empty(count)
                for k, i in enumerate(coords):
                    original = flat[i].item()
                    flat[i] = original + step
                    plus = loss_fn().item()
                    flat[i] = original - step
                    minus = loss_fn().item()
                    flat[i] = original
                    numeric[k] = (plus - minus) / (2 * step)
                error = relative_error(analytic, numeric)
                report.block_errors[name] = max(report.block_errors.get(name, 0.0), error)

    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"grad_check {component}: max relative error {report.max_error:.2e} over {trials} trials")
    return report


def l1_subgradient_at_zero() -> float:
    """Gradient of the motion L1 term at a zero residual (0 by convention)."""
    pred = torch.zeros(1, 1, ACTION_DIM, dtype=torch.float64, requires_grad=True)
    target = torch.zeros(1, 1, ACTION_DIM, dtype=torch.float64)
    chunk_loss(pred, target, lambda_g=0.0).backward()
    return float(pred.grad[..., :MOTION_DIM].abs().max())
