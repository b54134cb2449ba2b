#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Neural network components.

    Encoder       patch embedding + token/channel mixing blocks, B x P x C tokens
    InvDynHead    [Z_cur, Z_fut, Z_fut - Z_cur] -> patch-wise fusion -> chunk (B x H x 7)
    PolicyHead    per-view token projection + instruction embedding -> chunk
    ProbeHead     per-token projection -> flatten -> two GELU hidden layers -> d_out

Every head emits the gripper channel as a logit. Parameters are initialized
from seeded generators (fan-in scaled uniform), one generator per submodule, so
adding or removing a head never changes the initialization of another.
"""

import logging
import math
from typing import Dict, Iterable, Mapping, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from config import EncoderConfig, HeadConfig, TrainConfig
from exceptions import InputError, UnknownInstructionError
from models import ACTION_DIM, GRIPPER_INDEX, MOTION_DIM, VOCABULARY, VOCABULARY_INDEX, Instruction
from utils import derive_seed, sha256_hex

logger = logging.getLogger(__name__)

STATE_PROBE_DIM = 8


def fan_in_uniform_(module: nn.Module, seed: int) -> nn.Module:
    """Seeded fan-in uniform init for every Linear/Embedding; LayerNorms are reset to identity."""
    with torch.no_grad():
        for index, (_, sub) in enumerate(module.named_modules()):
            generator = torch.Generator().manual_seed(derive_seed(seed, index))
            if isinstance(sub, nn.Linear):
                bound = 1.0 / math.sqrt(sub.in_features)
                sub.weight.uniform_(-bound, bound, generator=generator)
                if sub.bias is not None:
                    sub.bias.uniform_(-bound, bound, generator=generator)
            elif isinstance(sub, nn.Embedding):
                bound = 1.0 / math.sqrt(sub.embedding_dim)
                sub.weight.uniform_(-bound, bound, generator=generator)
            elif isinstance(sub, nn.LayerNorm):
                sub.reset_parameters()
    return module


def _mlp(sizes: Sequence[int], dropout: float = 0.0) -> nn.Sequential:
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(nn.Linear(fan_in, fan_out))
        if i < len(sizes) - 2:
            layers.append(nn.GELU())
            if dropout > 0:
                layers.append(nn.Dropout(dropout))
    return nn.Sequential(*layers)


class MixerBlock(nn.Module):
    """Token mixing across patches followed by channel mixing, both residual."""

    def __init__(self, num_tokens: int, channels: int):
        super().__init__()
        self.token_norm = nn.LayerNorm(channels)
        self.token_mlp = _mlp([num_tokens, 2 * num_tokens, num_tokens])
        self.channel_norm = nn.LayerNorm(channels)
        self.channel_mlp = _mlp([channels, 2 * channels, channels])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.token_norm(x).transpose(1, 2)
        x = x + self.token_mlp(y).transpose(1, 2)
        return x + self.channel_mlp(self.channel_norm(x))


class Encoder(nn.Module):
    """
    Vision encoder E: image (B x H x W x 3) -> tokens (B x P x C).

    uint8 images are scaled to [0, 1]; the same encoder serves every view.
    """

    def __init__(self, config: EncoderConfig, init_seed: Optional[int] = None):
        super().__init__()
        self.config = config
        patch_dim = config.patch_size * config.patch_size * 3
        self.patch_embed = nn.Linear(patch_dim, config.channels)
        self.pos_embed = nn.Parameter(torch.zeros(config.num_tokens, config.channels))
        self.blocks = nn.ModuleList(
            MixerBlock(config.num_tokens, config.channels) for _ in range(config.depth)
        )
        self.norm = nn.LayerNorm(config.channels)
        self.reset_parameters(config.seed if init_seed is None else init_seed)

    def reset_parameters(self, seed: int) -> None:
        fan_in_uniform_(self, seed)
        generator = torch.Generator().manual_seed(derive_seed(seed, 1_000))
        with torch.no_grad():
            self.pos_embed.uniform_(-0.02, 0.02, generator=generator)

    @property
    def num_tokens(self) -> int:
        return self.config.num_tokens

    @property
    def channels(self) -> int:
        return self.config.channels

    def patchify(self, images: torch.Tensor) -> torch.Tensor:
        size, patch = self.config.image_size, self.config.patch_size
        if images.dim() != 4 or tuple(images.shape[1:]) != (size, size, 3):
            raise InputError(
                "images", tuple(images.shape), f"expected B x {size} x {size} x 3"
            )
        dtype = self.patch_embed.weight.dtype
        if images.dtype == torch.uint8:
            x = images.to(dtype) / 255.0
        else:
            x = images.to(dtype)
        b, side = x.shape[0], size // patch
        x = x.reshape(b, side, patch, side, patch, 3).permute(0, 1, 3, 2, 4, 5)
        return x.reshape(b, side * side, patch * patch * 3)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = self.patch_embed(self.patchify(images)) + self.pos_embed
        for block in self.blocks:
            x = block(x)
        return self.norm(x)

    def encode(self, views: Mapping[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
        """Encode each view independently with the shared parameters."""
        return {name: self(images) for name, images in views.items()}


def _check_tokens(name: str, tokens: torch.Tensor, num_tokens: int, channels: int) -> None:
    if tokens.dim() != 3 or tuple(tokens.shape[1:]) != (num_tokens, channels):
        raise InputError(name, tuple(tokens.shape), f"expected B x {num_tokens} x {channels}")


class InvDynHead(nn.Module):
    """Inverse-dynamics decoder h(Z_cur, Z_fut) -> chunk; training-time only."""

    def __init__(self, num_tokens: int, channels: int, horizon: int, dim: int = 128):
        super().__init__()
        self.num_tokens = num_tokens
        self.channels = channels
        self.horizon = horizon
        self.fuse = nn.Sequential(nn.Linear(3 * channels, dim), nn.GELU())
        self.action = nn.Linear(num_tokens * dim, horizon * ACTION_DIM)

    def forward(self, z_cur: torch.Tensor, z_fut: torch.Tensor) -> torch.Tensor:
        _check_tokens("z_cur", z_cur, self.num_tokens, self.channels)
        _check_tokens("z_fut", z_fut, self.num_tokens, self.channels)
        if z_cur.shape != z_fut.shape:
            raise InputError("z_fut", tuple(z_fut.shape), f"must match z_cur {tuple(z_cur.shape)}")
        fused = self.fuse(torch.cat([z_cur, z_fut, z_fut - z_cur], dim=-1))
        out = self.action(fused.flatten(1))
        return out.view(-1, self.horizon, ACTION_DIM)


class PolicyHead(nn.Module):
    """Policy pi(o_t, l) -> chunk from current-step tokens of every view and the instruction."""

    def __init__(
        self,
        num_tokens: int,
        channels: int,
        horizon: int,
        views: Sequence[str],
        heads: HeadConfig = HeadConfig(),
    ):
        super().__init__()
        self.num_tokens = num_tokens
        self.channels = channels
        self.horizon = horizon
        self.views = list(views)
        self.token_proj = nn.ModuleDict(
            {v: nn.Sequential(nn.Linear(channels, heads.policy_token_dim), nn.GELU()) for v in self.views}
        )
        self.instruction_embed = nn.Embedding(len(VOCABULARY), heads.instruction_dim)
        in_dim = len(self.views) * num_tokens * heads.policy_token_dim + heads.instruction_dim
        self.mlp = _mlp(
            [in_dim, heads.policy_hidden_dim, heads.policy_hidden_dim, horizon * ACTION_DIM]
        )

    def forward(self, tokens: Mapping[str, torch.Tensor], instruction_ids: torch.Tensor) -> torch.Tensor:
        missing = [v for v in self.views if v not in tokens]
        if missing:
            raise InputError("tokens", sorted(tokens), f"missing views {missing}")
        parts = []
        for v in self.views:
            _check_tokens(f"tokens[{v}]", tokens[v], self.num_tokens, self.channels)
            parts.append(self.token_proj[v](tokens[v]).flatten(1))
        parts.append(self.instruction_embed(instruction_ids))
        out = self.mlp(torch.cat(parts, dim=-1))
        return out.view(-1, self.horizon, ACTION_DIM)


class ProbeHead(nn.Module):
    """Probe f(Flatten(GELU(Z W_proj))) with dropout on the hidden layers."""

    def __init__(
        self,
        num_tokens: int,
        channels: int,
        d_out: int,
        proj_dim: int = 256,
        hidden_dim: int = 512,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.num_tokens = num_tokens
        self.channels = channels
        self.d_out = d_out
        self.proj = nn.Sequential(nn.Linear(channels, proj_dim), nn.GELU())
        self.mlp = _mlp([num_tokens * proj_dim, 2 * hidden_dim, hidden_dim, d_out], dropout=dropout)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        _check_tokens("tokens", tokens, self.num_tokens, self.channels)
        return self.mlp(self.proj(tokens).flatten(1))


def instruction_ids(instructions: Iterable) -> torch.Tensor:
    """Vocabulary indices for Instructions or instruction keys."""
    ids = []
    for instr in instructions:
        key = instr.key if isinstance(instr, Instruction) else str(instr)
        if key not in VOCABULARY_INDEX:
            raise UnknownInstructionError(key)
        ids.append(VOCABULARY_INDEX[key])
    return torch.tensor(ids, dtype=torch.long)


def split_chunk_loss(
    pred: torch.Tensor, target: torch.Tensor, lambda_g: float = 0.01
):
    """
    Motion L1 and gripper BCE terms of the chunk loss.

    Returns:
        (motion_l1, gripper_bce), each a scalar tensor

    Raises:
        InputError: shape mismatch, negative lambda_g or a non-binary gripper target
    """
    if pred.shape != target.shape or pred.shape[-1] != ACTION_DIM:
        raise InputError("pred", tuple(pred.shape), f"must match target {tuple(target.shape)} with 7 channels")
    if lambda_g < 0:
        raise InputError("lambda_g", lambda_g, "must be non-negative")
    gripper = target[..., GRIPPER_INDEX]
    if not bool(((gripper == 0) | (gripper == 1)).all()):
        raise InputError("target gripper", gripper.unique().tolist(), "must be 0 or 1")
    motion = (pred[..., :MOTION_DIM] - target[..., :MOTION_DIM]).abs().mean()
    bce = F.binary_cross_entropy_with_logits(pred[..., GRIPPER_INDEX], gripper.to(pred.dtype))
    return motion, bce


def chunk_loss(pred: torch.Tensor, target: torch.Tensor, lambda_g: float = 0.01) -> torch.Tensor:
    """Mean |motion error| over all 6*H*B entries + lambda_g * mean BCE-with-logits over H*B gripper entries."""
    motion, bce = split_chunk_loss(pred, target, lambda_g)
    return motion + lambda_g * bce


def parameter_digest(module: nn.Module) -> str:
    """SHA-256 over name-sorted parameter and buffer bytes."""

    def chunks():
        for name, tensor in sorted(module.state_dict().items()):
            array = np.ascontiguousarray(tensor.detach().cpu().numpy())
            yield name.encode("utf-8")
            yield f"{array.dtype.str}{array.shape}".encode("utf-8")
            yield array.tobytes()

    return sha256_hex(chunks())


def encoder_digest(encoder: Encoder) -> str:
    return parameter_digest(encoder)


def freeze(module: nn.Module) -> nn.Module:
    module.eval()
    for param in module.parameters():
        param.requires_grad_(False)
    return module


# init stream tags under the training seed
_ENCODER_STREAM = 10
_POLICY_STREAM = 11
_INVDYN_STREAM = 12


class VisuomotorModel(nn.Module):
    """Encoder + policy head, with the inverse-dynamics head attached only for AUX training."""

    def __init__(self, encoder: Encoder, policy: PolicyHead, invdyn: Optional[InvDynHead] = None):
        super().__init__()
        self.encoder = encoder
        self.policy = policy
        self.invdyn = invdyn

    @classmethod
    def build(cls, config: TrainConfig, with_invdyn: Optional[bool] = None) -> "VisuomotorModel":
        with_invdyn = config.aux if with_invdyn is None else with_invdyn
        enc_cfg, heads = config.encoder, config.heads
        encoder = Encoder(enc_cfg, init_seed=derive_seed(config.seed, enc_cfg.seed, _ENCODER_STREAM))
        policy = PolicyHead(enc_cfg.num_tokens, enc_cfg.channels, config.horizon, config.views, heads)
        fan_in_uniform_(policy, derive_seed(config.seed, _POLICY_STREAM))
        invdyn = None
        if with_invdyn:
            invdyn = InvDynHead(enc_cfg.num_tokens, enc_cfg.channels, config.horizon, heads.invdyn_dim)
            fan_in_uniform_(invdyn, derive_seed(config.seed, _INVDYN_STREAM))
        return cls(encoder, policy, invdyn)

    def policy_forward(
        self, views: Mapping[str, torch.Tensor], instruction_ids: torch.Tensor
    ) -> torch.Tensor:
        """Chunk prediction from current-step images of every policy view; never touches invdyn."""
        tokens = self.encoder.encode({v: views[v] for v in self.policy.views})
        return self.policy(tokens, instruction_ids)

    def invdyn_forward(self, z_cur: torch.Tensor, z_fut: torch.Tensor) -> torch.Tensor:
        if self.invdyn is None:
            raise InputError("invdyn", None, "model has no inverse-dynamics head")
        return self.invdyn(z_cur, z_fut)

    def strip_invdyn(self) -> "VisuomotorModel":
        return VisuomotorModel(self.encoder, self.policy, None)
