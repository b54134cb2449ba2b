"""
State-Aliasing Lab - Type-Safe Configuration
Validated experiment configuration loaded from JSON files and echoed into every artifact
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from exceptions import ConfigurationError

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
FORMAT_VERSION = "sal-v1"

VIEW_NAMES: Tuple[str, ...] = ("static", "wrist")
VARIANTS: Tuple[str, ...] = ("bc", "aux", "aux-ptr")

ConfigT = TypeVar("ConfigT", bound=BaseModel)


class SimConfig(BaseModel):
    """Kinematic tabletop simulator settings"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    image_size: int = Field(default=64, ge=16, le=256, description="Rendered image side (pixels)")
    max_step: float = Field(default=0.05, gt=0.0, le=0.2, description="Per-component motion cap")
    attach_radius: float = Field(default=0.04, gt=0.0, le=0.2)
    gripper_max_width: float = Field(default=0.08, gt=0.0, le=0.2)
    z_max: float = Field(default=0.2, gt=0.0, le=1.0)
    block_edge_min: float = Field(default=0.05, gt=0.0)
    block_edge_max: float = Field(default=0.07, gt=0.0)
    n_blocks: int = Field(default=2, ge=2, le=4)
    hover_z: float = Field(default=0.12, gt=0.0)
    lift_z: float = Field(default=0.15, gt=0.0)
    pick_height: float = Field(default=0.12, gt=0.0)
    stack_tolerance: float = Field(default=0.02, gt=0.0)
    place_margin: float = Field(default=0.25, gt=0.0, lt=0.5)
    reach_band: Tuple[float, float] = (0.02, 0.06)
    episode_cap: int = Field(default=200, ge=1)

    @model_validator(mode="after")
    def check_geometry(self) -> "SimConfig":
        if self.block_edge_min > self.block_edge_max:
            raise ValueError("block_edge_min must not exceed block_edge_max")
        if not self.pick_height <= self.lift_z <= self.z_max:
            raise ValueError("heights must satisfy pick_height <= lift_z <= z_max")
        if self.hover_z > self.z_max:
            raise ValueError("hover_z must not exceed z_max")
        low, high = self.reach_band
        if not 0.0 <= low < high:
            raise ValueError("reach_band must be an increasing pair of non-negative offsets")
        return self


class GenerateConfig(BaseModel):
    """Demonstration dataset generation"""

    model_config = ConfigDict(extra="forbid")

    n_traj: int = Field(default=100, ge=1, description="Number of successful demonstrations")
    seed: int = Field(default=0, ge=0)
    tasks: List[str] = Field(
        default_factory=lambda: ["pick", "stack", "place", "reach"],
        description="Template ids (random slots) or instruction keys (fixed task)",
    )
    horizon_max: int = Field(default=200, ge=2, description="Episode step cap during generation")
    min_length: int = Field(
        default=9, ge=1, description="Short episodes are padded with no-op holds to this length"
    )
    val_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    workers: int = Field(default=1, ge=1, le=64)
    max_attempts_factor: int = Field(default=10, ge=1)
    sim: SimConfig = Field(default_factory=SimConfig)

    @field_validator("tasks")
    @classmethod
    def validate_tasks(cls, v: List[str]) -> List[str]:
        from validators import validate_task_entry

        if not v:
            raise ValueError("at least one task is required")
        return [validate_task_entry(entry) for entry in v]


class EncoderConfig(BaseModel):
    """Token-producing vision encoder"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    image_size: int = Field(default=64, ge=8)
    patch_size: int = Field(default=8, ge=1)
    channels: int = Field(default=64, ge=1)
    depth: int = Field(default=2, ge=0, le=12)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_patching(self) -> "EncoderConfig":
        if self.image_size % self.patch_size != 0:
            raise ValueError("image_size must be divisible by patch_size")
        return self

    @property
    def num_tokens(self) -> int:
        side = self.image_size // self.patch_size
        return side * side


class HeadConfig(BaseModel):
    """Policy and inverse-dynamics head sizes"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    invdyn_dim: int = Field(default=128, ge=1, description="Inverse dynamics decoder dimension")
    policy_token_dim: int = Field(default=32, ge=1)
    policy_hidden_dim: int = Field(default=256, ge=1)
    instruction_dim: int = Field(default=32, ge=1)


class TrainConfig(BaseModel):
    """Combined-objective training (L = L_vla + lambda_inv * L_inv)"""

    model_config = ConfigDict(extra="forbid")

    lambda_inv: float = Field(default=0.1, ge=0.0, description="Auxiliary loss weight")
    lambda_g: float = Field(default=0.01, ge=0.0, description="Gripper loss weight")
    p_rev: float = Field(default=0.5, ge=0.0, le=1.0, description="PTR probability")
    horizon: int = Field(default=8, ge=1, description="Action chunk length H (k = H)")
    steps: int = Field(default=2000, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=2e-4, gt=0.0)
    warmup_steps: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0)
    aux: bool = True
    ptr: bool = True
    ptr_resample: bool = Field(default=True, description="Redraw PTR on every visit of a sample")
    views: List[str] = Field(default_factory=lambda: list(VIEW_NAMES))
    log_every: int = Field(default=50, ge=1)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    heads: HeadConfig = Field(default_factory=HeadConfig)

    @field_validator("views")
    @classmethod
    def validate_views(cls, v: List[str]) -> List[str]:
        if not v:
            raise ValueError("at least one view is required")
        unknown = [name for name in v if name not in VIEW_NAMES]
        if unknown:
            raise ValueError(f"unknown views: {unknown}")
        if len(set(v)) != len(v):
            raise ValueError("views must be unique")
        return v

    @property
    def use_ptr(self) -> bool:
        """PTR only acts on auxiliary samples, so it is inert without AUX."""
        return self.aux and self.ptr

    def for_variant(self, variant: str) -> "TrainConfig":
        """Return a copy with the AUX/PTR switches of an ablation variant."""
        if variant not in VARIANTS:
            raise ConfigurationError("variant", f"must be one of {', '.join(VARIANTS)}")
        flags = {"bc": (False, False), "aux": (True, False), "aux-ptr": (True, True)}[variant]
        return self.model_copy(update={"aux": flags[0], "ptr": flags[1]})


class BCProbeConfig(BaseModel):
    """Frozen-encoder behavior cloning probe"""

    model_config = ConfigDict(extra="forbid")

    horizon: int = Field(default=4, ge=1, description="H_BC")
    lambda_g: float = Field(default=0.01, ge=0.0)
    lr: float = Field(default=2e-4, gt=0.0)
    batch_size: int = Field(default=64, ge=1)
    steps: int = Field(default=1000, ge=1)
    eval_every: int = Field(default=100, ge=1)
    val_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    proj_dim: int = Field(default=256, ge=1)
    hidden_dim: int = Field(default=512, ge=1)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    n_rollouts: int = Field(default=20, ge=1)
    episode_cap: int = Field(default=200, ge=1)
    rollout_seed: int = Field(default=1_000_000, ge=0)
    train_loss_window: Optional[int] = Field(
        default=None, ge=1, description="Trailing window for the train loss; None = full run"
    )


class StateProbeConfig(BaseModel):
    """Frozen-encoder proprioceptive state probe"""

    model_config = ConfigDict(extra="forbid")

    lr: float = Field(default=2e-4, gt=0.0)
    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=1, ge=1)
    eval_every: int = Field(default=100, ge=1)
    proj_dim: int = Field(default=256, ge=1)
    hidden_dim: int = Field(default=512, ge=1)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    max_val_frames: int = Field(default=2048, ge=1)


class AlignConfig(BaseModel):
    """Pixel-controlled state-feature alignment analysis"""

    model_config = ConfigDict(extra="forbid")

    gaps: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32])
    pairs_per_gap: int = Field(default=200, ge=2)
    thumb_size: int = Field(default=16, ge=1)
    sigma_floor: float = Field(default=1e-8, gt=0.0)
    split: Literal["val", "all"] = "val"
    seed: int = Field(default=0, ge=0)

    @field_validator("gaps")
    @classmethod
    def validate_gaps(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one gap is required")
        if any(g <= 0 for g in v):
            raise ValueError("gaps must be positive")
        return sorted(set(v))

    def check_image_size(self, image_size: int) -> None:
        """Raise ConfigurationError unless thumb_size divides the dataset image size"""
        if image_size % self.thumb_size != 0:
            raise ConfigurationError(
                "thumb_size", f"{self.thumb_size} must divide the image size {image_size}"
            )


class ExperimentConfig(BaseModel):
    """Desk-scale comparison of bc / aux / aux-ptr encoders over seeds"""

    model_config = ConfigDict(extra="forbid")

    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    n_demos: int = Field(default=500, ge=2)
    low_data_demos: int = Field(default=100, ge=2)
    probe_demos_per_task: int = Field(default=50, ge=2)
    probe_tasks: List[str] = Field(
        default_factory=lambda: ["pick:red", "stack:red:blue", "place:green:left", "reach:blue"]
    )
    generate: GenerateConfig = Field(default_factory=GenerateConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    bc_probe: BCProbeConfig = Field(default_factory=BCProbeConfig)
    state_probe: StateProbeConfig = Field(default_factory=StateProbeConfig)
    align: AlignConfig = Field(default_factory=AlignConfig)

    @field_validator("probe_tasks")
    @classmethod
    def validate_probe_tasks(cls, v: List[str]) -> List[str]:
        from validators import validate_instruction_key

        return [validate_instruction_key(key) for key in v]

    @model_validator(mode="after")
    def check_thumbnail(self) -> "ExperimentConfig":
        if self.generate.sim.image_size % self.align.thumb_size != 0:
            raise ValueError("align.thumb_size must divide generate.sim.image_size")
        return self


def load_config(path: Optional[str], model: Type[ConfigT], **overrides: Any) -> ConfigT:
    """
    Load and validate a JSON config file.

    Args:
        path: JSON file path, or None for defaults
        model: pydantic model class to validate against
        **overrides: top-level fields applied after loading (None values are skipped)

    Returns:
        Validated config instance
    """
    data: Dict[str, Any] = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigurationError(str(path), "config file not found")
        except json.JSONDecodeError as e:
            raise ConfigurationError(str(path), f"not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(str(path), "top-level JSON value must be an object")

    data.update({key: value for key, value in overrides.items() if value is not None})

    try:
        config = model.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(str(path or model.__name__), str(e))

    logger.debug(f"Loaded {model.__name__} from {path or 'defaults'}")
    return config


def echo_config(
    out_dir: Path, command: str, arguments: Dict[str, Any], configs: Dict[str, BaseModel]
) -> Path:
    """Write run.json (tool version, command, arguments, full configs) into an artifact dir"""
    from utils import atomic_write_text

    payload = {
        "tool_version": VERSION,
        "format_version": FORMAT_VERSION,
        "command": command,
        "arguments": arguments,
        "configs": {name: cfg.model_dump(mode="json") for name, cfg in configs.items()},
    }
    path = Path(out_dir) / "run.json"
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
