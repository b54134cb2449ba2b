"""
Domain models for the State-Aliasing Lab.

Provides typed data models for simulator state, instructions, demonstrations,
inverse-dynamics samples and alignment pairs.
"""

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

ACTION_DIM = 7
MOTION_DIM = 6
STATE_DIM = 8
GRIPPER_INDEX = 6

COLORS: Tuple[str, ...] = ("red", "green", "blue", "yellow")
DIRECTIONS: Tuple[str, ...] = ("left", "right", "front", "back")

# template id -> (slot kinds, text pattern)
TEMPLATES: Dict[str, Tuple[Tuple[str, ...], str]] = {
    "pick": (("color",), "pick up the {0} block"),
    "stack": (("color", "color"), "stack the {0} block on the {1} block"),
    "place": (("color", "direction"), "put the {0} block on the {1} side"),
    "reach": (("color",), "move the gripper above the {0} block"),
}


class DomainModel:
    """Base class for all domain models (subclasses are dataclasses, frozen or not)."""

    def to_dict(self) -> Dict[str, Any]:
        """Convert model to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]):
        """Create model from dictionary."""
        return cls(**data)


@dataclass(frozen=True)
class EEPose(DomainModel):
    """End-effector pose: position in the workspace and Euler angles in radians."""

    x: float
    y: float
    z: float
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.phi, self.theta, self.psi], dtype=np.float64)


@dataclass(frozen=True)
class Action(DomainModel):
    """Relative end-effector command [dx, dy, dz, dphi, dtheta, dpsi, g]."""

    d_pos: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    d_rot: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    g: int = 0

    def to_array(self) -> np.ndarray:
        return np.array([*self.d_pos, *self.d_rot, float(self.g)], dtype=np.float64)

    @property
    def motion(self) -> np.ndarray:
        return np.array([*self.d_pos, *self.d_rot], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "Action":
        values = [float(v) for v in values]
        if len(values) != ACTION_DIM:
            raise ValueError(f"action must have {ACTION_DIM} components, got {len(values)}")
        g = values[GRIPPER_INDEX]
        if g not in (0.0, 1.0):
            raise ValueError(f"gripper command must be 0 or 1, got {g}")
        return cls(tuple(values[0:3]), tuple(values[3:6]), int(g))

    @classmethod
    def hold(cls, g: int) -> "Action":
        """Zero-motion action that only sets the gripper."""
        return cls(g=g)


@dataclass(frozen=True)
class Block(DomainModel):
    """A colored cube resting on the table, on another block, or in the gripper."""

    color: str
    position: Tuple[float, float, float]
    edge: float

    def moved_to(self, position: Tuple[float, float, float]) -> "Block":
        return Block(self.color, tuple(float(p) for p in position), self.edge)

    @property
    def top(self) -> float:
        return self.position[2] + self.edge / 2.0


@dataclass(frozen=True)
class WorldState(DomainModel):
    """Complete simulator state; immutable so transitions are pure."""

    ee: EEPose
    gripper_width: float
    held: Optional[int]
    blocks: Tuple[Block, ...]
    rng_tag: str = ""

    def block_index(self, color: str) -> Optional[int]:
        for i, block in enumerate(self.blocks):
            if block.color == color:
                return i
        return None


@dataclass(frozen=True)
class Instruction(DomainModel):
    """Templated language instruction; the text is a pure function of (template, slots)."""

    template: str
    slots: Tuple[str, ...]

    def __post_init__(self) -> None:
        if self.template not in TEMPLATES:
            raise ValueError(f"unknown template: {self.template}")
        kinds, _ = TEMPLATES[self.template]
        if len(self.slots) != len(kinds):
            raise ValueError(f"template '{self.template}' takes {len(kinds)} slots")
        for kind, value in zip(kinds, self.slots):
            allowed = COLORS if kind == "color" else DIRECTIONS
            if value not in allowed:
                raise ValueError(f"invalid {kind} slot: {value}")
        if self.template == "stack" and self.slots[0] == self.slots[1]:
            raise ValueError("stack needs two different colors")

    @property
    def text(self) -> str:
        return TEMPLATES[self.template][1].format(*self.slots)

    @property
    def key(self) -> str:
        return ":".join((self.template, *self.slots))

    @property
    def color(self) -> str:
        return self.slots[0]

    @property
    def target_color(self) -> Optional[str]:
        return self.slots[1] if self.template == "stack" else None

    @property
    def direction(self) -> Optional[str]:
        return self.slots[1] if self.template == "place" else None

    @classmethod
    def from_key(cls, key: str) -> "Instruction":
        template, *slots = key.strip().split(":")
        return cls(template, tuple(slots))

    def to_dict(self) -> Dict[str, Any]:
        return {"template": self.template, "slots": list(self.slots), "text": self.text}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Instruction":
        return cls(data["template"], tuple(data["slots"]))


def instruction_vocabulary() -> List[Instruction]:
    """Every instruction the templates can express, in a fixed order."""
    vocab = []
    for template, (kinds, _) in TEMPLATES.items():
        pools = [COLORS if kind == "color" else DIRECTIONS for kind in kinds]
        for slots in itertools.product(*pools):
            if template == "stack" and slots[0] == slots[1]:
                continue
            vocab.append(Instruction(template, tuple(slots)))
    return vocab


VOCABULARY: Tuple[Instruction, ...] = tuple(instruction_vocabulary())
VOCABULARY_INDEX: Dict[str, int] = {instr.key: i for i, instr in enumerate(VOCABULARY)}


@dataclass
class Observation(DomainModel):
    """Per-view RGB images (H x W x 3, uint8); state is only filled in for scripted policies."""

    views: Dict[str, np.ndarray]
    state: Optional[WorldState] = None

    def __getitem__(self, view: str) -> np.ndarray:
        return self.views[view]


@dataclass
class Trajectory(DomainModel):
    """One demonstration: instruction plus aligned observation, action, state and pose streams."""

    traj_id: int
    instruction: Instruction
    episode_seed: int
    observations: Dict[str, np.ndarray]
    actions: np.ndarray
    states: np.ndarray
    poses: np.ndarray

    def __post_init__(self) -> None:
        lengths = {len(self.actions), len(self.states), len(self.poses)}
        lengths.update(len(frames) for frames in self.observations.values())
        if len(lengths) != 1:
            raise ValueError(f"trajectory streams have unequal lengths: {sorted(lengths)}")

    @property
    def length(self) -> int:
        return len(self.actions)

    def observation(self, t: int) -> Observation:
        return Observation({view: frames[t] for view, frames in self.observations.items()})


@dataclass
class InvDynSample(DomainModel):
    """Observation pair with the action chunk that connects them."""

    obs_first: Dict[str, np.ndarray]
    obs_second: Dict[str, np.ndarray]
    chunk: np.ndarray
    reversed: bool
    source: Tuple[int, int]

    def equals(self, other: "InvDynSample") -> bool:
        """Exact equality on every field."""
        if self.reversed != other.reversed or tuple(self.source) != tuple(other.source):
            return False
        if self.chunk.dtype != other.chunk.dtype or not np.array_equal(self.chunk, other.chunk):
            return False
        for mine, theirs in ((self.obs_first, other.obs_first), (self.obs_second, other.obs_second)):
            if mine.keys() != theirs.keys():
                return False
            if not all(np.array_equal(mine[v], theirs[v]) for v in mine):
                return False
        return True


@dataclass
class ActionStats(DomainModel):
    """Per-dimension statistics of the six motion components."""

    mean: List[float]
    std: List[float]
    floored: List[bool]
    eps: float = 1e-8

    @property
    def safe_std(self) -> np.ndarray:
        return np.maximum(np.asarray(self.std, dtype=np.float64), self.eps)

    def normalize(self, motion: np.ndarray) -> np.ndarray:
        return (motion - np.asarray(self.mean)) / self.safe_std

    def denormalize(self, motion: np.ndarray) -> np.ndarray:
        return motion * self.safe_std + np.asarray(self.mean)


@dataclass
class TrajectoryEntry(DomainModel):
    """Manifest line for one stored trajectory record."""

    traj_id: int
    file: str
    instruction: str
    length: int
    episode_seed: int


@dataclass
class DatasetManifest(DomainModel):
    """Dataset-level metadata written next to the trajectory records."""

    format_version: str
    seed: int
    n_traj: int
    tasks: List[str]
    image_size: int
    views: List[str]
    action_stats: ActionStats
    train_ids: List[int]
    val_ids: List[int]
    trajectories: List[TrajectoryEntry] = field(default_factory=list)
    sim: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetManifest":
        data = dict(data)
        data["action_stats"] = ActionStats.from_dict(data["action_stats"])
        data["trajectories"] = [TrajectoryEntry.from_dict(e) for e in data.get("trajectories", [])]
        return cls(**data)


@dataclass
class FramePair(DomainModel):
    """Two frames of one trajectory with their distances for the alignment analysis."""

    traj_id: int
    i: int
    j: int
    gap: int
    d_cos: Optional[float] = None
    d_scale: Optional[float] = None
    d_pose: Optional[float] = None
    d_pix: Optional[float] = None

    @property
    def has_cosine(self) -> bool:
        return self.d_cos is not None and math.isfinite(self.d_cos)
