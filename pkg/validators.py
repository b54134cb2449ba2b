"""
State-Aliasing Lab - Input Validators
Type-safe validation for operation arguments shared across services
"""

import math
from typing import Iterable, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator

from config import VIEW_NAMES
from exceptions import ConfigurationError, InputError, UnknownInstructionError
from models import TEMPLATES, VOCABULARY_INDEX, Action, Instruction


class ProbabilityParams(BaseModel):
    """Validate a probability parameter"""

    p: float = Field(..., ge=0.0, le=1.0, description="Probability in [0, 1]")


class ViewParams(BaseModel):
    """Validate a camera view name"""

    view: str

    @field_validator("view")
    @classmethod
    def validate_view_name(cls, v: str) -> str:
        if v not in VIEW_NAMES:
            raise ValueError(f"view must be one of {', '.join(VIEW_NAMES)}")
        return v


class InstructionKeyParams(BaseModel):
    """Validate an instruction key such as 'stack:red:blue'"""

    key: str = Field(..., min_length=1, max_length=64)

    @field_validator("key")
    @classmethod
    def validate_known(cls, v: str) -> str:
        v = v.strip()
        if v not in VOCABULARY_INDEX:
            raise ValueError("not an instruction in the template vocabulary")
        return v


# Validation helper functions


def _first_error(error: ValidationError) -> str:
    return error.errors()[0]["msg"]


def validate_probability(name: str, p: float) -> float:
    """Validate a probability; out-of-range values are configuration errors"""
    try:
        return ProbabilityParams(p=p).p
    except ValidationError as e:
        raise ConfigurationError(name, _first_error(e))


def validate_view(view: str) -> str:
    """Validate a camera view name"""
    try:
        return ViewParams(view=view).view
    except ValidationError as e:
        raise InputError("view", view, _first_error(e))


def validate_instruction_key(key: str) -> str:
    """Validate a full instruction key"""
    try:
        return InstructionKeyParams(key=key).key
    except ValidationError as e:
        raise ConfigurationError("instruction", f"'{key}': {_first_error(e)}")


def validate_task_entry(entry: str) -> str:
    """A task entry is either a bare template id (random slots) or a full instruction key"""
    entry = entry.strip()
    if entry in TEMPLATES:
        return entry
    if ":" in entry:
        return validate_instruction_key(entry)
    raise ConfigurationError("tasks", f"unknown template id '{entry}'")


def parse_instruction(value) -> Instruction:
    """Resolve an Instruction or key to a vocabulary member"""
    if isinstance(value, Instruction):
        key = value.key
    else:
        key = str(value).strip()
    if key not in VOCABULARY_INDEX:
        raise UnknownInstructionError(key)
    return Instruction.from_key(key)


def validate_action(action: Action) -> Action:
    """Reject actions with non-finite components or a non-binary gripper command"""
    values = (*action.d_pos, *action.d_rot)
    if len(action.d_pos) != 3 or len(action.d_rot) != 3:
        raise InputError("action", action, "expected 3 translation and 3 rotation offsets")
    if not all(math.isfinite(v) for v in values):
        raise InputError("action", action, "all motion components must be finite")
    if action.g not in (0, 1):
        raise InputError("action.g", action.g, "gripper command must be 0 (open) or 1 (close)")
    return action


def validate_shape(field: str, actual: Sequence[int], expected: Sequence[int]) -> Tuple[int, ...]:
    """Check a shape; -1 in the expected shape matches any size"""
    actual = tuple(int(s) for s in actual)
    if len(actual) != len(expected) or any(
        e != -1 and a != e for a, e in zip(actual, expected)
    ):
        raise InputError(field, actual, f"expected shape {tuple(expected)}")
    return actual


def validate_same_length(field: str, vectors: Iterable[Sequence[float]]) -> int:
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise InputError(field, sorted(lengths), "all vectors must have the same length")
    return lengths.pop()
