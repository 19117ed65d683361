from .captions import CaptionFamily, classify_caption
from .dungeon import GenParams, DungeonLevel, generate_level
from .caverns import (CavernsEnv, TaskSpec, Observation, StepResult,
                      make_task, scale_extrinsic)

__all__ = [
    "CaptionFamily",
    "classify_caption",
    "GenParams",
    "DungeonLevel",
    "generate_level",
    "CavernsEnv",
    "TaskSpec",
    "Observation",
    "StepResult",
    "make_task",
    "scale_extrinsic",
]
