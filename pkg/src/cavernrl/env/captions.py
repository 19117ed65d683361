"""Caption grammar for the caverns gridworld.

Every caption the environment can emit is produced by one of the template
builders below, and every template has a matching regex, so the grammar is
closed: ``classify_caption`` assigns a family to any environment caption and
raises on anything else. The mock annotator and several tests key off the
family, never off raw string matching scattered around the codebase.

The blank caption ("") is a first-class member of the grammar; it is by far
the most frequent caption and is annotatable like any other.
"""

from __future__ import annotations

import enum
import re

MONSTER_KINDS = (
    "newt",
    "rat",
    "jackal",
    "goblin",
    "kobold",
    "bat",
    "orc",
    "snake",
    "lizard",
    "gnome",
)

# The empty adjective yields the bare kind name ("the goblin").
MONSTER_ADJECTIVES = (
    "",
    "small",
    "large",
    "angry",
    "sneaky",
    "feral",
    "young",
    "old",
    "rabid",
    "wounded",
    "giant",
    "shrieking",
)


def monster_name(kind_idx: int, adj_idx: int) -> str:
    kind = MONSTER_KINDS[kind_idx]
    adj = MONSTER_ADJECTIVES[adj_idx]
    return f"{adj} {kind}" if adj else kind


class CaptionFamily(enum.Enum):
    BLANK = "blank"
    KILL = "kill"
    HIT = "hit"
    HIT_BY = "hit_by"
    GOLD = "gold"
    GOLD_SEEN = "gold_seen"
    LEVEL_UP = "level_up"
    DESCEND = "descend"
    PASSAGE = "passage"
    DOOR_CLOSED = "door_closed"
    DOOR_OPEN = "door_open"
    DEATH = "death"


def kill_caption(name: str) -> str:
    return f"You kill the {name}!"


def hit_caption(name: str) -> str:
    return f"You hit the {name}."


def hit_by_caption(name: str) -> str:
    return f"The {name} hits you!"


def gold_caption(amount: int) -> str:
    return f"{amount} gold pieces."


def gold_seen_caption(amount: int) -> str:
    return f"You see here {amount} gold pieces."


def level_up_caption(level: int) -> str:
    return f"Welcome to experience level {level}."


def descend_caption(depth: int) -> str:
    return f"You descend the stairs to dungeon level {depth}."


def passage_caption() -> str:
    return "You find a hidden passage."


def door_closed_caption() -> str:
    return "That door is closed."


def door_open_caption() -> str:
    return "You open the door."


def death_caption(name: str) -> str:
    return f"You die, killed by the {name}."


_NAME = r"[a-z]+(?: [a-z]+)?"

# Order matters only for readability; patterns are mutually exclusive.
_FAMILY_PATTERNS: tuple[tuple[CaptionFamily, re.Pattern[str]], ...] = (
    (CaptionFamily.KILL, re.compile(rf"You kill the ({_NAME})!")),
    (CaptionFamily.HIT, re.compile(rf"You hit the ({_NAME})\.")),
    (CaptionFamily.HIT_BY, re.compile(rf"The ({_NAME}) hits you!")),
    (CaptionFamily.GOLD, re.compile(r"(\d+) gold pieces\.")),
    (CaptionFamily.GOLD_SEEN, re.compile(r"You see here (\d+) gold pieces\.")),
    (CaptionFamily.LEVEL_UP, re.compile(r"Welcome to experience level (\d+)\.")),
    (CaptionFamily.DESCEND, re.compile(r"You descend the stairs to dungeon level (\d+)\.")),
    (CaptionFamily.PASSAGE, re.compile(r"You find a hidden passage\.")),
    (CaptionFamily.DOOR_CLOSED, re.compile(r"That door is closed\.")),
    (CaptionFamily.DOOR_OPEN, re.compile(r"You open the door\.")),
    (CaptionFamily.DEATH, re.compile(rf"You die, killed by the ({_NAME})\.")),
)


def classify_caption(caption: str) -> CaptionFamily:
    """Map a caption to its family. Raises ValueError for strings outside
    the grammar, which in-tree only happens on a bug."""
    if caption == "":
        return CaptionFamily.BLANK
    for family, pattern in _FAMILY_PATTERNS:
        if pattern.fullmatch(caption):
            return family
    raise ValueError(f"caption outside the grammar: {caption!r}")


def all_monster_names() -> list[str]:
    return [
        monster_name(k, a)
        for k in range(len(MONSTER_KINDS))
        for a in range(len(MONSTER_ADJECTIVES))
    ]
