"""Prompt construction and response parsing for the annotation backends.

The judge is framed as a NetHack expert: the caverns captions deliberately
imitate NetHack surface forms, so the framing transfers. Binary rating
prompts ask for a FOO (helpful) / BAR (unhelpful) label inside a
``<label> ... </label>`` span; ranking prompts ask for a
``("best_description": 1|2|None)`` declaration. Parsers take the *last*
matching span so chatty responses that restate the format early still parse.
"""

from __future__ import annotations

import re

SYSTEM_PROMPT = """You are a helpful and honest judge of good gameplaying and progress in the NetHack game. Always answer as helpfully as possible, while being truthful.

If you don't know the answer to a question, please don't share false information."""

_BINARY_HEADER = """Context: I am playing NetHack and I will present you a message from the gameplay.

Instruction: First, tell me about your knowledge of NetHack. Mention the goal of NetHack.
Then, write an analysis describing the semantics of each message using your knowledge of NetHack. Finally, respond by assigning a score to the message, which measures whether the status represented by the message is helpful or unhelpful to make some progress towards the goal.
Helpful here does not mean whether it is informative to the player to make decisions or not, but whether it is helpful for the agent to solve the game.
"""

_BINARY_FOOTER = """For extremely helpful messages, assign a label FOO. For unhelpful, neutral, and lukewarm messages, assign a label BAR.

{examples}

Please rate this message: {{"{caption}"}}

Constraint: Please format your response strictly in this format without additional explanation:
<knowledge> [your knowledge of NetHack] </knowledge>
<analysis> [your one-sentence analysis of the message] </analysis>
<label> [FOO/BAR] </label>"""

_EX_KILL = '''Example 1: "You kill the goblin!  Welcome to experience level 4" indicates that the player
has killed a goblin and gained experience.'''
_EX_MONEY = '''Example 2: "You hear someone counting money." indicates that the player is close to a source of gold, as the sound of counting money suggests a nearby NPC or monster with treasure.'''
_EX_GOLD = '''Example 3: "5 gold pieces." indicates you collected 5 gold coins.'''
_EX_DOOR = '''Example 4: "That door is closed." is neutral and should be labelled as BAR.'''

_GOAL_LINES = {
    "default": "I prefer agents that maximize the score in the game, for instance by killing monsters, collecting gold or going down the stairs in the dungeon.",
    "combat": "I prefer agents engage in combat, for instance by killing monsters. But never prefer agents that collect ANY gold or that go down the dungeon.",
    "gold": "I prefer agents that maximize their gold. But never prefer agents that maximize the score in other ways (e.g., by engaging in combat or killing monsters) or that go down the dungeon.",
}

_EXAMPLE_BLOCKS = {
    "default": "\n\n".join([
        _EX_KILL + " This led to a level up and increased abilities.\nGaining experience and leveling up are both extremely helpful and this message should be labelled as FOO.",
        _EX_MONEY + "\nThis is also extremely helpful and should be labelled as FOO.",
        _EX_GOLD + " This is extremely helpful should be labelled as FOO.",
        _EX_DOOR,
    ]),
    "combat": "\n\n".join([
        _EX_KILL + " This led to a level up and increased abilities.\nGaining experience and leveling up are both extremely helpful and this message should be labelled as FOO.",
        _EX_MONEY + "\nThis is not helpful and should be labelled as BAR.",
        _EX_GOLD + " This is not aligned with our goal and should be labelled as BAR.",
        _EX_DOOR,
    ]),
    "gold": "\n\n".join([
        _EX_KILL + "  This is not aligned with our goal and should be labelled as BAR.",
        _EX_MONEY + " This is extremely helpful and should be labelled as FOO.",
        _EX_GOLD + " This is extremely helpful and should be labelled as FOO.",
        _EX_DOOR,
    ]),
}

GOAL_VARIANTS = tuple(_GOAL_LINES)

RANKING_PROMPT_TEMPLATE = """I will present you with two short gameplay descriptions.
First, tell me about your knowledge of NetHack. Mention the goal of NetHack. Prefer agents that maximize the score in the game, for instance by killing monsters, collecting gold or going down the stairs in the dungeon.
Then, write an analysis describing the semantics of each description strictly using information from the descriptions (which may be empty) and your knowledge of NetHack.
Provide a comparative analysis based on first principles.
Finally, respond by explicitly declaring which one is the most likely to make some progress towards the goal, writing either ("best_description": 1), ("best_description": 2). You could also say ("best_description": None).

{{
"description_1":
"{first}"
}}

{{
"description_2":
"{second}"
}}"""

# Goal strings for the bag-of-words cosine baseline.
ELLM_GOAL_STRINGS = {
    "default": "Prefer agents that maximize the score in the game, for instance by killing monsters, collecting gold or going down the stairs in the dungeon.",
    "combat": "Prefer agents that engage in combat, for instance by killing monsters. But never prefer agents that collect ANY gold or that go down the dungeon.",
    "gold": "Prefer agents that maximize their gold. But never prefer agents that maximize the score in other ways (e.g., by engaging in combat or killing monsters) or that go down the dungeon.",
}


class ParseError(ValueError):
    """Annotator response did not contain a usable label."""


def build_binary_prompt(caption: str, goal: str = "default") -> tuple[str, str]:
    """Returns (system, user) for rating a single caption."""
    if goal not in _GOAL_LINES:
        raise ValueError(f"unknown goal variant {goal!r}; expected one of {GOAL_VARIANTS}")
    user = (_BINARY_HEADER + _GOAL_LINES[goal] + "\n"
            + _BINARY_FOOTER.format(examples=_EXAMPLE_BLOCKS[goal], caption=caption))
    return SYSTEM_PROMPT, user


def build_ranking_prompt(first: str, second: str) -> tuple[str, str]:
    """Returns (system, user) for comparing two captions (either may be
    blank)."""
    return SYSTEM_PROMPT, RANKING_PROMPT_TEMPLATE.format(first=first, second=second)


_LABEL_RE = re.compile(r"<label>(.*?)</label>", re.IGNORECASE | re.DOTALL)
_RANK_RE = re.compile(
    r"\"?best_description\"?\s*[:=]\s*\"?(1|2|none|null)\"?", re.IGNORECASE)


def parse_binary_response(text: str) -> int:
    """1 for FOO, 0 for BAR, from the last <label> span. Case-insensitive,
    tolerant of whitespace and the template's square brackets."""
    matches = _LABEL_RE.findall(text)
    if not matches:
        raise ParseError("no <label> span in response")
    content = matches[-1].strip().strip("[]").strip().upper()
    if content == "FOO":
        return 1
    if content == "BAR":
        return 0
    raise ParseError(f"ambiguous label content: {matches[-1]!r}")


def parse_ranking_response(text: str) -> int | None:
    """1, 2 or None from the last best_description declaration."""
    matches = _RANK_RE.findall(text)
    if not matches:
        raise ParseError("no best_description declaration in response")
    val = matches[-1].lower()
    if val == "1":
        return 1
    if val == "2":
        return 2
    return None


# Used by the mock backend to recover the inputs from a rendered prompt, so
# mock runs exercise the real prompt construction round trip.
_RATE_RE = re.compile(r"Please rate this message: \{\"(.*)\"\}", re.DOTALL)
_DESC_RE = re.compile(r"\"description_([12])\":\n\"(.*?)\"\n\}", re.DOTALL)


def extract_caption_from_prompt(user_prompt: str) -> str:
    m = _RATE_RE.search(user_prompt)
    if m is None:
        raise ValueError("not a binary rating prompt")
    return m.group(1)


def extract_pair_from_prompt(user_prompt: str) -> tuple[str, str]:
    found = {k: v for k, v in _DESC_RE.findall(user_prompt)}
    if set(found) != {"1", "2"}:
        raise ValueError("not a ranking prompt")
    return found["1"], found["2"]


def detect_goal_variant(user_prompt: str) -> str:
    for goal, line in _GOAL_LINES.items():
        if line in user_prompt:
            return goal
    return "default"
