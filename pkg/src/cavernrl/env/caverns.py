"""The caverns gridworld: a multi-level captioned dungeon crawl.

Observations are agent-centric 21x21 integer-coded crops plus a small stats
vector and a one-line caption describing what just happened ("You kill the
goblin!", "12 gold pieces.", or blank, which is the common case). Dynamics
are fully deterministic given the episode seed and the action sequence; the
only stochasticity is in level generation.

Score is 10 * kills + gold + 50 * levels descended. Tasks scale extrinsic
reward differently: dense Score pays the per-step score delta times 0.1,
sparse staircase tasks pay 50 * 10 once on first arrival at the target
staircase, and reward-free runs pay zero extrinsic reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import captions as cap
from .dungeon import (
    CORRIDOR,
    DOOR_CLOSED,
    DOOR_OPEN,
    FLOOR,
    GenParams,
    HIDDEN,
    PASSAGE,
    STAIRS_DOWN,
    VIEW_GOLD,
    VIEW_MONSTER,
    WALL,
    generate_level,
)

# Actions: 8 movement directions, then search/descend/attack/pickup.
MOVE_DELTAS = (
    (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1),
)
A_SEARCH = 8
A_DESCEND = 9
A_ATTACK = 10
A_PICKUP = 11
N_ACTIONS = 12

ACTION_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW",
                "search", "descend", "attack", "pickup")

EPISODE_CAP = 2000
VIEW_SIZE = 21
STATS_DIM = 6

AGENT_MAX_HP = 16
AGENT_DAMAGE = 3
SPARSE_RAW_REWARD = 50.0

# Cumulative experience points needed to reach each level (index = level).
_EXP_THRESHOLDS = [0, 0]
for _k in range(2, 31):
    _EXP_THRESHOLDS.append(_EXP_THRESHOLDS[-1] + _k)

_WALKABLE = frozenset({FLOOR, CORRIDOR, DOOR_OPEN, PASSAGE, STAIRS_DOWN})

TASK_NAMES = ("Score", "StaircaseLvl3", "StaircaseLvl4", "RewardFree")


@dataclass(frozen=True)
class TaskSpec:
    """What the run optimizes and how raw task reward is scaled."""

    kind: str  # "score" | "staircase" | "reward_free"
    target_depth: int = 3
    extrinsic_scale: float = 1.0

    @property
    def name(self) -> str:
        if self.kind == "staircase":
            return f"StaircaseLvl{self.target_depth}"
        return {"score": "Score", "reward_free": "RewardFree"}[self.kind]


def make_task(name: str) -> TaskSpec:
    """Task lookup; accepts spelling variants like 'score', 'reward-free',
    'staircase3', or 'StaircaseLvl3'."""
    key = name.strip().lower().replace("-", "").replace("_", "")
    if key == "score":
        return TaskSpec(kind="score", extrinsic_scale=0.1)
    if key == "rewardfree":
        return TaskSpec(kind="reward_free", extrinsic_scale=0.0)
    for prefix in ("staircaselvl", "staircase"):
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            depth = int(key[len(prefix):])
            if not 2 <= depth <= 6:
                raise ValueError(f"staircase target depth out of range: {name}")
            return TaskSpec(kind="staircase", target_depth=depth,
                            extrinsic_scale=10.0)
    raise ValueError(f"unknown task {name!r}; expected one of {TASK_NAMES}")


def scale_extrinsic(raw: float, task: TaskSpec) -> float:
    """Apply the task's extrinsic scaling. Reward-free runs always get 0."""
    if task.kind == "reward_free":
        return 0.0
    return raw * task.extrinsic_scale


@dataclass
class Observation:
    view: np.ndarray  # uint8 (VIEW_SIZE, VIEW_SIZE), agent at the center
    stats: np.ndarray  # float32 (STATS_DIM,): hp, exp lvl, depth, gold, steps, score
    caption: str


@dataclass
class StepResult:
    obs: Observation
    reward: float  # scaled extrinsic reward
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


@dataclass
class _Monster:
    kind_idx: int
    adj_idx: int
    r: int
    c: int
    hp: int
    dmg: int
    exp: int

    @property
    def name(self) -> str:
        return cap.monster_name(self.kind_idx, self.adj_idx)


class CavernsEnv:
    """One environment instance. Deterministic given (seed, episode index,
    action sequence); `reset` advances to the next episode's dungeon unless
    constructed with reshuffle=False."""

    def __init__(self, task: TaskSpec, seed: int, params: GenParams | None = None,
                 reshuffle: bool = True, episode_cap: int = EPISODE_CAP):
        self.task = task
        self.base_seed = int(seed)
        self.params = params or GenParams()
        self.reshuffle = reshuffle
        self.episode_cap = episode_cap
        self._episode_idx = -1
        self._done = True

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int | None = None) -> Observation:
        if seed is not None:
            self.base_seed = int(seed)
            self._episode_idx = -1
        self._episode_idx += 1
        if self.reshuffle:
            mix = np.random.SeedSequence([self.base_seed, self._episode_idx])
            self._episode_seed = int(mix.generate_state(1)[0])
        else:
            self._episode_seed = self.base_seed
        self.depth = 0
        self.hp = AGENT_MAX_HP
        self.exp_points = 0
        self.exp_level = 1
        self.gold_collected = 0
        self.steps = 0
        self.score = 0
        self.kills = 0
        self.descents = 0
        self.return_ext = 0.0
        self.visited: set[tuple[int, int, int]] = set()
        self.success = False
        self._done = False
        self._enter_level(1)
        return self._observe("")

    def _enter_level(self, depth: int) -> None:
        level = generate_level(self._episode_seed, depth, self.params)
        self.depth = depth
        self.tiles = level.tiles.copy()
        self.stairs = level.stairs
        self.gold = dict(level.gold)
        self.monsters = [_Monster(m.kind_idx, m.adj_idx, m.r, m.c, m.hp, m.dmg, m.exp)
                         for m in level.monsters]
        self.pos = level.entry
        self.visited.add((depth, *level.entry))

    # -- stepping ----------------------------------------------------------

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("episode is done; call reset() first")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action out of range: {action}")

        self.steps += 1
        prev_score = self.score
        caption = ""
        sparse_event = False

        if action < A_SEARCH:
            caption = self._act_move(action)
        elif action == A_SEARCH:
            caption = self._act_search()
        elif action == A_DESCEND:
            caption = self._act_descend()
        elif action == A_ATTACK:
            caption = self._act_attack()
        else:
            caption = self._act_pickup()

        killer = self._monsters_act()
        if self.hp <= 0:
            caption = cap.death_caption(killer.name if killer else "unknown horror")
            self._done = True

        if (self.task.kind == "staircase" and not self.success
                and self.depth == self.task.target_depth
                and self.stairs is not None and self.pos == self.stairs):
            self.success = True
            sparse_event = True
            self._done = True

        if self.steps >= self.episode_cap:
            self._done = True

        if self.task.kind == "score":
            raw = float(self.score - prev_score)
        elif self.task.kind == "staircase":
            raw = SPARSE_RAW_REWARD if sparse_event else 0.0
        else:
            raw = 0.0
        reward = scale_extrinsic(raw, self.task)
        self.return_ext += reward

        info: dict[str, Any] = {"success_event": sparse_event}
        if self._done:
            info["episode"] = {
                "steps": self.steps,
                "return_ext": self.return_ext,
                "score": self.score,
                "kills": self.kills,
                "gold": self.gold_collected,
                "descents": self.descents,
                "scout": len(self.visited),
                "exp_level": self.exp_level,
                "depth": self.depth,
                "success": self.success,
            }
        return StepResult(self._observe(caption), reward, self._done, info)

    def _act_move(self, action: int) -> str:
        dr, dc = MOVE_DELTAS[action]
        r, c = self.pos[0] + dr, self.pos[1] + dc
        h, w = self.tiles.shape
        if not (0 <= r < h and 0 <= c < w):
            return ""
        t = int(self.tiles[r, c])
        if t in (WALL, HIDDEN):
            return ""
        if t == DOOR_CLOSED:
            if dr != 0 and dc != 0:
                return cap.door_closed_caption()
            self.tiles[r, c] = DOOR_OPEN
            return cap.door_open_caption()
        if any(m.r == r and m.c == c for m in self.monsters):
            return ""
        self.pos = (r, c)
        self.visited.add((self.depth, r, c))
        if (r, c) in self.gold:
            return cap.gold_seen_caption(self.gold[(r, c)])
        return ""

    def _act_search(self) -> str:
        r0, c0 = self.pos
        h, w = self.tiles.shape
        found = False
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r, c = r0 + dr, c0 + dc
                if 0 <= r < h and 0 <= c < w and self.tiles[r, c] == HIDDEN:
                    self.tiles[r, c] = PASSAGE
                    found = True
        return cap.passage_caption() if found else ""

    def _act_descend(self) -> str:
        if int(self.tiles[self.pos]) != STAIRS_DOWN:
            return ""
        self.descents += 1
        self.score += 50
        self._enter_level(self.depth + 1)
        return cap.descend_caption(self.depth)

    def _act_attack(self) -> str:
        target = None
        for dr, dc in MOVE_DELTAS:
            r, c = self.pos[0] + dr, self.pos[1] + dc
            for m in self.monsters:
                if m.r == r and m.c == c:
                    target = m
                    break
            if target is not None:
                break
        if target is None:
            return ""
        target.hp -= AGENT_DAMAGE
        if target.hp > 0:
            return cap.hit_caption(target.name)
        self.monsters.remove(target)
        self.kills += 1
        self.score += 10
        self.exp_points += target.exp
        caption = cap.kill_caption(target.name)
        new_level = self.exp_level
        while (new_level + 1 < len(_EXP_THRESHOLDS)
               and self.exp_points >= _EXP_THRESHOLDS[new_level + 1]):
            new_level += 1
        if new_level > self.exp_level:
            self.exp_level = new_level
            caption = cap.level_up_caption(new_level)
        return caption

    def _act_pickup(self) -> str:
        amount = self.gold.pop(self.pos, None)
        if amount is None:
            return ""
        self.gold_collected += amount
        self.score += amount
        return cap.gold_caption(amount)

    def _monsters_act(self) -> _Monster | None:
        """Adjacent monsters strike; visible ones take one greedy chase step.
        Returns the monster that landed the killing blow, if any."""
        killer = None
        ar, ac = self.pos
        occupied = {(m.r, m.c) for m in self.monsters}
        for m in self.monsters:
            if max(abs(m.r - ar), abs(m.c - ac)) == 1:
                self.hp -= m.dmg
                if self.hp <= 0 and killer is None:
                    killer = m
                continue
            if max(abs(m.r - ar), abs(m.c - ac)) > self.params.sight_radius:
                continue
            if not self._line_of_sight(m.r, m.c, ar, ac):
                continue
            dr = (ar > m.r) - (ar < m.r)
            dc = (ac > m.c) - (ac < m.c)
            for nr, nc in ((m.r + dr, m.c + dc), (m.r + dr, m.c), (m.r, m.c + dc)):
                if (nr, nc) == (ar, ac) or (nr, nc) in occupied:
                    continue
                if int(self.tiles[nr, nc]) in _WALKABLE:
                    occupied.discard((m.r, m.c))
                    m.r, m.c = nr, nc
                    occupied.add((nr, nc))
                    break
        return killer

    def _line_of_sight(self, r0: int, c0: int, r1: int, c1: int) -> bool:
        """Bresenham walk; walls, hidden cells and closed doors block sight."""
        dr, dc = abs(r1 - r0), abs(c1 - c0)
        sr = 1 if r1 > r0 else -1
        sc = 1 if c1 > c0 else -1
        err = dr - dc
        r, c = r0, c0
        while (r, c) != (r1, c1):
            e2 = 2 * err
            if e2 > -dc:
                err -= dc
                r += sr
            if e2 < dr:
                err += dr
                c += sc
            if (r, c) == (r1, c1):
                break
            if int(self.tiles[r, c]) in (WALL, HIDDEN, DOOR_CLOSED):
                return False
        return True

    # -- observations ------------------------------------------------------

    def _observe(self, caption: str) -> Observation:
        half = VIEW_SIZE // 2
        view = np.zeros((VIEW_SIZE, VIEW_SIZE), dtype=np.uint8)  # WALL padding
        h, w = self.tiles.shape
        r0, c0 = self.pos[0] - half, self.pos[1] - half
        sr0, sr1 = max(r0, 0), min(r0 + VIEW_SIZE, h)
        sc0, sc1 = max(c0, 0), min(c0 + VIEW_SIZE, w)
        dr0, dc0 = sr0 - r0, sc0 - c0
        patch = self.tiles[sr0:sr1, sc0:sc1].copy()
        patch[patch == HIDDEN] = WALL  # hidden passages look like wall
        view[dr0:dr0 + patch.shape[0], dc0:dc0 + patch.shape[1]] = patch
        for (gr, gc) in self.gold:
            vr, vc = gr - r0, gc - c0
            if 0 <= vr < VIEW_SIZE and 0 <= vc < VIEW_SIZE:
                view[vr, vc] = VIEW_GOLD
        for m in self.monsters:
            vr, vc = m.r - r0, m.c - c0
            if 0 <= vr < VIEW_SIZE and 0 <= vc < VIEW_SIZE:
                view[vr, vc] = VIEW_MONSTER
        stats = np.array([self.hp, self.exp_level, self.depth,
                          self.gold_collected, self.steps, self.score],
                         dtype=np.float32)
        return Observation(view=view, stats=stats, caption=caption)

    # -- debugging ---------------------------------------------------------

    def dump_trajectory(self, actions: list[int]) -> list[str]:
        """Replay actions from a fresh episode, returning one JSON line per
        step (for debugging; not used on the training path)."""
        import json

        out = []
        obs = self.reset()
        out.append(json.dumps({"reset": True, "pos": list(self.pos),
                               "depth": self.depth}))
        for a in actions:
            res = self.step(a)
            out.append(json.dumps({
                "action": ACTION_NAMES[a], "pos": list(self.pos),
                "caption": res.obs.caption, "reward": res.reward,
                "done": res.done, "hp": self.hp, "score": self.score,
            }))
            if res.done:
                break
        return out
