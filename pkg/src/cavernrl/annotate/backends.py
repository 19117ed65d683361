"""Annotation backends: the deterministic mock and the HTTP chat-completions
client.

Backends answer rendered (system, user) prompt pairs with response *text*;
parsing back into labels happens upstream, so the mock exercises the same
prompt build/parse round trip as a real endpoint. The mock recovers the
caption (or caption pair) from the rendered prompt and applies a fixed rule
table keyed on the caption's family and the prompt's goal variant.
"""

from __future__ import annotations

import os
import threading
import time

import requests

from ..env.captions import CaptionFamily, classify_caption
from . import prompts


class BackendError(RuntimeError):
    """Transport-level annotation failure (network, HTTP status, response
    shape). Parse failures are a separate, per-item concern."""


class Backend:
    def complete(self, system: str, user: str) -> str:
        raise NotImplementedError

    def complete_many(self, batch: list[tuple[str, str]]) -> list[str]:
        return [self.complete(system, user) for system, user in batch]


# FOO families per goal variant; everything else is BAR. Gold *sightings*
# ("You see here ...") are mere information, not progress, so the default
# judge rates them BAR; only the goal that explicitly craves gold treats a
# sighting as helpful.
_GOAL_RULES: dict[str, frozenset[CaptionFamily]] = {
    "default": frozenset({
        CaptionFamily.KILL, CaptionFamily.GOLD, CaptionFamily.LEVEL_UP,
        CaptionFamily.PASSAGE, CaptionFamily.DESCEND,
    }),
    "combat": frozenset({CaptionFamily.KILL, CaptionFamily.LEVEL_UP}),
    "gold": frozenset({CaptionFamily.GOLD, CaptionFamily.GOLD_SEEN}),
}


def rule_table_label(caption: str, goal: str = "default") -> int:
    """The mock's ground truth: 1 for captions whose family serves the goal,
    0 otherwise. Captions outside the grammar get 0."""
    try:
        family = classify_caption(caption)
    except ValueError:
        return 0
    return 1 if family in _GOAL_RULES[goal] else 0


class MockAnnotator(Backend):
    """Deterministic annotator with optional injected latency.

    ``batch_latency`` seconds are slept once per complete_many call,
    simulating a slow endpoint without burning CPU (the sleep releases the
    GIL, like real network I/O would).
    """

    def __init__(self, batch_latency: float = 0.0):
        self.batch_latency = batch_latency
        self.requests_seen = 0

    def complete(self, system: str, user: str) -> str:
        self.requests_seen += 1
        try:
            first, second = prompts.extract_pair_from_prompt(user)
        except ValueError:
            pass
        else:
            s1 = rule_table_label(first, "default")
            s2 = rule_table_label(second, "default")
            best = "1" if s1 > s2 else ("2" if s2 > s1 else "None")
            return (f"<analysis> comparing {first!r} and {second!r} </analysis>\n"
                    f'("best_description": {best})')
        caption = prompts.extract_caption_from_prompt(user)
        goal = prompts.detect_goal_variant(user)
        label = "FOO" if rule_table_label(caption, goal) else "BAR"
        return ("<knowledge> dungeon crawling </knowledge>\n"
                f"<analysis> rated {caption!r} for the {goal} goal </analysis>\n"
                f"<label> {label} </label>")

    def complete_many(self, batch: list[tuple[str, str]]) -> list[str]:
        if self.batch_latency > 0:
            time.sleep(self.batch_latency)
        return [self.complete(system, user) for system, user in batch]


class StalledAnnotator(Backend):
    """Never answers; used to prove that training does not block on the
    annotation path. ``release()`` unblocks any waiting calls at teardown."""

    def __init__(self):
        self._event = threading.Event()

    def complete(self, system: str, user: str) -> str:
        self._event.wait()
        raise BackendError("stalled annotator released")

    def release(self) -> None:
        self._event.set()


DEFAULT_API_KEY_ENV = "CAVERNRL_API_KEY"


class HttpAnnotator(Backend):
    """Chat-completions style HTTP client.

    POSTs {model, messages, temperature, max_tokens} and reads
    choices[0].message.content. The credential, if any, comes from an
    environment variable, never from config files.
    """

    def __init__(self, url: str, model: str = "annotator",
                 temperature: float = 0.1, max_tokens: int = 4096,
                 timeout: float = 60.0, api_key_env: str = DEFAULT_API_KEY_ENV,
                 session: requests.Session | None = None):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.api_key_env = api_key_env
        self._session = session or requests.Session()

    def complete(self, system: str, user: str) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        try:
            resp = self._session.post(self.url, json=body, headers=headers,
                                      timeout=self.timeout)
        except requests.RequestException as e:
            raise BackendError(f"annotation request failed: {e}") from e
        if resp.status_code != 200:
            raise BackendError(f"annotation endpoint returned {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise BackendError(f"malformed annotation response: {e}") from e
