"""Render and parse the multimodal planning prompt and its answer.

The question lists six video slots with their view names, then the
environmental descriptor line carrying city and data provenance, then the
command sentence and the fixed trajectory request. Answers carry six
signed two-decimal waypoints and, optionally, the matching speeds.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .curation import EpisodeRecord
from .errors import RecordParseError, SchemaError

VIEW_NAMES = ("front view", "front left view", "front right view",
              "back view", "back left view", "back right view")

SPE_TEMPLATE = "You are driving in {city} under {domain} scenario."
DOMAIN_WORDS = {"sim": "Simulation", "real": "Real-World"}

COMMAND_SENTENCES = {
    "move forward": "move forward",
    "turn left": "make a left turn at the upcoming intersection",
    "turn right": "make a right turn at the upcoming intersection",
}

ANSWER_PREFIX = "Here is the planning trajectory "
SPEEDS_PREFIX = "Speeds: "

_PAIR_RE = re.compile(r"\(\s*([+-]?\d+(?:\.\d+)?)\s*,\s*([+-]?\d+(?:\.\d+)?)\s*\)")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class PromptText:
    question: str
    spe_descriptor: str
    expected_answer: str

    def __post_init__(self) -> None:
        if self.question.count("<video>") != 6:
            raise SchemaError("question must contain exactly six <video> placeholders")
        for name in VIEW_NAMES:
            if name not in self.question:
                raise SchemaError(f"question is missing the view name {name!r}")
        if self.question.count(self.spe_descriptor) != 1:
            raise SchemaError("the environmental descriptor must appear exactly once")


def spe_descriptor(city: str, provenance: str) -> str:
    if not city:
        raise SchemaError("city must be non-empty")
    try:
        domain = DOMAIN_WORDS[provenance]
    except KeyError:
        raise SchemaError(f"unknown provenance {provenance!r}") from None
    return SPE_TEMPLATE.format(city=city, domain=domain)


def render_prompt(r: EpisodeRecord) -> PromptText:
    """Build the training question/answer pair for one record."""
    slots = " ".join(f"{i}: <video>" for i in range(1, 7))
    views = ", ".join(VIEW_NAMES)
    descriptor = spe_descriptor(r.city, r.provenance)
    command = COMMAND_SENTENCES.get(r.command, r.command)
    question = (
        f"{slots}. These 6 videos are the {views} of the ego vehicle. "
        f"{descriptor} "
        f"You need to {command}, please provide the planning trajectory for the ego car."
    )
    answer = render_answer(r.gt_waypoints, r.gt_speeds)
    return PromptText(question=question, spe_descriptor=descriptor, expected_answer=answer)


def render_answer(waypoints, speeds=None) -> str:
    """Six "(+x.xx, +y.yy)" pairs with explicit sign, round-half-even.

    When speeds are given a second sentence lists them unsigned with the
    same two-decimal quantization.
    """
    wp = np.asarray(waypoints, dtype=float)
    if wp.shape != (6, 2):
        raise SchemaError(f"expected 6 waypoints, got shape {wp.shape}")
    pairs = ", ".join(f"({x:+.2f}, {y:+.2f})" for x, y in wp)
    text = f"{ANSWER_PREFIX}{pairs}."
    if speeds is not None:
        sp = np.asarray(speeds, dtype=float)
        if sp.shape != (6,):
            raise SchemaError(f"expected 6 speeds, got shape {sp.shape}")
        text += " " + SPEEDS_PREFIX + ", ".join(f"{v:.2f}" for v in sp) + "."
    return text


def parse_answer(s: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Recover waypoints (and speeds, if present) from an answer string.

    Tolerant of surrounding prose: scans for the first six signed
    coordinate pairs.
    """
    stop = len(s)
    speeds = None
    idx = s.find(SPEEDS_PREFIX)
    if idx >= 0:
        stop = idx
        tail = s[idx + len(SPEEDS_PREFIX):]
        values = _NUMBER_RE.findall(tail)
        if len(values) < 6:
            raise RecordParseError(f"expected 6 speeds after {SPEEDS_PREFIX!r}, found {len(values)}",
                                   offset=idx)
        speeds = np.array([float(v) for v in values[:6]])
    pairs = _PAIR_RE.findall(s[:stop])
    if len(pairs) < 6:
        bad = _find_malformed_pair(s[:stop])
        if bad is not None:
            raise RecordParseError("malformed coordinate pair", offset=bad)
        raise RecordParseError(f"expected 6 coordinate pairs, found {len(pairs)}")
    waypoints = np.array([[float(x), float(y)] for x, y in pairs[:6]])
    return waypoints, speeds


def _find_malformed_pair(s: str) -> int | None:
    """Offset of an opening parenthesis that does not start a valid pair."""
    for m in re.finditer(r"\(", s):
        if not _PAIR_RE.match(s, m.start()):
            return m.start()
    return None


def export_prompt_pairs(records, stream) -> None:
    """JSONL {id, question, answer} pairs for an external training harness."""
    for r in records:
        p = render_prompt(r)
        stream.write(json.dumps(
            {"id": r.id, "question": p.question, "answer": p.expected_answer},
            sort_keys=True))
        stream.write("\n")
