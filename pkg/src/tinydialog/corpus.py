"""Dialog corpus plumbing: domain inventories, story and intent-data file
formats, adaptation cases, and exclusion splits.

File formats (all UTF-8, line-oriented, `#` comments and blank lines
ignored):

  intent data      ## intent:<name>      section header
                   - <example text>      one labeled utterance

  stories          ## <story title>
                   * <intent>            user turn
                   - <action>            system turn

Serializers emit a canonical form; parsing a canonical file and
re-serializing reproduces it byte for byte.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

USER = "user"
SYSTEM = "system"


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ValidationError(ValueError):
    """Label inventory mismatches; carries every offender, not just the first."""

    def __init__(self, offenders: Sequence[str]):
        super().__init__("unknown labels: " + "; ".join(offenders))
        self.offenders = tuple(offenders)


class GenerationError(ValueError):
    pass


class CorpusWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntentSpec:
    name: str
    goal: bool = True
    physical: bool = False


@dataclass(frozen=True)
class Domain:
    """Intent and action inventories plus response templates per action."""

    intents: tuple[IntentSpec, ...]
    actions: tuple[str, ...]
    templates: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        names = [i.name for i in self.intents]
        if len(set(names)) != len(names):
            raise ValueError("duplicate intent names")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("duplicate action names")
        for act in self.templates:
            if act not in self.actions:
                raise ValueError(f"template for unknown action {act!r}")

    @property
    def intent_names(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.intents)

    @property
    def verbal_intents(self) -> tuple[IntentSpec, ...]:
        return tuple(i for i in self.intents if not i.physical)

    @property
    def goal_intents(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.intents if i.goal)

    @property
    def nongoal_intents(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.intents if not i.goal)

    def is_goal(self, intent: str) -> bool:
        for i in self.intents:
            if i.name == intent:
                return i.goal
        raise KeyError(intent)

    def templates_for(self, action: str) -> tuple[str, ...]:
        return self.templates.get(action, (action.replace("utter_", "").replace("_", " "),))

    def to_json(self) -> dict:
        return {
            "intents": [
                {"name": i.name, "goal": i.goal, "physical": i.physical}
                for i in self.intents
            ],
            "actions": list(self.actions),
            "templates": {a: list(t) for a, t in sorted(self.templates.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Domain":
        return cls(
            intents=tuple(
                IntentSpec(d["name"], bool(d.get("goal", True)), bool(d.get("physical", False)))
                for d in doc["intents"]
            ),
            actions=tuple(doc["actions"]),
            templates={a: tuple(t) for a, t in doc.get("templates", {}).items()},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Domain":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# stories and intent data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Turn:
    speaker: str  # USER or SYSTEM
    label: str

    def __post_init__(self):
        if self.speaker not in (USER, SYSTEM):
            raise ValueError(f"bad speaker {self.speaker!r}")


@dataclass(frozen=True)
class Story:
    title: str
    turns: tuple[Turn, ...]

    def user_turns(self) -> tuple[Turn, ...]:
        return tuple(t for t in self.turns if t.speaker == USER)

    def system_turns(self) -> tuple[Turn, ...]:
        return tuple(t for t in self.turns if t.speaker == SYSTEM)

    def __len__(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class NLUExample:
    text: str
    intent: str
    line_no: int = 0


def parse_nlu_data(path) -> list[NLUExample]:
    """Parse `## intent:` sectioned utterance data.

    The same text listed under two different intents is a conflicting
    label and rejected; repeats under one intent are collapsed.
    """
    examples: list[NLUExample] = []
    seen: dict[str, NLUExample] = {}
    current: str | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").strip()
            if not line:
                continue
            if line.startswith("## intent:"):
                current = line[len("## intent:"):].strip()
                if not current:
                    raise ParseError(path, line_no, "empty intent name")
            elif line.startswith("##"):
                raise ParseError(path, line_no, f"bad section header {line!r}, expected '## intent:<name>'")
            elif line.startswith("- "):
                if current is None:
                    raise ParseError(path, line_no, "example before any '## intent:' header")
                text = line[2:].strip()
                if not text:
                    raise ParseError(path, line_no, "empty example")
                prior = seen.get(text)
                if prior is not None:
                    if prior.intent != current:
                        raise ParseError(
                            path, line_no,
                            f"example {text!r} already labeled {prior.intent!r} "
                            f"at line {prior.line_no}, conflicting label {current!r}")
                    continue  # harmless repeat under the same intent
                ex = NLUExample(text=text, intent=current, line_no=line_no)
                seen[text] = ex
                examples.append(ex)
            elif line.startswith("#"):
                continue
            else:
                raise ParseError(path, line_no, f"unrecognized line {line!r}")
    return examples


def serialize_nlu_data(examples: Sequence[NLUExample]) -> str:
    """Canonical form: intents in first-appearance order, one blank line
    between sections."""
    order: list[str] = []
    grouped: dict[str, list[NLUExample]] = {}
    for ex in examples:
        if ex.intent not in grouped:
            grouped[ex.intent] = []
            order.append(ex.intent)
        grouped[ex.intent].append(ex)
    blocks = []
    for intent in order:
        lines = [f"## intent:{intent}"]
        lines.extend(f"- {ex.text}" for ex in grouped[intent])
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def parse_stories(path, domain: Domain | None = None,
                  allow_agent_start: bool = False) -> list[Story]:
    """Parse the story grammar; optionally validate labels against a domain.

    A trailing user turn with no following action is accepted with a
    warning. A system turn opening a story is an error unless
    `allow_agent_start` is set.
    """
    stories: list[Story] = []
    title: str | None = None
    turns: list[Turn] = []
    dangling_at: int | None = None
    start_line = 0

    def flush(line_no):
        nonlocal title, turns, dangling_at
        if title is None:
            return
        if not turns:
            raise ParseError(path, start_line, f"story {title!r} has no turns")
        if dangling_at is not None:
            warnings.warn(
                f"{path}:{dangling_at}: story {title!r} ends on a user turn",
                CorpusWarning, stacklevel=3)
        stories.append(Story(title=title, turns=tuple(turns)))
        title, turns, dangling_at = None, [], None

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").strip()
            if not line:
                continue
            if line.startswith("## "):
                flush(line_no)
                title = line[3:].strip()
                start_line = line_no
                if not title:
                    raise ParseError(path, line_no, "empty story title")
            elif line.startswith("##"):
                raise ParseError(path, line_no, f"bad story header {line!r}")
            elif line.startswith("* "):
                if title is None:
                    raise ParseError(path, line_no, "turn outside any story")
                if dangling_at is not None:
                    raise ParseError(
                        path, line_no,
                        "user turn follows a user turn (missing system action)")
                label = line[2:].strip()
                if not label:
                    raise ParseError(path, line_no, "empty intent label")
                turns.append(Turn(USER, label))
                dangling_at = line_no
            elif line.startswith("- "):
                if title is None:
                    raise ParseError(path, line_no, "turn outside any story")
                if not turns and not allow_agent_start:
                    raise ParseError(
                        path, line_no,
                        "system turn before any user turn (agent-initiated stories need the flag)")
                label = line[2:].strip()
                if not label:
                    raise ParseError(path, line_no, "empty action label")
                turns.append(Turn(SYSTEM, label))
                dangling_at = None
            elif line.startswith("#"):
                continue
            else:
                raise ParseError(path, line_no, f"unrecognized line {line!r}")
        flush(line_no=-1)

    if domain is not None:
        validate_story_labels(stories, domain)
    return stories


def validate_story_labels(stories: Sequence[Story], domain: Domain) -> None:
    intents = set(domain.intent_names)
    actions = set(domain.actions)
    offenders = []
    for s in stories:
        for t in s.turns:
            pool = intents if t.speaker == USER else actions
            if t.label not in pool:
                kind = "intent" if t.speaker == USER else "action"
                offenders.append(f"story {s.title!r}: unknown {kind} {t.label!r}")
    if offenders:
        raise ValidationError(offenders)


def serialize_stories(stories: Sequence[Story]) -> str:
    blocks = []
    for s in stories:
        lines = [f"## {s.title}"]
        for t in s.turns:
            marker = "*" if t.speaker == USER else "-"
            lines.append(f"{marker} {t.label}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# ---------------------------------------------------------------------------
# adaptation cases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdaptationCase:
    """A response-selection instance: recent user context, candidate
    responses, and which candidate was actually realized (the one that
    deliberately echoes the context)."""

    context: tuple[str, ...]
    candidates: tuple[str, ...]
    echo_index: int

    def __post_init__(self):
        if not (0 <= self.echo_index < len(self.candidates)):
            raise ValueError("echo_index out of range")

    @property
    def realized(self) -> str:
        return self.candidates[self.echo_index]


def save_adaptation_cases(path, cases: Sequence[AdaptationCase]) -> None:
    # JSON lines, one case per line
    with open(path, "w", encoding="utf-8") as fh:
        for c in cases:
            doc = {"context": list(c.context), "candidates": list(c.candidates),
                   "realized": c.realized}
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def load_adaptation_cases(path) -> list[AdaptationCase]:
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
                candidates = tuple(d["candidates"])
                realized = d["realized"]
                context = tuple(d["context"])
                idx = candidates.index(realized)
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(path, line_no, f"bad adaptation case: {exc}") from None
            cases.append(AdaptationCase(context, candidates, idx))
    return cases


# ---------------------------------------------------------------------------
# solvability oracle
# ---------------------------------------------------------------------------

LISTEN = "action_listen"


def story_decision_points(story: Story, include_listen: bool = True):
    """Yield (window, gold) pairs for every system decision in a story.

    The window is the tuple of up to `3` turns preceding the decision;
    with `include_listen`, yielding the floor back to the user is itself
    a decision with gold `action_listen`.
    """
    turns = story.turns
    for i, t in enumerate(turns):
        if t.speaker == SYSTEM:
            window = tuple((p.speaker, p.label) for p in turns[max(0, i - 3):i])
            yield window, t.label
        elif include_listen and i > 0:
            window = tuple((p.speaker, p.label) for p in turns[max(0, i - 3):i])
            yield window, LISTEN


def solvability_conflicts(stories: Sequence[Story],
                          include_listen: bool = True) -> list[str]:
    """Check that gold actions are a function of the last-3-turn window.

    Returns human-readable conflict descriptions; empty means a lookup
    table over windows reproduces every decision.
    """
    table: dict[tuple, str] = {}
    origin: dict[tuple, str] = {}
    conflicts = []
    for s in stories:
        for window, gold in story_decision_points(s, include_listen=include_listen):
            prior = table.get(window)
            if prior is None:
                table[window] = gold
                origin[window] = s.title
            elif prior != gold:
                conflicts.append(
                    f"window {window} -> {prior!r} (story {origin[window]!r}) "
                    f"vs {gold!r} (story {s.title!r})")
    return conflicts


def build_window_policy(stories: Sequence[Story]) -> dict[tuple, str]:
    """The brute-force window lookup table itself, for oracle replay."""
    table: dict[tuple, str] = {}
    for s in stories:
        for window, gold in story_decision_points(s, include_listen=True):
            table[window] = gold
    return table


# ---------------------------------------------------------------------------
# exclusion splits
# ---------------------------------------------------------------------------

DEFAULT_EXCLUSIONS = (0, 5, 25, 50, 70, 90, 95)


@dataclass(frozen=True)
class SplitSpec:
    percentages: tuple[int, ...] = DEFAULT_EXCLUSIONS
    seed: int = 0

    def __post_init__(self):
        for p in self.percentages:
            if not (0 <= p < 100):
                raise ValueError(f"exclusion percentage {p} outside [0, 100)")


@dataclass(frozen=True)
class ExclusionSplit:
    exclusion: int
    stories: tuple[Story, ...]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _keep_count(n: int, exclusion: int) -> int:
    # round((1 - p/100) * n) half-up, in exact integer arithmetic
    return max(1, ((100 - exclusion) * n + 50) // 100)


def split_corpus(stories: Sequence[Story], spec: SplitSpec) -> list[ExclusionSplit]:
    """Nested training subsets at each exclusion percentage.

    One shuffle per seed; each split keeps the first round((1-p)*N)
    stories (minimum 1), so higher exclusions are subsets of lower ones.
    """
    if not stories:
        raise ValueError("empty training pool")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(stories))
    shuffled = [stories[i] for i in order]
    splits = []
    for p in spec.percentages:
        keep = _keep_count(len(stories), p)
        splits.append(ExclusionSplit(exclusion=p, stories=tuple(shuffled[:keep])))
    return splits
