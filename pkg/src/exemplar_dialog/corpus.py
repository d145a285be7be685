"""Dialogue ingestion, delexicalization, context windows and splits."""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .text import tokenize

logger = logging.getLogger(__name__)

DOMAINS = ("restaurant", "hotel", "train", "taxi", "attraction", "police", "hospital")

# Placeholder for the missing system turn in front of user-first dialogues.
SENTINEL_TOKEN = "sys-empty"


class Speaker(str, Enum):
    USER = "user"
    SYSTEM = "system"


_SPEAKER_ALIASES = {
    "user": Speaker.USER, "usr": Speaker.USER, "u": Speaker.USER, "customer": Speaker.USER,
    "system": Speaker.SYSTEM, "sys": Speaker.SYSTEM, "s": Speaker.SYSTEM, "agent": Speaker.SYSTEM,
}


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    raw_text: str
    tokens: tuple[str, ...] = ()

    @classmethod
    def make(cls, speaker: Speaker, text: str) -> "Utterance":
        return cls(speaker, text, tuple(tokenize(text)))

    @property
    def is_sentinel(self) -> bool:
        return self.tokens == (SENTINEL_TOKEN,)


SENTINEL = Utterance(Speaker.SYSTEM, SENTINEL_TOKEN, (SENTINEL_TOKEN,))


@dataclass
class DomainGoal:
    constraints: dict[str, str] = field(default_factory=dict)
    requested: list[str] = field(default_factory=list)


@dataclass
class GoalSpec:
    domains: dict[str, DomainGoal] = field(default_factory=dict)

    @classmethod
    def from_json(cls, data: Mapping) -> "GoalSpec":
        domains = {}
        for dom, spec in data.items():
            dom = dom.lower()
            spec = spec or {}
            domains[dom] = DomainGoal(
                {str(k).lower(): str(v).lower() for k, v in (spec.get("constraints") or {}).items()},
                [str(s).lower() for s in spec.get("requested") or []],
            )
        return cls(domains)

    def to_json(self) -> dict:
        return {d: {"constraints": g.constraints, "requested": g.requested} for d, g in self.domains.items()}


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    turns: tuple[Utterance, ...]
    goal: GoalSpec | None = None


@dataclass(frozen=True)
class ContextTriple:
    """A (system, user, system) window; ``turn_index`` is the index of ``s2``."""

    s1: Utterance
    u: Utterance
    s2: Utterance
    dialogue_id: str
    turn_index: int

    def to_json(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "turn_index": self.turn_index,
            "s1": list(self.s1.tokens),
            "u": list(self.u.tokens),
            "s2": list(self.s2.tokens),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ContextTriple":
        def utt(key, speaker):
            toks = tuple(data[key])
            return Utterance(speaker, " ".join(toks), toks)
        return cls(utt("s1", Speaker.SYSTEM), utt("u", Speaker.USER), utt("s2", Speaker.SYSTEM),
                   data["dialogue_id"], int(data["turn_index"]))


@dataclass
class CorpusSplit:
    train: list[Dialogue]
    dev: list[Dialogue]
    test: list[Dialogue]

    def sizes(self) -> dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev), "test": len(self.test)}

    def manifest(self) -> dict:
        return {"dev": [d.dialogue_id for d in self.dev], "test": [d.dialogue_id for d in self.test]}


Ontology = dict[str, list[str]]
Database = dict[str, list[dict[str, str]]]


# --------------------------------------------------------------------------- loading

def _read_json(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def normalize_turns(turns: Sequence[Utterance]) -> tuple[Utterance, ...]:
    """Merge consecutive turns by the same speaker."""
    merged: list[Utterance] = []
    for turn in turns:
        if merged and merged[-1].speaker == turn.speaker:
            prev = merged[-1]
            merged[-1] = Utterance(prev.speaker, prev.raw_text + " " + turn.raw_text, prev.tokens + turn.tokens)
        else:
            merged.append(turn)
    return tuple(merged)


def parse_dialogue(record: Mapping, where: str = "record") -> Dialogue:
    if not isinstance(record, Mapping):
        raise DataError(f"{where}: expected an object, got {type(record).__name__}")
    for key in ("dialogue_id", "turns"):
        if key not in record:
            raise DataError(f"{where}: missing field '{key}'")
    did = str(record["dialogue_id"])
    turns = []
    for j, turn in enumerate(record["turns"]):
        for key in ("speaker", "text"):
            if key not in turn:
                raise DataError(f"{where} ({did}) turn {j}: missing field '{key}'")
        speaker = _SPEAKER_ALIASES.get(str(turn["speaker"]).strip().lower())
        if speaker is None:
            raise DataError(f"{where} ({did}) turn {j}: unknown speaker {turn['speaker']!r}")
        text = str(turn["text"]).strip()
        if not text:
            logger.debug("%s turn %d: empty text dropped", did, j)
            continue
        turns.append(Utterance.make(speaker, text))
    turns = normalize_turns(turns)
    if len(turns) < 2:
        raise DataError(f"{where} ({did}): a dialogue needs at least 2 turns, found {len(turns)}")
    goal = GoalSpec.from_json(record["goal"]) if record.get("goal") else None
    return Dialogue(did, turns, goal)


def load_dialogues(path: str | Path) -> list[Dialogue]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise DataError(f"{path}: expected a JSON array of dialogues")
    dialogues = [parse_dialogue(rec, f"{path}: record {i}") for i, rec in enumerate(data)]
    ids = [d.dialogue_id for d in dialogues]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise DataError(f"{path}: duplicate dialogue_id {dup!r}")
    logger.info("loaded %d dialogues from %s", len(dialogues), path)
    return dialogues


def load_ontology(path: str | Path) -> Ontology:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise DataError(f"{path}: ontology must be a JSON object")
    ont: Ontology = {}
    for key, values in data.items():
        if not isinstance(values, list) or not values:
            raise DataError(f"{path}: ontology slot {key!r} has no values")
        ont[key.strip().lower()] = [str(v) for v in values]
    return ont


def load_database(path: str | Path) -> Database:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise DataError(f"{path}: database must be a JSON object")
    db: Database = {}
    for domain, records in data.items():
        rows = []
        for i, rec in enumerate(records):
            rec = {str(k).lower(): str(v) for k, v in rec.items()}
            if not any(k in rec for k in ("name", "id", "trainid")):
                raise DataError(f"{path}: {domain} record {i} has no name or id field")
            rows.append(rec)
        db[domain.lower()] = rows
    return db


def check_goal(goal: GoalSpec, ont: Ontology) -> list[str]:
    """Return goal slots that have no ``domain-slot`` entry in the ontology."""
    unknown = []
    for dom, g in goal.domains.items():
        for slot in list(g.constraints) + g.requested:
            if f"{dom}-{slot}" not in ont:
                unknown.append(f"{dom}-{slot}")
    return unknown


# ------------------------------------------------------------------- delexicalization

_FAMILIES = {"phone": "phone", "reference": "reference", "ref": "reference",
             "trainid": "trainid", "id": "trainid"}


def _slot_family(key: str) -> tuple[str, str] | None:
    """Map an ontology key to (domain, placeholder slot) for delexicalized families."""
    parts = re.split(r"[-\s]+", key)
    if len(parts) < 2:
        return None
    domain, slot = parts[0], parts[-1]
    fam = _FAMILIES.get(slot)
    if fam is None or (fam == "trainid" and domain != "train"):
        return None
    return domain, fam


class Delexicalizer:
    """Compiled value -> placeholder substitution built from an ontology."""

    def __init__(self, ont: Ontology):
        table: dict[str, str] = {}
        for key in sorted(ont):
            fam = _slot_family(key)
            if fam is None:
                continue
            placeholder = f"{fam[0]}-{fam[1]}"
            for value in ont[key]:
                value = value.strip()
                if value and value.lower() not in table:
                    table[value.lower()] = placeholder
        self.placeholders = table
        if table:
            alternatives = sorted(table, key=lambda v: (-len(v), v))
            pattern = "|".join(re.escape(v) for v in alternatives)
            self._regex = re.compile(rf"(?<!\w)(?:{pattern})(?!\w)", re.IGNORECASE)
        else:
            self._regex = None

    def text(self, text: str) -> str:
        if self._regex is None:
            return text
        return self._regex.sub(lambda m: self.placeholders[m.group(0).lower()], text)

    def __call__(self, u: Utterance) -> Utterance:
        if u.is_sentinel:
            return u
        new = self.text(u.raw_text)
        if new == u.raw_text and u.tokens:
            return u
        return Utterance(u.speaker, new, tuple(tokenize(new)))


def delexicalize(u: Utterance, ont: Ontology | Delexicalizer) -> Utterance:
    """Replace phone, reference and train-id values with ``domain-slot`` placeholders."""
    delex = ont if isinstance(ont, Delexicalizer) else Delexicalizer(ont)
    return delex(u)


def delexicalize_dialogues(dialogues: Iterable[Dialogue], ont: Ontology) -> list[Dialogue]:
    delex = Delexicalizer(ont)
    return [replace(d, turns=tuple(delex(t) for t in d.turns)) for d in dialogues]


# --------------------------------------------------------------------------- windows

def dialogue_triples(d: Dialogue) -> list[ContextTriple]:
    turns = d.turns
    out = []
    for j in range(1, len(turns)):
        if turns[j].speaker is not Speaker.SYSTEM or turns[j - 1].speaker is not Speaker.USER:
            continue
        s1 = turns[j - 2] if j >= 2 else SENTINEL
        out.append(ContextTriple(s1, turns[j - 1], turns[j], d.dialogue_id, j))
    return out


def make_triples(dialogues: Iterable[Dialogue]) -> list[ContextTriple]:
    """Slide a (system, user, system) window over every dialogue.

    User-first dialogues get ``SENTINEL`` as the first window's system turn.
    """
    out: list[ContextTriple] = []
    for d in dialogues:
        out.extend(dialogue_triples(d))
    return out


# ---------------------------------------------------------------------------- splits

def split_corpus(dialogues: Sequence[Dialogue], split_manifest: str | Path | Mapping | None = None,
                 dev_size: int = 1000, test_size: int = 1000, seed: int = 0) -> CorpusSplit:
    by_id = {d.dialogue_id: d for d in dialogues}
    if split_manifest is not None:
        manifest = split_manifest if isinstance(split_manifest, Mapping) else _read_json(split_manifest)
        held: dict[str, set[str]] = {}
        for name in ("dev", "test"):
            ids = [str(i) for i in manifest.get(name, [])]
            missing = [i for i in ids if i not in by_id]
            if missing:
                raise DataError(f"split manifest {name} id {missing[0]!r} not found in corpus "
                                f"({len(missing)} missing)")
            held[name] = set(ids)
        if held["dev"] & held["test"]:
            raise DataError("split manifest lists the same dialogue in dev and test")
    else:
        if dev_size + test_size >= len(dialogues):
            raise DataError(f"corpus of {len(dialogues)} dialogues is too small for "
                            f"dev={dev_size} test={test_size}")
        ids = sorted(by_id)
        random.Random(seed).shuffle(ids)
        held = {"test": set(ids[:test_size]), "dev": set(ids[test_size:test_size + dev_size])}
    split = CorpusSplit(
        train=[d for d in dialogues if d.dialogue_id not in held["dev"] | held["test"]],
        dev=[d for d in dialogues if d.dialogue_id in held["dev"]],
        test=[d for d in dialogues if d.dialogue_id in held["test"]],
    )
    logger.info("split sizes %s", split.sizes())
    return split
