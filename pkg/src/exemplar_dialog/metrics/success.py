"""Dialogue-level inform and request success over generated system turns.

Only phone, reference and train-id values are delexicalized in this corpus,
so mentions are matched at two levels: ``domain-slot`` placeholders and
surface values taken from the database and ontology.

* Inform: a dialogue succeeds when, for every goal domain that has
  constraints and database records, some generated turn names an entity
  (by its name or id, or by the ``<domain>-trainid`` placeholder) whose
  record satisfies all constraints on attributes the database knows about.
  Goals with no such domain are left out of the inform denominator.
* Request: a requested slot succeeds when some generated turn contains its
  placeholder or any known value of that slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..corpus import Database, GoalSpec, Ontology
from ..text import tokenize

CONVENTION_VERSION = "inform-request/1"
_DONTCARE = {"dontcare", "don't care", "any", "none", ""}
_PLACEHOLDER_SLOT = {"phone": "phone", "reference": "reference", "ref": "reference",
                     "trainid": "trainid", "id": "trainid"}


def _norm(text: str) -> str:
    return " ".join(tokenize(text))


def _contains(haystack: str, needle: str) -> bool:
    return bool(needle) and f" {needle} " in haystack


@dataclass
class InformRequestResult:
    inform: float
    request: float
    dialogues: int
    inform_dialogues: int
    inform_successes: int
    excluded_no_goal: int
    excluded_no_inform_domain: int
    requested_slots: int
    requested_hits: int
    per_dialogue: dict = field(default_factory=dict)


def _entity_keys(record: Mapping[str, str]) -> list[str]:
    return [_norm(record[k]) for k in ("name", "id", "trainid") if record.get(k)]


def _satisfies(record: Mapping[str, str], constraints: Mapping[str, str], known: set[str]) -> bool:
    for slot, value in constraints.items():
        if slot not in known or _norm(value) in _DONTCARE:
            continue
        if _norm(record.get(slot, "")) != _norm(value):
            return False
    return True


def _slot_values(domain: str, slot: str, db: Database, ont: Ontology) -> set[str]:
    values = {_norm(v) for v in ont.get(f"{domain}-{slot}", [])}
    values |= {_norm(r[slot]) for r in db.get(domain, []) if r.get(slot)}
    return {v for v in values if v}


def inform_request(generated: Mapping[str, Sequence], goals: Mapping[str, GoalSpec | None],
                   db: Database, ont: Ontology) -> InformRequestResult:
    """Score generated system turns (token lists or strings, in turn order) per dialogue."""
    excluded_goal = excluded_inform = 0
    inform_total = inform_ok = req_total = req_ok = 0
    per_dialogue = {}
    for did in sorted(generated):
        goal = goals.get(did)
        if goal is None or not goal.domains:
            excluded_goal += 1
            continue
        turns = [t if isinstance(t, str) else " ".join(t) for t in generated[did]]
        text = " " + " ".join(_norm(t) for t in turns) + " "

        domain_ok = {}
        for domain, dgoal in goal.domains.items():
            records = db.get(domain, [])
            if not dgoal.constraints or not records:
                continue
            known = {k for r in records for k in r}
            if domain == "train" and _contains(text, "train-trainid"):
                # the placeholder hides which train was offered
                mentioned = records
            else:
                mentioned = [r for r in records if any(_contains(text, k) for k in _entity_keys(r))]
            domain_ok[domain] = any(_satisfies(r, dgoal.constraints, known) for r in mentioned)
        if domain_ok:
            inform_total += 1
            inform_ok += all(domain_ok.values())
        else:
            excluded_inform += 1

        requested = {}
        for domain, dgoal in goal.domains.items():
            for slot in dgoal.requested:
                fam = _PLACEHOLDER_SLOT.get(slot)
                hit = (fam is not None and _contains(text, f"{domain}-{fam}")) or any(
                    _contains(text, v) for v in _slot_values(domain, slot, db, ont))
                requested[f"{domain}-{slot}"] = hit
                req_total += 1
                req_ok += hit
        per_dialogue[did] = {"inform": domain_ok, "request": requested}

    return InformRequestResult(
        inform=100.0 * inform_ok / inform_total if inform_total else 0.0,
        request=100.0 * req_ok / req_total if req_total else 0.0,
        dialogues=len(generated),
        inform_dialogues=inform_total,
        inform_successes=inform_ok,
        excluded_no_goal=excluded_goal,
        excluded_no_inform_domain=excluded_inform,
        requested_slots=req_total,
        requested_hits=req_ok,
        per_dialogue=per_dialogue,
    )


def group_by_dialogue(rows: Iterable[Mapping], key: str = "hypothesis") -> dict[str, list]:
    """Collect generation rows into per-dialogue turn lists ordered by turn index."""
    out: dict[str, list[tuple[int, object]]] = {}
    for row in rows:
        out.setdefault(row["dialogue_id"], []).append((int(row["turn_index"]), row[key]))
    return {d: [v for _, v in sorted(items, key=lambda x: x[0])] for d, items in out.items()}
