"""Seeded generator for small MultiWOZ-style corpora.

Produces the four input files the pipeline reads (dialogues with goals,
ontology, database, split manifest) plus a word-vector file, so the whole
pipeline can run without the real corpus. Dialogues are user-first, span
one or two domains, and mention phone numbers, booking references and
train ids that the delexicalizer should catch.
"""

from __future__ import annotations

import hashlib
import json
import random
from pathlib import Path

import numpy as np

from .container import atomic_write_text
from .text import tokenize

AREAS = ["centre", "north", "south", "east", "west"]
PRICES = ["cheap", "moderate", "expensive"]
FOODS = ["italian", "chinese", "indian", "british", "french", "thai", "spanish", "european", "japanese", "turkish"]
ATTRACTION_TYPES = ["museum", "park", "college", "theatre", "cinema", "swimming pool", "nightclub"]
HOTEL_TYPES = ["hotel", "guesthouse"]
CITIES = ["cambridge", "london kings cross", "ely", "norwich", "stansted airport", "peterborough",
          "leicester", "birmingham new street", "bishops stortford", "kings lynn"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
STREETS = ["regent street", "hills road", "mill road", "king street", "bridge street", "trumpington street",
           "castle street", "newmarket road", "jesus lane", "market hill"]
NAME_A = ["golden", "royal", "red", "little", "old", "grand", "blue", "green", "silver", "lucky", "happy", "riverside"]
NAME_B = {
    "restaurant": ["curry", "house", "kitchen", "garden", "bistro", "wok", "grill", "table", "spoon", "lantern"],
    "hotel": ["lodge", "inn", "hotel", "guesthouse", "manor", "rooms", "court", "house"],
    "attraction": ["museum", "gallery", "park", "college", "theatre", "pool", "club", "gardens"],
}


def _phone(rng: random.Random) -> str:
    return f"01223{rng.randint(100000, 999999)}"


def _postcode(rng: random.Random) -> str:
    return f"cb{rng.randint(1, 5)}{rng.randint(1, 9)}{rng.choice('abdehjlnpqrstuwxyz')}{rng.choice('abdehjlnpqrstuwxyz')}"


def _reference(rng: random.Random) -> str:
    return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(8))


def _unique_names(rng: random.Random, domain: str, n: int) -> list[str]:
    pool = [f"the {a} {b}" for a in NAME_A for b in NAME_B[domain]]
    rng.shuffle(pool)
    return pool[:n]


def make_database(rng: random.Random) -> dict:
    db: dict[str, list[dict]] = {"restaurant": [], "hotel": [], "attraction": [], "train": [],
                                 "police": [], "hospital": []}
    for name in _unique_names(rng, "restaurant", 40):
        db["restaurant"].append({
            "name": name, "area": rng.choice(AREAS), "food": rng.choice(FOODS), "pricerange": rng.choice(PRICES),
            "phone": _phone(rng), "postcode": _postcode(rng),
            "address": f"{rng.randint(1, 99)} {rng.choice(STREETS)}",
        })
    for name in _unique_names(rng, "hotel", 25):
        db["hotel"].append({
            "name": name, "area": rng.choice(AREAS), "pricerange": rng.choice(PRICES),
            "stars": str(rng.randint(2, 4)), "type": rng.choice(HOTEL_TYPES),
            "parking": rng.choice(["yes", "no"]), "phone": _phone(rng), "postcode": _postcode(rng),
            "address": f"{rng.randint(1, 99)} {rng.choice(STREETS)}",
        })
    for name in _unique_names(rng, "attraction", 25):
        db["attraction"].append({
            "name": name, "area": rng.choice(AREAS), "type": rng.choice(ATTRACTION_TYPES),
            "phone": _phone(rng), "postcode": _postcode(rng),
            "entrance fee": rng.choice(["free", "5 pounds", "2.50 pounds", "4 pounds"]),
            "address": f"{rng.randint(1, 99)} {rng.choice(STREETS)}",
        })
    used = set()
    for _ in range(60):
        tid = f"tr{rng.randint(1000, 9999)}"
        while tid in used:
            tid = f"tr{rng.randint(1000, 9999)}"
        used.add(tid)
        dep, dest = rng.sample(CITIES, 2)
        if rng.random() < 0.7:
            dep, dest = ("cambridge", dest) if dest != "cambridge" else (dep, "cambridge")
        hour = rng.randint(5, 21)
        minute = rng.choice([0, 11, 17, 24, 35, 40, 52])
        dur = rng.choice([17, 28, 50, 79, 88])
        arrive = hour * 60 + minute + dur
        db["train"].append({
            "trainid": tid, "departure": dep, "destination": dest, "day": rng.choice(DAYS),
            "leaveat": f"{hour:02d}:{minute:02d}", "arriveby": f"{arrive // 60 % 24:02d}:{arrive % 60:02d}",
            "price": f"{rng.randint(4, 30)}.{rng.choice(['10', '40', '60', '80'])} pounds",
        })
    db["police"].append({"name": "parkside police station", "phone": "01223358966", "postcode": "cb11jg",
                         "address": "parkside , cambridge"})
    db["hospital"].append({"name": "addenbrookes hospital", "phone": "01223245151", "postcode": "cb20qq",
                           "address": "hills rd , cambridge"})
    return db


# Template banks: several paraphrases per act so that similar user turns share
# response patterns across dialogues.
T = {
    "restaurant_inform": [
        "i am looking for a {pricerange} {food} restaurant in the {area} .",
        "i want to find a {pricerange} restaurant that serves {food} food in the {area} of town .",
        "can you help me find a {food} restaurant ? it should be in the {area} and {pricerange} .",
        "i need a place to eat in the {area} . something {pricerange} serving {food} food .",
    ],
    "restaurant_offer": [
        "{name} is a {pricerange} {food} restaurant in the {area} . would you like to book a table ?",
        "i recommend {name} . it serves {food} food in the {area} and is in the {pricerange} price range .",
        "{name} matches your request . shall i make a reservation ?",
    ],
    "hotel_inform": [
        "i need a {pricerange} {type} in the {area} with {stars} stars .",
        "i am looking for a place to stay . a {type} in the {area} , {pricerange} price please .",
        "can you find me a {stars} star {type} in the {area} ? i want something {pricerange} .",
    ],
    "hotel_offer": [
        "{name} is a {pricerange} {type} in the {area} with {stars} stars . would you like to book ?",
        "i have {name} , a {stars} star {type} in the {area} . shall i book a room ?",
        "how about {name} ? it is {pricerange} and located in the {area} .",
    ],
    "attraction_inform": [
        "i want to visit a {type} in the {area} .",
        "are there any {type} attractions in the {area} of town ?",
        "can you recommend a {type} to see in the {area} ?",
    ],
    "attraction_offer": [
        "{name} is a {type} in the {area} . the entrance fee is {entrance fee} .",
        "i suggest {name} , a nice {type} in the {area} .",
        "there is {name} in the {area} . it is a {type} .",
    ],
    "train_inform": [
        "i need a train from {departure} to {destination} on {day} .",
        "i am looking for a train leaving {departure} going to {destination} on {day} .",
        "can you find me a train to {destination} from {departure} ? i will travel on {day} .",
    ],
    "train_offer": [
        "{trainid} leaves {departure} at {leaveat} and arrives in {destination} at {arriveby} . would you like to book it ?",
        "there is a train , {trainid} , departing at {leaveat} and arriving by {arriveby} . the price is {price} .",
        "i have {trainid} leaving at {leaveat} . shall i book tickets for you ?",
    ],
    "taxi_inform": [
        "i also need a taxi from {departure} to {destination} . i want to leave after {leaveat} .",
        "please book me a taxi to {destination} from {departure} leaving at {leaveat} .",
    ],
    "taxi_book": [
        "i have booked a {car} for you . the contact number is {phone} .",
        "your taxi is booked . it will be a {car} and the contact number is {phone} .",
    ],
    "request": [
        "can i get the {slots} please ?",
        "what is the {slots} ?",
        "could you give me the {slots} ?",
    ],
    "book_restaurant": [
        "yes , please book a table for {people} people at {time} on {day} .",
        "please make a reservation for {people} on {day} at {time} .",
    ],
    "book_hotel": [
        "yes , book it for {people} people for {stay} nights starting {day} .",
        "please reserve a room for {people} people , {stay} nights from {day} .",
    ],
    "book_train": [
        "yes , please book {people} tickets .",
        "i would like {people} tickets please .",
    ],
    "booked": [
        "booking was successful . your reference number is {ref} .",
        "i have made the booking . the reference number is {ref} .",
        "your booking was successful and your reference number is {ref} . is there anything else i can help with ?",
    ],
    "booked_train": [
        "booking was successful , the total fee is {price} . reference number is : {ref} .",
        "i booked {people} tickets on {trainid} . your reference number is {ref} .",
    ],
    "bye_user": ["thank you , that is all i need .", "thanks , goodbye .", "no , that will be all . thank you !"],
    "bye_system": ["you are welcome . have a great day !", "thank you for using our service . goodbye .",
                   "glad i could help . enjoy your stay !"],
    "more_system": ["is there anything else i can help you with ?", "can i help you with anything else ?"],
}

SLOT_WORDS = {"phone": "phone number", "postcode": "postcode", "address": "address", "entrance fee": "entrance fee",
              "price": "price", "arriveby": "arrival time", "leaveat": "departure time"}


def _fill(rng: random.Random, key: str, **values) -> str:
    return rng.choice(T[key]).format(**values)


def _answer_request(entity: dict, slots: list[str]) -> str:
    parts = [f"the {SLOT_WORDS[s]} is {entity[s]}" for s in slots]
    return " and ".join(parts) + " ."


def _domain_episode(rng: random.Random, db: dict, domain: str, turns: list, goal: dict, refs: list):
    if domain == "taxi":
        dep, dest = rng.sample([e["name"] for e in db["restaurant"] + db["hotel"]], 2)
        leave = f"{rng.randint(6, 22):02d}:{rng.choice(['00', '15', '30', '45'])}"
        phone = f"07{rng.randint(100000000, 999999999)}"
        car = f"{rng.choice(['black', 'white', 'red', 'blue', 'grey'])} {rng.choice(['toyota', 'skoda', 'ford', 'audi', 'volvo'])}"
        turns.append(("user", _fill(rng, "taxi_inform", departure=dep, destination=dest, leaveat=leave)))
        turns.append(("system", _fill(rng, "taxi_book", car=car, phone=phone)))
        goal["taxi"] = {"constraints": {"departure": dep, "destination": dest, "leaveat": leave},
                        "requested": ["phone"]}
        refs.append(("taxi-phone", phone))
        return
    entity = rng.choice(db[domain])
    cons_keys = {"restaurant": ["area", "food", "pricerange"], "hotel": ["area", "pricerange", "type", "stars"],
                 "attraction": ["area", "type"], "train": ["departure", "destination", "day"]}[domain]
    constraints = {k: entity[k] for k in cons_keys}
    turns.append(("user", _fill(rng, f"{domain}_inform", **constraints)))
    turns.append(("system", _fill(rng, f"{domain}_offer", **entity)))
    requested: list[str] = []
    reqable = {"restaurant": ["phone", "postcode", "address"], "hotel": ["phone", "postcode", "address"],
               "attraction": ["phone", "postcode", "entrance fee", "address"],
               "train": ["price", "arriveby"]}[domain]
    if rng.random() < 0.7:
        slots = sorted(rng.sample(reqable, rng.randint(1, 2)))
        requested += slots
        turns.append(("user", _fill(rng, "request", slots=" and ".join(SLOT_WORDS[s] for s in slots))))
        turns.append(("system", _answer_request(entity, slots) + " " + rng.choice(T["more_system"])))
    if domain in ("restaurant", "hotel", "train") and rng.random() < 0.7:
        ref = _reference(rng)
        people = rng.randint(1, 8)
        if domain == "restaurant":
            turns.append(("user", _fill(rng, "book_restaurant", people=people, day=rng.choice(DAYS),
                                        time=f"{rng.randint(11, 21)}:{rng.choice(['00', '15', '30', '45'])}")))
            turns.append(("system", _fill(rng, "booked", ref=ref)))
        elif domain == "hotel":
            turns.append(("user", _fill(rng, "book_hotel", people=people, stay=rng.randint(1, 5),
                                        day=rng.choice(DAYS))))
            turns.append(("system", _fill(rng, "booked", ref=ref)))
        else:
            turns.append(("user", _fill(rng, "book_train", people=people)))
            turns.append(("system", _fill(rng, "booked_train", ref=ref, people=people, **entity)))
        requested.append("reference")
        refs.append((f"{domain}-reference", ref))
    if domain == "train":
        requested.append("trainid")
    goal[domain] = {"constraints": constraints, "requested": requested}


def make_dialogue(rng: random.Random, db: dict, idx: int, refs: list) -> dict:
    n_domains = 1 if rng.random() < 0.55 else 2
    domains = rng.sample(["restaurant", "hotel", "attraction", "train"], n_domains)
    if rng.random() < 0.15:
        domains.append("taxi")
    turns: list[tuple[str, str]] = []
    goal: dict = {}
    for dom in domains:
        _domain_episode(rng, db, dom, turns, goal, refs)
    turns.append(("user", rng.choice(T["bye_user"])))
    turns.append(("system", rng.choice(T["bye_system"])))
    prefix = "MUL" if len(goal) > 1 else "SNG"
    return {
        "dialogue_id": f"{prefix}{idx:04d}.json",
        "turns": [{"speaker": s, "text": t} for s, t in turns],
        "goal": goal,
    }


def make_ontology(db: dict, refs: list[tuple[str, str]]) -> dict:
    ont: dict[str, set] = {}
    for domain, records in db.items():
        for rec in records:
            for slot, value in rec.items():
                ont.setdefault(f"{domain}-{slot}", set()).add(value)
    for key, value in refs:
        ont.setdefault(key, set()).add(value)
    for key, values in [("restaurant-people", [str(i) for i in range(1, 9)]), ("restaurant-day", DAYS),
                        ("hotel-people", [str(i) for i in range(1, 9)]), ("hotel-day", DAYS),
                        ("hotel-stay", [str(i) for i in range(1, 6)]), ("train-people", [str(i) for i in range(1, 9)]),
                        ("taxi-departure", ["x"]), ("taxi-destination", ["x"]), ("taxi-leaveat", ["x"])]:
        ont.setdefault(key, set()).update(values)
    return {k: sorted(v) for k, v in sorted(ont.items())}


def generate_corpus(n_dialogues: int = 700, seed: int = 0, dev_size: int = 100, test_size: int = 100):
    """Return (dialogues, ontology, database, manifest) as JSON-ready objects."""
    rng = random.Random(seed)
    db = make_database(rng)
    refs: list[tuple[str, str]] = []
    dialogues = [make_dialogue(rng, db, i, refs) for i in range(n_dialogues)]
    ont = make_ontology(db, refs)
    ids = [d["dialogue_id"] for d in dialogues]
    order = list(ids)
    rng.shuffle(order)
    manifest = {"dev": sorted(order[:dev_size]), "test": sorted(order[dev_size:dev_size + test_size])}
    return dialogues, ont, db, manifest


_GROUPS = {
    "area": AREAS, "price": PRICES, "food": FOODS, "day": DAYS, "type": ATTRACTION_TYPES + HOTEL_TYPES,
}


def token_vector(token: str, dim: int, group: str | None) -> np.ndarray:
    """Deterministic vector: a shared group direction plus a token-specific part."""
    def seeded(label: str) -> np.ndarray:
        h = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")
        return np.random.default_rng(h).standard_normal(dim)
    v = seeded("tok:" + token)
    if group is not None:
        v = 0.6 * seeded("group:" + group) + 0.4 * v
    return v


def make_embeddings(tokens, dim: int = 50) -> str:
    group_of = {}
    for g, words in _GROUPS.items():
        for w in words:
            for t in tokenize(w):
                group_of.setdefault(t, g)
    lines = [f"{len(tokens)} {dim}"]
    for tok in sorted(tokens):
        group = group_of.get(tok)
        if group is None and any(ch.isdigit() for ch in tok):
            group = "number"
        elif group is None and "-" in tok:
            group = "placeholder"
        v = token_vector(tok, dim, group)
        lines.append(tok + " " + " ".join(f"{x:.6f}" for x in v))
    return "\n".join(lines) + "\n"


def write_corpus(out_dir: str | Path, n_dialogues: int = 700, seed: int = 0, dev_size: int = 100,
                 test_size: int = 100, embedding_dim: int = 50) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dialogues, ont, db, manifest = generate_corpus(n_dialogues, seed, dev_size, test_size)
    paths = {name: out / f"{name}.json" for name in ("dialogues", "ontology", "database", "split")}
    for name, obj in (("dialogues", dialogues), ("ontology", ont), ("database", db), ("split", manifest)):
        atomic_write_text(paths[name], json.dumps(obj, indent=1, sort_keys=True) + "\n")
    vocab = set()
    for d in dialogues:
        for t in d["turns"]:
            vocab.update(tokenize(t["text"]))
    from .corpus import Delexicalizer
    delex = Delexicalizer({k.lower(): v for k, v in ont.items()})
    vocab |= set(delex.placeholders.values())
    paths["embeddings"] = out / "embeddings.txt"
    atomic_write_text(paths["embeddings"], make_embeddings(vocab, embedding_dim))
    return paths
