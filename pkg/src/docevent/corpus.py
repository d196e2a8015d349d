"""Event schema and document data model, JSONL ingestion, and evaluation bucketing.

Schema file (JSON): {"types": [{"name": str, "roles": [str, ...]}, ...]}
Corpus file (JSONL), one document per line:
  {"doc_id": str,
   "sentences": [[token, ...], ...],
   "mentions": [{"sent": int, "start": int, "end": int, "type": str}, ...],
   "records": [{"event_type": str, "args": {role: string-or-null}}, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class SchemaError(ValueError):
    pass


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class EventType:
    name: str
    roles: tuple[str, ...]


@dataclass(frozen=True)
class EventSchema:
    types: tuple[EventType, ...]

    def __post_init__(self):
        names = [t.name for t in self.types]
        if len(self.types) < 1:
            raise SchemaError("schema must define at least one event type")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate event type names")
        for t in self.types:
            if len(t.roles) < 1:
                raise SchemaError(f"event type {t.name!r} has no roles")
            if len(set(t.roles)) != len(t.roles):
                raise SchemaError(f"duplicate role names in event type {t.name!r}")

    @property
    def n_types(self) -> int:
        return len(self.types)

    def type_index(self, name: str) -> int:
        for i, t in enumerate(self.types):
            if t.name == name:
                return i
        raise SchemaError(f"unknown event type: {name!r}")

    def roles_of(self, name: str) -> tuple[str, ...]:
        return self.types[self.type_index(name)].roles

    def to_dict(self) -> dict:
        return {"types": [{"name": t.name, "roles": list(t.roles)} for t in self.types]}


@dataclass(frozen=True)
class GoldMention:
    sentence_index: int
    start: int
    end: int  # exclusive
    entity_type: str
    surface: str


@dataclass(frozen=True)
class EventRecord:
    event_type: str
    args: dict[str, str | None] = field(default_factory=dict)

    def filled(self) -> dict[str, str]:
        return {r: a for r, a in self.args.items() if a is not None}


@dataclass
class Document:
    doc_id: str
    sentences: list[list[str]]
    gold_mentions: list[GoldMention]
    gold_records: list[EventRecord]

    def validate(self, schema: EventSchema) -> None:
        if len(self.sentences) < 1:
            raise CorpusError(f"{self.doc_id}: document has no sentences")
        for m in self.gold_mentions:
            if not (0 <= m.sentence_index < len(self.sentences)):
                raise CorpusError(f"{self.doc_id}: mention sentence index {m.sentence_index} out of range")
            sent = self.sentences[m.sentence_index]
            if not (0 <= m.start < m.end <= len(sent)):
                raise CorpusError(
                    f"{self.doc_id}: mention span [{m.start},{m.end}) out of bounds for sentence "
                    f"of length {len(sent)}")
            actual = " ".join(sent[m.start:m.end])
            if actual != m.surface:
                raise CorpusError(f"{self.doc_id}: mention surface {m.surface!r} != tokens {actual!r}")
        surfaces = {m.surface for m in self.gold_mentions}
        for rec in self.gold_records:
            roles = schema.roles_of(rec.event_type)  # raises for unknown type
            for role, arg in rec.args.items():
                if role not in roles:
                    raise CorpusError(
                        f"{self.doc_id}: role {role!r} not in schema for type {rec.event_type!r}")
                if arg is not None and arg not in surfaces:
                    raise CorpusError(
                        f"{self.doc_id}: argument {arg!r} has no matching gold mention")
            if not rec.filled():
                raise CorpusError(f"{self.doc_id}: record of type {rec.event_type!r} has no filled role")


# ----------------------------------------------------------------------
# serialization


def load_schema(path: str) -> EventSchema:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(raw, dict) or "types" not in raw:
        raise SchemaError(f"{path}: expected an object with a 'types' list")
    types = tuple(EventType(name=t["name"], roles=tuple(t["roles"])) for t in raw["types"])
    return EventSchema(types=types)


def save_schema(path: str, schema: EventSchema) -> None:
    with open(path, "w") as f:
        json.dump(schema.to_dict(), f, indent=2)


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "sentences": doc.sentences,
        "mentions": [
            {"sent": m.sentence_index, "start": m.start, "end": m.end, "type": m.entity_type}
            for m in doc.gold_mentions
        ],
        "records": [{"event_type": r.event_type, "args": r.args} for r in doc.gold_records],
    }


def document_from_dict(raw: dict) -> Document:
    sentences = [list(map(str, s)) for s in raw["sentences"]]
    mentions = []
    for m in raw.get("mentions", []):
        si, st, en = int(m["sent"]), int(m["start"]), int(m["end"])
        surface = ""
        if 0 <= si < len(sentences) and 0 <= st < en <= len(sentences[si]):
            surface = " ".join(sentences[si][st:en])
        mentions.append(GoldMention(si, st, en, str(m["type"]), surface))
    records = [
        EventRecord(event_type=str(r["event_type"]),
                    args={str(k): (None if v is None else str(v)) for k, v in r["args"].items()})
        for r in raw.get("records", [])
    ]
    return Document(doc_id=str(raw["doc_id"]), sentences=sentences,
                    gold_mentions=mentions, gold_records=records)


def load_corpus(path: str, schema: EventSchema) -> tuple[list[Document], list[str]]:
    """Load a JSONL corpus. Malformed lines are skipped and reported, never fatal."""
    docs: list[Document] = []
    errors: list[str] = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                errors.append(f"line {lineno}: invalid JSON: {e.msg}")
                continue
            try:
                doc = document_from_dict(raw)
                doc.validate(schema)
            except (CorpusError, SchemaError, KeyError, TypeError, ValueError) as e:
                doc_id = raw.get("doc_id", "?") if isinstance(raw, dict) else "?"
                errors.append(f"line {lineno} (doc {doc_id}): {e}")
                continue
            docs.append(doc)
    return docs, errors


def save_corpus(path: str, docs: list[Document]) -> None:
    with open(path, "w") as f:
        for doc in docs:
            f.write(json.dumps(document_to_dict(doc)) + "\n")


# ----------------------------------------------------------------------
# evaluation bucketing


def scattering_score(doc: Document) -> float:
    """Mean over records of the count of distinct sentences holding the record's arguments."""
    if not doc.gold_records:
        return 0.0
    by_surface: dict[str, set[int]] = {}
    for m in doc.gold_mentions:
        by_surface.setdefault(m.surface, set()).add(m.sentence_index)
    counts = []
    for rec in doc.gold_records:
        sents: set[int] = set()
        for arg in rec.filled().values():
            sents |= by_surface.get(arg, set())
        counts.append(len(sents))
    return float(np.mean(counts))


@dataclass
class BucketLabels:
    labels: dict[str, tuple[str, str]]  # doc_id -> (single|multi, I|II|III)
    boundaries: tuple[float, float]  # tercile boundaries of the scattering score


def bucketize(corpus: list[Document]) -> BucketLabels:
    """Label each document single/multi and scattering tercile I/II/III."""
    scores = {d.doc_id: scattering_score(d) for d in corpus}
    values = np.array(list(scores.values())) if scores else np.array([0.0])
    q1, q2 = np.quantile(values, [1 / 3, 2 / 3])
    labels = {}
    for d in corpus:
        sm = "multi" if len(d.gold_records) >= 2 else "single"
        s = scores[d.doc_id]
        tier = "I" if s <= q1 else ("II" if s <= q2 else "III")
        labels[d.doc_id] = (sm, tier)
    return BucketLabels(labels=labels, boundaries=(float(q1), float(q2)))


def build_vocab(corpus: list[Document]) -> list[str]:
    """Token list with pad/unk first; order deterministic (first occurrence)."""
    vocab = ["<pad>", "<unk>"]
    seen = set(vocab)
    for doc in corpus:
        for sent in doc.sentences:
            for tok in sent:
                if tok not in seen:
                    seen.add(tok)
                    vocab.append(tok)
    return vocab


def entity_types_of(corpus: list[Document]) -> list[str]:
    seen: dict[str, None] = {}
    for doc in corpus:
        for m in doc.gold_mentions:
            seen.setdefault(m.entity_type, None)
    return sorted(seen)
