"""Synthetic corpus generator.

Produces documents exhibiting the two phenomena the model targets: arguments
of one record scattered over several sentences, and multiple (possibly
argument-sharing) records per document, surrounded by event-unrelated
distractor sentences.

Each placed argument is a single entity token preceded by a (type, role) cue
token, and each record's anchor sentence carries a type trigger token, so the
extraction task is learnable from local context at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .corpus import Document, EventRecord, EventSchema, GoldMention


class GenConfigError(ValueError):
    pass


@dataclass
class GenConfig:
    vocab_size: int = 50
    num_documents: int = 50
    sentence_length: tuple[int, int] = (8, 14)
    sentences_per_doc: tuple[int, int] = (4, 8)
    multi_event_prob: float = 0.3
    shared_argument_prob: float = 0.3
    scattering_spread: int = 3
    entity_types: int = 3
    entity_pool: int = 40
    extra_mention_prob: float = 0.2
    distractor_entity_prob: float = 0.5

    @classmethod
    def from_dict(cls, raw: dict) -> "GenConfig":
        cfg = cls()
        known = set(asdict(cfg))
        for k, v in raw.items():
            if k not in known:
                raise GenConfigError(f"unknown generator config field: {k!r}")
            if k in ("sentence_length", "sentences_per_doc"):
                v = (int(v[0]), int(v[1]))
            setattr(cfg, k, v)
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sentence_length"] = list(d["sentence_length"])
        d["sentences_per_doc"] = list(d["sentences_per_doc"])
        return d


def _check_feasible(cfg: GenConfig, schema: EventSchema) -> None:
    lo_len, hi_len = cfg.sentence_length
    lo_s, hi_s = cfg.sentences_per_doc
    if not (1 <= lo_len <= hi_len):
        raise GenConfigError(f"bad sentence_length range {cfg.sentence_length}")
    if not (1 <= lo_s <= hi_s):
        raise GenConfigError(f"bad sentences_per_doc range {cfg.sentences_per_doc}")
    if cfg.num_documents < 1:
        raise GenConfigError("num_documents must be >= 1")
    if cfg.vocab_size < 2:
        raise GenConfigError("vocab_size must be >= 2")
    if cfg.scattering_spread < 1:
        raise GenConfigError("scattering_spread must be >= 1")
    if cfg.entity_pool < 2 * max(len(t.roles) for t in schema.types):
        raise GenConfigError("entity_pool too small for the schema's role counts")
    max_roles = max(len(t.roles) for t in schema.types)
    # worst case every argument of a record lands in one sentence
    if 1 + 2 * max_roles > hi_len:
        raise GenConfigError(
            f"sentence_length max {hi_len} cannot hold a record with {max_roles} arguments")


def generate_synthetic(schema: EventSchema, cfg: GenConfig, seed: int) -> list[Document]:
    """Deterministic given (schema, cfg, seed)."""
    _check_feasible(cfg, schema)
    rng = np.random.default_rng(seed)
    fillers = [f"w{k}" for k in range(cfg.vocab_size)]
    ctx_tokens = [f"ctx{k}" for k in range(8)]
    etype_names = [f"t{k}" for k in range(cfg.entity_types)]
    pool = [f"ent{j}" for j in range(cfg.entity_pool)]
    pool_etype = {e: etype_names[j % cfg.entity_types] for j, e in enumerate(pool)}

    docs = []
    for di in range(cfg.num_documents):
        docs.append(_generate_doc(f"doc{di:05d}", schema, cfg, rng, fillers, ctx_tokens,
                                  pool, pool_etype))
    return docs


def _generate_doc(doc_id, schema, cfg, rng, fillers, ctx_tokens, pool, pool_etype):
    lo_len, hi_len = cfg.sentence_length
    lo_s, hi_s = cfg.sentences_per_doc
    n_sent = int(rng.integers(lo_s, hi_s + 1))

    n_rec = 1
    if rng.random() < cfg.multi_event_prob:
        n_rec = 2 if rng.random() < 0.7 else 3

    used_entities: list[str] = []  # argument entities of earlier records, for sharing
    # per-sentence content units; each unit is ("trig", tok) | ("arg", cue, ent, etype, role_key)
    sentence_units: list[list[tuple]] = [[] for _ in range(n_sent)]
    records: list[EventRecord] = []

    for ri in range(n_rec):
        et = schema.types[int(rng.integers(0, schema.n_types))]
        n_roles = len(et.roles)
        k_cap = min(cfg.scattering_spread, n_sent)
        n_fill = int(rng.integers(min(k_cap, n_roles), n_roles + 1))
        k_eff = min(k_cap, n_fill)
        role_idx = sorted(rng.choice(n_roles, size=n_fill, replace=False).tolist())
        roles = [et.roles[i] for i in role_idx]

        # entity per filled role: fresh from the pool, occasionally shared
        avail = [e for e in pool if e not in used_entities]
        if len(avail) < n_fill:
            avail = list(pool)
        picked = rng.choice(len(avail), size=n_fill, replace=False)
        ents = [avail[int(i)] for i in picked]
        if used_entities and rng.random() < cfg.shared_argument_prob:
            ents[int(rng.integers(0, n_fill))] = used_entities[int(rng.integers(0, len(used_entities)))]

        sent_ids = sorted(rng.choice(n_sent, size=k_eff, replace=False).tolist())
        # round-robin so each chosen sentence receives at least one argument
        assignment = [sent_ids[i % k_eff] for i in range(n_fill)]
        anchor = sent_ids[0]
        sentence_units[anchor].append(("trig", f"trg_{et.name}"))
        for role, ent, sid in zip(roles, ents, assignment):
            sentence_units[sid].append(("arg", f"cue_{et.name}_{role}", ent, pool_etype[ent]))
            if rng.random() < cfg.extra_mention_prob and k_eff > 1:
                extra_sid = sent_ids[int(rng.integers(0, k_eff))]
                sentence_units[extra_sid].append(("arg", f"cue_{et.name}_{role}", ent, pool_etype[ent]))

        args: dict[str, str | None] = {r: None for r in et.roles}
        for role, ent in zip(roles, ents):
            args[role] = ent
        records.append(EventRecord(event_type=et.name, args=args))
        for e in ents:
            if e not in used_entities:
                used_entities.append(e)

    # distractor content in event-free sentences
    for sid in range(n_sent):
        if sentence_units[sid]:
            continue
        if rng.random() < cfg.distractor_entity_prob:
            choices = [e for e in pool if e not in used_entities]
            if choices:
                ent = choices[int(rng.integers(0, len(choices)))]
                ctx = ctx_tokens[int(rng.integers(0, len(ctx_tokens)))]
                sentence_units[sid].append(("distract", ctx, ent, pool_etype[ent]))

    # assemble token sequences and gold mentions
    sentences: list[list[str]] = []
    mentions: list[GoldMention] = []
    for sid in range(n_sent):
        units = list(sentence_units[sid])
        content_len = sum(2 if u[0] != "trig" else 1 for u in units)
        target = int(rng.integers(lo_len, hi_len + 1))
        n_fillers = max(target - content_len, 1)
        units += [("fill", fillers[int(rng.integers(0, len(fillers)))]) for _ in range(n_fillers)]
        order = rng.permutation(len(units))
        tokens: list[str] = []
        for ui in order:
            u = units[int(ui)]
            if u[0] in ("trig", "fill"):
                tokens.append(u[1])
            else:  # arg/distract: cue-or-context token then the entity token
                tokens.append(u[1])
                mentions.append(GoldMention(sid, len(tokens), len(tokens) + 1, u[3], u[2]))
                tokens.append(u[2])
        sentences.append(tokens)

    doc = Document(doc_id=doc_id, sentences=sentences, gold_mentions=mentions,
                   gold_records=records)
    doc.validate(EventSchema(types=tuple(schema.types)))
    return doc
