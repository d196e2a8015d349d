"""Type-aware event record decoder.

Event detection is a shared sigmoid head over each aggregated type
representation; argument extraction scores every candidate entity against a
role-enhanced representation and assembles records by expanding one path per
detected type, branching role by role.

Losses are binary cross-entropies computed from logits (softplus form) for
stability; the golden-label indicator weights reduce them to standard BCE,
with an optional positive-class weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, no_grad, zeros
from .corpus import EventRecord, EventSchema
from .encoder import MentionRep
from .layers import FeedForward, Module


@dataclass
class EntityRep:
    vector: Tensor  # (d,), max-pool over the entity's mention vectors
    entity_key: str


def group_entities(mentions: list[MentionRep], vectors: Tensor | None = None) -> list[EntityRep]:
    """Merge mentions sharing a surface into entities, in first-occurrence order.

    `vectors`, when given, is a (n_mentions, d) matrix of aggregated mention
    representations aligned with `mentions`; otherwise the mentions' own
    vectors are pooled.
    """
    order: list[str] = []
    rows: dict[str, list[Tensor]] = {}
    for i, m in enumerate(mentions):
        vec = vectors[i:i + 1] if vectors is not None else m.vector.reshape(1, -1)
        if m.entity_key not in rows:
            order.append(m.entity_key)
            rows[m.entity_key] = []
        rows[m.entity_key].append(vec)
    out = []
    for key in order:
        stackmat = concat(rows[key], axis=0)
        out.append(EntityRep(vector=stackmat.max(axis=0), entity_key=key))
    return out


class RecordDecoder(Module):
    def __init__(self, rng, schema: EventSchema, d: int, hidden: int | None = None,
                 max_paths: int = 32, path_conditioning: bool = True,
                 w_pos: float = 1.0, sentence_detection: bool = False):
        super().__init__()
        hidden = hidden or d
        self.schema = schema
        self.d = d
        self.max_paths = max_paths
        self.path_conditioning = path_conditioning
        self.w_pos = w_pos
        self.sentence_detection = sentence_detection
        if sentence_detection:
            # ablation head: per-type scorer over max-pooled sentence representations
            self.det_sent = self.add_module(
                "det_sent", FeedForward(rng, d, hidden, schema.n_types, "dec.det_sent"))
        else:
            self.det = self.add_module("det", FeedForward(rng, d, hidden, 1, "dec.det"))
        self.arg = self.add_module("arg", FeedForward(rng, d, hidden, 1, "dec.arg"))

    # ------------------------------------------------------------------
    # event detection

    def detection_logits(self, type_reps: Tensor, sent_reps: Tensor | None = None) -> Tensor:
        """(N_T,) logits. The shared head is applied row-wise, so each type's
        logit depends only on its own representation."""
        if self.sentence_detection:
            if sent_reps is None:
                raise ValueError("sentence-detection ablation requires sentence reps")
            pooled = sent_reps.max(axis=0)
            return self.det_sent(pooled.reshape(1, self.d)).reshape(self.schema.n_types)
        return self.det(type_reps).reshape(self.schema.n_types)

    def detection_loss(self, logits: Tensor, gold: np.ndarray) -> Tensor:
        """Summed binary cross-entropy over types; gold is a 0/1 vector."""
        y = np.asarray(gold, dtype=float)
        pos = (logits * -1.0).softplus()  # -log sigmoid(z)
        neg = logits.softplus()           # -log (1 - sigmoid(z))
        return (Tensor(y * self.w_pos) * pos + Tensor(1.0 - y) * neg).sum()

    # ------------------------------------------------------------------
    # argument scoring

    def argument_logits(self, entity_mat: Tensor, role_rep: Tensor,
                        path_memory: Tensor | None) -> Tensor:
        """entity_mat: (E, d); role_rep: (d,) or zero for the role-blind ablation.
        Returns (E,) logits."""
        x = entity_mat + role_rep.reshape(1, self.d)
        if self.path_conditioning and path_memory is not None:
            x = x + path_memory.reshape(1, self.d)
        return self.arg(x).reshape(entity_mat.shape[0])

    def _bce(self, logits: Tensor, targets: np.ndarray) -> Tensor:
        y = np.asarray(targets, dtype=float)
        pos = (logits * -1.0).softplus()
        neg = logits.softplus()
        return (Tensor(y * self.w_pos) * pos + Tensor(1.0 - y) * neg).sum()

    def argument_loss(self, entities: list[EntityRep], role_reps_by_type: list[Tensor],
                      gold_records: list[EventRecord], mode: str = "gold_path",
                      use_role: bool = True) -> tuple[Tensor, int]:
        """Teacher-forced argument BCE; returns (loss, skipped-slot count).

        gold_path mode lays each gold record out as a path in schema role
        order, conditioning on the gold prefix; flat mode scores each
        (type, role) once with the union of that type's gold fillers.
        """
        skipped = 0
        total = zeros(1).sum()
        if not entities:
            return total, sum(len(r.filled()) for r in gold_records)
        ent_index = {e.entity_key: i for i, e in enumerate(entities)}
        ent_mat = concat([e.vector.reshape(1, self.d) for e in entities], axis=0)
        n_ent = len(entities)
        zero_d = zeros(self.d)

        if mode == "flat":
            gold_by_type: dict[str, dict[str, set[int]]] = {}
            for rec in gold_records:
                slots = gold_by_type.setdefault(rec.event_type, {})
                for role, arg in rec.filled().items():
                    if arg in ent_index:
                        slots.setdefault(role, set()).add(ent_index[arg])
                    else:
                        skipped += 1
            for tname, slots in gold_by_type.items():
                m = self.schema.type_index(tname)
                roles = self.schema.types[m].roles
                for n, role in enumerate(roles):
                    role_rep = role_reps_by_type[m][n] if use_role else zero_d
                    logits = self.argument_logits(ent_mat, role_rep, zero_d)
                    targets = np.zeros(n_ent)
                    for i in slots.get(role, ()):
                        targets[i] = 1.0
                    total = total + self._bce(logits, targets)
            return total, skipped

        if mode != "gold_path":
            raise ValueError(f"unknown argument loss mode: {mode!r}")

        for rec in gold_records:
            m = self.schema.type_index(rec.event_type)
            roles = self.schema.types[m].roles
            prefix: list[Tensor] = []
            for n, role in enumerate(roles):
                role_rep = role_reps_by_type[m][n] if use_role else zero_d
                mem = zero_d
                if prefix:
                    mem = concat([v.reshape(1, self.d) for v in prefix], axis=0).mean(axis=0)
                logits = self.argument_logits(ent_mat, role_rep, mem)
                arg = rec.args.get(role)
                targets = np.zeros(n_ent)
                if arg is not None:
                    if arg in ent_index:
                        targets[ent_index[arg]] = 1.0
                        prefix.append(entities[ent_index[arg]].vector)
                    else:
                        skipped += 1
                        continue  # slot unsupervisable without its entity
                total = total + self._bce(logits, targets)
        return total, skipped

    # ------------------------------------------------------------------
    # record assembly

    def expand_records(self, detection_probs: np.ndarray, entities: list[EntityRep],
                       role_reps_by_type: list[Tensor],
                       use_role: bool = True) -> list[tuple[EventRecord, float]]:
        """Tree-path expansion for every detected type. Pure inference."""
        results: list[tuple[EventRecord, float]] = []
        zero_d = zeros(self.d)
        with no_grad():
            ent_mat = None
            if entities:
                ent_mat = concat([e.vector.detach().reshape(1, self.d) for e in entities], axis=0)
            for m, t in enumerate(self.schema.types):
                if detection_probs[m] <= 0.5:
                    continue
                # path: (assignment dict, prefix entity indices, score product)
                paths: list[tuple[dict, list[int], float]] = [({}, [], 1.0)]
                for n, role in enumerate(t.roles):
                    role_rep = role_reps_by_type[m][n] if use_role else zero_d
                    new_paths: list[tuple[dict, list[int], float]] = []
                    for assign, prefix, score in paths:
                        probs = np.zeros(0)
                        if ent_mat is not None:
                            mem = zero_d
                            if prefix and self.path_conditioning:
                                mem = concat([entities[i].vector.detach().reshape(1, self.d)
                                              for i in prefix], axis=0).mean(axis=0)
                            probs = self.argument_logits(ent_mat, role_rep, mem).sigmoid().data
                        hits = [i for i, p in enumerate(probs) if p > 0.5]
                        if not hits:
                            new_paths.append((dict(assign, **{role: None}), prefix, score))
                        else:
                            for i in hits:
                                new_paths.append((
                                    dict(assign, **{role: entities[i].entity_key}),
                                    prefix + [i], score * float(probs[i])))
                    # prune: highest score first, ties by entity index sequence
                    new_paths.sort(key=lambda p: (-p[2], tuple(p[1])))
                    paths = new_paths[: self.max_paths]
                seen: dict[tuple, float] = {}
                for assign, prefix, score in paths:
                    if not any(v is not None for v in assign.values()):
                        continue
                    key = (t.name, tuple(sorted((k, v) for k, v in assign.items())))
                    if key not in seen or score > seen[key]:
                        seen[key] = score
                for (tname, items), score in seen.items():
                    results.append((EventRecord(event_type=tname, args=dict(items)), score))
        return results


def total_loss(l_er: Tensor, l_ed: Tensor, l_ae: Tensor,
               lam1: float = 0.05, lam2: float = 0.95, lam3: float = 0.95) -> Tensor:
    return l_er * lam1 + l_ed * lam2 + l_ae * lam3
