"""Event-query representations: learnable type/role queries re-encoded with
each sentence by a second transformer, then max-pooled over sentences into
document-aware type and role representations."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, zeros
from .corpus import EventSchema
from .layers import Module, TransformerEncoder, normal_init


class EventRepExtractor(Module):
    """Owns the event queries and the second-stage transformer.

    `identity=True` bypasses the transformer (test harness mode): the split
    query positions then come back exactly as the raw queries.
    `joint=True` runs one pass per sentence with all types' queries appended
    at once instead of one pass per (sentence, type).
    """

    def __init__(self, rng, schema: EventSchema, d: int, heads: int = 4, ff: int = 256,
                 layers: int = 2, identity: bool = False, joint: bool = False):
        super().__init__()
        self.schema = schema
        self.d = d
        self.identity = identity
        self.joint = joint
        self.type_queries = self.add_param("ere.type_q", normal_init(rng, (schema.n_types, d)))
        self.role_queries = [
            self.add_param(f"ere.role_q.{t.name}", normal_init(rng, (len(t.roles), d)))
            for t in schema.types
        ]
        self.transformer = self.add_module(
            "t2", TransformerEncoder(rng, d, heads, ff, layers, "ere.t2"))

    def _encode_with_queries(self, h: Tensor, mask: np.ndarray, queries: Tensor,
                             dropout, rng, train) -> Tensor:
        """h: (n_sent, maxlen, d); queries: (Q, d). Returns query outputs (n_sent, Q, d)."""
        n_sent, maxlen, d = h.shape
        q = queries.reshape(1, queries.shape[0], d) + zeros(n_sent, 1, 1)
        x = concat([h, q], axis=1)
        full_mask = np.concatenate(
            [mask, np.ones((n_sent, queries.shape[0]))], axis=1)
        if self.identity:
            out = x
        else:
            out = self.transformer(x, full_mask, dropout, rng, train)
        return out[:, maxlen:, :]

    def __call__(self, h: Tensor, mask: np.ndarray, dropout: float = 0.0,
                 rng: np.random.Generator | None = None, train: bool = False):
        """Returns (type_reps (N_T, d), role_reps: list of (N_R_m, d) per type)."""
        if self.joint:
            return self._forward_joint(h, mask, dropout, rng, train)
        type_rows = []
        role_mats = []
        for m, t in enumerate(self.schema.types):
            queries = concat([self.type_queries[m].reshape(1, self.d), self.role_queries[m]], axis=0)
            out = self._encode_with_queries(h, mask, queries, dropout, rng, train)
            # document-aware pooling: elementwise max over the sentence axis
            pooled = out.max(axis=0)  # (1 + N_R, d)
            type_rows.append(pooled[0:1])
            role_mats.append(pooled[1:])
        return concat(type_rows, axis=0), role_mats

    def _forward_joint(self, h, mask, dropout, rng, train):
        parts = []
        for m in range(self.schema.n_types):
            parts.append(self.type_queries[m].reshape(1, self.d))
            parts.append(self.role_queries[m])
        queries = concat(parts, axis=0)
        out = self._encode_with_queries(h, mask, queries, dropout, rng, train)
        pooled = out.max(axis=0)
        type_rows, role_mats = [], []
        off = 0
        for t in self.schema.types:
            type_rows.append(pooled[off:off + 1])
            off += 1
            role_mats.append(pooled[off:off + len(t.roles)])
            off += len(t.roles)
        return concat(type_rows, axis=0), role_mats

    def raw_queries(self):
        """Query embeddings untouched by the transformer (the no-extractor ablation)."""
        return self.type_queries, list(self.role_queries)
