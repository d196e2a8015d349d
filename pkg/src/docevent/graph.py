"""Heterogeneous event graph and its GCN.

Nodes in order: sentences, mentions, event types, roles (flattened in schema
order). Edge kinds are kept as tags for inspection; message passing runs on a
single merged symmetric adjacency, degree-normalized with self-loops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat
from .corpus import EventSchema
from .encoder import MentionRep
from .layers import Linear, Module


@dataclass
class EventGraph:
    kinds: list[str]  # per node: sentence|mention|type|role
    edges: list[tuple[int, int, str]]  # undirected, tagged
    adjacency: np.ndarray  # normalized, includes self-loops
    features: Tensor  # (n_nodes, d)
    n_sentences: int
    n_mentions: int
    n_types: int
    role_offsets: list[tuple[int, int]]  # per type: (start, end) into the role block

    def split(self, h: Tensor):
        """Split a (n_nodes, d) matrix back into per-kind blocks."""
        ns, nm, nt = self.n_sentences, self.n_mentions, self.n_types
        sents = h[0:ns]
        ments = h[ns:ns + nm]
        types = h[ns + nm:ns + nm + nt]
        role_base = ns + nm + nt
        roles = [h[role_base + a:role_base + b] for a, b in self.role_offsets]
        return sents, ments, types, roles

    def dump_json(self) -> str:
        return json.dumps({
            "nodes": [{"index": i, "kind": k} for i, k in enumerate(self.kinds)],
            "edges": [{"u": u, "v": v, "kind": k} for u, v, k in self.edges],
        })


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} for a symmetric 0/1 adjacency without self-loops."""
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    a_hat = a + np.eye(a.shape[0], dtype=a.dtype)
    deg = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def build_graph(sent_reps: Tensor, mentions: list[MentionRep], type_reps: Tensor,
                role_reps: list[Tensor], schema: EventSchema,
                sentence_edges: str = "all") -> EventGraph:
    """Assemble nodes and rule-based edges; `sentence_edges` is "all" or "adjacent"."""
    n_sent = sent_reps.shape[0]
    n_ment = len(mentions)
    n_types = schema.n_types
    role_offsets = []
    off = 0
    for t in schema.types:
        role_offsets.append((off, off + len(t.roles)))
        off += len(t.roles)
    n_roles = off

    kinds = (["sentence"] * n_sent + ["mention"] * n_ment
             + ["type"] * n_types + ["role"] * n_roles)
    n_nodes = len(kinds)
    sent0, ment0, type0, role0 = 0, n_sent, n_sent + n_ment, n_sent + n_ment + n_types

    edges: list[tuple[int, int, str]] = []

    def add(u, v, kind):
        if u != v:
            edges.append((u, v, kind))

    # sentence-sentence context edges
    if sentence_edges == "all":
        for i in range(n_sent):
            for j in range(i + 1, n_sent):
                add(sent0 + i, sent0 + j, "sent-sent")
    elif sentence_edges == "adjacent":
        for i in range(n_sent - 1):
            add(sent0 + i, sent0 + i + 1, "sent-sent")
    else:
        raise ValueError(f"unknown sentence_edges mode: {sentence_edges!r}")

    # mention context edges
    for i, mi in enumerate(mentions):
        add(ment0 + i, sent0 + mi.sentence_index, "ment-sent")
        for j in range(i + 1, n_ment):
            mj = mentions[j]
            if mi.entity_key == mj.entity_key:
                add(ment0 + i, ment0 + j, "ment-ment-entity")
            if mi.sentence_index == mj.sentence_index:
                add(ment0 + i, ment0 + j, "ment-ment-sent")

    # aggregation edges
    for i in range(n_sent):
        for m in range(n_types):
            add(sent0 + i, type0 + m, "sent-type")
    for i in range(n_ment):
        for r in range(n_roles):
            add(ment0 + i, role0 + r, "ment-role")
    for m, (a, b) in enumerate(role_offsets):
        for r in range(a, b):
            add(type0 + m, role0 + r, "type-role")

    a = np.zeros((n_nodes, n_nodes))
    for u, v, _ in edges:
        a[u, v] = a[v, u] = 1.0

    feats = [sent_reps]
    if n_ment:
        feats.append(concat([m.vector.reshape(1, -1) for m in mentions], axis=0))
    feats.append(type_reps)
    feats.extend(role_reps)
    features = concat(feats, axis=0)

    return EventGraph(kinds=kinds, edges=edges, adjacency=normalize_adjacency(a),
                      features=features, n_sentences=n_sent, n_mentions=n_ment,
                      n_types=n_types, role_offsets=role_offsets)


class GraphConvNet(Module):
    """Stacked GCN layers H <- ReLU(Â H W + b), input-to-output residual."""

    def __init__(self, rng, d: int, layers: int = 3, residual: bool = True, name: str = "gcn"):
        super().__init__()
        self.residual = residual
        self.layers = [self.add_module(f"l{i}", Linear(rng, d, d, f"{name}.l{i}"))
                       for i in range(layers)]

    def __call__(self, features: Tensor, adjacency: np.ndarray, dropout: float = 0.0,
                 rng: np.random.Generator | None = None, train: bool = False) -> Tensor:
        a_hat = Tensor(adjacency)
        h = features
        for i, layer in enumerate(self.layers):
            h = layer(a_hat @ h).relu()
            if i < len(self.layers) - 1:
                h = h.dropout(dropout, rng, train)
        if self.residual:
            h = h + features
        return h
