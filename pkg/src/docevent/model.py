"""End-to-end model: encoder -> event representations -> graph aggregation ->
type-aware decoding, with the four ablation wirings."""

from __future__ import annotations

from dataclasses import dataclass, asdict, field

import numpy as np

from .autodiff import Tensor, no_grad
from .corpus import Document, EventRecord, EventSchema
from .decoder import RecordDecoder, group_entities, total_loss
from .encoder import DocumentEncoder, scheduled_source
from .event_rep import EventRepExtractor
from .graph import GraphConvNet, build_graph
from .layers import Module

ABLATIONS = ("none", "no_ere", "no_eagn", "no_eventtype", "no_role")


@dataclass
class ModelConfig:
    d: int = 64
    enc_layers: int = 2
    enc_heads: int = 4
    enc_ff: int = 256
    ere_layers: int = 2
    ere_heads: int = 4
    ere_joint: bool = False
    gcn_layers: int = 3
    gcn_residual: bool = True
    sentence_edges: str = "all"
    dropout: float = 0.1
    max_sentences: int = 64
    max_tokens: int = 128
    max_paths: int = 32
    path_conditioning: bool = True
    w_pos: float = 1.0
    ablation: str = "none"
    arg_loss_mode: str = "gold_path"
    lambda1: float = 0.05
    lambda2: float = 0.95
    lambda3: float = 0.95

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}; expected one of {ABLATIONS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        return cls(**raw)


@dataclass
class ForwardResult:
    loss: Tensor | None = None
    l_er: float = 0.0
    l_ed: float = 0.0
    l_ae: float = 0.0
    skipped_slots: int = 0
    records: list[tuple[EventRecord, float]] = field(default_factory=list)
    detection_features: np.ndarray | None = None  # (N_T, d), for similarity analysis


class ExtractionModel(Module):
    def __init__(self, rng: np.random.Generator, schema: EventSchema, vocab: list[str],
                 entity_types: list[str], config: ModelConfig):
        super().__init__()
        self.schema = schema
        self.config = config
        c = config
        self.encoder = self.add_module("encoder", DocumentEncoder(
            rng, vocab, entity_types, c.d, heads=c.enc_heads, ff=c.enc_ff,
            layers=c.enc_layers, max_sentences=c.max_sentences, max_tokens=c.max_tokens))
        # event queries live in the extractor even when the transformer pass is
        # ablated away, since the raw queries still feed the graph
        self.ere = self.add_module("ere", EventRepExtractor(
            rng, schema, c.d, heads=c.ere_heads, ff=c.enc_ff, layers=c.ere_layers,
            joint=c.ere_joint))
        if c.ablation != "no_eagn":
            self.gcn = self.add_module("gcn", GraphConvNet(
                rng, c.d, layers=c.gcn_layers, residual=c.gcn_residual))
        else:
            self.gcn = None
        self.decoder = self.add_module("decoder", RecordDecoder(
            rng, schema, c.d, max_paths=c.max_paths,
            path_conditioning=c.path_conditioning, w_pos=c.w_pos,
            sentence_detection=(c.ablation == "no_eventtype")))

    # ------------------------------------------------------------------

    def _aggregate(self, doc: Document, mentions, sent_reps, h, mask,
                   dropout, rng, train):
        """Run event-rep extraction and graph aggregation per the ablation wiring.
        Returns (type_reps, role_reps_by_type, sent_out, mention_vectors or None)."""
        c = self.config
        if c.ablation == "no_ere":
            type_reps, role_reps = self.ere.raw_queries()
        else:
            type_reps, role_reps = self.ere(h, mask, dropout, rng, train)
        if c.ablation == "no_eagn":
            return type_reps, role_reps, sent_reps, None
        g = build_graph(sent_reps, mentions, type_reps, role_reps, self.schema,
                        sentence_edges=c.sentence_edges)
        out = self.gcn(g.features, g.adjacency, dropout, rng, train)
        sent_out, ment_out, type_out, role_out = g.split(out)
        return type_out, role_out, sent_out, ment_out

    def forward(self, doc: Document, train: bool, rng: np.random.Generator | None = None,
                epoch: int = 0, p_max: float = 0.9, e_ramp: int = 10,
                decode: bool = False) -> ForwardResult:
        c = self.config
        doc = self.encoder.clip_document(doc)
        dropout = c.dropout if train else 0.0
        h, mask = self.encoder.encode_sentences(doc.sentences, dropout, rng, train)
        sent_reps = self.encoder.sentence_representations(h, mask)

        if train:
            l_er = self.encoder.crf_loss(h, doc)
            gold_mentions = self.encoder.harvest_gold(h, doc)
            with no_grad():
                pred_labels = self.encoder.predict_labels(h, doc.sentences)
            pred_mentions = self.encoder.harvest_predicted(h, doc.sentences, pred_labels)
            mentions = scheduled_source(epoch, p_max, e_ramp, rng, gold_mentions,
                                        pred_mentions, train=True)
        else:
            l_er = None
            with no_grad():
                pred_labels = self.encoder.predict_labels(h, doc.sentences)
            mentions = self.encoder.harvest_predicted(h, doc.sentences, pred_labels)

        type_reps, role_reps, sent_out, ment_vectors = self._aggregate(
            doc, mentions, sent_reps, h, mask, dropout, rng, train)
        entities = group_entities(mentions, ment_vectors)

        use_role = c.ablation != "no_role"
        det_logits = self.decoder.detection_logits(
            type_reps, sent_reps=sent_out if c.ablation == "no_eventtype" else None)

        result = ForwardResult()
        if train:
            gold_types = np.zeros(self.schema.n_types)
            for rec in doc.gold_records:
                gold_types[self.schema.type_index(rec.event_type)] = 1.0
            l_ed = self.decoder.detection_loss(det_logits, gold_types)
            l_ae, skipped = self.decoder.argument_loss(
                entities, role_reps, doc.gold_records, mode=c.arg_loss_mode,
                use_role=use_role)
            result.loss = total_loss(l_er, l_ed, l_ae, c.lambda1, c.lambda2, c.lambda3)
            result.l_er = l_er.item()
            result.l_ed = l_ed.item()
            result.l_ae = l_ae.item()
            result.skipped_slots = skipped
        if decode or not train:
            probs = det_logits.sigmoid().data
            result.records = self.decoder.expand_records(probs, entities, role_reps,
                                                         use_role=use_role)
        if not train:
            result.detection_features = type_reps.data.copy()
        return result

    def predict(self, doc: Document) -> list[tuple[EventRecord, float]]:
        with no_grad():
            return self.forward(doc, train=False).records

    def detection_features(self, doc: Document) -> np.ndarray:
        with no_grad():
            return self.forward(doc, train=False).detection_features
