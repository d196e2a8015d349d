"""Document encoder: per-sentence transformer, sentence representations,
CRF entity recognition, and mention pooling.

Sentences of a document are padded to a common length and encoded in one
batched transformer pass; pad positions are masked out of attention and of
the max-pools.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat
from .crf import LinearChainCRF, bio_labels, gold_bio_indices
from .corpus import Document, GoldMention
from .layers import Embedding, Module, TransformerEncoder, masked_max

log = logging.getLogger(__name__)


@dataclass
class MentionRep:
    vector: Tensor  # (d,), max-pool over constituent token representations
    sentence_index: int
    start: int
    end: int
    surface: str

    @property
    def entity_key(self) -> str:
        return self.surface


class DocumentEncoder(Module):
    def __init__(self, rng, vocab: list[str], entity_types: list[str], d: int,
                 heads: int = 4, ff: int = 256, layers: int = 2,
                 max_sentences: int = 64, max_tokens: int = 128):
        super().__init__()
        self.vocab = list(vocab)
        self.tok_index = {t: i for i, t in enumerate(self.vocab)}
        self.unk = self.tok_index["<unk>"]
        self.pad = self.tok_index["<pad>"]
        self.labels = bio_labels(entity_types)
        self.entity_types = list(entity_types)
        self.d = d
        self.max_sentences = max_sentences
        self.max_tokens = max_tokens
        self.tok_emb = self.add_module("tok_emb", Embedding(rng, len(vocab), d, "enc.tok_emb"))
        self.tok_pos = self.add_module("tok_pos", Embedding(rng, max_tokens, d, "enc.tok_pos"))
        self.sent_pos = self.add_module("sent_pos", Embedding(rng, max_sentences, d, "enc.sent_pos"))
        self.transformer = self.add_module(
            "t1", TransformerEncoder(rng, d, heads, ff, layers, "enc.t1"))
        self.crf = self.add_module("crf", LinearChainCRF(rng, d, len(self.labels), "enc.crf"))

    # ------------------------------------------------------------------

    def clip_document(self, doc: Document) -> Document:
        """Enforce the max_sentences / max_tokens bounds, warning on truncation."""
        sents = doc.sentences
        if len(sents) > self.max_sentences:
            log.warning("%s: truncating %d sentences to %d", doc.doc_id, len(sents), self.max_sentences)
            sents = sents[: self.max_sentences]
        clipped = []
        for s in sents:
            if len(s) > self.max_tokens:
                log.warning("%s: truncating sentence of %d tokens to %d", doc.doc_id, len(s), self.max_tokens)
                s = s[: self.max_tokens]
            clipped.append(s)
        if clipped is not doc.sentences:
            mentions = [m for m in doc.gold_mentions
                        if m.sentence_index < len(clipped) and m.end <= len(clipped[m.sentence_index])]
            return Document(doc.doc_id, clipped, mentions, doc.gold_records)
        return doc

    def encode_sentences(self, sentences: list[list[str]], dropout: float,
                         rng: np.random.Generator | None, train: bool):
        """Returns (token reps (n_sent, maxlen, d), pad mask (n_sent, maxlen))."""
        if not sentences:
            raise ValueError("document has no sentences")
        n = len(sentences)
        maxlen = max(len(s) for s in sentences)
        ids = np.full((n, maxlen), self.pad, dtype=np.int64)
        mask = np.zeros((n, maxlen), dtype=np.float64)
        for i, s in enumerate(sentences):
            for j, tok in enumerate(s):
                ids[i, j] = self.tok_index.get(tok, self.unk)
            mask[i, : len(s)] = 1.0
        x = self.tok_emb(ids) + self.tok_pos(np.arange(maxlen))
        x = x.dropout(dropout, rng, train)
        h = self.transformer(x, mask, dropout, rng, train)
        return h, mask

    def sentence_representations(self, h: Tensor, mask: np.ndarray) -> Tensor:
        """Max over real tokens plus the sentence position embedding; (n_sent, d)."""
        n = h.shape[0]
        if n > self.max_sentences:
            raise ValueError(f"{n} sentences exceeds max_sentences={self.max_sentences}")
        pooled = masked_max(h, mask, axis=1)
        return pooled + self.sent_pos(np.arange(n))

    def crf_loss(self, h: Tensor, doc: Document) -> Tensor:
        """Entity recognition NLL summed over sentences."""
        by_sent: dict[int, list[GoldMention]] = {}
        for m in doc.gold_mentions:
            by_sent.setdefault(m.sentence_index, []).append(m)
        total = None
        for i, sent in enumerate(doc.sentences):
            em = self.crf.emissions(h[i, : len(sent)])
            gold = gold_bio_indices(len(sent), by_sent.get(i, []), self.labels)
            nll = self.crf.nll(em, gold)
            total = nll if total is None else total + nll
        return total

    def predict_labels(self, h: Tensor, sentences: list[list[str]]) -> list[np.ndarray]:
        out = []
        for i, sent in enumerate(sentences):
            em = self.crf.emissions(h[i, : len(sent)]).data
            out.append(self.crf.decode(em))
        return out

    # ------------------------------------------------------------------
    # mention harvesting

    def _spans_from_labels(self, y: np.ndarray) -> list[tuple[int, int, str]]:
        """Contiguous B-t (I-t)* runs; an orphan I-t is repaired to start a span."""
        spans = []
        start, etype = None, None
        for t, li in enumerate(y):
            lab = self.labels[li]
            if lab == "O":
                if start is not None:
                    spans.append((start, t, etype))
                    start = None
                continue
            kind, typ = lab.split("-", 1)
            if kind == "B" or start is None or typ != etype:
                if start is not None:
                    spans.append((start, t, etype))
                start, etype = t, typ
        if start is not None:
            spans.append((start, len(y), etype))
        return spans

    def mention_from_span(self, h: Tensor, sent_index: int, start: int, end: int,
                          tokens: list[str]) -> MentionRep:
        vec = h[sent_index, start:end].max(axis=0)
        return MentionRep(vector=vec, sentence_index=sent_index, start=start, end=end,
                          surface=" ".join(tokens[start:end]))

    def harvest_predicted(self, h: Tensor, sentences: list[list[str]],
                          labels: list[np.ndarray]) -> list[MentionRep]:
        mentions = []
        for i, (sent, y) in enumerate(zip(sentences, labels)):
            for start, end, _etype in self._spans_from_labels(y):
                mentions.append(self.mention_from_span(h, i, start, end, sent))
        return mentions

    def harvest_gold(self, h: Tensor, doc: Document) -> list[MentionRep]:
        return [self.mention_from_span(h, m.sentence_index, m.start, m.end,
                                       doc.sentences[m.sentence_index])
                for m in doc.gold_mentions]


def sampling_probability(epoch: int, p_max: float, e_ramp: int) -> float:
    """Linear ramp from 0 at epoch 0 to p_max at epoch e_ramp, then constant."""
    if e_ramp <= 0:
        return p_max
    return p_max * min(1.0, epoch / e_ramp)


def scheduled_source(epoch: int, p_max: float, e_ramp: int, rng: np.random.Generator,
                     gold_mentions, predicted_mentions, train: bool):
    """Pick the mention set feeding downstream modules for this document."""
    if not train:
        return predicted_mentions
    p = sampling_probability(epoch, p_max, e_ramp)
    return predicted_mentions if rng.random() < p else gold_mentions
