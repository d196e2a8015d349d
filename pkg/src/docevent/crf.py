"""Linear-chain CRF over BIO labels.

Score of a label sequence y for emissions e: sum_t e[t, y_t] + sum_t T[y_{t-1}, y_t].
Training uses the forward algorithm in log space; decoding is Viterbi with
ties broken toward the lower label index.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, get_default_dtype
from .corpus import GoldMention
from .layers import Linear, Module, normal_init


def bio_labels(entity_types: list[str]) -> list[str]:
    labels = ["O"]
    for t in entity_types:
        labels += [f"B-{t}", f"I-{t}"]
    return labels


def gold_bio_indices(sentence_len: int, mentions: list[GoldMention], labels: list[str]) -> np.ndarray:
    """BIO index sequence for one sentence from its gold mentions."""
    idx = {lab: i for i, lab in enumerate(labels)}
    y = np.zeros(sentence_len, dtype=np.int64)
    for m in mentions:
        y[m.start] = idx[f"B-{m.entity_type}"]
        for t in range(m.start + 1, m.end):
            y[t] = idx[f"I-{m.entity_type}"]
    return y


class LinearChainCRF(Module):
    def __init__(self, rng, d: int, n_labels: int, name: str = "crf"):
        super().__init__()
        self.n_labels = n_labels
        self.proj = self.add_module("proj", Linear(rng, d, n_labels, f"{name}.proj"))
        self.trans = self.add_param(f"{name}.trans", normal_init(rng, (n_labels, n_labels)))

    def emissions(self, h: Tensor) -> Tensor:
        """h: (S, d) token representations -> (S, L) emission scores."""
        return self.proj(h)

    def nll(self, em: Tensor, gold: np.ndarray) -> Tensor:
        """-log P(gold | emissions), forward algorithm in log space."""
        S, L = em.shape
        if len(gold) != S:
            raise ValueError(f"gold length {len(gold)} != sequence length {S}")
        alpha = em[0]
        for t in range(1, S):
            alpha = (alpha.reshape(L, 1) + self.trans + em[t].reshape(1, L)).logsumexp(axis=0)
        log_z = alpha.logsumexp(axis=-1)
        score = em[np.arange(S), gold].sum()
        if S > 1:
            score = score + self.trans[gold[:-1], gold[1:]].sum()
        return log_z - score

    def decode(self, em: np.ndarray) -> np.ndarray:
        """Viterbi argmax label sequence (pure numpy, no gradients)."""
        trans = self.trans.data
        S, L = em.shape
        delta = em[0].copy()
        back = np.zeros((S, L), dtype=np.int64)
        for t in range(1, S):
            cand = delta[:, None] + trans  # (prev, cur)
            back[t] = np.argmax(cand, axis=0)  # first max = lowest index
            delta = cand[back[t], np.arange(L)] + em[t]
        y = np.zeros(S, dtype=np.int64)
        y[-1] = int(np.argmax(delta))
        for t in range(S - 1, 0, -1):
            y[t - 1] = back[t, y[t]]
        return y
