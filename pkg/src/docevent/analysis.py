"""Intra/inter-class cosine similarity of detection features, plus an
embedding dump for external projection."""

from __future__ import annotations

import numpy as np

from .corpus import Document
from .model import ExtractionModel


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def similarity_analysis(model: ExtractionModel, corpus: list[Document],
                        samples_per_type: int = 50, negatives_per_type: int = 200,
                        seed: int = 0,
                        features: dict[str, np.ndarray] | None = None,
                        ) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    """Per event type: mean pairwise cosine among positive detection features
    (documents containing the type) and mean cosine between positives and
    negatives. Returns (report dict, labeled vectors for dumping).

    `features` overrides the per-document (N_T, d) feature matrices, mainly
    for tests."""
    rng = np.random.default_rng(seed)
    feats = features or {doc.doc_id: model.detection_features(doc) for doc in corpus}
    report: dict[str, dict] = {}
    dump: list[tuple[str, np.ndarray]] = []
    for m, t in enumerate(model.schema.types):
        pos_docs = [d for d in corpus if any(r.event_type == t.name for r in d.gold_records)]
        neg_docs = [d for d in corpus if all(r.event_type != t.name for r in d.gold_records)]
        if len(pos_docs) > samples_per_type:
            idx = rng.choice(len(pos_docs), size=samples_per_type, replace=False)
            pos_docs = [pos_docs[i] for i in sorted(idx)]
        if len(neg_docs) > negatives_per_type:
            idx = rng.choice(len(neg_docs), size=negatives_per_type, replace=False)
            neg_docs = [neg_docs[i] for i in sorted(idx)]
        pos = [feats[d.doc_id][m] for d in pos_docs]
        neg = [feats[d.doc_id][m] for d in neg_docs]
        for v in pos:
            dump.append((f"{t.name}:pos", v))
        for v in neg:
            dump.append((f"{t.name}:neg", v))
        if len(pos) < 2:
            report[t.name] = {"status": "insufficient-data",
                              "n_pos": len(pos), "n_neg": len(neg)}
            continue
        intra = [_cosine(pos[i], pos[j])
                 for i in range(len(pos)) for j in range(i + 1, len(pos))]
        inter = [_cosine(p, q) for p in pos for q in neg]
        report[t.name] = {
            "status": "ok",
            "n_pos": len(pos),
            "n_neg": len(neg),
            "intra_cosine": float(np.mean(intra)),
            "inter_cosine": float(np.mean(inter)) if inter else None,
        }
    return report, dump


def write_embedding_tsv(path: str, dump: list[tuple[str, np.ndarray]]) -> None:
    with open(path, "w") as f:
        for label, vec in dump:
            f.write(label + "\t" + "\t".join(repr(float(x)) for x in vec) + "\n")
