"""Role-level micro-F1 with greedy record alignment and bucketed reporting."""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Document, EventRecord, bucketize


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, other: "Counts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


def _pair_overlap(pred: EventRecord, gold: EventRecord) -> int:
    """Count of role slots filled identically (non-NULL) in both records."""
    return sum(1 for role, arg in pred.filled().items() if gold.args.get(role) == arg)


def _pair_counts(pred: EventRecord, gold: EventRecord) -> Counts:
    c = Counts()
    pf, gf = pred.filled(), gold.filled()
    for role, arg in pf.items():
        if gf.get(role) == arg:
            c.tp += 1
        else:
            c.fp += 1
    for role, arg in gf.items():
        if pf.get(role) != arg:
            c.fn += 1
    return c


def match_records(predicted: list[EventRecord], gold: list[EventRecord]) -> Counts:
    """Greedy one-to-one alignment within one (document, event type) pool.

    Pairs are picked by descending count of exactly matching filled slots,
    ties by earlier prediction index then earlier gold index. Unmatched
    records contribute one FP/FN per filled slot.
    """
    counts = Counts()
    by_type: dict[str, tuple[list, list]] = {}
    for i, r in enumerate(predicted):
        by_type.setdefault(r.event_type, ([], []))[0].append(r)
    for r in gold:
        by_type.setdefault(r.event_type, ([], []))[1].append(r)

    for preds, golds in by_type.values():
        pairs = sorted(
            ((pi, gi) for pi in range(len(preds)) for gi in range(len(golds))),
            key=lambda pg: (-_pair_overlap(preds[pg[0]], golds[pg[1]]), pg[0], pg[1]))
        used_p: set[int] = set()
        used_g: set[int] = set()
        for pi, gi in pairs:
            if pi in used_p or gi in used_g:
                continue
            used_p.add(pi)
            used_g.add(gi)
            counts.add(_pair_counts(preds[pi], golds[gi]))
        for pi, r in enumerate(preds):
            if pi not in used_p:
                counts.fp += len(r.filled())
        for gi, r in enumerate(golds):
            if gi not in used_g:
                counts.fn += len(r.filled())
    return counts


@dataclass
class MetricsReport:
    overall: Counts = field(default_factory=Counts)
    buckets: dict[str, Counts] = field(default_factory=dict)  # single/multi/I/II/III
    per_type: dict[str, Counts] = field(default_factory=dict)
    bucket_boundaries: tuple[float, float] = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {
            "precision": self.overall.precision,
            "recall": self.overall.recall,
            "f1": self.overall.f1,
            "counts": {"tp": self.overall.tp, "fp": self.overall.fp, "fn": self.overall.fn},
            "buckets": {k: v.to_dict() for k, v in self.buckets.items()},
            "per_type": {k: v.to_dict() for k, v in self.per_type.items()},
            "bucket_boundaries": list(self.bucket_boundaries),
        }


def evaluate_predictions(predictions: dict[str, list[EventRecord]],
                         corpus: list[Document]) -> MetricsReport:
    """Score per-document predicted records against gold, with bucket breakdown."""
    labels = bucketize(corpus)
    report = MetricsReport(
        buckets={k: Counts() for k in ("single", "multi", "I", "II", "III")},
        bucket_boundaries=labels.boundaries)
    for doc in corpus:
        preds = predictions.get(doc.doc_id, [])
        doc_counts = Counts()
        by_type: dict[str, Counts] = {}
        for tname in {r.event_type for r in preds} | {r.event_type for r in doc.gold_records}:
            c = match_records([r for r in preds if r.event_type == tname],
                              [r for r in doc.gold_records if r.event_type == tname])
            by_type[tname] = c
            doc_counts.add(c)
        report.overall.add(doc_counts)
        sm, tier = labels.labels[doc.doc_id]
        report.buckets[sm].add(doc_counts)
        report.buckets[tier].add(doc_counts)
        for tname, c in by_type.items():
            report.per_type.setdefault(tname, Counts()).add(c)
    return report
