"""Okapi BM25 over token lists.

idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1), the non-negative variant.
score(q, d) = sum over query terms of idf * tf * (k1 + 1) /
              (tf + k1 * (1 - b + b * |d| / avgdl))
"""
from __future__ import annotations

import math
from collections import Counter


class BM25Index:
    def __init__(self, docs: list[list[str]], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.docs = docs
        self.term_freqs = [Counter(d) for d in docs]
        self.doc_lens = [len(d) for d in docs]
        n = len(docs)
        self.avgdl = (sum(self.doc_lens) / n) if n else 0.0
        df = Counter()
        for tf in self.term_freqs:
            df.update(tf.keys())
        self.idf = {
            t: math.log((n - d + 0.5) / (d + 0.5) + 1.0) for t, d in df.items()
        }

    def score(self, query: list[str], doc_index: int) -> float:
        tf = self.term_freqs[doc_index]
        dl = self.doc_lens[doc_index]
        norm = self.k1 * (1 - self.b + self.b * dl / self.avgdl) if self.avgdl else 0.0
        s = 0.0
        for t in query:
            f = tf.get(t, 0)
            if not f:
                continue
            s += self.idf[t] * f * (self.k1 + 1) / (f + norm)
        return s

    def rank(self, query: list[str]) -> list[tuple[int, float]]:
        """(doc_index, score) sorted by score descending; ties keep the later
        document first so recency wins when callers index docs chronologically."""
        scored = [(i, self.score(query, i)) for i in range(len(self.docs))]
        return sorted(scored, key=lambda p: (-p[1], -p[0]))
