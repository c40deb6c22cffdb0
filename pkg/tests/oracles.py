"""Slow, independently written reference implementations used as test oracles.

Nothing here imports the code under test beyond plain data containers.
"""

import math
from collections import Counter, defaultdict


def entropy(counts):
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def gain(bins, labels):
    """Class entropy minus size-weighted within-bin entropy, from a dict contingency table."""
    table = defaultdict(Counter)
    for b, y in zip(bins, labels):
        table[b][y] += 1
    n = len(labels)
    before = entropy(list(Counter(labels).values()))
    after = sum(sum(row.values()) / n * entropy(list(row.values())) for row in table.values())
    return before - after


def equal_frequency_bins(values, bins):
    """Bin = number of distinct rank-quantile cut values strictly below the value."""
    xs = sorted(values)
    n = len(xs)
    cuts = set()
    for i in range(1, bins):
        cuts.add(xs[math.ceil(i * n / bins) - 1])
    cuts = {c for c in cuts if c < xs[-1]}
    return [sum(1 for c in cuts if c < v) for v in values]


def knn_neighbours(train_rows, row_ids, query, subset, k, metric="euclidean"):
    """Sort every training row by (distance, row id) and keep the first k."""
    scored = []
    for pos, row in enumerate(train_rows):
        if metric == "euclidean":
            d = math.sqrt(sum((row[j - 1] - query[j - 1]) ** 2 for j in sorted(subset)))
        else:
            d = sum(abs(row[j - 1] - query[j - 1]) for j in sorted(subset))
        scored.append((d, row_ids[pos], pos))
    scored.sort()
    return scored[:k]


def knn_predict(train_rows, train_labels, row_ids, query, subset, k, metric="euclidean"):
    nb = knn_neighbours(train_rows, row_ids, query, subset, k, metric)
    votes = Counter(train_labels[pos] for _, _, pos in nb)
    top = max(votes.values())
    tied = {lab for lab, v in votes.items() if v == top}
    for _, _, pos in nb:
        if train_labels[pos] in tied:
            return train_labels[pos]


def knn_accuracy(train_rows, train_labels, row_ids, test_rows, test_labels, subset, k):
    hits = sum(knn_predict(train_rows, train_labels, row_ids, q, subset, k) == y
               for q, y in zip(test_rows, test_labels))
    return hits / len(test_labels)


def forward_selection(order, accuracy_of):
    """Walk ``order``; keep a feature iff it strictly raises the best accuracy so far."""
    chosen = [order[0]]
    best = accuracy_of(chosen)
    for f in order[1:]:
        acc = accuracy_of(chosen + [f])
        if acc > best:
            chosen.append(f)
            best = acc
    return chosen, best
