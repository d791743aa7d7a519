"""Independent reference implementations used to verify the library.

Everything here is written as plain loops over scalars, deliberately
avoiding the vectorized code paths of the package under test. Keep these
slow and obvious.
"""

import math


def euclidean(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += (float(x) - float(y)) ** 2
    return math.sqrt(total)


def author_distance(P1, P2):
    """Mean of all pairwise distances between two paper sets."""
    total = 0.0
    for p1 in P1:
        for p2 in P2:
            total += euclidean(p1, p2)
    return total / (len(P1) * len(P2))


def self_distance_offdiag(P):
    m = len(P)
    if m == 1:
        return 0.0
    total = 0.0
    for i in range(m):
        for j in range(m):
            if i != j:
                total += euclidean(P[i], P[j])
    return total / (m * (m - 1))


def lloyd(X, centroids0, max_iter=300, tol=1e-6):
    """Plain-loop Lloyd iteration from given starting centroids.

    Assignment ties go to the lowest centroid index; empty clusters are
    reseeded at the point farthest from its own centroid. Returns
    (labels, centroids, inertia).
    """
    X = [[float(v) for v in row] for row in X]
    centroids = [[float(v) for v in row] for row in centroids0]
    n, k = len(X), len(centroids)
    labels = [0] * n
    for _ in range(max_iter):
        for i in range(n):
            best, best_d = 0, float("inf")
            for c in range(k):
                d = euclidean(X[i], centroids[c]) ** 2
                if d < best_d:
                    best, best_d = c, d
            labels[i] = best
        for c in range(k):
            if labels.count(c) == 0:
                far_i, far_d = 0, -1.0
                for i in range(n):
                    d = euclidean(X[i], centroids[labels[i]])
                    if d > far_d:
                        far_i, far_d = i, d
                centroids[c] = list(X[far_i])
                labels[far_i] = c
        shift = 0.0
        for c in range(k):
            members = [X[i] for i in range(n) if labels[i] == c]
            new_c = [sum(col) / len(members) for col in zip(*members)]
            s = sum((a - b) ** 2 for a, b in zip(new_c, centroids[c]))
            shift = max(shift, s)
            centroids[c] = new_c
        if shift < tol:
            break
    inertia = 0.0
    for i in range(n):
        inertia += euclidean(X[i], centroids[labels[i]]) ** 2
    return labels, centroids, inertia


def silhouette(X, labels):
    """Per-point a/b computation enumerating every pair distance."""
    n = len(X)
    values = []
    for i in range(n):
        same, other = {}, {}
        for j in range(n):
            if j == i:
                continue
            d = euclidean(X[i], X[j])
            bucket = same if labels[j] == labels[i] else other
            bucket.setdefault(labels[j], []).append(d)
        own = same.get(labels[i], [])
        if not own:
            values.append(0.0)
            continue
        a = sum(own) / len(own)
        b = min(sum(ds) / len(ds) for ds in other.values())
        denom = max(a, b)
        values.append((b - a) / denom if denom > 0 else 0.0)
    return sum(values) / n


def calinski_harabasz(X, labels):
    n = len(X)
    dim = len(X[0])
    uniq = sorted(set(labels))
    k = len(uniq)
    grand = [sum(float(X[i][d]) for i in range(n)) / n for d in range(dim)]
    between = 0.0
    within = 0.0
    for u in uniq:
        members = [X[i] for i in range(n) if labels[i] == u]
        c = [sum(float(m[d]) for m in members) / len(members) for d in range(dim)]
        between += len(members) * sum((c[d] - grand[d]) ** 2 for d in range(dim))
        for m in members:
            within += sum((float(m[d]) - c[d]) ** 2 for d in range(dim))
    if within == 0.0:
        return float("inf")
    return (between / (k - 1)) / (within / (n - k))


def davies_bouldin(X, labels):
    n = len(X)
    dim = len(X[0])
    uniq = sorted(set(labels))
    centroids = []
    scatters = []
    for u in uniq:
        members = [X[i] for i in range(n) if labels[i] == u]
        c = [sum(float(m[d]) for m in members) / len(members) for d in range(dim)]
        centroids.append(c)
        scatters.append(sum(euclidean(m, c) for m in members) / len(members))
    total = 0.0
    for i in range(len(uniq)):
        worst = -1.0
        for j in range(len(uniq)):
            if i == j:
                continue
            sep = euclidean(centroids[i], centroids[j])
            if sep == 0.0:
                return float("inf")
            worst = max(worst, (scatters[i] + scatters[j]) / sep)
        total += worst
    return total / len(uniq)


def radius_std(X, labels, label):
    members = [X[i] for i in range(len(X)) if labels[i] == label]
    dim = len(members[0])
    c = [sum(float(m[d]) for m in members) / len(members) for d in range(dim)]
    dists = [euclidean(m, c) for m in members]
    mean = sum(dists) / len(dists)
    var = sum((d - mean) ** 2 for d in dists) / len(dists)
    return max(dists), math.sqrt(var)


def knn(X, k):
    """Exhaustive k nearest neighbors, ties toward the lower index."""
    n = len(X)
    out = []
    for i in range(n):
        pairs = []
        for j in range(n):
            if j != i:
                pairs.append((euclidean(X[i], X[j]), j))
        pairs.sort()
        out.append([j for _, j in pairs[:k]])
    return out


def mmr(relevance, similarity, top_k, diversity):
    """Step-wise greedy selection scanning every remaining candidate."""
    n = len(relevance)
    selected = [max(range(n), key=lambda i: (relevance[i], -i))]
    while len(selected) < min(top_k, n):
        best_i, best_v = None, None
        for i in range(n):
            if i in selected:
                continue
            redundancy = max(similarity[i][s] for s in selected)
            v = (1.0 - diversity) * relevance[i] - diversity * redundancy
            if best_v is None or v > best_v:
                best_i, best_v = i, v
        selected.append(best_i)
    return selected


def neighbor_purity(coords, labels):
    """Fraction of points whose nearest other point shares their label."""
    n = len(coords)
    hits = 0
    for i in range(n):
        best_j, best_d = None, float("inf")
        for j in range(n):
            if j == i:
                continue
            d = euclidean(coords[i], coords[j])
            if d < best_d:
                best_j, best_d = j, d
        if labels[best_j] == labels[i]:
            hits += 1
    return hits / n


def ngram_overlap(text_a, text_b):
    """Jaccard overlap of word 1-/2-gram multiset supports."""

    def grams(text):
        words = text.lower().split()
        out = set(words)
        out |= {" ".join(p) for p in zip(words, words[1:])}
        return out

    ga, gb = grams(text_a), grams(text_b)
    if not ga and not gb:
        return 1.0
    return len(ga & gb) / len(ga | gb)
