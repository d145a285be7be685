"""Brute-force reference implementations used as test oracles.

Deliberately naive: plain Python lists and loops, no shared code with the
package under test.
"""

import math


def ngrams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def bleu_counts(pairs, max_n=4):
    """Per-order (clipped matches, hypothesis n-gram totals) by exhaustive counting."""
    matches = [0] * max_n
    totals = [0] * max_n
    for ref, hyp in pairs:
        for n in range(1, max_n + 1):
            h = ngrams(list(hyp), n)
            r = ngrams(list(ref), n)
            seen = []
            for g in h:
                if g in seen:
                    continue
                seen.append(g)
                matches[n - 1] += min(h.count(g), r.count(g))
            totals[n - 1] += len(h)
    return matches, totals


def bleu(pairs, max_n=4):
    pairs = list(pairs)
    matches, totals = bleu_counts(pairs, max_n)
    r = sum(len(ref) for ref, _ in pairs)
    c = sum(len(hyp) for _, hyp in pairs)
    if c == 0 or matches[0] == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        if matches[n] == 0:
            log_p += math.log(1.0 / (totals[n] + 1))
        else:
            log_p += math.log(matches[n] / totals[n])
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p / max_n)


def cos(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def avg_embedding(ref_vecs, hyp_vecs):
    def mean(vs):
        return [sum(v[d] for v in vs) / len(vs) for d in range(len(vs[0]))]
    return cos(mean(ref_vecs), mean(hyp_vecs))


def extrema(ref_vecs, hyp_vecs):
    def ext(vs):
        out = []
        for d in range(len(vs[0])):
            best = vs[0][d]
            for v in vs[1:]:
                if abs(v[d]) > abs(best):
                    best = v[d]
            out.append(best)
        return out
    return cos(ext(ref_vecs), ext(hyp_vecs))


def greedy(ref_vecs, hyp_vecs):
    def directed(src, dst):
        total = 0.0
        for s in src:
            best = -2.0
            for d in dst:
                c = cos(s, d)
                if c > best:
                    best = c
            total += best
        return total / len(src)
    return (directed(ref_vecs, hyp_vecs) + directed(hyp_vecs, ref_vecs)) / 2.0


def exhaustive_knn(vectors, query, k, exclude=None):
    """Indices of the k smallest cosine distances, ties by index."""
    scored = []
    for i, v in enumerate(vectors):
        if exclude is not None and exclude(i):
            continue
        scored.append((max(0.0, 1.0 - cos(query, v)), i))
    scored.sort()
    return [i for _, i in scored[:k]]
