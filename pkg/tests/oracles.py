"""Straight-from-the-definition reimplementations used as test oracles."""

import itertools
import math

import numpy as np

from tonalvae.metrics import camelot_order

MAJOR = camelot_order("major")


def random_groups(rng, n_groups=None, max_points=100):
    n_groups = n_groups or int(rng.integers(2, 13))
    sizes = rng.multinomial(max_points - 2 * n_groups, np.ones(n_groups) / n_groups) + 1
    return {MAJOR[i % 12] if i < 12 else i: rng.normal(rng.normal(0, 5, 2), rng.uniform(0.1, 2), size=(s, 2))
            for i, s in enumerate(sizes)}


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def db_oracle(groups):
    cents = {k: [sum(p[d] for p in g) / len(g) for d in range(2)] for k, g in groups.items()}
    scat = {k: sum(dist(p, cents[k]) for p in g) / len(g) for k, g in groups.items()}
    total = 0.0
    for i in groups:
        total += max((scat[i] + scat[j]) / dist(cents[i], cents[j]) for j in groups if j != i)
    return total / len(groups)


def dunn_oracle(groups):
    diam = 0.0
    for g in groups.values():
        pairs = [dist(a, b) for a, b in itertools.permutations(g.tolist(), 2)]
        diam = max(diam, sum(pairs) / len(pairs) if pairs else 0.0)
    sep = min(dist(a, b) for i, j in itertools.combinations(groups, 2)
              for a in groups[i].tolist() for b in groups[j].tolist())
    return sep / diam


def tau_oracle(reference, angles):
    # orientation from the rank order of angles: a cyclic triple is counter-clockwise iff its
    # ranks are an even rotation of ascending order
    order = sorted(reference, key=lambda k: angles[k])
    rank = {k: i for i, k in enumerate(order)}
    n = len(reference)
    total = 0
    for i, j, k in itertools.combinations(range(n), 3):
        a, b, c = rank[reference[i]], rank[reference[j]], rank[reference[k]]
        ccw = a < b < c or b < c < a or c < a < b
        total += 1 if ccw else -1
    return total / math.comb(n, 3)
