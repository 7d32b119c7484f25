"""Fuzzy simplicial set on a 4-point instance, clamped cross-entropy on a
3-edge graph, and the (a, b) curve fit."""

import math

import numpy as np
from scipy.optimize import brentq, curve_fit

from common import write

EPS = 1e-4


def fuzzy(points, k):
    n = len(points)
    d = [[math.dist(p, q) for q in points] for p in points]
    target = math.log2(k)
    rho, sigma, directed = [], [], {}
    for i in range(n):
        nn = sorted(((d[i][j], j) for j in range(n) if j != i))[:k]
        r = min(x for x, _ in nn if x > 0)
        f = lambda s: sum(math.exp(-max(0.0, x - r) / s) for x, _ in nn) - target
        s = brentq(f, 1e-8, 1e3, xtol=1e-15, rtol=1e-15)
        rho.append(r)
        sigma.append(s)
        for x, j in nn:
            directed[(i, j)] = math.exp(-max(0.0, x - r) / s)
    union = {}
    for (i, j), a in directed.items():
        b = directed.get((j, i), 0.0)
        union[f"{min(i, j)}-{max(i, j)}"] = a + b - a * b
    return rho, sigma, union


def cross_entropy(edges, pts, a, b):
    total = 0.0
    for i, j, wh in edges:
        dd = math.dist(pts[i], pts[j])
        wl = 1.0 / (1.0 + a * dd ** (2 * b))
        total += wh * (math.log(max(wh, EPS)) - math.log(max(wl, EPS)))
        total += (1 - wh) * (math.log(max(1 - wh, EPS)) - math.log(max(1 - wl, EPS)))
    return total


def curve(min_dist, spread=1.0):
    xs = np.linspace(0, 3 * spread, 300)
    ys = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist) / spread))
    (a, b), _ = curve_fit(lambda x, a, b: 1.0 / (1.0 + a * x ** (2 * b)), xs, ys, p0=(1.0, 1.0))
    return float(a), float(b)


def main():
    pts4 = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.5], [3.2, 1.1]]
    rho, sigma, union = fuzzy(pts4, 3)
    edges = [[0, 1, 0.9], [1, 2, 0.5], [0, 2, 0.2]]
    pts3 = [[0.0, 0.0], [0.5, 0.2], [2.0, -1.0]]
    curves = []
    for md in (0.1, 0.5):
        a, b = curve(md)
        curves.append({"min_dist": md, "a": a, "b": b})
    write("umap.json", {
        "fuzzy": {"points": pts4, "n_neighbors": 3, "rho": rho, "sigma": sigma, "union": union},
        "cross_entropy": {"edges": edges, "points": pts3, "a": 1.5, "b": 0.9,
                          "value": cross_entropy(edges, pts3, 1.5, 0.9)},
        "curves": curves,
    })


if __name__ == "__main__":
    main()
