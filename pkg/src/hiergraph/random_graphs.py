"""Random graph primitives shared by the backends and BTER."""

from __future__ import annotations

import math

import numpy as np

DENSE_LIMIT = 1000


def _pairs_upper(n):
    iu, ju = np.triu_indices(n, k=1)
    return iu, ju


def chung_lu_probabilities(weights) -> np.ndarray:
    """Dense matrix of edge probabilities ``min(1, w_i w_j / W)``, zero diagonal."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return np.zeros((len(w), len(w)))
    p = np.minimum(1.0, np.outer(w, w) / total)
    np.fill_diagonal(p, 0.0)
    return p


def chung_lu(weights, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Sample each pair {i, j} independently with probability min(1, s w_i w_j / W).

    Returns an (m, 2) edge array. Small graphs use a dense draw; large ones
    the sorted-weight skipping method of Miller and Hagberg, which visits only
    O(n + m) candidate pairs.
    """
    w = np.asarray(weights, dtype=float)
    n = len(w)
    if n < 2 or w.sum() <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    if n <= DENSE_LIMIT:
        iu, ju = _pairs_upper(n)
        p = np.minimum(1.0, scale * w[iu] * w[ju] / w.sum())
        hit = rng.random(len(p)) < p
        return np.column_stack([iu[hit], ju[hit]]).astype(np.int64)
    return _chung_lu_skipping(w, rng, scale)


def _chung_lu_skipping(w, rng, scale=1.0):
    order = np.argsort(-w, kind="stable")
    ws = w[order].tolist()
    total = float(sum(ws)) / scale
    n = len(ws)
    out = []
    random = rng.random
    for u in range(n - 1):
        wu = ws[u]
        if wu <= 0:
            break
        v = u + 1
        p = min(wu * ws[v] / total, 1.0)
        while v < n and p > 0:
            if p != 1.0:
                r = random()
                v += int(math.floor(math.log(r) / math.log1p(-p))) if r > 0 else n
            if v < n:
                q = min(wu * ws[v] / total, 1.0)
                if random() < q / p:
                    out.append((u, v))
                p = q
                v += 1
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.asarray(out, dtype=np.int64)
    return np.sort(order[e], axis=1)


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """G(n, p) edge array."""
    if n < 2 or p <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    if n <= DENSE_LIMIT:
        iu, ju = _pairs_upper(n)
        hit = rng.random(len(iu)) < p
        return np.column_stack([iu[hit], ju[hit]]).astype(np.int64)
    # sparse: draw the edge count, then distinct pair indices
    total = n * (n - 1) // 2
    k = int(rng.binomial(total, min(p, 1.0)))
    chosen = set()
    while len(chosen) < k:
        chosen.update(rng.integers(0, total, size=k - len(chosen)).tolist())
    idx = np.fromiter(chosen, dtype=np.int64, count=len(chosen))
    idx.sort()
    # invert the row-major upper-triangle index
    i = (n - 2 - np.floor(np.sqrt(-8 * idx + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = idx + i + 1 - total + (n - i) * ((n - i) - 1) // 2
    return np.column_stack([i, j])


def double_edge_swap(edges, nswap: int, rng: np.random.Generator, max_tries: int | None = None):
    """Degree-preserving rewiring: (u,v),(x,y) -> (u,x),(v,y).

    Swaps that would create a self-loop or a duplicate edge are rejected.
    Returns the new edge array and the number of swaps performed.
    """
    e = [tuple(x) for x in np.asarray(edges, dtype=np.int64).reshape(-1, 2).tolist()]
    if nswap <= 0 or len(e) < 2:
        return np.asarray(e, dtype=np.int64).reshape(-1, 2), 0
    present = set(e)
    if max_tries is None:
        max_tries = 100 * nswap
    done = tries = 0
    while done < nswap and tries < max_tries:
        tries += 1
        a, b = rng.choice(len(e), size=2, replace=False)
        u, v = e[a]
        x, y = e[b]
        if rng.random() < 0.5:
            x, y = y, x
        if u == x or v == y or u == y or v == x:
            continue
        n1 = (min(u, x), max(u, x))
        n2 = (min(v, y), max(v, y))
        if n1 in present or n2 in present:
            continue
        present.difference_update((e[a], e[b]))
        present.update((n1, n2))
        e[a], e[b] = n1, n2
        done += 1
    return np.asarray(e, dtype=np.int64).reshape(-1, 2), done
