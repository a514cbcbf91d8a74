"""Shared test helpers: tree invariant checks and brute-force oracles.

These deliberately reimplement package logic in the dumbest way possible
(dense scans, all-pairs loops) so the fast paths have something independent
to be compared against.
"""

from __future__ import annotations

import numpy as np

from spamm.core import DenseMatrix, QuadtreeMatrix
from spamm.generators import GeneratorSpec, generate
from spamm.morton import k_of_a, k_of_b


def rng_matrix(m: int, n: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Reproducible float32 matrix with entries in [-scale, scale)."""
    rng = np.random.default_rng(seed)
    return ((rng.random((m, n)) * 2.0 - 1.0) * scale).astype(np.float32)


def decay_matrix(n: int, seed: int = 0, kind: str = "exponential", **kw) -> DenseMatrix:
    return generate(GeneratorSpec(kind=kind, n=n, seed=seed, **kw))


def assert_norm_invariant(q: QuadtreeMatrix, rel: float = 1e-6) -> None:
    """Check every stored norm against its children, and tree reachability.

    Interior: norm^2 must equal the sum of the children's norm^2 within
    rel * norm^2.  Leaves: the block norm must match the float32 norm of
    the values, the sub-block norms must match a direct dense scan, and the
    squared block norm must match the squared sub-norm sum within rel.
    Every node must be reachable from the root.
    """
    d = q.depth
    seen = 0
    for t in range(d + 1):
        for (tier, key), node in list(q._nodes.items()):
            if tier != t:
                continue
            seen += 1
            assert node.tier == t and node.index == key
            if t > 0:
                assert q.node(t - 1, key >> 2) is not None, (
                    f"orphan node at tier {t} key {key}"
                )
            if t < d:
                assert node.leaf is None
                s2 = 0.0
                for quad in range(4):
                    ch = q.node(t + 1, (key << 2) | quad)
                    if ch is not None:
                        s2 += float(ch.norm) ** 2
                n2 = float(node.norm) ** 2
                assert abs(n2 - s2) <= rel * max(n2, s2), (
                    f"tier {t} key {key}: norm^2 {n2} vs child sum {s2}"
                )
            else:
                lb = node.leaf
                assert lb is not None
                assert node.norm == lb.blocknorm
                vals = lb.values.astype(np.float64)
                direct = np.float32(np.sqrt((vals * vals).sum()))
                assert lb.blocknorm == float(direct)
                nb = vals.shape[0]
                s = lb.subnorms.shape[0]
                w = nb // s
                sub = np.sqrt(
                    (vals * vals).reshape(s, w, s, w).sum(axis=(1, 3))
                ).astype(np.float32)
                assert np.array_equal(lb.subnorms, sub)
                n2 = float(lb.blocknorm) ** 2
                s2 = float((sub.astype(np.float64) ** 2).sum())
                assert abs(n2 - s2) <= rel * max(n2, s2, 1e-300)
    assert seen == q.node_count


def matched_pairs(a: QuadtreeMatrix, b: QuadtreeMatrix, tau: float) -> set:
    """All-pairs oracle for the symbolic phase.

    Every (a_key, b_key) leaf pair whose contraction lanes match and whose
    float64 norm product is not below tau.
    """
    out = set()
    for ka, na in a.leaf_items():
        for kb, nb in b.leaf_items():
            if k_of_a(ka) != (k_of_b(kb) >> 1):
                continue
            if not (na.norm * nb.norm < tau):
                out.add((ka, kb))
    return out
