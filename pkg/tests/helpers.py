"""Shared oracles and builders for the test suite."""

from __future__ import annotations

import numpy as np

from titlemap import numerics as nx
from titlemap.graph import ParentChildPair


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def finite_difference_check(make_loss, params, h=1e-5):
    """Worst relative error between tape gradients and central differences.

    `make_loss` must be a pure function of the params' current data (any
    internal randomness replayed identically per call).
    """
    with nx.GradTape() as tape:
        loss = make_loss()
    tape.backward(loss)
    worst = 0.0
    for p in params:
        grad = p.grad.reshape(-1)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = make_loss().item()
            flat[i] = orig - h
            down = make_loss().item()
            flat[i] = orig
            fd = (up - down) / (2 * h)
            worst = max(worst, rel_err(grad[i], fd))
    return worst


def scalar_adam_reference(x0, grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Independent scalar Adam trace, plain Python floats."""
    x, m, v = float(x0), 0.0, 0.0
    trace = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        x = x - lr * m_hat / (v_hat**0.5 + eps)
        trace.append(x)
    return trace


def balanced_tree_pairs(branching=3, depth=2):
    """(child, parent) pairs of a balanced tree; 13 nodes for (3, 2)."""
    pairs = []
    frontier = ["n"]
    for _ in range(depth):
        nxt = []
        for parent in frontier:
            for i in range(branching):
                child = f"{parent}{i}"
                pairs.append(ParentChildPair(parent=parent, child=child))
                nxt.append(child)
        frontier = nxt
    return pairs


def brute_force_gram_cosine(a: str, b: str, n: int = 3) -> float:
    """Independent oracle: enumerate padded n-grams with explicit loops."""
    def grams(s):
        padded = "^" * (n - 1) + s + "$" * (n - 1)
        out = []
        for i in range(len(padded) - n + 1):
            g = padded[i : i + n]
            if g not in out:
                out.append(g)
        return out

    ga, gb = grams(a), grams(b)
    shared = 0
    for g in ga:
        if g in gb:
            shared += 1
    return shared / np.sqrt(len(ga) * len(gb))


def pairwise_auc_oracle(pos, neg):
    """O(n^2) comparison count: P(pos > neg) + 0.5 P(pos == neg)."""
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))
