"""Ranking metrics and the downstream harnesses (link prediction, mobility).

Precision@N keeps the strict definition |relevant & top-N| / N; for the
single-label mapping task the headline number is `hit_rate_at_n` (is the gold
title anywhere in the top N), which matches how Precision@N is conventionally
reported for one relevant item per query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import ConfigError, DataError, EvaluationError, MissingTitleError
from .graph import TransitionGraph
from .numerics import Tensor


@dataclass
class RankingResult:
    """Per-query ranked candidate indices plus the relevant set."""

    rankings: list  # list of candidate-index lists, best first
    relevant: list  # list of sets of relevant indices

    def __post_init__(self):
        if len(self.rankings) != len(self.relevant):
            raise DataError("rankings and relevant lists must align")
        for ranking in self.rankings:
            if len(set(ranking)) != len(ranking):
                raise DataError("a query ranking contains duplicate candidates")


def precision_at_n(results: RankingResult, n: int) -> float:
    """Mean over queries of |relevant & top-n| / n."""
    if n < 1:
        raise ConfigError(f"precision_at_n: n must be >= 1, got {n}")
    if not results.rankings:
        return 0.0
    scores = [
        len(set(ranking[:n]) & rel) / n
        for ranking, rel in zip(results.rankings, results.relevant)
    ]
    return float(np.mean(scores))


def hit_rate_at_n(results: RankingResult, n: int) -> float:
    """Mean over queries of whether any relevant item appears in the top n."""
    if n < 1:
        raise ConfigError(f"hit_rate_at_n: n must be >= 1, got {n}")
    if not results.rankings:
        return 0.0
    scores = [
        1.0 if set(ranking[:n]) & rel else 0.0
        for ranking, rel in zip(results.rankings, results.relevant)
    ]
    return float(np.mean(scores))


def ndcg_at_n(results: RankingResult, n: int) -> float:
    """Binary-gain NDCG with the log2 discount, ranks starting at 1."""
    if n < 1:
        raise ConfigError(f"ndcg_at_n: n must be >= 1, got {n}")
    if not results.rankings:
        return 0.0
    scores = []
    for ranking, rel in zip(results.rankings, results.relevant):
        dcg = sum(
            1.0 / np.log2(rank + 1)
            for rank, cand in enumerate(ranking[:n], start=1)
            if cand in rel
        )
        ideal_hits = min(n, len(rel))
        idcg = sum(1.0 / np.log2(rank + 1) for rank in range(1, ideal_hits + 1))
        scores.append(dcg / idcg if idcg > 0 else 0.0)
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# Link prediction (removed-edge protocol)

EDGE_OPERATORS = ("average", "hadamard", "weighted_l1", "weighted_l2")


@dataclass
class LinkSplit:
    nodes: list
    train_edges: list
    dev_pos: list
    dev_neg: list
    test_pos: list
    test_neg: list


def make_link_split(graph: TransitionGraph, seed: int = 0) -> LinkSplit:
    """Hold out 20% of edges (plus equal negatives) for test, then 20% of the
    remainder for dev; the rest stays as the training graph."""
    edges = graph.edges()
    if len(edges) < 10:
        raise DataError(f"link split needs >= 10 edges, got {len(edges)}")
    nodes = sorted(graph.nodes)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(edges))
    n_test = int(len(edges) * 0.2)
    n_dev = int((len(edges) - n_test) * 0.2)
    test_pos = [edges[i] for i in order[:n_test]]
    dev_pos = [edges[i] for i in order[n_test : n_test + n_dev]]
    train_edges = [edges[i] for i in sorted(order[n_test + n_dev :])]

    edge_set = set(edges)
    capacity = len(nodes) * (len(nodes) - 1) - len(edge_set)
    if capacity < n_test + n_dev:
        raise DataError(
            f"graph too dense to sample {n_test + n_dev} negative links "
            f"({capacity} non-edges available)"
        )
    seen: set = set()

    def sample_negatives(count: int) -> list:
        out = []
        while len(out) < count:
            u = nodes[int(rng.integers(len(nodes)))]
            v = nodes[int(rng.integers(len(nodes)))]
            if u == v or (u, v) in edge_set or (u, v) in seen:
                continue
            seen.add((u, v))
            out.append((u, v))
        return out

    test_neg = sample_negatives(n_test)
    dev_neg = sample_negatives(n_dev)
    return LinkSplit(
        nodes=nodes,
        train_edges=train_edges,
        dev_pos=dev_pos,
        dev_neg=dev_neg,
        test_pos=test_pos,
        test_neg=test_neg,
    )


def edge_embed(u_vec: np.ndarray, v_vec: np.ndarray, operator: str) -> np.ndarray:
    u_vec = np.asarray(u_vec, dtype=np.float64)
    v_vec = np.asarray(v_vec, dtype=np.float64)
    if u_vec.shape != v_vec.shape:
        raise nx.DimensionError(
            f"edge_embed: endpoint shapes {u_vec.shape} and {v_vec.shape} differ"
        )
    if operator == "average":
        return (u_vec + v_vec) / 2.0
    if operator == "hadamard":
        return u_vec * v_vec
    if operator == "weighted_l1":
        return np.abs(u_vec - v_vec)
    if operator == "weighted_l2":
        return (u_vec - v_vec) ** 2
    raise ConfigError(f"unknown edge operator {operator!r}")


def auc_score(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Rank-statistic AUC with average ranks for ties (equals the pairwise
    P(score+ > score-) + 0.5 P(=) count)."""
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if pos_scores.size == 0 or neg_scores.size == 0:
        raise EvaluationError("AUC needs both positive and negative examples")
    scores = np.concatenate([pos_scores, neg_scores])
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average of 1-based ranks
        i = j + 1
    n_pos = pos_scores.size
    rank_sum = ranks[:n_pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * neg_scores.size))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LinkPredictionReport:
    per_operator: dict  # operator -> {"dev_auc": float, "test_auc": float}
    best_operator: str
    test_auc: float


def link_prediction_auc(
    split: LinkSplit,
    node_vectors: dict,
    seed: int = 0,
    epochs: int = 100,
    lr: float = 0.05,
) -> LinkPredictionReport:
    """Fit a logistic classifier on train edges per operator, select the
    operator on dev AUC, report test AUC. Train negatives are resampled 1:1
    each epoch from non-edges."""
    needed = set()
    for edge_list in (split.train_edges, split.dev_pos, split.dev_neg, split.test_pos, split.test_neg):
        for u, v in edge_list:
            needed.update((u, v))
    missing = sorted(t for t in needed if t not in node_vectors)
    if missing:
        raise MissingTitleError(
            f"no vector for {len(missing)} node(s): {missing[:10]}"
        )

    rng = np.random.default_rng(seed)
    nodes = split.nodes
    forbidden = set(split.train_edges) | set(split.dev_pos) | set(split.test_pos)

    def sample_train_negatives(count: int) -> list:
        out = []
        while len(out) < count:
            u = nodes[int(rng.integers(len(nodes)))]
            v = nodes[int(rng.integers(len(nodes)))]
            if u == v or (u, v) in forbidden:
                continue
            out.append((u, v))
        return out

    def features(edge_list: list, operator: str) -> np.ndarray:
        return np.stack(
            [edge_embed(node_vectors[u], node_vectors[v], operator) for u, v in edge_list]
        )

    per_operator = {}
    for operator in EDGE_OPERATORS:
        pos_feats = features(split.train_edges, operator)
        dim = pos_feats.shape[1]
        w = Tensor(np.zeros(dim), requires_grad=True)
        b = Tensor(np.zeros(1), requires_grad=True)
        optimizer = nx.Adam([w, b], lr=lr)
        for _ in range(epochs):
            neg_feats = features(sample_train_negatives(len(split.train_edges)), operator)
            feats = np.concatenate([pos_feats, neg_feats])
            y = np.concatenate([np.ones(len(pos_feats)), np.zeros(len(neg_feats))])
            p = _sigmoid(feats @ w.data + b.data[0])
            resid = (p - y) / len(y)
            w.grad = feats.T @ resid
            b.grad = np.array([resid.sum()])
            optimizer.step()

        def score(edge_list):
            feats = features(edge_list, operator)
            return feats @ w.data + b.data[0]

        dev_auc = auc_score(score(split.dev_pos), score(split.dev_neg))
        test_auc = auc_score(score(split.test_pos), score(split.test_neg))
        per_operator[operator] = {"dev_auc": dev_auc, "test_auc": test_auc}

    best_operator = max(EDGE_OPERATORS, key=lambda op: per_operator[op]["dev_auc"])
    return LinkPredictionReport(
        per_operator=per_operator,
        best_operator=best_operator,
        test_auc=per_operator[best_operator]["test_auc"],
    )


# ---------------------------------------------------------------------------
# Job-mobility harness (first-order frequency predictor)

def map_at_10_mobility(
    trajectories: Sequence[Sequence[str]],
    mapper: Optional[Callable[[str], str]] = None,
) -> float:
    """MAP@10 for predicting each trajectory's final title from its predecessor.

    The predictor is a first-order transition-frequency model fit on all
    non-final transitions; `mapper` (e.g. the trained model's top-1) is
    applied to every title first when given. The frequency model is a
    deliberate stand-in: the quantity of interest is how much the mapping
    preprocessing helps it.
    """
    usable = [list(t) for t in trajectories if len(t) >= 2]
    if not usable:
        raise DataError("mobility evaluation needs trajectories with >= 2 jobs")
    if mapper is not None:
        cache: dict = {}

        def remap(title: str) -> str:
            if title not in cache:
                cache[title] = mapper(title)
            return cache[title]

        usable = [[remap(t) for t in seq] for seq in usable]

    counts: dict = {}
    for seq in usable:
        for prev, nxt in zip(seq[:-2], seq[1:-1]):
            row = counts.setdefault(prev, {})
            row[nxt] = row.get(nxt, 0) + 1

    ap_values = []
    for seq in usable:
        prev, target = seq[-2], seq[-1]
        successors = counts.get(prev, {})
        ranking = sorted(successors, key=lambda t: (-successors[t], t))[:10]
        ap = 0.0
        for rank, title in enumerate(ranking, start=1):
            if title == target:
                ap = 1.0 / rank
                break
        ap_values.append(ap)
    return float(np.mean(ap_values))
