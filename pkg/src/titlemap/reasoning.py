"""Neural collaborative reasoning over (title, candidate) similarity events.

For one view, every standard title k yields an event vector e_k encoding the
proposition "the input title matches candidate k". Learned NOT and OR modules
fold the negated events into a clause representation; no algebraic law is
hard-coded - the logical behaviour of NOT/OR is only encouraged by the six
regularizers (negation, double negation, identity, annihilator, idempotence,
complementation) against learnable TRUE/FALSE anchors.

The fold that feeds the classifier is label-free: the correct candidate's
positive literal only ever appears inside `clause_truth_loss`, a training-time
auxiliary, so the classifier input cannot encode the answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import numerics as nx
from .errors import DegenerateInputError, DimensionError
from .numerics import Tensor


def _uniform_param(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    bound = 1.0 / np.sqrt(cols)
    return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True)


def _uniform_bias(rng: np.random.Generator, size: int) -> Tensor:
    bound = 1.0 / np.sqrt(size)
    return Tensor(rng.uniform(-bound, bound, size=(1, size)), requires_grad=True)


@dataclass
class ReasoningParams:
    """Event encoder (two-layer, tanh hidden), NOT and OR modules, TRUE anchor.

    The encoder's first layer is stored as two column blocks (title side,
    candidate side) of the conceptual weight over concat(j, v); likewise the
    OR module stores the two halves of its 2*d_r -> d_r weight. `true_anchor`
    is renormalized to unit length after every optimizer step.
    """

    view_dim: int
    d_r: int
    enc_w1_j: Tensor  # hidden x view_dim
    enc_w1_v: Tensor  # hidden x view_dim
    enc_b1: Tensor  # 1 x hidden
    enc_w2: Tensor  # d_r x hidden
    enc_b2: Tensor  # 1 x d_r
    not_w: Tensor  # d_r x d_r
    not_b: Tensor  # 1 x d_r
    or_w_left: Tensor  # d_r x d_r
    or_w_right: Tensor  # d_r x d_r
    or_b: Tensor  # 1 x d_r
    true_anchor: Tensor  # 1 x d_r, unit norm

    @classmethod
    def init(cls, view_dim: int, d_r: int, seed: int = 0) -> "ReasoningParams":
        rng = np.random.default_rng(seed)
        hidden = 2 * d_r
        anchor = rng.standard_normal((1, d_r))
        anchor /= np.linalg.norm(anchor)
        return cls(
            view_dim=view_dim,
            d_r=d_r,
            enc_w1_j=_uniform_param(rng, hidden, view_dim),
            enc_w1_v=_uniform_param(rng, hidden, view_dim),
            enc_b1=_uniform_bias(rng, hidden),
            enc_w2=_uniform_param(rng, d_r, hidden),
            enc_b2=_uniform_bias(rng, d_r),
            not_w=_uniform_param(rng, d_r, d_r),
            not_b=_uniform_bias(rng, d_r),
            or_w_left=_uniform_param(rng, d_r, d_r),
            or_w_right=_uniform_param(rng, d_r, d_r),
            or_b=_uniform_bias(rng, d_r),
            true_anchor=Tensor(anchor, requires_grad=True),
        )

    def tensors(self) -> list[Tensor]:
        return [
            self.enc_w1_j, self.enc_w1_v, self.enc_b1, self.enc_w2, self.enc_b2,
            self.not_w, self.not_b, self.or_w_left, self.or_w_right, self.or_b,
            self.true_anchor,
        ]

    def renormalize_anchor(self) -> None:
        self.true_anchor.data /= np.linalg.norm(self.true_anchor.data)


def encode_event(j_vec: Tensor, v_vec: Tensor, params: ReasoningParams) -> Tensor:
    """Event vector for aligned (title, candidate) rows. Deterministic."""
    if j_vec.data.shape[-1] != params.view_dim or v_vec.data.shape[-1] != params.view_dim:
        raise DimensionError(
            f"encode_event: view width {params.view_dim} expected, got "
            f"{j_vec.data.shape} and {v_vec.data.shape}"
        )
    pre = (
        nx.matmul(j_vec, nx.transpose(params.enc_w1_j))
        + nx.matmul(v_vec, nx.transpose(params.enc_w1_v))
        + params.enc_b1
    )
    return nx.matmul(nx.tanh(pre), nx.transpose(params.enc_w2)) + params.enc_b2


def not_op(e: Tensor, params: ReasoningParams) -> Tensor:
    return nx.tanh(nx.matmul(e, nx.transpose(params.not_w)) + params.not_b)


def or_op(a: Tensor, b: Tensor, params: ReasoningParams) -> Tensor:
    return nx.tanh(
        nx.matmul(a, nx.transpose(params.or_w_left))
        + nx.matmul(b, nx.transpose(params.or_w_right))
        + params.or_b
    )


def row_cosine(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise cosine of two (n, d) tensors (broadcasting rows), clipped to [-1, 1]."""
    num = nx.tsum(nx.mul(a, b), axis=1, keepdims=True)
    na = nx.sqrt(nx.tsum(nx.mul(a, a), axis=1, keepdims=True))
    nb = nx.sqrt(nx.tsum(nx.mul(b, b), axis=1, keepdims=True))
    return nx.clip(nx.div(num, nx.mul(na, nb)), -1.0, 1.0)


class ClauseOutput(NamedTuple):
    x_prime: Tensor  # (batch, d_r) label-free clause representation
    events: list  # per-candidate event tensors, taxonomy order


def candidate_projection(candidates: Tensor, params: ReasoningParams) -> Tensor:
    """First-layer projection of every candidate row; computed once per batch."""
    return nx.matmul(candidates, nx.transpose(params.enc_w1_v))


def clause_representation(
    j_matrix: Tensor,
    candidates: Tensor,
    params: ReasoningParams,
    order: Optional[np.ndarray] = None,
    return_events: bool = False,
) -> ClauseOutput:
    """Left-fold OR over the NOT of every candidate event.

    `order` permutes the fold (shuffled per training step, natural taxonomy
    order at inference). The output never sees the gold candidate's positive
    literal.
    """
    n_cand = candidates.data.shape[0]
    if n_cand == 0:
        raise DegenerateInputError("clause_representation: empty candidate set")
    j_pre = nx.matmul(j_matrix, nx.transpose(params.enc_w1_j)) + params.enc_b1
    v_pre = candidate_projection(candidates, params)
    events: list[Optional[Tensor]] = [None] * n_cand
    fold = None
    sequence = range(n_cand) if order is None else order
    for k in sequence:
        hidden = nx.tanh(j_pre + nx.take_rows(v_pre, np.array([k])))
        e_k = nx.matmul(hidden, nx.transpose(params.enc_w2)) + params.enc_b2
        if return_events:
            events[k] = e_k
        negated = not_op(e_k, params)
        fold = negated if fold is None else or_op(fold, negated, params)
    return ClauseOutput(x_prime=fold, events=events if return_events else [])


def correct_events(
    j_matrix: Tensor,
    candidates: Tensor,
    labels: np.ndarray,
    params: ReasoningParams,
) -> Tensor:
    """Event vector of each row's gold candidate (training only)."""
    j_pre = nx.matmul(j_matrix, nx.transpose(params.enc_w1_j)) + params.enc_b1
    v_pre = nx.take_rows(candidate_projection(candidates, params), labels)
    hidden = nx.tanh(j_pre + v_pre)
    return nx.matmul(hidden, nx.transpose(params.enc_w2)) + params.enc_b2


def project_view_vectors(matrix: Tensor, params: ReasoningParams, side: str) -> Tensor:
    """Encode bare view vectors into reasoning space by zero-padding the other
    event slot: side "j" encodes concat(x, 0), side "v" encodes concat(0, x)."""
    w = params.enc_w1_j if side == "j" else params.enc_w1_v
    hidden = nx.tanh(nx.matmul(matrix, nx.transpose(w)) + params.enc_b1)
    return nx.matmul(hidden, nx.transpose(params.enc_w2)) + params.enc_b2


def clause_truth_loss(x_prime: Tensor, e_correct: Tensor, params: ReasoningParams) -> Tensor:
    """1 - cosine(OR(clause, gold event), TRUE), averaged over the batch."""
    disjunction = or_op(x_prime, e_correct, params)
    cos = row_cosine(disjunction, params.true_anchor)
    return nx.tmean(Tensor(1.0) - cos)


class RegularizerValues(NamedTuple):
    r1: Tensor
    r2: Tensor
    r3: Tensor
    r4: Tensor
    r5: Tensor
    r6: Tensor
    total: Tensor  # sum of r1..r6 divided by the batch size


def _sim(a: Tensor, b: Tensor) -> Tensor:
    # cosine mapped to [0, 1] so every regularizer term is non-negative
    return nx.mul(row_cosine(a, b) + Tensor(1.0), Tensor(0.5))


def logical_regularizers(batch: Tensor, params: ReasoningParams) -> RegularizerValues:
    """The six logical-law penalties over a (n, d_r) batch of vectors.

    Each r_q is a sum over rows of terms in [0, 1]; `total` is their sum
    averaged over the batch size. FALSE is NOT(TRUE), not an independent
    parameter.
    """
    n = batch.data.shape[0]
    if n == 0:
        zero = Tensor(0.0)
        return RegularizerValues(zero, zero, zero, zero, zero, zero, zero)
    one = Tensor(1.0)
    true_row = params.true_anchor
    false_row = not_op(true_row, params)
    not_x = not_op(batch, params)
    r1 = nx.tsum(_sim(batch, not_x))
    r2 = nx.tsum(one - _sim(batch, not_op(not_x, params)))
    r3 = nx.tsum(one - _sim(or_op(batch, false_row, params), batch))
    r4 = nx.tsum(one - _sim(or_op(batch, true_row, params), true_row))
    r5 = nx.tsum(one - _sim(or_op(batch, batch, params), batch))
    r6 = nx.tsum(one - _sim(or_op(batch, not_x, params), true_row))
    total = nx.mul(r1 + r2 + r3 + r4 + r5 + r6, Tensor(1.0 / n))
    return RegularizerValues(r1, r2, r3, r4, r5, r6, total)
