"""The full title mapper: views -> co-attention + reasoning -> fused classifier.

Training fuses the co-attended views with the two clause representations,
projects onto the taxonomy (relu then softmax), and minimizes cross-entropy
plus the six logical regularizers plus a small clause-truth term. The
hyperbolic and semantic view producers are frozen; only co-attention,
reasoning and fusion weights learn. Everything is deterministic for a fixed
config: data split, batch order, fold shuffles and initialization all derive
from the config seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import coattention as ca
from . import numerics as nx
from . import reasoning as rs
from .errors import ConfigError, DataError, DegenerateInputError, FormatError
from .numerics import Tensor
from .poincare import HyperbolicEmbeddingTable
from .semantic import SemanticProvider
from .syntactic import Taxonomy, syntactic_matrix
from .graph import canonicalize_title

logger = logging.getLogger(__name__)

VARIANTS = ("full", "concat", "semantic_only")

MODEL_FORMAT = "titlemap-model"
MODEL_VERSION = 1


@dataclass
class TrainConfig:
    d_h: int = 128
    d_b: int = 128
    d_r: int = 64
    lr: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 20
    split: tuple = (0.64, 0.16, 0.20)
    seed: int = 0
    logic_weight: float = 1.0
    clause_weight: float = 0.1
    variant: str = "full"
    # the co-attended features carry a 1/d softmax factor, so the fusion
    # layer needs far larger weights than the rest of the model; a separate
    # Adam group with a scaled lr closes that gap at desk scale
    fusion_lr_multiplier: float = 1.0
    # decoupled L2 shrink on the fusion weight matrix only; 0 disables
    fusion_weight_decay: float = 0.0

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions {self.split} must sum to 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown model variant {self.variant!r}")
        if min(self.d_h, self.d_b, self.d_r) < 1:
            raise ConfigError("dimensions must be positive")
        if self.fusion_lr_multiplier <= 0:
            raise ConfigError("fusion_lr_multiplier must be positive")


@dataclass
class RankedMapping:
    """Top-k standard titles for one input, probabilities descending."""

    title: str
    entries: list  # (standard title, probability), deterministic tie-break


@dataclass
class MapperModel:
    taxonomy: Taxonomy
    config: TrainConfig
    d_h: int
    d_b: int
    d_s: int
    coatt: Optional[ca.CoAttentionParams]
    reason_b: Optional[rs.ReasoningParams]
    reason_s: Optional[rs.ReasoningParams]
    fusion_w: Tensor  # |Y| x fused_dim
    fusion_b: Tensor  # 1 x |Y|

    @property
    def taxonomy_hash(self) -> str:
        return self.taxonomy.version_id

    def trainable_tensors(self) -> list[Tensor]:
        tensors = [self.fusion_w, self.fusion_b]
        if self.coatt is not None:
            tensors.extend(self.coatt.tensors())
        if self.reason_b is not None:
            tensors.extend(self.reason_b.tensors())
        if self.reason_s is not None:
            tensors.extend(self.reason_s.tensors())
        return tensors


def fused_width(variant: str, d_h: int, d_b: int, d_s: int, d_r: int) -> int:
    if variant == "full":
        return d_h + d_b + d_s + 2 * d_r
    if variant == "concat":
        return d_h + d_b + d_s
    return d_b


def init_model(taxonomy: Taxonomy, config: TrainConfig, d_h: int, d_b: int) -> MapperModel:
    d_s = len(taxonomy)
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    rng = np.random.default_rng(seeds[0])
    width = fused_width(config.variant, d_h, d_b, d_s, config.d_r)
    # relu-softmax heads die when early logits are chaotic: collapsing every
    # logit below zero yields the uniform distribution, which beats a noisy
    # start on cross-entropy and is a gradient-free trap. Near-zero weights
    # plus a positive bias start the head uniform AND fully relu-active.
    fusion_w = Tensor(rng.uniform(-0.01, 0.01, size=(d_s, width)), requires_grad=True)
    fusion_b = Tensor(np.ones((1, d_s)), requires_grad=True)
    coatt = reason_b = reason_s = None
    if config.variant == "full":
        coatt = ca.CoAttentionParams.init(
            d_h, d_b, d_s, seed=seeds[1].generate_state(1)[0]
        )
        reason_b = rs.ReasoningParams.init(
            d_b, config.d_r, seed=seeds[2].generate_state(1)[0]
        )
        reason_s = rs.ReasoningParams.init(
            d_s, config.d_r, seed=seeds[3].generate_state(1)[0]
        )
    return MapperModel(
        taxonomy=taxonomy,
        config=config,
        d_h=d_h,
        d_b=d_b,
        d_s=d_s,
        coatt=coatt,
        reason_b=reason_b,
        reason_s=reason_s,
        fusion_w=fusion_w,
        fusion_b=fusion_b,
    )


# ---------------------------------------------------------------------------
# Feature assembly

class FeaturePipeline:
    """Builds the frozen (X_h, X_b, X_s) views; titles unseen in the transition
    graph receive the zero topological vector."""

    def __init__(
        self,
        hyperbolic: HyperbolicEmbeddingTable,
        semantic: SemanticProvider,
        taxonomy: Taxonomy,
    ):
        self.hyperbolic = hyperbolic
        self.semantic = semantic
        self.taxonomy = taxonomy
        self._standard_semantic: Optional[np.ndarray] = None
        self._standard_syntactic: Optional[np.ndarray] = None

    @property
    def d_h(self) -> int:
        return self.hyperbolic.dim

    @property
    def d_b(self) -> int:
        return self.semantic.dimension

    def title_views(self, titles: Sequence[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys = [canonicalize_title(t) for t in titles]
        x_h = np.stack(
            [
                self.hyperbolic.vectors.get(k, np.zeros(self.d_h))
                for k in keys
            ]
        ) if keys else np.zeros((0, self.d_h))
        x_b = np.stack([self.semantic.embed(k) for k in keys]) if keys else np.zeros((0, self.d_b))
        x_s = syntactic_matrix(keys, self.taxonomy)
        return x_h, x_b, x_s

    def standard_semantic(self) -> np.ndarray:
        if self._standard_semantic is None:
            self._standard_semantic = np.stack(
                [self.semantic.embed(t) for t in self.taxonomy.titles]
            )
        return self._standard_semantic

    def standard_syntactic(self) -> np.ndarray:
        if self._standard_syntactic is None:
            self._standard_syntactic = syntactic_matrix(self.taxonomy.titles, self.taxonomy)
        return self._standard_syntactic


@dataclass
class _TrainContext:
    labels: np.ndarray
    fold_rng: np.random.Generator
    reg_rng: np.random.Generator


def _forward(
    model: MapperModel,
    x_h: np.ndarray,
    x_b: np.ndarray,
    x_s: np.ndarray,
    v_b: Tensor,
    v_s: Tensor,
    ctx: Optional[_TrainContext] = None,
) -> dict:
    """Forward pass; with `ctx` also returns the training-only loss pieces."""
    th, tb, ts = Tensor(x_h), Tensor(x_b), Tensor(x_s)
    out: dict = {}
    training = ctx is not None
    if model.config.variant == "full":
        attended = ca.co_attend(th, tb, ts, model.coatt)
        n_cand = len(model.taxonomy)
        order_b = ctx.fold_rng.permutation(n_cand) if training else None
        order_s = ctx.fold_rng.permutation(n_cand) if training else None
        clause_b = rs.clause_representation(
            tb, v_b, model.reason_b, order_b, return_events=training
        )
        clause_s = rs.clause_representation(
            ts, v_s, model.reason_s, order_s, return_events=training
        )
        fused = nx.concat(
            [attended.x_hat_h, attended.x_hat_b, attended.x_hat_s,
             clause_b.x_prime, clause_s.x_prime],
            axis=1,
        )
        if training:
            out["clauses"] = {"b": clause_b, "s": clause_s}
            out["view_inputs"] = {"b": tb, "s": ts}
    elif model.config.variant == "concat":
        fused = nx.concat([th, tb, ts], axis=1)
    else:  # semantic_only
        fused = tb
    logits = nx.relu(nx.matmul(fused, nx.transpose(model.fusion_w)) + model.fusion_b)
    out["logits"] = logits
    return out


def _reg_batch(
    model: MapperModel,
    view: str,
    clause: rs.ClauseOutput,
    view_input: Tensor,
    standards: Tensor,
    ctx: _TrainContext,
) -> Tensor:
    """Vectors fed to the logical regularizers for one view: the events of a
    couple of sampled candidates plus encoder projections of the batch titles
    and of sampled standard titles."""
    params = model.reason_b if view == "b" else model.reason_s
    n_cand = standards.data.shape[0]
    batch_size = view_input.data.shape[0]
    pieces = []
    for k in ctx.reg_rng.choice(n_cand, size=min(2, n_cand), replace=False):
        pieces.append(clause.events[int(k)])
    pieces.append(rs.project_view_vectors(view_input, params, side="j"))
    sample = ctx.reg_rng.choice(n_cand, size=min(n_cand, batch_size), replace=False)
    pieces.append(
        rs.project_view_vectors(nx.take_rows(standards, np.sort(sample)), params, side="v")
    )
    return nx.concat(pieces, axis=0)


def loss_on_batch(
    model: MapperModel,
    x_h: np.ndarray,
    x_b: np.ndarray,
    x_s: np.ndarray,
    labels: np.ndarray,
    v_b: Tensor,
    v_s: Tensor,
    ctx: _TrainContext,
) -> tuple[Tensor, dict]:
    if labels.min() < 0 or labels.max() >= len(model.taxonomy):
        raise DataError("label index outside the taxonomy range")
    parts = _forward(model, x_h, x_b, x_s, v_b, v_s, ctx)
    log_probs = nx.log_softmax(parts["logits"], axis=-1)
    ce = nx.neg(nx.tmean(nx.gather_rows(log_probs, labels)))
    total = ce
    detail = {"cross_entropy": ce}
    if model.config.variant == "full":
        cfg = model.config
        for view, standards in (("b", v_b), ("s", v_s)):
            params = model.reason_b if view == "b" else model.reason_s
            clause = parts["clauses"][view]
            e_gold = rs.correct_events(parts["view_inputs"][view], standards, labels, params)
            truth = rs.clause_truth_loss(clause.x_prime, e_gold, params)
            regs = rs.logical_regularizers(
                _reg_batch(model, view, clause, parts["view_inputs"][view], standards, ctx),
                params,
            )
            detail[f"truth_{view}"] = truth
            detail[f"regs_{view}"] = regs
            total = total + nx.mul(regs.total, Tensor(cfg.logic_weight)) + nx.mul(
                truth, Tensor(cfg.clause_weight)
            )
    return total, detail


def _probs_from_views(
    model: MapperModel,
    x_h: np.ndarray,
    x_b: np.ndarray,
    x_s: np.ndarray,
    v_b: Tensor,
    v_s: Tensor,
    chunk_size: int = 512,
) -> np.ndarray:
    rows = []
    for start in range(0, x_h.shape[0], chunk_size):
        sl = slice(start, start + chunk_size)
        parts = _forward(model, x_h[sl], x_b[sl], x_s[sl], v_b, v_s)
        rows.append(nx.softmax(parts["logits"], axis=-1).data)
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, len(model.taxonomy)))


def forward_probabilities(
    model: MapperModel,
    pipeline: FeaturePipeline,
    titles: Sequence[str],
    chunk_size: int = 512,
) -> np.ndarray:
    """Inference-mode class distribution per title, shape (n, |Y|)."""
    v_b = Tensor(pipeline.standard_semantic())
    v_s = Tensor(pipeline.standard_syntactic())
    x_h, x_b, x_s = pipeline.title_views(titles)
    return _probs_from_views(model, x_h, x_b, x_s, v_b, v_s, chunk_size)


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainResult:
    model: MapperModel
    history: list  # (epoch, train_loss, val_hit10)
    best_epoch: int
    split_indices: dict  # "train"/"val"/"test" -> np.ndarray of example rows
    metrics: dict


def _hit_at(probs: np.ndarray, labels: np.ndarray, n: int) -> float:
    if probs.shape[0] == 0:
        return 0.0
    top = np.argsort(-probs, kind="stable", axis=1)[:, :n]
    return float(np.mean([labels[i] in top[i] for i in range(len(labels))]))


def _snapshot(model: MapperModel) -> list[np.ndarray]:
    return [t.data.copy() for t in model.trainable_tensors()]


def _restore(model: MapperModel, snap: list[np.ndarray]) -> None:
    for t, data in zip(model.trainable_tensors(), snap):
        t.data[...] = data


def train(
    examples: Sequence[tuple[str, str]],
    pipeline: FeaturePipeline,
    config: TrainConfig,
    on_epoch: Optional[Callable[[int, float, float], None]] = None,
) -> TrainResult:
    """Split, fit with Adam, early-stop on validation hit@10, return the best
    checkpoint. `examples` are (raw title, standard title) pairs."""
    taxonomy = pipeline.taxonomy
    if pipeline.d_h != config.d_h:
        raise ConfigError(
            f"config d_h={config.d_h} but hyperbolic table has dim {pipeline.d_h}"
        )
    if pipeline.d_b != config.d_b:
        raise ConfigError(
            f"config d_b={config.d_b} but semantic provider has dim {pipeline.d_b}"
        )
    if not examples:
        raise DegenerateInputError("train: no labeled examples")
    labels_all = np.array([taxonomy.index(std) for _, std in examples], dtype=np.intp)
    titles_all = [raw for raw, _ in examples]

    seeds = np.random.SeedSequence(config.seed).spawn(4)
    split_rng = np.random.default_rng(seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    ctx = _TrainContext(
        labels=labels_all,
        fold_rng=np.random.default_rng(seeds[2]),
        reg_rng=np.random.default_rng(seeds[3]),
    )

    n = len(examples)
    perm = split_rng.permutation(n)
    n_train = int(n * config.split[0])
    n_val = int(n * config.split[1])
    idx_train = perm[:n_train]
    idx_val = perm[n_train : n_train + n_val]
    idx_test = perm[n_train + n_val :]
    if min(len(idx_train), len(idx_val), len(idx_test)) == 0:
        raise ConfigError(
            f"split {config.split} of {n} examples leaves an empty part "
            f"({len(idx_train)}/{len(idx_val)}/{len(idx_test)})"
        )
    if len(idx_train) < len(taxonomy):
        logger.warning(
            "training set (%d) smaller than taxonomy (%d); coverage will be partial",
            len(idx_train),
            len(taxonomy),
        )

    x_h, x_b, x_s = pipeline.title_views(titles_all)
    v_b = Tensor(pipeline.standard_semantic())
    v_s = Tensor(pipeline.standard_syntactic())

    model = init_model(taxonomy, config, d_h=pipeline.d_h, d_b=pipeline.d_b)
    # the bias stays in the base-lr group: a fast per-class bias random-walks
    # across zero early in training, which permanently relu-kills the class
    optimizers = [nx.Adam([model.fusion_w], lr=config.lr * config.fusion_lr_multiplier)]
    rest = [t for t in model.trainable_tensors() if t is not model.fusion_w]
    if rest:
        optimizers.append(nx.Adam(rest, lr=config.lr))

    best_metric = -1.0
    best_epoch = -1
    best_snap = _snapshot(model)
    history = []
    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(idx_train)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            rows = order[start : start + config.batch_size]
            with nx.GradTape() as tape:
                loss, _ = loss_on_batch(
                    model, x_h[rows], x_b[rows], x_s[rows], labels_all[rows], v_b, v_s, ctx
                )
            tape.backward(loss)
            for optimizer in optimizers:
                optimizer.step()
            if config.fusion_weight_decay > 0:
                model.fusion_w.data *= 1.0 - config.lr * config.fusion_lr_multiplier * config.fusion_weight_decay
            for params in (model.reason_b, model.reason_s):
                if params is not None:
                    params.renormalize_anchor()
            epoch_loss += loss.item()
            n_batches += 1
        val_probs = _probs_from_views(
            model, x_h[idx_val], x_b[idx_val], x_s[idx_val], v_b, v_s
        )
        val_hit10 = _hit_at(val_probs, labels_all[idx_val], 10)
        train_loss = epoch_loss / max(n_batches, 1)
        history.append((epoch, train_loss, val_hit10))
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_hit10)
        if val_hit10 > best_metric:
            best_metric = val_hit10
            best_epoch = epoch
            best_snap = _snapshot(model)
        elif epoch - best_epoch > config.patience:
            break
    _restore(model, best_snap)

    test_probs = _probs_from_views(
        model, x_h[idx_test], x_b[idx_test], x_s[idx_test], v_b, v_s
    )
    metrics = {
        "best_val_hit_at_10": best_metric,
        "test_hit_at_1": _hit_at(test_probs, labels_all[idx_test], 1),
        "test_hit_at_5": _hit_at(test_probs, labels_all[idx_test], 5),
        "test_hit_at_10": _hit_at(test_probs, labels_all[idx_test], 10),
    }
    return TrainResult(
        model=model,
        history=history,
        best_epoch=best_epoch,
        split_indices={"train": idx_train, "val": idx_val, "test": idx_test},
        metrics=metrics,
    )


def map_topk(
    title: str,
    model: MapperModel,
    pipeline: FeaturePipeline,
    k: int,
) -> RankedMapping:
    """Top-k standard titles by probability; ties break on lower taxonomy index."""
    n_classes = len(model.taxonomy)
    if k > n_classes:
        logger.warning("map_topk: k=%d clamped to taxonomy size %d", k, n_classes)
        k = n_classes
    probs = forward_probabilities(model, pipeline, [title])[0]
    order = np.lexsort((np.arange(n_classes), -probs))
    entries = [(model.taxonomy.titles[i], float(probs[i])) for i in order[:k]]
    return RankedMapping(title=title, entries=entries)


# ---------------------------------------------------------------------------
# Artifact serialization (single JSON file; floats survive round-trip exactly)

def _tensor_registry(model: MapperModel) -> dict[str, Tensor]:
    reg = {"fusion.w": model.fusion_w, "fusion.b": model.fusion_b}
    if model.coatt is not None:
        for name in (
            "w_aff_hb", "w_aff_hs", "w_aff_bs", "w_self_h", "w_self_b", "w_self_s",
            "w_cross_bh", "w_cross_sh", "w_cross_hb", "w_cross_sb", "w_cross_hs",
            "w_cross_bs",
        ):
            reg[f"coattention.{name}"] = getattr(model.coatt, name)
    for view, params in (("b", model.reason_b), ("s", model.reason_s)):
        if params is None:
            continue
        for name in (
            "enc_w1_j", "enc_w1_v", "enc_b1", "enc_w2", "enc_b2",
            "not_w", "not_b", "or_w_left", "or_w_right", "or_b", "true_anchor",
        ):
            reg[f"reasoning_{view}.{name}"] = getattr(params, name)
    return reg


def save_model(model: MapperModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.config.variant,
        "dims": {"d_h": model.d_h, "d_b": model.d_b, "d_s": model.d_s, "d_r": model.config.d_r},
        "taxonomy_hash": model.taxonomy_hash,
        "taxonomy_titles": model.taxonomy.titles,
        "taxonomy_groups": model.taxonomy.groups,
        "train_config": {**asdict(model.config), "split": list(model.config.split)},
        "tensors": {
            name: {"shape": list(t.data.shape), "data": t.data.reshape(-1).tolist()}
            for name, t in sorted(_tensor_registry(model).items())
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MapperModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: not valid JSON ({e.msg})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} artifact")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported artifact version {doc.get('version')}")
    cfg_doc = dict(doc["train_config"])
    cfg_doc["split"] = tuple(cfg_doc["split"])
    config = TrainConfig(**cfg_doc)
    taxonomy = Taxonomy(titles=doc["taxonomy_titles"], groups=doc["taxonomy_groups"])
    if taxonomy.version_id != doc["taxonomy_hash"]:
        raise DataError(f"{path}: taxonomy hash mismatch; artifact is inconsistent")
    model = init_model(
        taxonomy, config, d_h=doc["dims"]["d_h"], d_b=doc["dims"]["d_b"]
    )
    registry = _tensor_registry(model)
    stored = doc["tensors"]
    if set(stored) != set(registry):
        raise FormatError(f"{path}: tensor set does not match the {config.variant} variant")
    for name, t in registry.items():
        entry = stored[name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != t.data.shape:
            raise FormatError(
                f"{path}: tensor {name} has shape {arr.shape}, expected {t.data.shape}"
            )
        t.data[...] = arr
    return model
