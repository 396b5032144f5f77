import json
import logging

import numpy as np
import pytest

from titlemap import numerics as nx
from titlemap.datagen import SynthConfig, gen_resumes, gen_taxonomy
from titlemap.errors import ConfigError, DataError
from titlemap.graph import extract_parent_child_pairs
from titlemap.model import (
    FeaturePipeline,
    MapperModel,
    TrainConfig,
    _TrainContext,
    forward_probabilities,
    init_model,
    load_model,
    loss_on_batch,
    map_topk,
    save_model,
    train,
)
from titlemap.numerics import Tensor
from titlemap.poincare import PoincareConfig, train_poincare
from titlemap.semantic import HashedNgramProvider
from titlemap.syntactic import Taxonomy


def tiny_world(groups=6, synonyms=3, persons=60, seed=0, d_h=6, d_b=16):
    synth = SynthConfig(groups=groups, synonyms=synonyms, persons=persons,
                        jobs_per_person=4, seed=seed)
    taxonomy, labeled = gen_taxonomy(synth)
    records = gen_resumes(synth, taxonomy, labeled)
    pairs = extract_parent_child_pairs(records)
    table = train_poincare(pairs, m=d_h, config=PoincareConfig(epochs=8, seed=seed))
    pipeline = FeaturePipeline(table, HashedNgramProvider(dimension=d_b, seed=seed), taxonomy)
    examples = labeled + [(t, t) for t in taxonomy.titles]
    return taxonomy, pipeline, examples


def small_config(**kw):
    base = dict(d_h=6, d_b=16, d_r=8, batch_size=32, max_epochs=6, patience=3,
                lr=5e-3, seed=0, fusion_lr_multiplier=5.0)
    base.update(kw)
    return TrainConfig(**base)


def test_split_fractions_must_sum_to_one():
    with pytest.raises(ConfigError):
        TrainConfig(split=(0.5, 0.2, 0.2))


def test_unknown_variant_rejected():
    with pytest.raises(ConfigError):
        TrainConfig(variant="bert_only")


def test_forward_is_a_probability_distribution():
    taxonomy, pipeline, examples = tiny_world()
    model = init_model(taxonomy, small_config(), d_h=6, d_b=16)
    probs = forward_probabilities(model, pipeline, [t for t, _ in examples[:7]])
    assert probs.shape == (7, len(taxonomy))
    assert np.all(probs > 0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_zero_fusion_weights_give_uniform_distribution():
    taxonomy, pipeline, examples = tiny_world()
    model = init_model(taxonomy, small_config(), d_h=6, d_b=16)
    model.fusion_w.data[...] = 0.0
    model.fusion_b.data[...] = 0.0
    probs = forward_probabilities(model, pipeline, [examples[0][0]])
    assert np.allclose(probs, 1.0 / len(taxonomy), atol=1e-12)


def test_uniform_prediction_cross_entropy_is_log_classes():
    taxonomy = Taxonomy(titles=["aa bb", "cc dd", "ee ff", "gg hh"])
    config = small_config(variant="semantic_only")
    model = init_model(taxonomy, config, d_h=6, d_b=16)
    model.fusion_w.data[...] = 0.0
    model.fusion_b.data[...] = 0.0
    rng = np.random.default_rng(0)
    ctx = _TrainContext(labels=None, fold_rng=rng, reg_rng=rng)
    x_b = rng.uniform(-1, 1, (5, 16))
    loss, _ = loss_on_batch(
        model, np.zeros((5, 6)), x_b, np.zeros((5, 4)), np.array([0, 1, 2, 3, 0]),
        Tensor(np.zeros((4, 16))), Tensor(np.zeros((4, 4))), ctx,
    )
    assert loss.item() == pytest.approx(np.log(4), abs=1e-12)


def test_perfect_prediction_drives_loss_to_zero():
    taxonomy = Taxonomy(titles=["aa bb", "cc dd", "ee ff", "gg hh"])
    config = small_config(variant="semantic_only", d_b=8)
    model = init_model(taxonomy, config, d_h=6, d_b=8)
    # craft one-hot features and a huge aligned fusion weight
    model.fusion_w.data[...] = 0.0
    model.fusion_w.data[:, :4] = 60.0 * np.eye(4)
    model.fusion_b.data[...] = 0.0
    x_b = np.zeros((4, 8))
    x_b[np.arange(4), np.arange(4)] = 1.0
    rng = np.random.default_rng(0)
    ctx = _TrainContext(labels=None, fold_rng=rng, reg_rng=rng)
    loss, _ = loss_on_batch(
        model, np.zeros((4, 6)), x_b, np.zeros((4, 4)), np.arange(4),
        Tensor(np.zeros((4, 8))), Tensor(np.zeros((4, 4))), ctx,
    )
    assert loss.item() < 1e-9


def test_label_outside_taxonomy_is_data_error():
    taxonomy, pipeline, examples = tiny_world()
    model = init_model(taxonomy, small_config(), d_h=6, d_b=16)
    rng = np.random.default_rng(0)
    ctx = _TrainContext(labels=None, fold_rng=rng, reg_rng=rng)
    x_h, x_b, x_s = pipeline.title_views([examples[0][0]])
    with pytest.raises(DataError):
        loss_on_batch(model, x_h, x_b, x_s, np.array([len(taxonomy)]),
                      Tensor(pipeline.standard_semantic()),
                      Tensor(pipeline.standard_syntactic()), ctx)


def test_training_loss_decreases_on_separable_data():
    taxonomy, pipeline, examples = tiny_world()
    losses = []
    train(examples, pipeline, small_config(max_epochs=5, patience=5),
          on_epoch=lambda e, l, h: losses.append(l))
    assert len(losses) == 5
    assert losses[-1] < losses[0]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_training_is_reproducible_bit_for_bit(tmp_path):
    taxonomy, pipeline, examples = tiny_world()
    config = small_config(max_epochs=3, patience=3)
    paths = []
    for run in range(2):
        result = train(examples, pipeline, config)
        path = tmp_path / f"model{run}.json"
        save_model(result.model, path)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]


def test_patience_zero_stops_one_epoch_past_first_plateau():
    taxonomy, pipeline, examples = tiny_world()
    # lr 0 never improves after the first epoch's metric is recorded
    config = small_config(lr=0.0, max_epochs=50, patience=0)
    result = train(examples, pipeline, config)
    assert result.best_epoch == 0
    assert len(result.history) == 2


def test_empty_split_is_config_error():
    taxonomy, pipeline, examples = tiny_world()
    with pytest.raises(ConfigError):
        train(examples[:3], pipeline, small_config(split=(0.34, 0.33, 0.33)))


def test_dimension_mismatch_with_pipeline_is_config_error():
    taxonomy, pipeline, examples = tiny_world()
    with pytest.raises(ConfigError):
        train(examples, pipeline, small_config(d_h=12))


def test_checkpoint_round_trip_is_bit_identical(tmp_path):
    taxonomy, pipeline, examples = tiny_world()
    result = train(examples, pipeline, small_config(max_epochs=2, patience=2))
    probe_titles = [t for t, _ in examples[:9]]
    before = forward_probabilities(result.model, pipeline, probe_titles)
    path = tmp_path / "model.json"
    save_model(result.model, path)
    loaded = load_model(path)
    after = forward_probabilities(loaded, pipeline, probe_titles)
    assert np.array_equal(before, after)
    assert loaded.taxonomy.titles == taxonomy.titles


def test_tampered_taxonomy_hash_is_rejected(tmp_path):
    taxonomy, pipeline, examples = tiny_world()
    result = train(examples, pipeline, small_config(max_epochs=2, patience=2))
    path = tmp_path / "model.json"
    save_model(result.model, path)
    doc = json.loads(path.read_text())
    doc["taxonomy_titles"][0] = "tampered title"
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError):
        load_model(path)


def test_map_topk_full_permutation_and_determinism():
    taxonomy, pipeline, examples = tiny_world()
    model = init_model(taxonomy, small_config(), d_h=6, d_b=16)
    ranked = map_topk(examples[0][0], model, pipeline, k=len(taxonomy))
    titles = [t for t, _ in ranked.entries]
    assert sorted(titles) == sorted(taxonomy.titles)
    probs = [p for _, p in ranked.entries]
    assert probs == sorted(probs, reverse=True)
    again = map_topk(examples[0][0], model, pipeline, k=len(taxonomy))
    assert again.entries == ranked.entries


def test_map_topk_clamps_large_k(caplog):
    taxonomy, pipeline, examples = tiny_world()
    model = init_model(taxonomy, small_config(), d_h=6, d_b=16)
    with caplog.at_level(logging.WARNING):
        ranked = map_topk(examples[0][0], model, pipeline, k=10 * len(taxonomy))
    assert len(ranked.entries) == len(taxonomy)
    assert any("clamped" in rec.message for rec in caplog.records)


def test_out_of_graph_title_gets_zero_topological_view():
    taxonomy, pipeline, examples = tiny_world()
    x_h, _, _ = pipeline.title_views(["definitely unseen title xyz"])
    assert np.array_equal(x_h, np.zeros((1, 6)))


def test_variant_artifacts_round_trip(tmp_path):
    taxonomy, pipeline, examples = tiny_world()
    for variant in ("concat", "semantic_only"):
        result = train(examples, pipeline, small_config(max_epochs=2, patience=2, variant=variant))
        path = tmp_path / f"{variant}.json"
        save_model(result.model, path)
        loaded = load_model(path)
        probe = [t for t, _ in examples[:4]]
        assert np.array_equal(
            forward_probabilities(result.model, pipeline, probe),
            forward_probabilities(loaded, pipeline, probe),
        )
