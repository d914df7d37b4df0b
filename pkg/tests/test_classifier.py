import math

import numpy as np
import pytest

from cephaloqc.classifier import (
    SweepConfig,
    optimal_threshold,
    predict,
    predict_baseline,
    sweep_candidates,
    sweep_weights,
    train,
    train_baseline,
)
from cephaloqc.errors import InvalidCohortError, InvalidInputError
from cephaloqc.records import CONTROL, OSA


def threshold_oracle(distances, labels):
    """Exhaustive scan over midpoints and beyond-range sentinels."""
    d = np.asarray(distances, float)
    labs = np.asarray(labels)
    ds = np.unique(d)
    cands = [ds[0] - 1.0] + list((ds[:-1] + ds[1:]) / 2.0) + [ds[-1] + 1.0]
    best = -1
    for t in cands:
        correct = np.sum((labs == CONTROL) & (d < t)) + np.sum((labs == OSA) & (d > t))
        best = max(best, int(correct))
    return best


def test_simple_split():
    d = np.array([1.0, 2.0, 3.0, 4.0])
    labs = np.array([CONTROL, CONTROL, OSA, OSA])
    d_opt, correct = optimal_threshold(d, labs)
    assert d_opt == pytest.approx(2.5)
    assert correct == 4


def test_interleaved_split():
    d = np.array([1.0, 2.0, 3.0, 4.0])
    labs = np.array([CONTROL, OSA, CONTROL, OSA])
    d_opt, correct = optimal_threshold(d, labs)
    assert correct == 3
    assert correct == threshold_oracle(d, labs)


def test_threshold_matches_oracle_on_random_cohorts():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(4, 51))
        d = np.round(rng.uniform(0, 5, n), 2)
        labs = np.where(rng.random(n) < 0.5, CONTROL, OSA)
        if len(set(labs)) < 2:
            continue
        d_opt, correct = optimal_threshold(d, labs)
        assert correct == threshold_oracle(d, labs)
        # the returned threshold really achieves the count
        achieved = np.sum((labs == CONTROL) & (d < d_opt)) + np.sum(
            (labs == OSA) & (d > d_opt)
        )
        assert achieved == correct
        assert d_opt >= 0.0


def test_train_and_predict():
    feats = np.array([[0.0, 0], [0.2, 0], [3.0, 0], [4.0, 0]])
    labs = np.array([CONTROL, CONTROL, OSA, OSA])
    model = train(feats, labs)
    assert np.allclose(model.c_mean, [0.1, 0.0])
    assert predict(model, model.c_mean) == CONTROL
    assert predict(model, [4.0, 0.0]) == OSA
    # boundary convention: d_new == d_opt stays control
    boundary = model.c_mean + np.array([model.d_opt, 0.0])
    assert predict(model, boundary) == CONTROL
    with pytest.raises(InvalidInputError):
        predict(model, [1.0, 2.0, 3.0])


def test_training_accuracy_maximal_by_construction():
    rng = np.random.default_rng(1)
    feats = rng.normal(size=(30, 5))
    labs = np.where(rng.random(30) < 0.5, CONTROL, OSA)
    labs[:3] = CONTROL
    labs[-3:] = OSA
    model = train(feats, labs)
    d = np.linalg.norm(feats - model.c_mean, axis=1)
    best = threshold_oracle(d, labs)
    achieved = np.sum((labs == CONTROL) & (d < model.d_opt)) + np.sum(
        (labs == OSA) & (d > model.d_opt)
    )
    assert achieved == best


def test_subject_order_irrelevant():
    rng = np.random.default_rng(2)
    feats = rng.normal(size=(20, 4))
    labs = np.array([CONTROL] * 10 + [OSA] * 10)
    model_a = train(feats, labs)
    perm = rng.permutation(20)
    model_b = train(feats[perm], labs[perm])
    assert np.allclose(model_a.c_mean, model_b.c_mean)
    assert model_a.d_opt == pytest.approx(model_b.d_opt)


def test_control_only_rejected():
    feats = np.zeros((4, 2))
    with pytest.raises(InvalidCohortError):
        train(feats, np.array([CONTROL] * 4))


def test_sweep_candidates_rho_quarter():
    cands = sweep_candidates(0.25)
    assert len(cands) == 3
    assert cands[0].mix_alpha == pytest.approx(1.0)
    assert cands[0].mix_beta == pytest.approx(0.0)
    assert cands[1].mix_alpha == pytest.approx(math.sqrt(0.5))
    assert cands[1].mix_beta == pytest.approx(math.sqrt(0.5))
    assert cands[2].mix_alpha == pytest.approx(0.0, abs=1e-12)
    assert cands[2].mix_beta == pytest.approx(1.0)


def test_sweep_candidates_rho_half_and_unit_circle():
    cands = sweep_candidates(0.5)
    assert len(cands) == 2
    for rho in (0.5, 0.25, 0.1, 0.05):
        for cand in sweep_candidates(rho):
            assert cand.mix_alpha**2 + cand.mix_beta**2 == pytest.approx(1.0, abs=1e-12)


def test_sweep_tie_breaks_toward_smaller_k():
    config = SweepConfig(rho=0.25, folds=2)
    best, acc = sweep_weights(config, lambda w: 0.75)
    assert acc == 0.75
    assert best.mix_alpha == pytest.approx(1.0)  # k = 0 wins ties


def test_sweep_picks_argmax():
    config = SweepConfig(rho=0.25, folds=2)
    scores = {0: 0.5, 1: 0.9, 2: 0.7}
    calls = []

    def evaluate(w):
        calls.append(w)
        return scores[len(calls) - 1]

    best, acc = sweep_weights(config, evaluate)
    assert acc == 0.9
    assert best.mix_alpha == pytest.approx(math.sqrt(0.5))


def test_baseline_separable_blobs():
    rng = np.random.default_rng(3)
    a = rng.normal(scale=0.3, size=(20, 2)) + np.array([2.0, 2.0])
    b = rng.normal(scale=0.3, size=(20, 2)) - np.array([2.0, 2.0])
    feats = np.vstack([a, b])
    labs = np.array([OSA] * 20 + [CONTROL] * 20)
    model = train_baseline(feats, labs, iterations=5000)
    preds = predict_baseline(model, feats)
    assert np.all(preds == labs)


def test_baseline_reflection_flips_prediction():
    rng = np.random.default_rng(4)
    a = rng.normal(scale=0.2, size=(15, 3)) + 1.5
    b = rng.normal(scale=0.2, size=(15, 3)) - 1.5
    model = train_baseline(
        np.vstack([a, b]), np.array([OSA] * 15 + [CONTROL] * 15), iterations=5000
    )
    # reflect a confidently classified point through the decision plane
    x = (np.array([1.5, 1.5, 1.5]) - model.feature_mean) / model.feature_std
    score = x @ model.coef + model.intercept
    normal = model.coef / np.linalg.norm(model.coef)
    mirrored = x - 2 * (score / np.linalg.norm(model.coef)) * normal
    raw = mirrored * model.feature_std + model.feature_mean
    flipped_score = mirrored @ model.coef + model.intercept
    assert np.sign(flipped_score) == -np.sign(score)
    assert predict_baseline(model, raw) != predict_baseline(
        model, np.array([1.5, 1.5, 1.5])
    )


def test_baseline_single_class_rejected():
    with pytest.raises(InvalidCohortError):
        train_baseline(np.zeros((5, 2)), np.array([OSA] * 5), iterations=10)


def test_baseline_deterministic():
    rng = np.random.default_rng(5)
    feats = rng.normal(size=(12, 4))
    labs = np.array([CONTROL] * 6 + [OSA] * 6)
    m1 = train_baseline(feats, labs, iterations=2000)
    m2 = train_baseline(feats, labs, iterations=2000)
    assert np.array_equal(m1.coef, m2.coef)
    assert m1.intercept == m2.intercept
