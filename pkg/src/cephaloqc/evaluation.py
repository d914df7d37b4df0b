"""Repeated-holdout evaluation protocol and metric reporting.

Each test draws a class-balanced split (2/3 train, 1/3 test per class,
the 40/40-train 20/20-test proportions), picks a reference control from
the training pool, sweeps the mixing weights by stratified k-fold
cross-validation on the training pool, trains the final model with the
winning weights, and scores the held-out pool.  Everything derives from
the master seed through a per-test seed sequence, so reports are
byte-identical across reruns.

Per-test random draws, in order: control permutation, case permutation,
reference choice, one fold-assignment permutation per class.
"""

from dataclasses import dataclass

import numpy as np

from .classifier import SweepConfig, predict, predict_baseline, sweep_weights
from .classifier import train as train_model
from .classifier import train_baseline
from .errors import InvalidCohortError, InvalidInputError, StratificationError
from .features import fold_argument
from .measurements import conventional_measurements
from .pipeline import RegistrationCache, extract_cohort_features
from .records import CONTROL, OSA
from .registration import RegParams
from .stats import apply_selection, bagged_p_values, select_top_k

__all__ = [
    "TestRecord",
    "EvalReport",
    "confusion_metrics",
    "run_protocol",
    "run_baseline_protocol",
]


@dataclass
class TestRecord:
    """Outcome of one train/test split."""

    index: int
    reference_id: str
    mix_alpha: float  # nan for the baseline model
    mix_beta: float
    k: int
    tp: int
    fn: int
    tn: int
    fp: int
    sensitivity: float
    specificity: float
    accuracy: float


@dataclass
class EvalReport:
    """All per-test records plus aggregate statistics."""

    model: str  # "qc" or "baseline"
    master_seed: int
    n_tests: int
    k: int
    rho: float
    window: int
    folds: int
    n_control: int
    n_osa: int
    image_width: int
    image_height: int
    tests: list
    mean_sensitivity: float
    std_sensitivity: float
    mean_specificity: float
    std_specificity: float
    mean_accuracy: float
    std_accuracy: float

    def to_text(self) -> str:
        lines = [
            f"model: {self.model}",
            f"master_seed: {self.master_seed}",
            f"tests: {self.n_tests}",
            f"k: {self.k}",
            f"rho: {self.rho:.6f}",
            f"window: {self.window}",
            f"folds: {self.folds}",
            f"subjects: {self.n_control} control / {self.n_osa} osa",
            f"image: {self.image_width}x{self.image_height}",
            "",
        ]
        for t in self.tests:
            if np.isnan(t.mix_alpha):
                weights = "-"
            else:
                weights = f"({t.mix_alpha:.6f},{t.mix_beta:.6f})"
            lines.append(
                f"test {t.index:03d}: ref={t.reference_id} weights={weights} "
                f"K={t.k} TP={t.tp} FN={t.fn} TN={t.tn} FP={t.fp} "
                f"sens={t.sensitivity:.6f} spec={t.specificity:.6f} "
                f"acc={t.accuracy:.6f}"
            )
        lines += [
            "",
            f"mean sensitivity: {self.mean_sensitivity:.6f} "
            f"(std {self.std_sensitivity:.6f})",
            f"mean specificity: {self.mean_specificity:.6f} "
            f"(std {self.std_specificity:.6f})",
            f"mean accuracy: {self.mean_accuracy:.6f} "
            f"(std {self.std_accuracy:.6f})",
            "",
        ]
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = [
            "test,reference,mix_alpha,mix_beta,k,tp,fn,tn,fp,"
            "sensitivity,specificity,accuracy"
        ]
        for t in self.tests:
            alpha = "" if np.isnan(t.mix_alpha) else f"{t.mix_alpha:.9f}"
            beta = "" if np.isnan(t.mix_beta) else f"{t.mix_beta:.9f}"
            rows.append(
                f"{t.index},{t.reference_id},{alpha},{beta},{t.k},"
                f"{t.tp},{t.fn},{t.tn},{t.fp},"
                f"{t.sensitivity:.9f},{t.specificity:.9f},{t.accuracy:.9f}"
            )
        return "\n".join(rows) + "\n"


def confusion_metrics(predictions, labels):
    """(sensitivity, specificity, accuracy) with the case class positive."""
    preds = np.asarray(predictions)
    labs = np.asarray(labels)
    if preds.shape != labs.shape or preds.size == 0:
        raise InvalidInputError("predictions and labels must align and be nonempty")
    tp = int(np.sum((preds == OSA) & (labs == OSA)))
    fn = int(np.sum((preds == CONTROL) & (labs == OSA)))
    tn = int(np.sum((preds == CONTROL) & (labs == CONTROL)))
    fp = int(np.sum((preds == OSA) & (labs == CONTROL)))
    sens = tp / (tp + fn) if tp + fn else 0.0
    spec = tn / (tn + fp) if tn + fp else 0.0
    return sens, spec, (tp + tn) / preds.size


def _class_indices(db):
    control = [i for i, rec in enumerate(db) if rec.label == CONTROL]
    osa = [i for i, rec in enumerate(db) if rec.label == OSA]
    return np.array(control, dtype=np.int64), np.array(osa, dtype=np.int64)


def _split_for_test(master_seed, test_index, db, folds):
    """Deterministic split, reference, and fold assignment for one test."""
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, test_index)))
    control, osa = _class_indices(db)
    perm_c = control[rng.permutation(control.size)]
    perm_o = osa[rng.permutation(osa.size)]
    ntc = (2 * control.size) // 3
    nto = (2 * osa.size) // 3
    train = np.concatenate([perm_c[:ntc], perm_o[:nto]])
    test = np.concatenate([perm_c[ntc:], perm_o[nto:]])
    ref = int(rng.choice(perm_c[:ntc]))
    fold_of = np.empty(train.size, dtype=np.int64)
    for members in (np.arange(ntc), ntc + np.arange(nto)):
        dealt = members[rng.permutation(members.size)]
        fold_of[dealt] = np.arange(dealt.size) % folds
    return train, test, ref, fold_of


def _validate_cohort(db, folds):
    control, osa = _class_indices(db)
    if control.size + osa.size < len(db):
        db = [rec for rec in db if rec.label in (CONTROL, OSA)]
    if control.size < 3 or osa.size < 3:
        raise InvalidCohortError("need at least 3 labelled subjects per class")
    ntc = (2 * control.size) // 3
    nto = (2 * osa.size) // 3
    if min(ntc, nto) < folds:
        raise StratificationError(
            f"{folds}-fold CV needs at least {folds} training subjects per "
            f"class, got {min(ntc, nto)}"
        )
    if min(ntc, nto) - max(1, min(ntc, nto) // folds) < 3:
        raise InvalidCohortError("training folds too small for bagged p-values")
    return db


def _cv_accuracy(deform, dists, labels, train_idx, fold_of, folds, k):
    """Fraction of training subjects classified correctly across folds."""
    correct = 0
    for f in range(folds):
        va = train_idx[fold_of == f]
        tr = train_idx[fold_of != f]
        if va.size == 0:
            continue
        if np.unique(labels[tr]).size < 2 or np.unique(labels[va]).size < 1:
            raise StratificationError(f"fold {f} lost a class")
        selection = select_top_k(bagged_p_values(deform[tr], labels[tr]), k)
        maxima = dists[tr].max(axis=0)
        feats_tr = np.hstack(
            [deform[tr][:, selection.selected_indices], dists[tr] / maxima]
        )
        model = train_model(feats_tr, labels[tr])
        feats_va = np.hstack(
            [deform[va][:, selection.selected_indices], dists[va] / maxima]
        )
        preds = np.array([predict(model, row) for row in feats_va])
        correct += int(np.sum(preds == labels[va]))
    return correct / train_idx.size


def run_protocol(
    db,
    n_tests: int,
    k: int,
    rho: float,
    seed: int,
    window: int = 9,
    folds: int = 10,
    reg_params: RegParams = None,
    cache: RegistrationCache = None,
) -> EvalReport:
    """Repeated random holdout evaluation of the deformation pipeline."""
    if n_tests < 1:
        raise InvalidInputError("n_tests must be at least 1")
    db = _validate_cohort(db, folds)
    if reg_params is None:
        reg_params = RegParams()
    if cache is None:
        cache = RegistrationCache()
    sweep = SweepConfig(rho=rho, folds=folds)
    labels_all = np.array([rec.label for rec in db])

    tests = []
    for t in range(n_tests):
        train_idx, test_idx, ref_idx, fold_of = _split_for_test(seed, t, db, folds)
        feats = extract_cohort_features(
            db, db[ref_idx], w=window, params=reg_params, cache=cache
        )
        mag = np.abs(feats.windows)
        arg = fold_argument(feats.windows) / np.pi
        dists = feats.raw_distances

        def score(weights):
            deform = weights.mix_alpha * mag + weights.mix_beta * arg
            return _cv_accuracy(
                deform, dists, labels_all, train_idx, fold_of, folds, k
            )

        best, _cv = sweep_weights(sweep, score)

        deform = best.mix_alpha * mag + best.mix_beta * arg
        selection = select_top_k(
            bagged_p_values(deform[train_idx], labels_all[train_idx]), k
        )
        maxima = dists[train_idx].max(axis=0)
        feats_tr = np.hstack(
            [deform[train_idx][:, selection.selected_indices],
             dists[train_idx] / maxima]
        )
        model = train_model(
            feats_tr,
            labels_all[train_idx],
            selection=selection,
            weights=best,
            dist_norm_maxima=maxima,
            window=window,
        )
        feats_te = np.hstack(
            [deform[test_idx][:, selection.selected_indices],
             dists[test_idx] / maxima]
        )
        preds = np.array([predict(model, row) for row in feats_te])
        tests.append(
            _test_record(t, db[ref_idx].id, best, k, preds, labels_all[test_idx])
        )
    return _aggregate("qc", db, tests, seed, n_tests, k, rho, window, folds)


def run_baseline_protocol(
    db,
    n_tests: int,
    seed: int,
    folds: int = 10,
    lam: float = 1e-2,
    iterations: int = 100_000,
) -> EvalReport:
    """Same splits as ``run_protocol``, conventional-measurement SVM model."""
    if n_tests < 1:
        raise InvalidInputError("n_tests must be at least 1")
    db = _validate_cohort(db, folds)
    labels_all = np.array([rec.label for rec in db])
    table = np.array(
        [conventional_measurements(rec.landmarks).values for rec in db]
    )
    tests = []
    for t in range(n_tests):
        train_idx, test_idx, ref_idx, _fold_of = _split_for_test(seed, t, db, folds)
        model = train_baseline(
            table[train_idx], labels_all[train_idx], lam=lam, iterations=iterations
        )
        preds = predict_baseline(model, table[test_idx])
        tests.append(
            _test_record(
                t, db[ref_idx].id, None, table.shape[1], preds,
                labels_all[test_idx],
            )
        )
    return _aggregate("baseline", db, tests, seed, n_tests, table.shape[1],
                      0.0, 0, folds)


def _test_record(index, ref_id, weights, k, preds, labels):
    sens, spec, acc = confusion_metrics(preds, labels)
    tp = int(np.sum((preds == OSA) & (labels == OSA)))
    fn = int(np.sum((preds == CONTROL) & (labels == OSA)))
    tn = int(np.sum((preds == CONTROL) & (labels == CONTROL)))
    fp = int(np.sum((preds == OSA) & (labels == CONTROL)))
    return TestRecord(
        index=index,
        reference_id=ref_id,
        mix_alpha=float("nan") if weights is None else weights.mix_alpha,
        mix_beta=float("nan") if weights is None else weights.mix_beta,
        k=k,
        tp=tp,
        fn=fn,
        tn=tn,
        fp=fp,
        sensitivity=sens,
        specificity=spec,
        accuracy=acc,
    )


def _aggregate(model, db, tests, seed, n_tests, k, rho, window, folds):
    control, osa = _class_indices(db)
    sens = np.array([t.sensitivity for t in tests])
    spec = np.array([t.specificity for t in tests])
    acc = np.array([t.accuracy for t in tests])
    rec = db[0]
    return EvalReport(
        model=model,
        master_seed=seed,
        n_tests=n_tests,
        k=k,
        rho=rho,
        window=window,
        folds=folds,
        n_control=int(control.size),
        n_osa=int(osa.size),
        image_width=rec.image.width,
        image_height=rec.image.height,
        tests=tests,
        mean_sensitivity=float(sens.mean()),
        std_sensitivity=float(sens.std()),
        mean_specificity=float(spec.mean()),
        std_specificity=float(spec.std()),
        mean_accuracy=float(acc.mean()),
        std_accuracy=float(acc.std()),
    )
