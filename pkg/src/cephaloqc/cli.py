"""Command-line surface.

Every subcommand validates its inputs, writes deterministic output files,
and exits nonzero with a machine-readable ``error[<category>]: message``
line on stderr when anything is wrong.
"""

import math
import os
import sys
from functools import wraps

import click
import numpy as np

from . import kernels
from .beltrami import face_to_vertex
from .classifier import SweepConfig, predict, sweep_candidates
from .classifier import train as train_model
from .errors import CephaloQCError, InvalidInputError
from .evaluation import run_baseline_protocol, run_protocol
from .features import (
    DISTANCE_FEATURE_NAMES,
    MixWeights,
    assemble_feature_vector,
    deformation_index,
    distance_features,
    extract_windows,
    feature_names,
    fold_argument,
    normalize_distances,
)
from .io import (
    load_manifest,
    load_model,
    load_subject,
    read_feature_matrix,
    save_model,
    write_feature_matrix,
    write_landmarks,
    write_manifest,
    write_pgm,
    write_png,
)
from .phantom import PhantomSpec, generate_phantom_cohort
from .pipeline import RegistrationCache, extract_cohort_features, subject_windows
from .records import CONTROL
from .registration import RegParams, register
from .stats import apply_selection, bagged_p_values, select_top_k

__all__ = ["main"]


def _fail_on_package_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CephaloQCError as exc:
            click.echo(f"error[{exc.category}]: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _reg_params(iters, alpha, beta, sigma, step, mu_cap, tol):
    return RegParams(
        reg_alpha=alpha,
        reg_beta=beta,
        reg_sigma=sigma,
        outer_iters=iters,
        intensity_step=step,
        mu_cap=mu_cap,
        tol=tol,
    )


def _registration_options(fn):
    options = [
        click.option("--reg-iters", default=30, show_default=True, help="Outer iterations."),
        click.option("--reg-alpha", default=1.0, show_default=True, help="Coefficient-norm weight."),
        click.option("--reg-beta", default=100.0, show_default=True, help="Intensity-fit weight."),
        click.option("--reg-sigma", default=10.0, show_default=True, help="Coupling weight."),
        click.option("--reg-step", default=0.5, show_default=True, help="Descent step (px)."),
        click.option("--reg-mu-cap", default=0.99, show_default=True, help="Coefficient magnitude cap."),
        click.option("--reg-tol", default=1e-6, show_default=True, help="Relative energy stop."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _normalized_weights(mix_alpha, mix_beta):
    norm = math.hypot(mix_alpha, mix_beta)
    if norm == 0:
        raise InvalidInputError("mixing weights cannot both be zero")
    return MixWeights(mix_alpha=mix_alpha / norm, mix_beta=mix_beta / norm)


def _pick_reference(records, reference_id):
    if reference_id is None:
        for rec in records:
            if rec.label == CONTROL:
                return rec
        raise InvalidInputError("manifest has no control subject to use as reference")
    for rec in records:
        if rec.id == reference_id:
            return rec
    raise InvalidInputError(f"reference id {reference_id!r} not in the manifest")


@click.group()
def main():
    """Quasi-conformal cephalometric analysis toolkit."""


@main.command()
@click.argument("ref_image", type=click.Path(exists=True))
@click.argument("ref_landmarks", type=click.Path(exists=True))
@click.argument("subj_image", type=click.Path(exists=True))
@click.argument("subj_landmarks", type=click.Path(exists=True))
@click.argument("out_prefix")
@_registration_options
@_fail_on_package_errors
def register_cmd(
    ref_image, ref_landmarks, subj_image, subj_landmarks, out_prefix,
    reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol,
):
    """Register SUBJ onto REF; write map, coefficient, and diagnostics."""
    ref = load_subject(ref_image, ref_landmarks)
    subj = load_subject(subj_image, subj_landmarks)
    params = _reg_params(
        reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol
    )
    result = register(
        ref.image,
        subj.image,
        ref.landmarks.window_array(),
        subj.landmarks.window_array(),
        params,
    )
    np.savez(
        out_prefix + ".map.npz",
        targets=result.map.targets,
        mu_faces=result.mu.values,
        mu_vertex=face_to_vertex(result.mu),
    )
    with open(out_prefix + ".diag.txt", "w", encoding="utf-8") as fh:
        fh.write(f"landmark_residual_px: {result.landmark_residual:.9f}\n")
        fh.write(f"coupling_gap: {result.coupling_gap:.9e}\n")
        fh.write(f"max_abs_mu: {np.abs(result.mu.values).max():.9f}\n")
        fh.write("energy_trace:\n")
        for i, e in enumerate(result.energy_trace):
            fh.write(f"  {i}: {e:.9e}\n")
    click.echo(
        f"registered {subj.id} -> {ref.id}: "
        f"{len(result.energy_trace) - 1} iterations, "
        f"residual {result.landmark_residual:.2e} px"
    )


# click subcommand names
main.add_command(register_cmd, name="register")


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("out_csv")
@click.option("--window", default=9, show_default=True, help="Window size (odd).")
@click.option("--mix-alpha", default=0.985, show_default=True,
              help="Magnitude weight (normalized with --mix-beta).")
@click.option("--mix-beta", default=0.173, show_default=True,
              help="Argument weight (normalized with --mix-alpha).")
@click.option("--reference", default=None, help="Reference subject id (default: first control).")
@_registration_options
@_fail_on_package_errors
def features(manifest, out_csv, window, mix_alpha, mix_beta, reference,
             reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap,
             reg_tol):
    """Extract the per-subject feature matrix for a whole manifest."""
    records = load_manifest(manifest)
    ref = _pick_reference(records, reference)
    weights = _normalized_weights(mix_alpha, mix_beta)
    params = _reg_params(
        reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol
    )
    cohort = extract_cohort_features(records, ref, w=window, params=params)
    norm_dists = normalize_distances(cohort.raw_distances)
    maxima = cohort.raw_distances.max(axis=0)
    matrix = np.array(
        [
            assemble_feature_vector(block, weights, nd)
            for block, nd in zip(cohort.windows, norm_dists)
        ]
    )
    write_feature_matrix(
        out_csv,
        cohort.subject_ids,
        cohort.labels,
        feature_names(window),
        matrix,
        metadata={
            "window": window,
            "mix_alpha": repr(weights.mix_alpha),
            "mix_beta": repr(weights.mix_beta),
            "reference": ref.id,
            "dist_max": ",".join(repr(v) for v in maxima),
        },
    )
    click.echo(
        f"wrote {matrix.shape[0]} subjects x {matrix.shape[1]} features "
        f"to {out_csv} (reference {ref.id})"
    )


@main.command()
@click.argument("features_csv", type=click.Path(exists=True))
@click.argument("out_csv")
@click.option("--k", default=500, show_default=True, help="Features to keep.")
@_fail_on_package_errors
def select(features_csv, out_csv, k):
    """Rank deformation features by bagged p-value and keep the top K."""
    table = read_feature_matrix(features_csv)
    deform = table.matrix[:, :-3]
    p_values = bagged_p_values(deform, np.array(table.labels))
    selection = select_top_k(p_values, k)
    chosen = set(int(i) for i in selection.selected_indices)
    lines = ["index,name,p_value,selected"]
    for i, name in enumerate(table.names[:-3]):
        lines.append(f"{i},{name},{p_values[i]!r},{int(i in chosen)}")
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(
        f"kept {k} of {deform.shape[1]} deformation features; "
        f"best p = {p_values[selection.selected_indices[0]]:.3e}"
    )


@main.command(name="train")
@click.argument("features_csv", type=click.Path(exists=True))
@click.argument("out_model")
@click.option("--k", default=500, show_default=True, help="Features to keep.")
@_fail_on_package_errors
def train_cmd(features_csv, out_model, k):
    """Train the distance-threshold model from a feature matrix."""
    table = read_feature_matrix(features_csv)
    required = ("window", "mix_alpha", "mix_beta", "dist_max")
    missing = [key for key in required if key not in table.metadata]
    if missing:
        raise InvalidInputError(
            f"feature file lacks metadata: {', '.join(missing)} "
            "(regenerate it with the features command)"
        )
    labels = np.array(table.labels)
    deform = table.matrix[:, :-3]
    selection = select_top_k(bagged_p_values(deform, labels), k)
    trimmed = apply_selection(table.matrix, selection)
    weights = MixWeights(
        mix_alpha=float(table.metadata["mix_alpha"]),
        mix_beta=float(table.metadata["mix_beta"]),
    )
    maxima = np.array([float(v) for v in table.metadata["dist_max"].split(",")])
    model = train_model(
        trimmed,
        labels,
        selection=selection,
        weights=weights,
        dist_norm_maxima=maxima,
        window=int(table.metadata["window"]),
    )
    save_model(out_model, model)
    click.echo(f"trained on {len(labels)} subjects; d_opt = {model.d_opt:.6f}")


@main.command(name="predict")
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("ref_image", type=click.Path(exists=True))
@click.argument("ref_landmarks", type=click.Path(exists=True))
@click.argument("subj_image", type=click.Path(exists=True))
@click.argument("subj_landmarks", type=click.Path(exists=True))
@_registration_options
@_fail_on_package_errors
def predict_cmd(model_file, ref_image, ref_landmarks, subj_image,
                subj_landmarks, reg_iters, reg_alpha, reg_beta, reg_sigma,
                reg_step, reg_mu_cap, reg_tol):
    """Classify one subject against the model's reference subject."""
    model = load_model(model_file)
    ref = load_subject(ref_image, ref_landmarks)
    subj = load_subject(subj_image, subj_landmarks)
    params = _reg_params(
        reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol
    )
    block = subject_windows(ref, subj, model.window, params)
    dists = np.array(distance_features(subj.landmarks)) / model.dist_norm_maxima
    row = np.concatenate(
        [
            deformation_index(block, model.weights)[
                model.selection.selected_indices
            ],
            dists,
        ]
    )
    d_new = float(np.linalg.norm(row - model.c_mean))
    label = predict(model, row)
    click.echo(f"{subj.id}: {label} (d_new = {d_new:.6f}, d_opt = {model.d_opt:.6f})")


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("out_prefix")
@click.option("--tests", default=20, show_default=True, help="Holdout repetitions.")
@click.option("--k", default=100, show_default=True, help="Features to keep.")
@click.option("--rho", default=0.25, show_default=True, help="Sweep density in (0, 1/2].")
@click.option("--seed", default=0, show_default=True, help="Master seed.")
@click.option("--window", default=9, show_default=True, help="Window size (odd).")
@click.option("--folds", default=10, show_default=True, help="CV folds.")
@_registration_options
@_fail_on_package_errors
def evaluate(manifest, out_prefix, tests, k, rho, seed, window, folds,
             reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap,
             reg_tol):
    """Run the repeated-holdout protocol; write text and CSV reports."""
    records = load_manifest(manifest)
    params = _reg_params(
        reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol
    )
    report = run_protocol(
        records, n_tests=tests, k=k, rho=rho, seed=seed, window=window,
        folds=folds, reg_params=params,
    )
    with open(out_prefix + ".txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    with open(out_prefix + ".csv", "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    click.echo(
        f"accuracy {report.mean_accuracy:.3f} "
        f"(sens {report.mean_sensitivity:.3f}, spec {report.mean_specificity:.3f}) "
        f"over {tests} tests [{kernels.backend_name()} kernels]"
    )


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("out_csv")
@click.option("--k", default=100, show_default=True, help="Features to keep.")
@click.option("--rho", default=0.25, show_default=True, help="Sweep density in (0, 1/2].")
@click.option("--seed", default=0, show_default=True, help="Fold-assignment seed.")
@click.option("--window", default=9, show_default=True, help="Window size (odd).")
@click.option("--folds", default=10, show_default=True, help="CV folds.")
@_registration_options
@_fail_on_package_errors
def sweep(manifest, out_csv, k, rho, seed, window, folds, reg_iters,
          reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol):
    """Cross-validate every swept weight pair on the full manifest."""
    from .evaluation import _cv_accuracy, _validate_cohort  # shared machinery

    records = _validate_cohort(load_manifest(manifest), folds)
    params = _reg_params(
        reg_iters, reg_alpha, reg_beta, reg_sigma, reg_step, reg_mu_cap, reg_tol
    )
    ref = _pick_reference(records, None)
    cohort = extract_cohort_features(records, ref, w=window, params=params)
    labels = cohort.labels
    mag = np.abs(cohort.windows)
    arg = fold_argument(cohort.windows) / np.pi
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF01D)))
    all_idx = np.arange(len(records))
    fold_of = np.empty(len(records), dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        dealt = members[rng.permutation(members.size)]
        fold_of[dealt] = np.arange(dealt.size) % folds

    lines = ["k,mix_alpha,mix_beta,cv_accuracy"]
    best = None
    for i, cand in enumerate(sweep_candidates(rho)):
        deform = cand.mix_alpha * mag + cand.mix_beta * arg
        acc = _cv_accuracy(
            deform, cohort.raw_distances, labels, all_idx, fold_of, folds, k
        )
        lines.append(f"{i},{cand.mix_alpha!r},{cand.mix_beta!r},{acc!r}")
        if best is None or acc > best[1]:
            best = (cand, acc)
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(
        f"best weights ({best[0].mix_alpha:.6f}, {best[0].mix_beta:.6f}) "
        f"at CV accuracy {best[1]:.3f}"
    )


@main.command()
@click.argument("spec_json", type=click.Path(exists=True))
@click.argument("out_dir")
@click.option("--format", "img_format", default="pgm",
              type=click.Choice(["pgm", "png"]), show_default=True,
              help="Raster format for the images.")
@_fail_on_package_errors
def phantom(spec_json, out_dir, img_format):
    """Generate a synthetic phantom cohort on disk."""
    spec = PhantomSpec.from_json(spec_json)
    records, truths = generate_phantom_cohort(spec)
    img_dir = os.path.join(out_dir, "images")
    lmk_dir = os.path.join(out_dir, "landmarks")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(lmk_dir, exist_ok=True)
    entries = []
    for rec in records:
        img_rel = os.path.join("images", f"{rec.id}.{img_format}")
        lmk_rel = os.path.join("landmarks", f"{rec.id}.txt")
        if img_format == "pgm":
            write_pgm(os.path.join(out_dir, img_rel), rec.image.intensities)
        else:
            write_png(os.path.join(out_dir, img_rel), rec.image.intensities)
        write_landmarks(os.path.join(out_dir, lmk_rel), rec.landmarks)
        entries.append((rec.id, img_rel, lmk_rel, rec.label))
    write_manifest(os.path.join(out_dir, "manifest.json"), entries)
    np.savez(os.path.join(out_dir, "ground_truth.npz"), **truths)
    click.echo(
        f"wrote {len(records)} subjects ({spec.count_per_class} per class, "
        f"grid {spec.grid_size}) to {out_dir}"
    )


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("out_prefix")
@click.option("--tests", default=20, show_default=True, help="Holdout repetitions.")
@click.option("--seed", default=0, show_default=True, help="Master seed.")
@click.option("--lam", default=1e-2, show_default=True, help="SVM regularization.")
@click.option("--iterations", default=100_000, show_default=True,
              help="SVM subgradient iterations.")
@_fail_on_package_errors
def baseline(manifest, out_prefix, tests, seed, lam, iterations):
    """Conventional-measurement SVM baseline: model plus holdout report."""
    from .classifier import train_baseline
    from .measurements import MEASUREMENT_NAMES, conventional_measurements

    records = load_manifest(manifest)
    report = run_baseline_protocol(
        records, n_tests=tests, seed=seed, lam=lam, iterations=iterations
    )
    with open(out_prefix + ".txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    with open(out_prefix + ".csv", "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    labelled = [rec for rec in records if rec.label != "unlabeled"]
    table = np.array(
        [conventional_measurements(rec.landmarks).values for rec in labelled]
    )
    model = train_baseline(
        table, np.array([rec.label for rec in labelled]),
        lam=lam, iterations=iterations,
    )
    lines = ["measurement,coefficient"]
    for name, coef in zip(MEASUREMENT_NAMES, model.coef):
        lines.append(f"{name},{coef!r}")
    lines.append(f"intercept,{model.intercept!r}")
    with open(out_prefix + ".model.csv", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(
        f"baseline accuracy {report.mean_accuracy:.3f} over {tests} tests"
    )


if __name__ == "__main__":
    main()
