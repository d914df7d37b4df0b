"""Synthetic phantom cohorts with known ground-truth warps.

A base skull-like grayscale image carries all 18 landmarks.  Control
subjects perturb it with a small seeded similarity jitter (conformal, so
it should register with low conformality distortion) plus a gentle smooth
wobble.  Case subjects additionally receive local warps around the
clinically motivated landmarks {H, Go, Me, ph1, ph2}: a displacement bump
(moves the landmark, visible to the distance features) and a pure local
shear (anisotropy with the landmark fixed, visible only to the
deformation windows).  Every subject's exact forward warp is returned for
oracle checks.
"""

import json
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import GenerationError, InvalidInputError
from .grid import QCMap, build_grid
from .kernels import bilinear
from .landmarks import LANDMARK_NAMES, LandmarkSet
from .records import CONTROL, OSA, SubjectRecord
from .registration import ImageGray

__all__ = ["PhantomSpec", "generate_phantom_cohort", "base_subject", "LANDMARK_LAYOUT"]

# unit-coordinate landmark layout of the base phantom (x right, y down)
LANDMARK_LAYOUT = {
    "N": (0.25, 0.30),
    "S": (0.52, 0.33),
    "Ba": (0.68, 0.46),
    "ANS": (0.24, 0.50),
    "PNS": (0.48, 0.51),
    "A": (0.25, 0.55),
    "B": (0.27, 0.66),
    "Gn": (0.29, 0.72),
    "Me": (0.32, 0.74),
    "Go": (0.60, 0.68),
    "Ar": (0.64, 0.45),
    "H": (0.47, 0.80),
    "Tant": (0.33, 0.60),
    "u1": (0.52, 0.60),
    "Va": (0.55, 0.72),
    "Phw": (0.72, 0.80),
    "ph1": (0.57, 0.66),
    "ph2": (0.70, 0.66),
}

# case-class warp targets: displacement direction per landmark
_WARP_SITES = {
    "H": (0.0, 1.0),
    "Go": (0.7, 0.7),
    "Me": (0.2, 1.0),
    "ph1": (1.0, 0.0),
    "ph2": (-1.0, 0.0),
}


@dataclass
class PhantomSpec:
    """Generation parameters of a synthetic cohort."""

    grid_size: int = 65
    count_per_class: int = 30
    seed: int = 0
    noise: float = 0.01
    jitter_rotation_deg: float = 1.0
    jitter_scale: float = 0.01
    jitter_shift_px: float = 0.8
    wobble_px: float = 0.3
    warp_displacement_px: float = 1.8
    warp_shear: float = 0.15
    warp_sigma_px: float = 4.0
    warp_shear_sigma_px: float = 2.5
    # landmarks receiving the pure-shear term; restrict to well-isolated
    # sites (e.g. just H) to keep anisotropy out of the landmark positions
    shear_sites: tuple = tuple(_WARP_SITES)

    def __post_init__(self):
        if self.grid_size < 17:
            raise InvalidInputError("phantom grids below 17x17 are too coarse")
        if self.count_per_class < 0:
            raise InvalidInputError("count_per_class must be nonnegative")

    @classmethod
    def from_json(cls, path) -> "PhantomSpec":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidInputError(
                f"unknown phantom spec field(s): {', '.join(sorted(unknown))}"
            )
        if "shear_sites" in raw:
            raw["shear_sites"] = tuple(raw["shear_sites"])
        return cls(**raw)


def _segment_distance(points, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else 0.0
    proj = a + np.outer(t, ab) if denom > 0 else np.broadcast_to(a, points.shape)
    return np.linalg.norm(points - proj, axis=1)


def _polyline_ridge(points, nodes, sigma):
    d = np.full(points.shape[0], np.inf)
    for a, b in zip(nodes[:-1], nodes[1:]):
        d = np.minimum(d, _segment_distance(points, np.asarray(a), np.asarray(b)))
    return np.exp(-(d**2) / (2.0 * sigma**2))


def _base_image(n, rng):
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    u = pts / (n - 1)
    img = np.zeros(pts.shape[0])

    # cranium: ridge along an implicit ellipse
    e = ((u[:, 0] - 0.47) / 0.33) ** 2 + ((u[:, 1] - 0.33) / 0.22) ** 2
    img += 0.85 * np.exp(-((e - 1.0) ** 2) / (2 * 0.05**2))

    L = {k: np.array(v) * (n - 1) for k, v in LANDMARK_LAYOUT.items()}
    ridge = 1.2 * max(1.0, n / 65.0)
    curves = [
        ["Ar", "Go", "Me", "Gn", "B"],  # mandible
        ["ANS", "PNS"],  # palate
        ["Ba", "S"],  # clivus
        ["Tant", "u1", "Va"],  # tongue-palate region
    ]
    for names in curves:
        img += 0.7 * _polyline_ridge(pts, [L[k] for k in names], ridge)
    # pharyngeal wall: vertical soft-tissue edge through Phw
    wall = [
        (L["Phw"][0] - 0.02 * (n - 1), 0.50 * (n - 1)),
        (L["Phw"][0], L["Phw"][1]),
        (L["Phw"][0] - 0.02 * (n - 1), 0.92 * (n - 1)),
    ]
    img += 0.6 * _polyline_ridge(pts, wall, ridge)

    # local intensity anchor at every landmark so registration can sense
    # deformation inside each feature window
    for k, c in L.items():
        d2 = np.sum((pts - c) ** 2, axis=1)
        img += 0.45 * np.exp(-d2 / (2 * (0.04 * (n - 1)) ** 2))

    img = img.reshape(n, n)
    texture = gaussian_filter(rng.standard_normal((n, n)), 2.0)
    tex_span = np.abs(texture).max()
    # fade both texture and a border mask toward the frame
    yy_, xx_ = np.mgrid[0:n, 0:n].astype(np.float64) / (n - 1)
    margin = np.minimum.reduce([xx_, yy_, 1 - xx_, 1 - yy_])
    mask = np.clip(margin / 0.12, 0.0, 1.0) ** 2
    img = img * mask + 0.12 * (texture / tex_span) * mask
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def _wobble_field(rng, amplitude, n):
    """Smooth in-plane displacement with a few random low-frequency modes."""
    modes = []
    for _ in range(2):
        freq = rng.integers(1, 3, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        direction = rng.uniform(0, 2 * np.pi)
        modes.append((freq, phase, direction))

    def wobble(z):
        u = z.real / (n - 1)
        v = z.imag / (n - 1)
        out = np.zeros_like(z)
        for freq, phase, direction in modes:
            s = np.sin(2 * np.pi * (freq[0] * u + freq[1] * v) + phase[0])
            out = out + (amplitude / 2.0) * s * np.exp(1j * direction)
        return out

    return wobble


def _forward_warp(spec, rng, is_case, n, landmarks_px):
    center = complex((n - 1) / 2.0, (n - 1) / 2.0)
    theta = np.deg2rad(rng.uniform(-1, 1) * spec.jitter_rotation_deg)
    scale = 1.0 + rng.uniform(-1, 1) * spec.jitter_scale
    shift = complex(*(rng.uniform(-1, 1, 2) * spec.jitter_shift_px))
    linear = scale * np.exp(1j * theta)
    wobble = _wobble_field(rng, spec.wobble_px, n)

    bumps = []
    if is_case:
        resolution = max(1.0, (n - 1) / 64.0)
        sigma_push = spec.warp_sigma_px * resolution
        # the shear envelope is tighter so its tail cannot displace
        # neighboring landmarks and leak into the distance measurements
        sigma_shear = spec.warp_shear_sigma_px * resolution
        for name, direction in _WARP_SITES.items():
            d = np.asarray(direction, dtype=np.float64)
            d /= np.linalg.norm(d)
            amp = spec.warp_displacement_px * rng.uniform(0.7, 1.3)
            shear = spec.warp_shear * rng.uniform(0.7, 1.3)
            if name not in spec.shear_sites:
                shear = 0.0
            site = complex(*landmarks_px[name])
            bumps.append((site, complex(*d) * amp, shear, sigma_push, sigma_shear))

    def fwd(z):
        z = np.asarray(z, dtype=np.complex128)
        d = wobble(z)
        for site, push, shear, sigma_push, sigma_shear in bumps:
            rel = z - site
            r2 = np.abs(rel) ** 2
            d = d + np.exp(-r2 / (2 * sigma_push**2)) * push
            d = d + np.exp(-r2 / (2 * sigma_shear**2)) * shear * np.conj(rel)
        w = z + d
        return center + linear * (w - center) + shift

    return fwd


def _invert_warp(fwd, query, iterations=20):
    q = query.copy()
    for _ in range(iterations):
        q = q - (fwd(q) - query)
    return q


def base_subject(spec: PhantomSpec) -> SubjectRecord:
    """The undeformed base phantom as a (control-labelled) record."""
    n = spec.grid_size
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0xB)))
    img = _base_image(n, rng)
    marks = {
        k: (round(v[0] * (n - 1)), round(v[1] * (n - 1)))
        for k, v in LANDMARK_LAYOUT.items()
    }
    return SubjectRecord(
        id="base",
        image=ImageGray.from_array(img),
        landmarks=LandmarkSet({k: tuple(map(float, v)) for k, v in marks.items()}),
        label=CONTROL,
    )


def generate_phantom_cohort(spec: PhantomSpec):
    """Seeded cohort of control and case subjects.

    Returns ``(records, truths)`` where ``truths[id]`` is the exact
    forward-warp target of every grid vertex (an (n_vertices, 2) array).
    Raises ``GenerationError`` when a sampled warp folds the grid or
    pushes a landmark outside the frame.
    """
    n = spec.grid_size
    base = base_subject(spec)
    base_img = base.image.intensities
    grid = build_grid(n, n)
    zgrid = grid.vertices[:, 0] + 1j * grid.vertices[:, 1]
    landmarks_px = {k: np.array(v) for k, v in base.landmarks.positions.items()}

    records = []
    truths = {}
    for label, tag, cls_index in ((CONTROL, "c", 0), (OSA, "o", 1)):
        for idx in range(spec.count_per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence((spec.seed, cls_index, idx))
            )
            fwd = _forward_warp(spec, rng, label == OSA, n, landmarks_px)
            targets_c = fwd(zgrid)
            targets = np.column_stack([targets_c.real, targets_c.imag])
            warp_map = QCMap(grid, targets)
            sid = f"{tag}{idx:03d}"
            if not warp_map.is_orientation_preserving:
                raise GenerationError(
                    f"subject {sid}: warp folds "
                    f"{warp_map.folded_faces().size} faces; reduce amplitudes"
                )
            marks = {}
            for name, pos in landmarks_px.items():
                moved = fwd(np.array([complex(*pos)]))[0]
                if not (0 <= moved.real <= n - 1 and 0 <= moved.imag <= n - 1):
                    raise GenerationError(
                        f"subject {sid}: landmark {name} leaves the frame"
                    )
                marks[name] = (moved.real, moved.imag)
            source = _invert_warp(fwd, zgrid)
            img = bilinear(base_img, source.real, source.imag).reshape(n, n)
            if spec.noise > 0:
                img = img + rng.normal(0.0, spec.noise, size=img.shape)
            img = np.clip(img, 0.0, 1.0)
            records.append(
                SubjectRecord(
                    id=sid,
                    image=ImageGray.from_array(img),
                    landmarks=LandmarkSet(marks),
                    label=label,
                )
            )
            truths[sid] = targets
    return records, truths
