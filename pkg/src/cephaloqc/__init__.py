"""Quasi-conformal cephalometric analysis.

Registers grayscale images under landmark constraints with quasi-conformal
maps, extracts conformality-distortion features in windows around
craniofacial landmarks, and trains a distance-threshold classifier for
control-versus-case discrimination, with a synthetic phantom cohort
standing in for clinical data.
"""

from .beltrami import (
    BeltramiField,
    ComplexDeriv,
    beltrami_of_map,
    distortion_axes,
    face_to_vertex,
    wirtinger_derivatives,
)
from .classifier import (
    SweepConfig,
    TrainedModel,
    predict,
    sweep_candidates,
    sweep_weights,
    train,
    train_baseline,
)
from .errors import CephaloQCError
from .evaluation import EvalReport, confusion_metrics, run_protocol
from .features import (
    MixWeights,
    assemble_feature_vector,
    deformation_index,
    distance_features,
    extract_windows,
    fold_argument,
    normalize_distances,
    template_mu,
)
from .grid import QCMap, TriGrid, build_grid
from .landmarks import LANDMARK_NAMES, LandmarkSet
from .lbs import lbs_solve, lbs_solve_sliding
from .measurements import MeasurementVector, conventional_measurements
from .phantom import PhantomSpec, generate_phantom_cohort
from .records import SubjectRecord
from .registration import ImageGray, RegParams, RegResult, register, registration_energy
from .stats import bagged_p_values, select_top_k, welch_t_p

__version__ = "0.1.0"
