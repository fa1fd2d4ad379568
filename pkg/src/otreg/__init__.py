"""Partial-to-partial rigid point-cloud registration via entropic optimal
transport: outlier-bin score augmentation, log-domain Sinkhorn matching,
closed-form SVD alignment, an ICP baseline, synthetic scan protocols, and
batch evaluation metrics."""

from .datagen import (
    CameraConfig,
    ScenarioConfig,
    add_clipped_gaussian_noise,
    make_partial_pair,
    make_self_occluded_pair,
    render_self_occluded,
    synthetic_shape,
)
from .descriptors import (
    FileDescriptorProvider,
    LocalGeometryDescriptorProvider,
    OracleDescriptorProvider,
    load_descriptors,
    local_geometry_descriptors,
    oracle_descriptors,
    save_descriptors,
)
from .geometry import (
    EulerAngles,
    PointCloud,
    RigidTransform,
    apply_transform,
    centroid,
    compose,
    euler_from_rotation,
    invert,
    rotation_from_euler,
    sample_random_transform,
)
from .io import load_cloud, load_transform, save_cloud, save_transform
from .metrics import MetricReport, evaluate, geodesic_rotation_error
from .pipeline import IcpConfig, RegistrationResult, register_icp, register_ot
from .procrustes import CorrespondenceSet, cross_covariance, solve_procrustes
from .transport import (
    AugmentedScoreMatrix,
    Marginals,
    SinkhornConfig,
    augment,
    build_ground_truth,
    entropic_objective,
    extract_correspondences,
    logsumexp,
    nll_loss,
    nll_score_sensitivity,
    score_map,
    sinkhorn,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedScoreMatrix", "CameraConfig", "CorrespondenceSet",
    "EulerAngles", "FileDescriptorProvider", "IcpConfig",
    "LocalGeometryDescriptorProvider", "Marginals", "MetricReport",
    "OracleDescriptorProvider", "PointCloud", "RegistrationResult",
    "RigidTransform", "ScenarioConfig", "SinkhornConfig",
    "add_clipped_gaussian_noise", "apply_transform", "augment",
    "build_ground_truth", "centroid", "compose", "cross_covariance",
    "entropic_objective", "euler_from_rotation", "evaluate",
    "extract_correspondences", "geodesic_rotation_error", "invert",
    "load_cloud", "load_descriptors", "load_transform",
    "local_geometry_descriptors", "logsumexp", "make_partial_pair",
    "make_self_occluded_pair", "nll_loss", "nll_score_sensitivity",
    "oracle_descriptors", "register_icp", "register_ot",
    "render_self_occluded", "rotation_from_euler", "sample_random_transform",
    "save_cloud", "save_descriptors", "save_transform", "score_map",
    "sinkhorn", "solve_procrustes", "synthetic_shape",
]
