"""Statistical shape model: alignment, PCA, skinning, pose sampling, fitting."""

from .clustering import kmeans
from .fitting import (
    DoglegResult,
    KeypointFit,
    dogleg_fit,
    dogleg_least_squares,
    numeric_jacobian,
)
from .pca import ShapeBasis, pca_fit, pca_project, pca_synthesize
from .procrustes import (
    RankError,
    generalized_procrustes,
    procrustes_similarity,
    rms_radius,
)
from .sampling import (
    DEFAULT_JITTER,
    DEFAULT_NUM_CLUSTERS,
    PoseClusterBook,
    build_pose_cluster_book,
    sample_pose,
)
from .skinning import (
    KinematicTree,
    PoseParams,
    euler_xyz_to_matrix,
    joint_transforms,
    lbs_pose,
    lbs_vertices,
    pose_joint_positions,
    skinning_transforms,
)

__all__ = [
    "DEFAULT_JITTER",
    "DEFAULT_NUM_CLUSTERS",
    "DoglegResult",
    "KeypointFit",
    "KinematicTree",
    "PoseClusterBook",
    "PoseParams",
    "RankError",
    "ShapeBasis",
    "build_pose_cluster_book",
    "dogleg_fit",
    "dogleg_least_squares",
    "euler_xyz_to_matrix",
    "generalized_procrustes",
    "joint_transforms",
    "kmeans",
    "lbs_pose",
    "lbs_vertices",
    "numeric_jacobian",
    "pca_fit",
    "pca_project",
    "pca_synthesize",
    "pose_joint_positions",
    "procrustes_similarity",
    "rms_radius",
    "sample_pose",
    "skinning_transforms",
]
