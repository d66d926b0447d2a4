"""Spectral mesh autoencoder toolkit.

Graph-spectral filtering on triangle meshes, a quadric-decimation
hierarchy, a hand-rolled convolutional mesh autoencoder, a linear
morphable model with LBS articulation, synthetic dataset generation,
keypoint-driven encoding, and trust-region model fitting.
"""

from ._kernels import backend_name
from .camera import WeakPerspectiveCamera, fit_camera, keypoint_loss, project
from .coarsen import DecimationError, MeshHierarchy, build_hierarchy, decimate
from .dataset import Dataset, generate_dataset, load_dataset
from .mesh import (
    JointSpec,
    ObjError,
    Topology,
    TriMesh,
    joint_positions,
    load_obj,
    parse_obj,
    ring_average_matrix,
    save_obj,
    serialize_obj,
    validate,
)
from .morphable import (
    KinematicTree,
    PoseClusterBook,
    PoseParams,
    ShapeBasis,
    build_pose_cluster_book,
    dogleg_fit,
    dogleg_least_squares,
    generalized_procrustes,
    kmeans,
    lbs_pose,
    lbs_vertices,
    pca_fit,
    pca_project,
    pca_synthesize,
    procrustes_similarity,
    sample_pose,
)
from .nn import (
    AdamW,
    Autoencoder,
    ChebConv,
    NetworkParams,
    NetworkSpec,
    TrainConfig,
    count_params,
    load_autoencoder,
    save_autoencoder,
    train_autoencoder,
)
from .primitives import grid_plane, icosphere, slab_from_mask, tube_mesh
from .rig import (
    ArticulatedRig,
    hand_rig,
    load_rig,
    random_registrations,
    save_rig,
    tube_rig,
)
from .rotations import axis_angle_from_matrix, axis_angle_matrix
from .spectral import (
    GraphLaplacian,
    build_laplacian,
    cheb_filter,
    eigendecompose,
    gft,
    igft,
    laplacian_from_edges,
    spectral_reference_filter,
)

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "ArticulatedRig",
    "Autoencoder",
    "ChebConv",
    "Dataset",
    "DecimationError",
    "GraphLaplacian",
    "JointSpec",
    "KinematicTree",
    "MeshHierarchy",
    "NetworkParams",
    "NetworkSpec",
    "ObjError",
    "PoseClusterBook",
    "PoseParams",
    "ShapeBasis",
    "Topology",
    "TrainConfig",
    "TriMesh",
    "WeakPerspectiveCamera",
    "axis_angle_from_matrix",
    "axis_angle_matrix",
    "backend_name",
    "build_hierarchy",
    "build_laplacian",
    "build_pose_cluster_book",
    "cheb_filter",
    "count_params",
    "decimate",
    "dogleg_fit",
    "dogleg_least_squares",
    "eigendecompose",
    "fit_camera",
    "generalized_procrustes",
    "generate_dataset",
    "gft",
    "grid_plane",
    "hand_rig",
    "icosphere",
    "igft",
    "joint_positions",
    "keypoint_loss",
    "kmeans",
    "laplacian_from_edges",
    "lbs_pose",
    "lbs_vertices",
    "load_autoencoder",
    "load_dataset",
    "load_obj",
    "load_rig",
    "parse_obj",
    "pca_fit",
    "pca_project",
    "pca_synthesize",
    "procrustes_similarity",
    "project",
    "random_registrations",
    "ring_average_matrix",
    "sample_pose",
    "save_autoencoder",
    "save_obj",
    "save_rig",
    "serialize_obj",
    "slab_from_mask",
    "spectral_reference_filter",
    "train_autoencoder",
    "tube_mesh",
    "tube_rig",
    "validate",
]
