"""From-scratch neural network stack: layers, optimizer, autoencoder,
training loop, and checkpoint container."""

from .layers import (
    ChebConv,
    Dense,
    cheb_conv_backward,
    cheb_conv_forward,
    dense_backward,
    dense_forward,
    leaky_relu,
    leaky_relu_backward,
)
from .network import (
    Autoencoder,
    NetworkParams,
    NetworkSpec,
    ParamCount,
    ae_loss,
    count_params,
)
from .optim import AdamW, adamw_step
from .training import (
    TrainConfig,
    dataset_vertex_std,
    evaluate_l1,
    train_autoencoder,
    write_metrics_csv,
)
from .checkpoint import (
    AutoencoderCheckpoint,
    CheckpointError,
    EncoderCheckpoint,
    ShapeMismatchError,
    SpecMismatchError,
    VersionError,
    file_sha256,
    load_autoencoder,
    load_encoder,
    read_container,
    save_autoencoder,
    save_encoder,
    write_container,
)

__all__ = [
    "AdamW",
    "Autoencoder",
    "AutoencoderCheckpoint",
    "ChebConv",
    "CheckpointError",
    "Dense",
    "EncoderCheckpoint",
    "NetworkParams",
    "NetworkSpec",
    "ParamCount",
    "ShapeMismatchError",
    "SpecMismatchError",
    "TrainConfig",
    "VersionError",
    "adamw_step",
    "ae_loss",
    "cheb_conv_backward",
    "cheb_conv_forward",
    "count_params",
    "dataset_vertex_std",
    "dense_backward",
    "dense_forward",
    "evaluate_l1",
    "file_sha256",
    "leaky_relu",
    "leaky_relu_backward",
    "load_autoencoder",
    "load_encoder",
    "read_container",
    "save_autoencoder",
    "save_encoder",
    "train_autoencoder",
    "write_container",
    "write_metrics_csv",
]
