"""Container format guarantees: determinism, validation, round-trips."""

import numpy as np
import pytest

from spectralmesh.coarsen import build_hierarchy
from spectralmesh.nn.checkpoint import (
    CheckpointError,
    ShapeMismatchError,
    SpecMismatchError,
    VersionError,
    file_sha256,
    load_autoencoder,
    load_encoder,
    save_autoencoder,
    save_encoder,
)
from spectralmesh.nn.network import Autoencoder, NetworkParams, NetworkSpec
from spectralmesh.nn.optim import AdamW
from spectralmesh.primitives import icosphere


@pytest.fixture()
def ae_setup():
    mesh = icosphere(0)
    spec = NetworkSpec(num_vertices=12, factors=(2,), filters=(3,), latent=2)
    h = build_hierarchy(mesh, spec.factors)
    ae = Autoencoder(spec, h)
    params = ae.init_params(seed=1)
    return spec, h, ae, params


def _trained_state(ae, params):
    opt = AdamW(lr=1e-3)
    rng = np.random.default_rng(2)
    grads = {k: rng.standard_normal(v.shape) for k, v in params.tensors.items()}
    opt.step(params.tensors, grads)
    stats = {"mean": rng.standard_normal(2), "std": np.abs(rng.standard_normal(2))}
    return opt, stats


def test_save_load_save_is_byte_identical(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    opt, stats = _trained_state(ae, params)
    first = tmp_path / "model.gmm"
    second = tmp_path / "again.gmm"

    save_autoencoder(first, spec, params, h, optimizer=opt, latent_stats=stats)
    ckpt = load_autoencoder(first)
    save_autoencoder(
        second, ckpt.spec, ckpt.params, ckpt.hierarchy, ckpt.optimizer, ckpt.latent_stats
    )
    assert first.read_bytes() == second.read_bytes()
    assert file_sha256(first) == file_sha256(second)


def test_loaded_state_matches_saved(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    opt, stats = _trained_state(ae, params)
    path = tmp_path / "model.gmm"
    save_autoencoder(path, spec, params, h, optimizer=opt, latent_stats=stats)

    ckpt = load_autoencoder(path, expect_spec=spec)
    assert ckpt.spec == spec
    for k, v in params.tensors.items():
        np.testing.assert_array_equal(ckpt.params.tensors[k], v)
    assert ckpt.optimizer is not None
    assert ckpt.optimizer.step_count == opt.step_count
    for k, v in opt.state_tensors().items():
        np.testing.assert_array_equal(ckpt.optimizer.state_tensors()[k], v)
    np.testing.assert_array_equal(ckpt.latent_stats["mean"], stats["mean"])

    # the rebuilt hierarchy must carry identical pooling transforms
    for orig, loaded in zip(h.downs + h.ups, ckpt.hierarchy.downs + ckpt.hierarchy.ups):
        orig = orig.tocsr()
        np.testing.assert_array_equal(loaded.indptr, orig.indptr)
        np.testing.assert_array_equal(loaded.indices, orig.indices)
        np.testing.assert_array_equal(loaded.data, orig.data)
    for orig, loaded in zip(h.level_positions, ckpt.hierarchy.level_positions):
        np.testing.assert_array_equal(loaded, orig)


def test_tampered_tensor_shape_names_the_layer(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    path = tmp_path / "model.gmm"
    params.tensors["enc.conv0.weight"] = params.tensors["enc.conv0.weight"][:, :1, :]
    save_autoencoder(path, spec, params, h)
    with pytest.raises(ShapeMismatchError, match="enc.conv0.weight"):
        load_autoencoder(path)


def test_missing_tensor_names_the_layer(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    path = tmp_path / "model.gmm"
    del params.tensors["dec.fc.bias"]
    save_autoencoder(path, spec, params, h)
    with pytest.raises(ShapeMismatchError, match="dec.fc.bias"):
        load_autoencoder(path)


def test_spec_mismatch_refused(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    path = tmp_path / "model.gmm"
    save_autoencoder(path, spec, params, h)
    other = NetworkSpec(num_vertices=12, factors=(2,), filters=(3,), latent=4)
    with pytest.raises(SpecMismatchError):
        load_autoencoder(path, expect_spec=other)


def test_kind_mismatch_refused(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    ae_path = tmp_path / "model.gmm"
    save_autoencoder(ae_path, spec, params, h)
    with pytest.raises(CheckpointError, match="encoder"):
        load_encoder(ae_path)

    enc_path = tmp_path / "enc.gmm"
    save_encoder(
        enc_path,
        spec_dict={"input_size": 4},
        params=NetworkParams({"head.weight": np.ones((4, 2)), "head.bias": np.zeros(2)}),
        input_norm={"mean": np.zeros(4), "std": np.ones(4)},
    )
    with pytest.raises(CheckpointError, match="autoencoder"):
        load_autoencoder(enc_path)


def test_bad_magic_and_version_rejected(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    junk = tmp_path / "junk.gmm"
    junk.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="magic"):
        load_autoencoder(junk)

    path = tmp_path / "model.gmm"
    save_autoencoder(path, spec, params, h)
    raw = path.read_bytes()
    # bump the embedded format version without changing the byte length
    patched = raw.replace(b'"version":1', b'"version":9', 1)
    assert patched != raw
    bad = tmp_path / "future.gmm"
    bad.write_bytes(patched)
    with pytest.raises(VersionError):
        load_autoencoder(bad)


def test_encoder_checkpoint_roundtrip(tmp_path, ae_setup):
    spec, h, ae, params = ae_setup
    ae_path = tmp_path / "decoder.gmm"
    save_autoencoder(ae_path, spec, params, h)
    decoder_hash = file_sha256(ae_path)

    rng = np.random.default_rng(5)
    enc_params = NetworkParams(
        {"head.weight": rng.standard_normal((6, 3)), "head.bias": rng.standard_normal(3)}
    )
    norm = {"mean": rng.standard_normal(6), "std": np.abs(rng.standard_normal(6)) + 0.1}
    spec_dict = {"input_size": 6, "hidden": [8], "latent": 2}

    first = tmp_path / "enc.gmm"
    save_encoder(first, spec_dict, enc_params, norm, decoder_sha256=decoder_hash)
    ckpt = load_encoder(first)
    assert ckpt.spec_dict == spec_dict
    assert ckpt.decoder_sha256 == decoder_hash
    np.testing.assert_array_equal(ckpt.input_norm["std"], norm["std"])
    for k, v in enc_params.tensors.items():
        np.testing.assert_array_equal(ckpt.params.tensors[k], v)

    second = tmp_path / "enc2.gmm"
    save_encoder(second, ckpt.spec_dict, ckpt.params, ckpt.input_norm, ckpt.decoder_sha256)
    assert first.read_bytes() == second.read_bytes()
