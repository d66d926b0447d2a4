"""Command-line interface.

Subcommands cover the full workflow: gen-dataset, train-ae,
train-encoder, eval, interpolate, sample, reconstruct, pose-study.
Flags are kebab-case; a JSON config file may supply defaults that
explicit flags override; SPECTRALMESH_OUTPUT_DIR sets the default
output directory. Every output lands under the output directory and
reruns with identical inputs and seeds produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .camera import project
from .coarsen import build_hierarchy
from .dataset import generate_dataset, load_dataset
from .encoder import (
    ENCODER_METRIC_FIELDS,
    EncoderSpec,
    EncoderTrainConfig,
    FrozenDecoder,
    build_observations,
    evaluate_encoder,
    normalize_observations,
    train_encoder,
    _batch_for,
)
from .mesh import TriMesh, load_obj, save_obj
from .nn.checkpoint import (
    file_sha256,
    load_autoencoder,
    load_encoder,
    save_autoencoder,
    save_encoder,
)
from .nn.network import Autoencoder, NetworkSpec, count_params
from .nn.training import (
    AE_METRIC_FIELDS,
    TrainConfig,
    evaluate_l1,
    split_rows,
    train_autoencoder,
    write_metrics_csv,
)
from .rig import hand_rig, load_rig, tube_rig


class CliError(RuntimeError):
    """User-facing command failure; message printed without a traceback."""


def _output_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve(args, value) -> Path:
    path = Path(value)
    return path if path.is_absolute() else _output_dir(args) / path


def _load_rig_arg(value):
    if value == "tube":
        return tube_rig()
    if value == "hand":
        return hand_rig()
    path = Path(value)
    if not path.exists():
        raise CliError(f"rig {value!r} is neither a built-in name nor a file")
    return load_rig(path)


def _load_decoder(path) -> FrozenDecoder:
    path = Path(path)
    if not path.exists():
        raise CliError(f"decoder checkpoint not found: {path}")
    return FrozenDecoder.from_checkpoint(path)


def _dataset_joint_matrix(dataset):
    rig = load_rig(dataset.root / "rig.json")
    return rig.joint_regressor()


# ---- subcommands ----


def cmd_gen_dataset(args) -> int:
    rig = _load_rig_arg(args.rig)
    out = _resolve(args, args.out)
    dataset = generate_dataset(
        rig,
        args.count,
        out,
        seed=args.seed,
        shape_components=args.shape_components,
        registrations=args.registrations,
        pose_clusters=args.pose_clusters,
        jitter=args.jitter,
        image_size=args.image_size,
        occlusion=args.occlusion,
        splits=tuple(args.splits),
    )
    sizes = {name: len(ids) for name, ids in dataset.splits.items()}
    print(f"dataset: {dataset.num_samples} samples at {out} splits={sizes}")
    return 0


def _ae_spec_from_args(args, num_vertices: int) -> NetworkSpec:
    return NetworkSpec(
        num_vertices=num_vertices,
        factors=tuple(args.factors),
        filters=tuple(args.filters),
        latent=args.latent,
        order=args.order,
    )


def cmd_train_ae(args) -> int:
    dataset = load_dataset(_require_path(args.dataset, "dataset"))
    reference = dataset.reference_mesh(args.reference)
    hierarchy = build_hierarchy(reference, tuple(args.factors))
    spec = _ae_spec_from_args(args, dataset.topology.num_vertices)
    model = Autoencoder(spec, hierarchy)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        weight_decay=args.weight_decay,
        lambda_latent=args.lambda_latent,
        lambda_weights=args.lambda_weights,
        seed=args.seed,
        target_l1=args.target_l1,
        min_epochs=args.min_epochs,
    )
    params, optimizer, metrics, latent_stats = train_autoencoder(
        model,
        dataset.split_vertices("train"),
        dataset.split_vertices("val"),
        config,
    )
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_autoencoder(out, spec, params, hierarchy, optimizer, latent_stats)
    metrics_path = _resolve(args, args.metrics)
    # CSV artifact carries the per-epoch training curve, one row per epoch
    write_metrics_csv(metrics_path, split_rows(metrics, "train"), AE_METRIC_FIELDS)
    val_rows = split_rows(metrics, "val")
    final = val_rows[-1]["l1_mm"] if val_rows else float("nan")
    print(f"train-ae: checkpoint {out} metrics {metrics_path} final_val_l1={final:.6g}")
    return 0


def cmd_train_encoder(args) -> int:
    dataset = load_dataset(_require_path(args.dataset, "dataset"))
    decoder = _load_decoder(args.decoder)
    joint_matrix = _dataset_joint_matrix(dataset)
    config = EncoderTrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        weight_decay=args.weight_decay,
        lambda_kpts=args.lambda_kpts,
        lambda_embed=args.lambda_embed,
        hidden=tuple(args.hidden),
        include_3d=not args.no_3d,
        keypoint_noise=args.keypoint_noise,
        seed=args.seed,
        target_l1=args.target_l1,
        min_epochs=args.min_epochs,
    )
    spec, params, optimizer, input_norm, metrics = train_encoder(
        dataset, decoder, joint_matrix, config
    )
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_encoder(
        out,
        spec.to_dict(),
        params,
        input_norm,
        decoder_sha256=file_sha256(args.decoder),
        optimizer=optimizer,
    )
    metrics_path = _resolve(args, args.metrics)
    write_metrics_csv(metrics_path, split_rows(metrics, "train"), ENCODER_METRIC_FIELDS)
    val_rows = split_rows(metrics, "val")
    final = val_rows[-1]["mesh_l1_mm"] if val_rows else float("nan")
    print(
        f"train-encoder: checkpoint {out} metrics {metrics_path} "
        f"final_val_l1={final:.6g}"
    )
    return 0


def _require_path(path, kind: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise CliError(f"{kind} not found: {path}")
    return path


def cmd_eval(args) -> int:
    dataset = load_dataset(_require_path(args.dataset, "dataset"))
    ckpt_path = _require_path(args.decoder, "decoder checkpoint")
    ckpt = load_autoencoder(ckpt_path)
    model = Autoencoder(ckpt.spec, ckpt.hierarchy)
    ids = dataset.indices(args.split)
    vertices = dataset.vertices[ids]
    mesh_l1 = evaluate_l1(model, ckpt.params, vertices)

    counts = count_params(ckpt.spec, ckpt.hierarchy.level_sizes)
    decoder_enumerated = int(
        sum(v.size for k, v in ckpt.params.tensors.items() if k.startswith("dec."))
    )

    # decoder latency: mean wall clock over repeated single-latent decodes
    z = np.zeros(ckpt.spec.latent)
    model.decode(ckpt.params, z)  # warm up caches before timing
    start = time.perf_counter()
    for _ in range(args.latency_runs):
        model.decode(ckpt.params, z)
    latency_ms = (time.perf_counter() - start) / args.latency_runs * 1e3

    joint_matrix = _dataset_joint_matrix(dataset)
    per_joint = np.zeros(dataset.num_keypoints)
    for row, i in enumerate(ids):
        recon = model.decode(ckpt.params, model.encode(ckpt.params, vertices[row]))
        joints = np.asarray(joint_matrix @ recon)
        predicted = _project_with_record(dataset, i, joints)
        err = np.abs(predicted - dataset.keypoints2d(i)).mean(axis=1)
        per_joint += err
    per_joint /= max(len(ids), 1)

    report = {
        "split": args.split,
        "samples": len(ids),
        "mesh_l1": mesh_l1,
        "per_joint_px": per_joint.tolist(),
        "mean_joint_px": float(per_joint.mean()),
        "decoder_params": decoder_enumerated,
        "decoder_params_formula": counts.decoder,
        "total_params": int(ckpt.params.total_count()),
        "decoder_latency_ms": latency_ms,
        "latency_runs": args.latency_runs,
    }

    if args.encoder:
        enc_ckpt = load_encoder(_require_path(args.encoder, "encoder checkpoint"))
        spec = EncoderSpec.from_dict(enc_ckpt.spec_dict)
        decoder = FrozenDecoder(model, ckpt.params)
        raw = build_observations(dataset, ids, include_3d=_obs_includes_3d(spec, dataset))
        batch = _batch_for(
            dataset, ids, normalize_observations(raw, enc_ckpt.input_norm)
        )
        enc_l1, enc_px = evaluate_encoder(
            spec, enc_ckpt.params, decoder, joint_matrix, batch
        )
        report["encoder_mesh_l1"] = enc_l1
        report["encoder_reproj_px"] = enc_px

    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=1))
    csv_path = out.with_suffix(".csv")
    rows = [
        {"metric": key, "value": value}
        for key, value in report.items()
        if isinstance(value, (int, float))
    ]
    write_metrics_csv(csv_path, rows, fields=("metric", "value"))
    print(f"eval: report {out} mesh_l1={mesh_l1:.6g} latency_ms={latency_ms:.3f}")
    return 0


def _obs_includes_3d(spec: EncoderSpec, dataset) -> bool:
    J = dataset.num_keypoints
    if spec.input_size == J * 6:
        return True
    if spec.input_size == J * 3:
        return False
    raise CliError(
        f"encoder expects {spec.input_size} inputs; dataset keypoints ({J}) "
        "support neither the 2-D-only nor the 2-D+3-D layout"
    )


def _project_with_record(dataset, index: int, joints: np.ndarray) -> np.ndarray:
    return project(dataset.camera(index), joints)


def cmd_interpolate(args) -> int:
    ckpt = load_autoencoder(_require_path(args.decoder, "decoder checkpoint"))
    model = Autoencoder(ckpt.spec, ckpt.hierarchy)
    mesh_a = load_obj(_require_path(args.input_a, "input mesh"))
    mesh_b = load_obj(_require_path(args.input_b, "input mesh"))
    za = model.encode(ckpt.params, mesh_a.vertices)
    zb = model.encode(ckpt.params, mesh_b.vertices)
    out_dir = _resolve(args, args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    topology = ckpt.hierarchy.reference.topology
    for step in range(args.steps):
        t = step / (args.steps - 1) if args.steps > 1 else 0.0
        if step == 0:
            z = za  # exact endpoints: reconstructions of the inputs
        elif step == args.steps - 1:
            z = zb
        else:
            z = (1.0 - t) * za + t * zb
        verts = model.decode(ckpt.params, z)
        save_obj(TriMesh(topology, verts), out_dir / f"interp_{step:02d}.obj")
    print(f"interpolate: {args.steps} meshes in {out_dir}")
    return 0


def cmd_sample(args) -> int:
    ckpt = load_autoencoder(_require_path(args.decoder, "decoder checkpoint"))
    model = Autoencoder(ckpt.spec, ckpt.hierarchy)
    rng = np.random.default_rng(args.seed)
    if ckpt.latent_stats is not None:
        mean = ckpt.latent_stats["mean"]
        std = ckpt.latent_stats["std"]
    else:
        mean = np.zeros(ckpt.spec.latent)
        std = np.ones(ckpt.spec.latent)
    out_dir = _resolve(args, args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    topology = ckpt.hierarchy.reference.topology
    for i in range(args.count):
        z = mean + std * rng.standard_normal(ckpt.spec.latent)
        verts = model.decode(ckpt.params, z)
        save_obj(TriMesh(topology, verts), out_dir / f"sample_{i:02d}.obj")
    print(f"sample: {args.count} meshes in {out_dir}")
    return 0


def cmd_reconstruct(args) -> int:
    ckpt = load_autoencoder(_require_path(args.decoder, "decoder checkpoint"))
    model = Autoencoder(ckpt.spec, ckpt.hierarchy)
    mesh = load_obj(_require_path(args.input, "input mesh"))
    if mesh.num_vertices != ckpt.spec.num_vertices:
        raise CliError(
            f"input has {mesh.num_vertices} vertices, checkpoint expects "
            f"{ckpt.spec.num_vertices}"
        )
    recon = model.decode(ckpt.params, model.encode(ckpt.params, mesh.vertices))
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_obj(TriMesh(ckpt.hierarchy.reference.topology, recon), out)
    l1 = float(np.abs(recon - mesh.vertices).mean())
    print(f"reconstruct: {out} l1={l1:.6g}")
    return 0


def cmd_pose_study(args) -> int:
    dataset = load_dataset(_require_path(args.dataset, "dataset"))
    references = args.references
    if len(references) < 2:
        raise CliError("pose-study needs at least two reference poses")
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=args.seed,
    )
    rows = []
    for name in references:
        path = Path(name)
        if path.suffix == ".obj" and path.exists():
            reference, label = load_obj(path), path.stem
        else:
            reference, label = dataset.reference_mesh(name), name
        hierarchy = build_hierarchy(reference, tuple(args.factors))
        spec = _ae_spec_from_args(args, dataset.topology.num_vertices)
        model = Autoencoder(spec, hierarchy)
        _, _, metrics, _ = train_autoencoder(
            model,
            dataset.split_vertices("train"),
            dataset.split_vertices("val"),
            config,
        )
        rows.append(
            {
                "reference": label,
                "final_val_l1": split_rows(metrics, "val")[-1]["l1_mm"],
                "epochs": args.epochs,
                "seed": args.seed,
            }
        )
    out = _resolve(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out, rows, fields=("reference", "final_val_l1", "epochs", "seed"))
    for row in rows:
        print(f"pose-study: {row['reference']} final_val_l1={row['final_val_l1']:.6g}")
    return 0


# ---- parser ----


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spectralmesh",
        description="Spectral mesh autoencoder toolkit: datasets, training, evaluation.",
    )
    commands: dict[str, tuple[argparse.ArgumentParser, set[str]]] = {}
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text, handler):
        p = sub.add_parser(
            name,
            help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        dests: set[str] = set()
        p.set_defaults(handler=handler)

        def add(flag, **kw):
            action = p.add_argument(flag, **kw)
            dests.add(action.dest)

        add("--config", default=None, help="JSON file of flag defaults (underscore keys)")
        add(
            "--output-dir",
            default=os.environ.get("SPECTRALMESH_OUTPUT_DIR", "."),
            help="base directory for outputs (env SPECTRALMESH_OUTPUT_DIR)",
        )
        commands[name] = (p, dests)
        return add

    add = command("gen-dataset", "generate a synthetic articulated dataset", cmd_gen_dataset)
    add("--rig", default="tube", help="built-in rig name (tube, hand) or rig JSON path")
    add("--count", type=int, default=2000, help="number of samples")
    add("--out", default="dataset", help="dataset directory (under output dir)")
    add("--seed", type=int, default=0, help="master seed; same seed, same bytes")
    add("--shape-components", type=int, default=3, help="PCA components to keep")
    add("--registrations", type=int, default=60, help="synthetic registrations for the shape model")
    add("--pose-clusters", type=int, default=64, help="k-means rotation centers per joint (recipe default 64)")
    add("--jitter", type=float, default=0.05, help="pose jitter std around centers, radians")
    add("--image-size", type=int, default=256, help="square image side for 2-D keypoints, px")
    add("--occlusion", type=float, default=0.0, help="per-keypoint invisibility probability")
    add("--splits", type=float, nargs=3, default=[0.87, 0.065, 0.065],
        help="train/val/test fractions (recipe proportions)")

    add = command("train-ae", "train the mesh autoencoder", cmd_train_ae)
    add("--dataset", required=True, help="dataset directory from gen-dataset")
    add("--out", default="autoencoder.gmm", help="checkpoint path")
    add("--metrics", default="ae_metrics.csv", help="per-epoch metrics CSV")
    add("--reference", default="half",
        help="hierarchy reference pose: half (decimation in a half-articulated pose) or rest")
    add("--latent", type=int, default=64, help="embedding size Z (recipe default 64)")
    add("--filters", type=int, nargs=4, default=[16, 32, 32, 48],
        help="conv widths per level (recipe default)")
    add("--factors", type=int, nargs=4, default=[4, 4, 2, 2],
        help="pooling factors per level (recipe default)")
    add("--order", type=int, default=3, help="Chebyshev order r (recipe default 3)")
    add("--epochs", type=int, default=200, help="training epochs")
    add("--batch-size", type=int, default=64, help="samples per step (recipe default 64)")
    add("--lr", type=float, default=1e-3, help="AdamW learning rate (recipe default)")
    add("--weight-decay", type=float, default=1e-5, help="decoupled weight decay (recipe default)")
    add("--lambda-latent", type=float, default=5e-7, help="latent L2 weight (recipe default)")
    add("--lambda-weights", type=float, default=5e-5, help="parameter L2 weight (recipe default)")
    add("--seed", type=int, default=0, help="seed for init and batching")
    add("--target-l1", type=float, default=None, help="stop early once val L1 dips below")
    add("--min-epochs", type=int, default=0, help="epochs to run before early stop applies")

    add = command("train-encoder", "train the observation encoder against a frozen decoder", cmd_train_encoder)
    add("--dataset", required=True, help="dataset directory")
    add("--decoder", required=True, help="autoencoder checkpoint to freeze")
    add("--out", default="encoder.gmm", help="encoder checkpoint path")
    add("--metrics", default="encoder_metrics.csv", help="per-epoch metrics CSV")
    add("--hidden", type=int, nargs="+", default=[256, 256], help="MLP hidden widths")
    add("--epochs", type=int, default=130, help="training epochs (recipe default 130)")
    add("--batch-size", type=int, default=64, help="samples per step")
    add("--lr", type=float, default=1e-4, help="AdamW learning rate (recipe default)")
    add("--weight-decay", type=float, default=1e-5, help="decoupled weight decay")
    add("--lambda-kpts", type=float, default=0.01, help="reprojection weight (recipe default)")
    add("--lambda-embed", type=float, default=5e-5, help="embedding norm weight (recipe default)")
    add("--keypoint-noise", type=float, default=0.02, help="3-D keypoint noise std, canonical units")
    add("--no-3d", action="store_true", help="drop 3-D keypoints from observations")
    add("--seed", type=int, default=0, help="seed for init and batching")
    add("--target-l1", type=float, default=None, help="stop early once val mesh L1 dips below")
    add("--min-epochs", type=int, default=0, help="epochs to run before early stop applies")

    add = command("eval", "evaluate checkpoints on a dataset split", cmd_eval)
    add("--dataset", required=True, help="dataset directory")
    add("--decoder", required=True, help="autoencoder checkpoint")
    add("--encoder", default=None, help="optional encoder checkpoint")
    add("--split", default="test", help="dataset split to evaluate")
    add("--out", default="eval.json", help="JSON report path (CSV twin alongside)")
    add("--latency-runs", type=int, default=1000, help="decoder timing repetitions")

    add = command("interpolate", "decode the latent path between two meshes", cmd_interpolate)
    add("--decoder", required=True, help="autoencoder checkpoint")
    add("--input-a", required=True, help="first OBJ input")
    add("--input-b", required=True, help="second OBJ input")
    add("--steps", type=int, default=11, help="meshes along the path, endpoints included")
    add("--out-dir", default="interpolation", help="output directory for OBJ steps")

    add = command("sample", "decode random latents to meshes", cmd_sample)
    add("--decoder", required=True, help="autoencoder checkpoint")
    add("--count", type=int, default=8, help="meshes to sample")
    add("--seed", type=int, default=0, help="latent sampling seed")
    add("--out-dir", default="samples", help="output directory for OBJ samples")

    add = command("reconstruct", "encode and decode one OBJ mesh", cmd_reconstruct)
    add("--decoder", required=True, help="autoencoder checkpoint")
    add("--input", required=True, help="OBJ mesh on the checkpoint topology")
    add("--out", default="reconstruction.obj", help="output OBJ path")

    add = command("pose-study", "compare hierarchies built from different reference poses", cmd_pose_study)
    add("--dataset", required=True, help="dataset directory")
    add("--references", nargs="+", default=["rest", "half"],
        help="reference pose names (rest, half) or OBJ paths")
    add("--latent", type=int, default=16, help="embedding size for the study models")
    add("--filters", type=int, nargs=4, default=[16, 32, 32, 48], help="conv widths")
    add("--factors", type=int, nargs=4, default=[4, 4, 2, 2], help="pooling factors")
    add("--order", type=int, default=3, help="Chebyshev order")
    add("--epochs", type=int, default=20, help="training epochs per reference")
    add("--batch-size", type=int, default=64, help="samples per step")
    add("--lr", type=float, default=1e-3, help="AdamW learning rate")
    add("--seed", type=int, default=0, help="shared seed so runs differ only by reference")
    add("--out", default="pose_study.csv", help="study CSV path")

    return parser, commands


def _config_path(argv) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = _build_parser()
    config = _config_path(argv)
    if config is not None:
        try:
            overrides = json.loads(Path(config).read_text())
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 1
        if not isinstance(overrides, dict):
            print("error: config file must hold a JSON object", file=sys.stderr)
            return 1
        for sub_parser, dests in commands.values():
            known = {k: v for k, v in overrides.items() if k in dests}
            if known:
                sub_parser.set_defaults(**known)
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
