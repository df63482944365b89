"""Command-line interface: synth / train / eval / diagnose / report.

Exit codes: 0 success, 1 contract or usage error, 2 I/O error. The device
defaults to the ``LARKAD_DEVICE`` environment variable, then ``cpu``.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from ..diagnostics import erf_map, feature_entropy, feature_variance
from ..errors import ContractError
from ..metrics import CSV_COLUMNS, EvalSet, compute_report
from ..model import ReverseDistillationModel, preset
from .checkpoint import load_checkpoint, save_checkpoint
from .configfile import load_config_file
from .data import TEST, TRAIN, DatasetSpec, load_dataset
from .evaluate import EvalConfig, evaluate
from .synth import synth_dataset
from .train import PRESET_LOSS_MODES, TrainConfig, train


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_device():
    return os.environ.get("LARKAD_DEVICE", "cpu")


def build_parser():
    parser = _Parser(prog="larkad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p_synth = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--categories", type=int, default=5)
    p_synth.add_argument("--normals", type=int, default=20)
    p_synth.add_argument("--anomalies", type=int, default=10)
    p_synth.add_argument("--test-normals", type=int, default=None)
    p_synth.add_argument("--resolution", type=int, default=64)

    p_train = sub.add_parser("train", help="train bottleneck and decoder on a dataset")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--model-preset", default=None, help="desk, f, p, n, t or s")
    p_train.add_argument("--preset", choices=sorted(PRESET_LOSS_MODES), default=None,
                         help="fr (adaptive contraction) or fp (global cosine)")
    p_train.add_argument("--loss-mode", default=None)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--device", default=None)
    p_train.add_argument("--init-weights", default=None, help="weight archive to ingest before training")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint with the seven-metric battery")
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--category", default=None)
    p_eval.add_argument("--save-maps", action="store_true")
    p_eval.add_argument("--scorer", choices=("model", "oracle"), default="model",
                        help="'oracle' scores with the ground-truth masks (pipeline check)")
    p_eval.add_argument("--device", default=None)
    p_eval.add_argument("--seed", type=int, default=None)

    p_diag = sub.add_parser("diagnose", help="feature variance / entropy / ERF instruments")
    p_diag.add_argument("--what", choices=("variance", "entropy", "erf"), required=True)
    p_diag.add_argument("--out", required=True)
    p_diag.add_argument("--checkpoint", default=None)
    p_diag.add_argument("--config", default=None)
    p_diag.add_argument("--model-preset", default=None)
    p_diag.add_argument("--data", default=None)
    p_diag.add_argument("--image", default=None)
    p_diag.add_argument("--device", default=None)
    p_diag.add_argument("--seed", type=int, default=None)

    p_report = sub.add_parser("report", help="merge per-category CSVs and append the Mean row")
    p_report.add_argument("inputs", nargs="+")
    p_report.add_argument("--out", required=True)
    return parser


def _resolve_configs(args):
    if getattr(args, "config", None):
        model_cfg, train_cfg, eval_cfg = load_config_file(args.config)
    else:
        model_cfg, train_cfg, eval_cfg = preset("desk"), TrainConfig(), EvalConfig()
    if getattr(args, "model_preset", None):
        model_cfg = preset(args.model_preset)
    overrides = {}
    if getattr(args, "preset", None):
        overrides["loss_mode"] = PRESET_LOSS_MODES[args.preset]
    for name in ("loss_mode", "epochs", "batch_size", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    device = getattr(args, "device", None) or _default_device()
    overrides["device"] = device
    if overrides:
        from dataclasses import replace

        train_cfg = replace(train_cfg, **overrides)
    eval_cfg.device = device
    return model_cfg, train_cfg, eval_cfg


def _model_from(args, model_cfg):
    if getattr(args, "checkpoint", None):
        return load_checkpoint(args.checkpoint)
    model = ReverseDistillationModel(model_cfg)
    if getattr(args, "init_weights", None):
        from ..model import load_weights

        model.load_state_dict(load_weights(args.init_weights), strict=False)
    return model


def _cmd_synth(args):
    synth_dataset(
        args.out,
        seed=args.seed,
        categories=args.categories,
        normals_per_cat=args.normals,
        anomalies_per_cat=args.anomalies,
        resolution=args.resolution,
        test_normals_per_cat=args.test_normals,
    )
    print(f"wrote synthetic dataset with {args.categories} categories to {args.out}")
    return 0


def _cmd_train(args):
    model_cfg, train_cfg, _ = _resolve_configs(args)
    spec = DatasetSpec(root=args.data, split=TRAIN, resolution=model_cfg.input_resolution[0])
    dataset = load_dataset(spec)
    model = _model_from(args, model_cfg)
    os.makedirs(args.out, exist_ok=True)
    result = train(model, dataset, train_cfg, log_path=os.path.join(args.out, "train_log.jsonl"))
    save_checkpoint(model, os.path.join(args.out, "checkpoint"))
    with open(os.path.join(args.out, "run_config.json"), "w") as fh:
        json.dump(
            {
                "model": dataclass_dict(model_cfg),
                "train": dataclass_dict(train_cfg),
                "data": args.data,
            },
            fh,
            indent=2,
            default=str,
        )
    print(f"trained {len(result.history)} records; final loss {result.final_loss:.6f}")
    return 0


def dataclass_dict(obj):
    from dataclasses import asdict, is_dataclass

    return asdict(obj) if is_dataclass(obj) else obj


def _oracle_report(dataset, eval_cfg):
    labels = []
    masks = []
    for _, label, mask in dataset:
        labels.append(label)
        masks.append(mask.numpy() if mask is not None else None)
    shape = next(m.shape for m in masks if m is not None)
    pixel_masks = np.stack([m if m is not None else np.zeros(shape, np.uint8) for m in masks])
    pixel_scores = pixel_masks.astype(np.float64)
    image_scores = pixel_scores.reshape(len(masks), -1).max(axis=1)
    return compute_report(
        EvalSet(image_scores, np.asarray(labels), pixel_scores, pixel_masks),
        fpr_cap=eval_cfg.fpr_cap,
        connectivity=eval_cfg.connectivity,
    )


def _cmd_eval(args):
    model_cfg, _, eval_cfg = _resolve_configs(args)
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        model_cfg = model.config
    elif args.scorer == "model":
        raise ContractError("eval needs --checkpoint unless --scorer oracle is used")
    spec = DatasetSpec(
        root=args.data,
        split=TEST,
        resolution=model_cfg.input_resolution[0],
        category=args.category,
    )
    dataset = load_dataset(spec)
    os.makedirs(args.out, exist_ok=True)
    if args.scorer == "oracle":
        report = _oracle_report(dataset, eval_cfg)
        from ..metrics import write_report

        label = args.category or os.path.basename(os.path.normpath(args.data))
        write_report(
            report,
            json_path=os.path.join(args.out, "report.json"),
            csv_path=os.path.join(args.out, "report.csv"),
            row_label=label,
        )
    else:
        report, _ = evaluate(model, dataset, eval_cfg, out_dir=args.out, save_maps=args.save_maps)
    print("  ".join(f"{c}={v}" for c, v in zip(CSV_COLUMNS, report.to_csv_row())))
    return 0


def _cmd_diagnose(args):
    import torch

    model_cfg, train_cfg, eval_cfg = _resolve_configs(args)
    model = _model_from(args, model_cfg)
    model.eval()
    if args.what == "erf":
        if args.image:
            from .data import IMAGENET_MEAN, IMAGENET_STD, load_image

            raw = load_image(args.image, model.config.input_resolution[0])
            mean = np.asarray(IMAGENET_MEAN)
            std = np.asarray(IMAGENET_STD)
            image = torch.from_numpy(((raw - mean) / std).transpose(2, 0, 1).copy()).float()
        elif args.data:
            spec = DatasetSpec(root=args.data, split=TEST, resolution=model.config.input_resolution[0])
            image = load_dataset(spec)[0][0]
        else:
            raise ContractError("diagnose --what erf needs --image or --data")
        heat = erf_map(model, image)
        from PIL import Image as PILImage

        PILImage.fromarray((heat * 255.0).round().astype(np.uint8)).save(args.out)
        print(f"wrote ERF map to {args.out}")
        return 0
    if not args.data:
        raise ContractError(f"diagnose --what {args.what} needs --data")
    spec = DatasetSpec(root=args.data, split=TRAIN, resolution=model.config.input_resolution[0])
    dataset = load_dataset(spec)
    count = min(len(dataset), eval_cfg.batch_size)
    images = torch.stack([dataset[i][0] for i in range(count)])
    with torch.no_grad():
        enc, dec = model(images)
        if args.what == "variance":
            payload = {
                "encoder_variance": feature_variance(enc),
                "decoder_variance": feature_variance(dec),
            }
        else:
            payload = {
                "encoder_entropy": feature_entropy(enc),
                "decoder_entropy": feature_entropy(dec),
            }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(json.dumps(payload))
    return 0


def _cmd_report(args):
    rows = []
    header = None
    for path in args.inputs:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            file_header = next(reader)
            if header is None:
                header = file_header
            elif file_header != header:
                raise ContractError(f"CSV header of {path} does not match the first input")
            rows.extend(row for row in reader if row)
    if not rows:
        raise ContractError("no data rows found in the input CSVs")
    numeric_start = 1 if header and header[0].lower() == "category" else 0
    sums = np.zeros(len(header) - numeric_start)
    for row in rows:
        sums += np.array([float(v) for v in row[numeric_start:]])
    mean_row = [f"{v / len(rows):.1f}" for v in sums]
    if numeric_start:
        mean_row = ["Mean"] + mean_row
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
        writer.writerow(mean_row)
    print(f"merged {len(rows)} rows into {args.out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "diagnose": _cmd_diagnose,
    "report": _cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
