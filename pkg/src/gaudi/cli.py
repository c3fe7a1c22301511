"""Command-line front end: generate -> train -> embed -> evaluate -> plot.

Every command writes its artifacts plus a manifest.json into --out; the
manifest records the exact argv, so ``gaudi replay manifest.json``
reproduces the outputs byte-identically.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, TrainConfig, preset_config
from .dataset_io import load_dataset, save_dataset
from .errors import ConfigError, ContractError, GaudiError
from .generators import (
    brain_surrogate,
    smlm_dataset,
    vicsek_dataset,
    watts_strogatz_dataset,
)
from .generators.smlm import SMLMParams
from .metrics import evaluate
from .model import load_checkpoint, save_checkpoint
from .plotting import PRESET_STYLES, plot_embeddings
from .training import EmbeddingRecord, embed, train

GENERATOR_CHOICES = ("watts-strogatz", "smlm", "vicsek", "brain-surrogate")
EVAL_PRESET_OF = {
    "watts-strogatz": "watts-strogatz",
    "smlm": "smlm",
    "vicsek": "vicsek",
    "brain": "brain",
    "brain-surrogate": "brain",
}

# paper-scale default counts per generator
DEFAULT_COUNTS = {"watts-strogatz": 350, "smlm": 10_000, "vicsek": 400, "brain-surrogate": 633}


# ---------------------------------------------------------------------------
# embeddings table


def write_embeddings(path, records):
    latent_dim = len(records[0].latent)
    label_keys = sorted({key for r in records for key in r.labels})
    columns = [f"z{i}" for i in range(latent_dim)] + label_keys
    lines = [",".join(columns)]
    for r in records:
        cells = ["%.17g" % v for v in r.latent]
        for key in label_keys:
            value = r.labels.get(key, "")
            if isinstance(value, str):
                cells.append(value)
            elif isinstance(value, (int, np.integer)) and not isinstance(value, bool):
                cells.append(str(int(value)))
            else:
                cells.append("%.17g" % float(value))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_cell(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_embeddings(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ContractError(f"{path} is empty")
    columns = lines[0].split(",")
    latent_cols = [c for c in columns if c.startswith("z") and c[1:].isdigit()]
    label_cols = [c for c in columns if c not in latent_cols]
    records = []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        row = dict(zip(columns, cells))
        latent = np.array([float(row[c]) for c in latent_cols])
        labels = {c: _parse_cell(row[c]) for c in label_cols if row[c] != ""}
        records.append(EmbeddingRecord(latent=latent, labels=labels))
    return records


# ---------------------------------------------------------------------------
# manifests


def write_manifest(out_dir, command, argv, seed=None, config=None, inputs=(), outputs=(), duration=None):
    manifest = {
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "duration_s": duration,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def _scaled(count, scale):
    return max(1, round(count * scale))


def cmd_generate(args, argv):
    start = time.perf_counter()
    out = _out_dir(args)
    count = args.count if args.count is not None else DEFAULT_COUNTS[args.preset]
    count = _scaled(count, args.scale)
    if args.preset == "watts-strogatz":
        dataset = watts_strogatz_dataset(count, seed=args.seed)
    elif args.preset == "smlm":
        params = SMLMParams(noise_rate=args.noise_rate)
        dataset = smlm_dataset(count, seed=args.seed, params=params)
    elif args.preset == "vicsek":
        sims = _scaled(args.sims, args.scale)
        dataset = vicsek_dataset(
            sims,
            seed=args.seed,
            total_steps=args.steps,
            analyzed_steps=args.analyzed,
        )
    else:  # brain-surrogate
        subjects = _scaled(args.subjects, args.scale)
        dataset = brain_surrogate(subjects, seed=args.seed, out_dir=out)
    path = out / "dataset.jsonl"
    save_dataset(dataset, path)
    write_manifest(
        out, "generate", argv, seed=args.seed,
        config={"preset": args.preset, "count": count, "scale": args.scale},
        outputs=[path], duration=time.perf_counter() - start,
    )
    print(f"wrote {path} ({len(dataset)} graphs)")


def _load_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _coerce_config_value(key, text):
    field = TrainConfig.__dataclass_fields__.get(key)
    if field is None:
        raise ConfigError(f"unknown config key '{key}'")
    if key in ("pool_sizes", "thresholds"):
        return tuple(float(v) if key == "thresholds" else int(v) for v in text.split(","))
    kind = field.type
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def _build_train_config(args):
    if args.preset is not None:
        cfg = preset_config(args.preset)
    else:
        cfg = TrainConfig()
    if args.config is not None:
        file_values = _load_config_file(args.config)
        cfg = replace(
            cfg, **{k: _coerce_config_value(k, v) for k, v in file_values.items()}
        )
    overrides = {}
    for key in ("epochs", "batch_size", "lr", "alpha", "gamma", "beta", "seed"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return replace(cfg, **overrides).validate()


def cmd_train(args, argv):
    start = time.perf_counter()
    out = _out_dir(args)
    cfg = _build_train_config(args)
    dataset = load_dataset(args.dataset)
    params, trace = train(dataset, cfg)
    checkpoint = out / "checkpoint.npz"
    save_checkpoint(checkpoint, params, cfg)
    log_path = out / "loss_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        for record in trace:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    write_manifest(
        out, "train", argv, seed=cfg.seed, config=cfg.to_dict(),
        inputs=[args.dataset], outputs=[checkpoint, log_path],
        duration=time.perf_counter() - start,
    )
    print(f"wrote {checkpoint} ({cfg.epochs} epochs)")


def cmd_embed(args, argv):
    start = time.perf_counter()
    out = _out_dir(args)
    params, cfg = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    records = embed(dataset, params, cfg, average_by=args.average_by)
    path = out / "embeddings.csv"
    write_embeddings(path, records)
    write_manifest(
        out, "embed", argv, seed=cfg.seed, config={"average_by": args.average_by},
        inputs=[args.dataset, args.checkpoint], outputs=[path],
        duration=time.perf_counter() - start,
    )
    print(f"wrote {path} ({len(records)} records)")


def cmd_evaluate(args, argv):
    start = time.perf_counter()
    out = _out_dir(args)
    records = read_embeddings(args.embeddings)
    report = evaluate(records, args.preset)
    metrics_path = out / "metrics.json"
    metrics_path.write_text(report.to_json_line() + "\n", encoding="utf-8")
    outputs = [metrics_path]
    for name, roc in (("roc_pc.csv", report.roc_pc), ("roc_full.csv", report.roc_full)):
        if roc is not None:
            path = out / name
            lines = ["fpr,tpr"] + ["%.17g,%.17g" % (a, b) for a, b in roc]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            outputs.append(path)
    write_manifest(
        out, "evaluate", argv, config={"preset": args.preset},
        inputs=[args.embeddings], outputs=outputs,
        duration=time.perf_counter() - start,
    )
    print(report.to_json_line())


def cmd_plot(args, argv):
    start = time.perf_counter()
    out = _out_dir(args)
    records = read_embeddings(args.embeddings)
    class_key, continuous_key = PRESET_STYLES[args.preset]
    svg = plot_embeddings(records, class_key=class_key, continuous_key=continuous_key)
    path = out / "scatter.svg"
    path.write_text(svg, encoding="utf-8")
    write_manifest(
        out, "plot", argv, config={"preset": args.preset},
        inputs=[args.embeddings], outputs=[path],
        duration=time.perf_counter() - start,
    )
    print(f"wrote {path}")


def cmd_pipeline(args, argv):
    out = _out_dir(args)
    eval_preset = EVAL_PRESET_OF[args.preset]
    gen_argv = ["generate", args.preset, "--seed", str(args.seed),
                "--scale", str(args.scale), "--out", str(out / "data")]
    if args.count is not None:
        gen_argv += ["--count", str(args.count)]
    if args.preset == "vicsek":
        gen_argv += ["--sims", str(args.sims), "--steps", str(args.steps),
                     "--analyzed", str(args.analyzed)]
    if args.preset == "brain-surrogate":
        gen_argv += ["--subjects", str(args.subjects)]
    run(gen_argv)
    train_argv = ["train", "--dataset", str(out / "data" / "dataset.jsonl"),
                  "--preset", eval_preset, "--seed", str(args.seed),
                  "--out", str(out / "train")]
    if args.epochs is not None:
        train_argv += ["--epochs", str(args.epochs)]
    run(train_argv)
    embed_argv = ["embed", "--dataset", str(out / "data" / "dataset.jsonl"),
                  "--checkpoint", str(out / "train" / "checkpoint.npz"),
                  "--out", str(out / "embed")]
    if args.preset == "vicsek":
        embed_argv += ["--average-by", "sim_id"]
    run(embed_argv)
    run(["evaluate", "--embeddings", str(out / "embed" / "embeddings.csv"),
         "--preset", eval_preset, "--out", str(out / "eval")])
    run(["plot", "--embeddings", str(out / "embed" / "embeddings.csv"),
         "--preset", eval_preset, "--out", str(out / "plot")])


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    stored = manifest.get("argv")
    if not stored:
        raise ConfigError(f"{args.manifest} holds no argv to replay")
    run(stored)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gaudi",
        description="Hierarchical graph autoencoder: data generation, training, "
        "embedding, evaluation, plotting.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a dataset")
    p.add_argument("preset", choices=GENERATOR_CHOICES)
    p.add_argument("--count", type=int, default=None, help="graphs/samples to generate")
    p.add_argument("--sims", type=int, default=400, help="vicsek: simulations")
    p.add_argument("--steps", type=int, default=8000, help="vicsek: total steps")
    p.add_argument("--analyzed", type=int, default=1000, help="vicsek: analyzed tail")
    p.add_argument("--subjects", type=int, default=633, help="brain-surrogate: cohort size")
    p.add_argument("--noise-rate", type=float, default=10.0, help="smlm: Poisson background mean")
    p.add_argument("--scale", type=float, default=1.0, help="scale factor on counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="embed a dataset with a checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--average-by", dest="average_by", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", help="compute latent-space metrics")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--preset", choices=sorted(set(EVAL_PRESET_OF.values())), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="SVG scatter of the latent PCA plane")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--preset", choices=sorted(PRESET_STYLES), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("pipeline", help="run generate/train/embed/evaluate/plot")
    p.add_argument("preset", choices=GENERATOR_CHOICES)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--sims", type=int, default=400)
    p.add_argument("--steps", type=int, default=8000)
    p.add_argument("--analyzed", type=int, default=1000)
    p.add_argument("--subjects", type=int, default=633)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("replay", help="re-run the command stored in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def run(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.func(args, argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        run(argv)
    except GaudiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
