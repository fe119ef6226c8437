"""Command-line interface.

Subcommands:
    gen-data    build a synthetic dataset from a YAML config
    train-ocr   train the recognizer on vocabulary renders
    eval        precision/recall/F1 between word-list files
    train       train the diffusion model from a YAML config
    evaluate    sample and score a trained checkpoint
    ablate      run the variant grid
    bpe-study   split-word vs whole-word generation accuracy
    viz-attn    attention heatmap overlays for one prompt
    sample      generate one image from a prompt
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from glyphgen.dataforge.dataset import DatasetConfig, build_dataset
from glyphgen.ocr.metrics import eval_ocr_metrics
from glyphgen.ocr.model import save_ocr
from glyphgen.ocr.train import OcrTrainConfig, train_ocr
from glyphgen.train_eval.ablation import VARIANTS, ablate, bpe_split_study
from glyphgen.train_eval.config import dataclass_from_dict, load_train_config
from glyphgen.train_eval.evaluation import evaluate
from glyphgen.train_eval.training import load_checkpoint, load_training_data, train
from glyphgen.train_eval.viz import viz_attention


def _load_yaml(path: str) -> dict:
    return yaml.safe_load(Path(path).read_text())


def _read_words(path: str) -> list[str]:
    return [w for w in Path(path).read_text().split() if w]


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = dataclass_from_dict(DatasetConfig, _load_yaml(args.config))
    if args.count is not None:
        cfg.count = args.count
    manifest = build_dataset(cfg, args.out, master_seed=args.seed)
    print(json.dumps(manifest.stats, indent=2, sort_keys=True))
    return 0


def cmd_train_ocr(args: argparse.Namespace) -> int:
    cfg = dataclass_from_dict(OcrTrainConfig, _load_yaml(args.config))
    model, log = train_ocr(cfg)
    save_ocr(model, args.out)
    print(f"saved {args.out}; held-out accuracy {log['final_val_accuracy']:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    m = eval_ocr_metrics(_read_words(args.detected), _read_words(args.truth))
    print(json.dumps({"precision": m.precision, "recall": m.recall, "f1": m.f1}, indent=2))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_train_config(args.config)
    ckpt_path, log = train(cfg)
    print(f"checkpoint: {ckpt_path}")
    if log:
        print(f"final losses: {json.dumps(log[-1], sort_keys=True)}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    prompts = [line.strip() for line in Path(args.prompts).read_text().splitlines() if line.strip()]
    report = evaluate(
        args.ckpt,
        prompts,
        seeds_per_prompt=args.seeds_per_prompt,
        eval_seed=args.seed,
        sample_steps=args.steps,
        out_dir=args.out,
    )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = load_train_config(args.config)
    prompts = [line.strip() for line in Path(args.prompts).read_text().splitlines() if line.strip()]
    report = ablate(
        cfg,
        variants=args.variants,
        seeds=args.seeds,
        prompts=prompts,
        seeds_per_prompt=args.seeds_per_prompt,
        eval_seed=args.eval_seed,
        sample_steps=args.steps,
        out_dir=args.out,
    )
    for name, row in report["variants"].items():
        print(f"{name}: median F1 {row['median_f1']:.4f}")
    return 0


def cmd_bpe_study(args: argparse.Namespace) -> int:
    bundle = load_checkpoint(args.ckpt)
    if args.s1 and args.s2:
        s1, s2 = _read_words(args.s1), _read_words(args.s2)
    else:
        data = load_training_data(bundle.config.dataset_dir)
        words = sorted({w for p in data.prompts for w in p.glyph_words})
        s1 = [w for w in words if not bundle.vocab.is_whole(w)]
        s2 = [w for w in words if bundle.vocab.is_whole(w)]
    acc1, acc2 = bpe_split_study(
        bundle, s1, s2, seeds_per_word=args.seeds_per_word,
        eval_seed=args.seed, sample_steps=args.steps,
    )
    print(json.dumps({"acc_split_S1": acc1, "acc_whole_S2": acc2, "s1": s1, "s2": s2}, indent=2))
    return 0


def cmd_viz_attn(args: argparse.Namespace) -> int:
    paths = viz_attention(args.ckpt, args.prompt, args.seed, args.out, sample_steps=args.steps)
    print("\n".join(paths))
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    import torch

    from glyphgen.diffusion.sampler import sample as run_sampler
    from glyphgen.train_eval.evaluation import encode_prompt, save_grid

    bundle = load_checkpoint(args.ckpt)
    _, _, emb = encode_prompt(bundle, args.prompt)
    with torch.no_grad():
        images, _ = run_sampler(
            bundle.unet,
            emb.rows,
            bundle.schedule,
            steps=args.steps,
            seed=args.seed,
            image_size=bundle.image_size,
            batch=args.batch,
            codec=bundle.codec,
        )
    save_grid(images, args.out, cols=args.batch, upscale=args.upscale)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyphgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="build a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None, help="override config count")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-ocr", help="train the recognizer")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="ocr_ckpt.pt")
    p.set_defaults(func=cmd_train_ocr)

    p = sub.add_parser("eval", help="metrics between detected/truth word files")
    p.add_argument("--detected", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train", help="train the diffusion model")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="sample and score a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompts", required=True, help="file with one prompt per line")
    p.add_argument("--seeds-per-prompt", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train/evaluate the variant grid")
    p.add_argument("--config", required=True)
    p.add_argument("--variants", nargs="+", default=list(VARIANTS), choices=list(VARIANTS))
    p.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    p.add_argument("--prompts", required=True)
    p.add_argument("--seeds-per-prompt", type=int, default=4)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bpe-study", help="split vs whole word accuracy")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--s1", default=None, help="file of BPE-split words")
    p.add_argument("--s2", default=None, help="file of kept-whole words")
    p.add_argument("--seeds-per-word", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_bpe_study)

    p = sub.add_parser("viz-attn", help="attention heatmaps for a prompt")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="viz")
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_viz_attn)

    p = sub.add_parser("sample", help="generate images for a prompt")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--upscale", type=int, default=4)
    p.set_defaults(func=cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
