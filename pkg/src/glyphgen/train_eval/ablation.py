"""Ablation harness: train/evaluate variant grids and the BPE split study.

Variants mirror the experimental structure: the full objective, granularity
swaps (char+bpe, bpe), single-loss removals, and the plain-MSE BPE baseline.
Each variant trains on a shared seed set; reports carry per-seed values and
medians, since desk-scale runs are noisy.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import replace
from pathlib import Path

import torch

from glyphgen.diffusion.sampler import sample
from glyphgen.errors import ConfigError
from glyphgen.ocr.model import recognize
from glyphgen.text_encoder.tokenizer import BPE, CHAR_BPE
from glyphgen.train_eval.config import TrainConfig
from glyphgen.train_eval.evaluation import EvalReport, _require_ocr, encode_prompt, evaluate
from glyphgen.train_eval.training import TrainedBundle, load_checkpoint, train

VARIANTS = ("full", "char+bpe", "bpe", "no-attn", "no-loc", "no-ocr", "mse-bpe")


def apply_variant(cfg: TrainConfig, name: str) -> TrainConfig:
    if name == "full":
        return cfg
    if name == "char+bpe":
        return replace(cfg, strategy=CHAR_BPE)
    if name == "bpe":
        return replace(cfg, strategy=BPE)
    if name == "no-attn":
        return replace(cfg, losses=replace(cfg.losses, enable_attn=False))
    if name == "no-loc":
        return replace(cfg, losses=replace(cfg.losses, enable_loc=False))
    if name == "no-ocr":
        return replace(cfg, losses=replace(cfg.losses, enable_ocr=False))
    if name == "mse-bpe":
        return replace(
            cfg,
            strategy=BPE,
            losses=replace(cfg.losses, enable_attn=False, enable_loc=False, enable_ocr=False),
        )
    raise ConfigError(f"unknown variant {name!r}; choose from {VARIANTS}")


def _median(values: list[float]) -> float:
    return float(statistics.median(values))


def ablate(
    base_cfg: TrainConfig,
    variants: list[str],
    seeds: list[int],
    prompts: list[str],
    seeds_per_prompt: int = 4,
    eval_seed: int = 0,
    sample_steps: int | None = None,
    out_dir: str | Path | None = None,
) -> dict:
    """Train and evaluate every (variant, seed) pair; returns the report dict.

    Variants run sequentially here; each (variant, seed) run is independent
    and could equally run as its own process.
    """
    for name in variants:
        apply_variant(base_cfg, name)  # validate names before burning compute

    out_dir = Path(out_dir) if out_dir else Path(base_cfg.out_dir) / "ablation"
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: dict[str, dict] = {}
    for name in variants:
        per_seed = []
        for seed in seeds:
            run_dir = out_dir / name.replace("+", "_") / f"seed{seed}"
            cfg = apply_variant(replace(base_cfg, seed=seed, out_dir=str(run_dir)), name)
            ckpt_path, _ = train(cfg)
            report: EvalReport = evaluate(
                ckpt_path,
                prompts,
                seeds_per_prompt=seeds_per_prompt,
                eval_seed=eval_seed,
                sample_steps=sample_steps,
                out_dir=run_dir,
            )
            per_seed.append(
                {
                    "seed": seed,
                    "precision": report.metrics.precision,
                    "recall": report.metrics.recall,
                    "f1": report.metrics.f1,
                    "localization": report.localization,
                    "localization_baseline": report.localization_baseline,
                }
            )
        rows[name] = {
            "per_seed": per_seed,
            "median_precision": _median([r["precision"] for r in per_seed]),
            "median_recall": _median([r["recall"] for r in per_seed]),
            "median_f1": _median([r["f1"] for r in per_seed]),
            "median_localization": (
                _median([r["localization"] for r in per_seed])
                if all(r["localization"] is not None for r in per_seed)
                else None
            ),
        }

    report = {"seeds": seeds, "variants": rows}
    _write_report(report, out_dir)
    return report


def _write_report(report: dict, out_dir: Path) -> None:
    (out_dir / "ablation_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with (out_dir / "ablation_report.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["variant", "seed", "precision", "recall", "f1", "localization"])
        for name, row in report["variants"].items():
            for r in row["per_seed"]:
                writer.writerow(
                    [name, r["seed"], f"{r['precision']:.4f}", f"{r['recall']:.4f}",
                     f"{r['f1']:.4f}", "" if r["localization"] is None else f"{r['localization']:.4f}"]
                )
    lines = ["variant            med_P   med_R   med_F1  med_loc"]
    for name, row in report["variants"].items():
        loc = row["median_localization"]
        lines.append(
            f"{name:<18} {row['median_precision']:.3f}   {row['median_recall']:.3f}   "
            f"{row['median_f1']:.3f}   {'-' if loc is None else f'{loc:.3f}'}"
        )
    (out_dir / "ablation_summary.txt").write_text("\n".join(lines) + "\n")


def bpe_split_study(
    ckpt: str | Path | TrainedBundle,
    s1_words: list[str],
    s2_words: list[str],
    seeds_per_word: int = 4,
    eval_seed: int = 0,
    sample_steps: int | None = None,
    template: str = 'a sign with the word "{word}" painted on it',
) -> tuple[float, float]:
    """Word-level generation accuracy for BPE-split (S1) vs kept-whole (S2)
    word sets. Returns (acc_S1, acc_S2)."""
    if not s1_words or not s2_words:
        raise ValueError("both word sets must be non-empty")
    bundle = ckpt if isinstance(ckpt, TrainedBundle) else load_checkpoint(ckpt)
    ocr_model = _require_ocr(bundle)

    def word_accuracy(words: list[str], salt: int) -> float:
        hits = total = 0
        with torch.no_grad():
            for j, word in enumerate(words):
                _, _, emb = encode_prompt(bundle, template.format(word=word))
                images, _ = sample(
                    bundle.unet,
                    emb.rows,
                    bundle.schedule,
                    steps=sample_steps,
                    seed=eval_seed * 60013 + salt * 1009 + j,
                    image_size=bundle.image_size,
                    batch=seeds_per_word,
                    codec=bundle.codec,
                )
                for img in images:
                    text, _ = recognize(ocr_model, img)
                    hits += int(text == word)
                    total += 1
        return hits / total

    return word_accuracy(s1_words, 1), word_accuracy(s2_words, 2)
