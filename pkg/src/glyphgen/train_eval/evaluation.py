"""Evaluation: sample images per prompt, read them back, score localization.

OCR metrics are micro-averaged exact-match precision/recall/F1 between the
recognizer's detections on generated images and the prompts' glyph words.
Attention localization is measured at the final reverse step (t=1) on
dataset samples with known masks: the fraction of a glyph token's attention
mass falling inside its word's mask, against the mask-area-fraction uniform
baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from glyphgen.dataforge.compose import DataSample
from glyphgen.diffusion.sampler import sample
from glyphgen.diffusion.schedule import q_sample
from glyphgen.errors import MissingOCR, UntrainedModel
from glyphgen.glyph_losses import resize_mask_binary
from glyphgen.ocr.metrics import OcrMetrics, match_count
from glyphgen.ocr.model import OCRModel, load_ocr, recognize
from glyphgen.text_encoder.encoder import encode
from glyphgen.text_encoder.prompts import parse_prompt
from glyphgen.text_encoder.tokenizer import tokenize
from glyphgen.train_eval.training import TrainedBundle, load_checkpoint, load_training_data


@dataclass
class EvalReport:
    metrics: OcrMetrics
    per_prompt: list[dict]
    localization: float | None
    localization_baseline: float | None
    sample_grid: str | None

    def to_dict(self) -> dict:
        return {
            "precision": self.metrics.precision,
            "recall": self.metrics.recall,
            "f1": self.metrics.f1,
            "localization": self.localization,
            "localization_baseline": self.localization_baseline,
            "per_prompt": self.per_prompt,
            "sample_grid": self.sample_grid,
        }


def _require_ocr(bundle: TrainedBundle) -> OCRModel:
    if bundle.ocr is not None:
        return bundle.ocr
    path = bundle.config.ocr_checkpoint
    if not path or not Path(path).exists():
        raise MissingOCR("evaluation needs a recognizer; set ocr_checkpoint in the config")
    return load_ocr(path)


def detect_words(ocr_model: OCRModel, image: torch.Tensor, min_confidence: float = 0.0) -> list[str]:
    """Sliding-window recognition without masks.

    The recognizer reads the whole image plus overlapping horizontal bands;
    the most confident non-empty read wins. Returns at most one word, which
    matches the one-word-per-scene data this harness generates.
    """
    if image.dim() == 3 and image.shape[0] in (1, 3):
        image = image.permute(1, 2, 0)
    h = image.shape[0]
    bands = [
        image,
        image[: h // 2],
        image[h // 4 : 3 * h // 4],
        image[h // 2 :],
        image[int(h * 0.2) : int(h * 0.8)],
    ]
    best: tuple[float, str] | None = None
    for band in bands:
        text, conf = recognize(ocr_model, band)
        if text and conf >= min_confidence:
            if best is None or conf > best[0]:
                best = (conf, text)
    return [best[1]] if best else []


def encode_prompt(bundle: TrainedBundle, prompt: str):
    spec = parse_prompt(prompt)
    seq = tokenize(spec, bundle.config.strategy, bundle.vocab, bundle.config.model.max_seq_len)
    emb = encode(spec, seq, bundle.ocr, bundle.projector, bundle.text_encoder, bundle.vocab)
    return spec, seq, emb


def localization_score(
    bundle: TrainedBundle,
    samples: list[DataSample],
    seed: int = 0,
    layers: list[str] | None = None,
) -> tuple[float | None, float | None]:
    """Mean in-mask attention mass per glyph token at t=1, plus the uniform
    baseline (mask area fraction at map resolution)."""
    text_samples = [s for s in samples if s.glyph_words]
    if not text_samples:
        return None, None
    g = torch.Generator().manual_seed(seed)
    scores, baselines = [], []
    with torch.no_grad():
        for s in text_samples:
            spec = parse_prompt(s.caption)
            seq = tokenize(spec, bundle.config.strategy, bundle.vocab, bundle.config.model.max_seq_len)
            emb = encode(spec, seq, bundle.ocr, bundle.projector, bundle.text_encoder, bundle.vocab)
            image = torch.from_numpy(s.image).permute(2, 0, 1)[None]
            z0 = bundle.codec.encode(image)
            eps = torch.randn(z0.shape, generator=g)
            z1 = q_sample(z0, 1, eps, bundle.schedule)
            _, maps = bundle.unet(
                z1, torch.tensor([1]), emb.rows[None], capture=True
            )
            sites = layers if layers is not None else maps.sites()
            for k, positions in enumerate(emb.glyph_rows):
                if not positions:
                    continue
                for site in sites:
                    res = maps.resolutions[site]
                    grid = maps.at(site, 0)  # (heads, HW, L)
                    word_map = grid[:, :, positions].mean(dim=(0, 2)).view(res)
                    mask = resize_mask_binary(s.masks[k], res)
                    total = float(word_map.sum())
                    if total <= 0 or mask.sum() == 0:
                        continue
                    scores.append(float((word_map * mask).sum()) / total)
                    baselines.append(float(mask.mean()))
    if not scores:
        return None, None
    return float(np.mean(scores)), float(np.mean(baselines))


def save_grid(images: torch.Tensor, path: str | Path, cols: int = 8, upscale: int = 4) -> str:
    """Tile (N, 3, H, W) images into one PNG."""
    n, _, h, w = images.shape
    cols = min(cols, n)
    rows = (n + cols - 1) // cols
    canvas = np.ones((rows * h, cols * w, 3), dtype=np.float32)
    for i in range(n):
        r, c = divmod(i, cols)
        canvas[r * h : (r + 1) * h, c * w : (c + 1) * w] = (
            images[i].permute(1, 2, 0).clamp(0, 1).numpy()
        )
    img = Image.fromarray((canvas * 255).round().astype(np.uint8))
    img = img.resize((img.width * upscale, img.height * upscale), Image.NEAREST)
    img.save(path, format="PNG")
    return str(path)


def evaluate(
    ckpt: str | Path | TrainedBundle,
    prompts: list[str],
    seeds_per_prompt: int = 4,
    eval_seed: int = 0,
    sample_steps: int | None = None,
    out_dir: str | Path | None = None,
    localization_samples: int = 16,
    min_confidence: float = 0.0,
) -> EvalReport:
    """Sample `seeds_per_prompt` images per prompt and score them.

    Prompts without glyph words contribute to the sample grid only. The
    localization score is computed on dataset samples with ground-truth
    masks when the training dataset is still present on disk.
    """
    bundle = ckpt if isinstance(ckpt, TrainedBundle) else load_checkpoint(ckpt)
    ocr_model = _require_ocr(bundle)
    bundle.unet.eval()
    bundle.text_encoder.eval()

    per_prompt: list[dict] = []
    matches = n_detected = n_truth = 0
    all_images: list[torch.Tensor] = []
    with torch.no_grad():
        for i, prompt in enumerate(prompts):
            spec, _, emb = encode_prompt(bundle, prompt)
            images, _ = sample(
                bundle.unet,
                emb.rows,
                bundle.schedule,
                steps=sample_steps,
                seed=eval_seed * 100003 + i,
                image_size=bundle.image_size,
                batch=seeds_per_prompt,
                codec=bundle.codec,
            )
            all_images.append(images)
            detections = [detect_words(ocr_model, img, min_confidence) for img in images]
            entry = {"prompt": prompt, "truth": spec.glyph_words, "detected": detections}
            per_prompt.append(entry)
            if spec.glyph_words:
                for det in detections:
                    matches += match_count(det, spec.glyph_words)
                    n_detected += len(det)
                    n_truth += len(spec.glyph_words)

    metrics = OcrMetrics.from_counts(matches, n_detected, n_truth)

    localization = baseline = None
    dataset_dir = Path(bundle.config.dataset_dir)
    if localization_samples and (dataset_dir / "manifest.json").exists():
        data = load_training_data(dataset_dir)
        subset = [s for s in data.samples if s.glyph_words][:localization_samples]
        localization, baseline = localization_score(
            bundle, subset, seed=eval_seed, layers=bundle.config.losses.attn_layers
        )

    grid_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        grid_path = save_grid(torch.cat(all_images), out_dir / "samples_grid.png")
        report_dict = EvalReport(metrics, per_prompt, localization, baseline, grid_path).to_dict()
        (out_dir / "eval_report.json").write_text(json.dumps(report_dict, indent=2, sort_keys=True) + "\n")

    return EvalReport(
        metrics=metrics,
        per_prompt=per_prompt,
        localization=localization,
        localization_baseline=baseline,
        sample_grid=grid_path,
    )
