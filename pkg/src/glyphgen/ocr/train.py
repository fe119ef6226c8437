"""Recognizer training on synthetic word renders.

Renders are augmented toward the conditions the recognizer meets later:
arbitrary gray polarity (dark-on-light and light-on-dark), low-resolution
blur from the scene scale, and mild noise. Geometry is always squashed to
the fixed 32x128 input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from glyphgen.dataforge.render import available_fonts, render_word
from glyphgen.errors import CoverageError, Diverged
from glyphgen.ocr.alphabet import Alphabet
from glyphgen.ocr.ctc import ctc_loss_batch, greedy_decode
from glyphgen.ocr.model import OCRModel, resize_to_input


@dataclass
class OcrTrainConfig:
    vocabulary: list[str]
    fonts: list[str] = field(default_factory=lambda: ["sans", "sans-bold", "serif", "serif-bold", "mono"])
    point_sizes: tuple[int, int] = (12, 32)
    renders_per_word: int = 40
    val_fraction: float = 0.15
    epochs: int = 30
    batch_size: int = 32
    lr: float = 2e-3
    seed: int = 0
    augment: bool = True
    hidden: int = 64
    target_accuracy: float = 0.98  # early stop once validation reaches this

    def __post_init__(self):
        if not self.vocabulary:
            raise CoverageError("empty vocabulary")
        unknown = set(self.fonts) - set(available_fonts())
        if unknown:
            raise ValueError(f"unknown fonts: {sorted(unknown)}")


def _augmented_render(word: str, font: str, point: int, rng: np.random.Generator, augment: bool) -> np.ndarray:
    glyph = render_word(word, font, point, canvas=_auto_canvas(word, font, point))
    ink_alpha = glyph.pixels
    if not augment:
        return ink_alpha.astype(np.float32)

    # random padding around the word: recognition later sees loose crops and
    # sliding windows, not just tight renders
    h, w = ink_alpha.shape
    ph = int(h * rng.uniform(0.0, 1.2))
    pw = int(w * rng.uniform(0.0, 0.8))
    alpha = np.zeros((h + ph, w + pw), dtype=np.float32)
    oy = int(rng.integers(0, ph + 1))
    ox = int(rng.integers(0, pw + 1))
    alpha[oy : oy + h, ox : ox + w] = ink_alpha

    bg = rng.uniform(0.0, 1.0)
    # keep at least 0.35 ink/background contrast in either polarity
    ink = rng.uniform(bg + 0.35, 1.0) if bg < 0.5 else rng.uniform(0.0, bg - 0.35)
    img = bg + (ink - bg) * alpha
    img = img + rng.normal(0.0, rng.uniform(0.0, 0.05), size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    # simulate scene-scale text: shrink, then let resize_to_input stretch
    factor = rng.uniform(0.4, 1.0)
    if factor < 0.95:
        from PIL import Image

        hh, ww = img.shape
        small = Image.fromarray((img * 255).astype(np.uint8)).resize(
            (max(4, int(ww * factor)), max(4, int(hh * factor))), Image.BILINEAR
        )
        img = np.asarray(small, dtype=np.float32) / 255.0
    return img.astype(np.float32)


def _auto_canvas(word: str, font: str, point: int) -> tuple[int, int]:
    from glyphgen.dataforge.render import _load_font

    left, top, right, bottom = _load_font(font, point).getbbox(word)
    return (bottom - top + 4, right - left + 4)


def build_render_set(cfg: OcrTrainConfig, rng: np.random.Generator) -> tuple[torch.Tensor, list[str]]:
    """Stack of (N, 1, 32, 128) inputs and their labels."""
    images, labels = [], []
    for word in cfg.vocabulary:
        for _ in range(cfg.renders_per_word):
            font = str(rng.choice(cfg.fonts))
            point = int(rng.integers(cfg.point_sizes[0], cfg.point_sizes[1] + 1))
            img = _augmented_render(word, font, point, rng, cfg.augment)
            t = torch.from_numpy(img)[None, None]
            images.append(resize_to_input(t)[0])
            labels.append(word)
    return torch.stack(images), labels


def exact_word_accuracy(m: OCRModel, images: torch.Tensor, labels: list[str]) -> float:
    m.eval()
    hits = 0
    with torch.no_grad():
        log_probs = m(images)
    for lp, label in zip(log_probs, labels):
        text, _ = greedy_decode(lp, m.alphabet)
        hits += int(text == label)
    return hits / len(labels)


def train_ocr(cfg: OcrTrainConfig) -> tuple[OCRModel, dict]:
    """Train a recognizer on renders of the vocabulary.

    The alphabet is derived from the vocabulary, which guarantees symbol
    coverage by construction; an empty vocabulary raises CoverageError.
    Returns the trained model and a training log.
    """
    alphabet = Alphabet.from_vocabulary(cfg.vocabulary)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    images, labels = build_render_set(cfg, rng)
    n = len(labels)
    order = rng.permutation(n)
    n_val = max(1, int(n * cfg.val_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    val_images, val_labels = images[val_idx], [labels[i] for i in val_idx]
    train_images, train_labels = images[train_idx], [labels[i] for i in train_idx]

    model = OCRModel(alphabet, hidden=cfg.hidden)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    log: dict = {"epochs": [], "val_accuracy": []}

    for epoch in range(cfg.epochs):
        model.train()
        perm = torch.from_numpy(rng.permutation(len(train_labels)))
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch = train_images[idx]
            targets = [train_labels[i] for i in idx.tolist()]
            log_probs = model(batch)
            loss = ctc_loss_batch(log_probs, targets, alphabet).mean()
            if not torch.isfinite(loss):
                raise Diverged(f"non-finite CTC loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += loss.item()
            batches += 1
        val_acc = exact_word_accuracy(model, val_images, val_labels)
        log["epochs"].append({"epoch": epoch, "ctc": epoch_loss / max(batches, 1)})
        log["val_accuracy"].append(val_acc)
        if val_acc >= cfg.target_accuracy:
            break

    model.trained = True
    log["final_val_accuracy"] = log["val_accuracy"][-1]
    return model, log
