"""Scene composition: glyph placements over procedural backgrounds.

A sample is a background raster with one or more glyph words alpha-composited
onto it, a caption spliced from a template, and one exact mask per word.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from glyphgen.dataforge.render import GlyphImage, SegMask
from glyphgen.errors import EmptyMask, OutOfBounds, OverlapError

# Captions mark glyph words with double quotes; that convention is what
# prompt parsing keys on.
CAPTION_TEMPLATES: list[str] = [
    "a sign with the word {words} painted on it",
    "a poster showing the word {words}",
    "a wall with {words} written on it",
    "a card that says {words}",
    "a banner displaying the word {words}",
    "a chalkboard with the word {words} on it",
    "a sticker printed with {words}",
    "a label reading {words}",
    "a screen showing the text {words}",
]

TEXT_FREE_TEMPLATES: list[str] = [
    "a plain painted wall",
    "an empty poster",
    "a blank wooden board",
    "a clear evening sky",
]

BACKGROUND_KINDS = ("flat", "hgrad", "vgrad", "noise")


def splice_words(words: list[str]) -> str:
    """Join words for a caption slot, each in double quotes: '"a" and "b"'."""
    quoted = [f'"{w}"' for w in words]
    if len(quoted) == 1:
        return quoted[0]
    return ", ".join(quoted[:-1]) + " and " + quoted[-1]


def make_background(kind: str, size: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Procedural (h, w, 3) background in [0, 1]: flat, gradients, or noise."""
    h, w = size
    if kind == "flat":
        color = rng.uniform(0.0, 1.0, size=3)
        return np.broadcast_to(color, (h, w, 3)).astype(np.float32).copy()
    if kind in ("hgrad", "vgrad"):
        c0 = rng.uniform(0.0, 1.0, size=3)
        c1 = rng.uniform(0.0, 1.0, size=3)
        n = w if kind == "hgrad" else h
        ramp = np.linspace(0.0, 1.0, n)[:, None] * (c1 - c0)[None, :] + c0[None, :]
        if kind == "hgrad":
            return np.broadcast_to(ramp[None, :, :], (h, w, 3)).astype(np.float32).copy()
        return np.broadcast_to(ramp[:, None, :], (h, w, 3)).astype(np.float32).copy()
    if kind == "noise":
        base = rng.uniform(0.2, 0.8, size=3)
        tex = rng.normal(0.0, 0.08, size=(h, w, 1))
        return np.clip(base[None, None, :] + tex, 0.0, 1.0).astype(np.float32)
    raise ValueError(f"unknown background kind {kind!r}")


@dataclass
class DataSample:
    """One training unit: image, caption, glyph words and index-aligned masks."""

    image: np.ndarray  # (h, w, 3) float32 in [0, 1]
    caption: str
    glyph_words: list[str]
    masks: list[SegMask]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.glyph_words) != len(self.masks):
            raise ValueError("glyph_words and masks must be index-aligned")
        for i in range(len(self.masks)):
            for j in range(i + 1, len(self.masks)):
                if self.masks[i].intersects(self.masks[j]):
                    raise OverlapError(
                        f"masks of {self.glyph_words[i]!r} and {self.glyph_words[j]!r} overlap"
                    )


def _scale_glyph(pixels: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1.0:
        return pixels
    h, w = pixels.shape
    nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
    img = Image.fromarray((pixels * 255.0).round().astype(np.uint8), mode="L")
    img = img.resize((nw, nh), resample=Image.BILINEAR)
    return np.asarray(img, dtype=np.float32) / 255.0


def compose_scene(
    background: np.ndarray,
    placements: list[tuple[GlyphImage, tuple[int, int], float]],
    caption_template: str,
    rng_seed: int,
    mask_threshold: float = 0.5,
    provenance: dict | None = None,
) -> DataSample:
    """Composite scaled glyphs onto `background` at (x, y) positions.

    Ink color per placement is drawn from a generator seeded by `rng_seed`
    and contrasts with the local background. Masks are cut from the
    compositing alpha at `mask_threshold`.
    """
    h, w, _ = background.shape
    image = background.astype(np.float32).copy()
    rng = np.random.default_rng(rng_seed)

    words: list[str] = []
    masks: list[SegMask] = []
    for glyph, (x, y), scale in placements:
        alpha = _scale_glyph(glyph.pixels, scale)
        gh, gw = alpha.shape
        if x < 0 or y < 0 or x + gw > w or y + gh > h:
            raise OutOfBounds(
                f"{glyph.word!r} at ({x},{y}) size {gw}x{gh} exceeds {w}x{h} image"
            )

        region = image[y : y + gh, x : x + gw, :]
        bg_lum = float(region.mean())
        if bg_lum > 0.5:
            ink = rng.uniform(0.0, 0.15, size=3)
        else:
            ink = rng.uniform(0.85, 1.0, size=3)
        region[...] = alpha[:, :, None] * ink[None, None, :] + (1.0 - alpha[:, :, None]) * region

        local = alpha >= mask_threshold
        if not local.any():
            raise EmptyMask(f"{glyph.word!r} leaves no mask pixels after scaling")
        full = np.zeros((h, w), dtype=bool)
        full[y : y + gh, x : x + gw] = local
        ys, xs = np.nonzero(full)
        bbox = (int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
        new_mask = SegMask(mask=full, bbox=bbox)
        for prev, prev_word in zip(masks, words):
            if new_mask.intersects(prev):
                raise OverlapError(f"{glyph.word!r} overlaps {prev_word!r}")
        masks.append(new_mask)
        words.append(glyph.word)

    if words:
        caption = caption_template.format(words=splice_words(words))
    else:
        if "{words}" in caption_template:
            raise ValueError("text-free sample needs a template without a {words} slot")
        caption = caption_template

    return DataSample(
        image=np.clip(image, 0.0, 1.0),
        caption=caption,
        glyph_words=words,
        masks=masks,
        provenance=dict(provenance or {}),
    )


@dataclass
class FilterRules:
    """Acceptance rules applied to composed samples."""

    min_side: int = 64
    min_text_area_fraction: float = 0.10
    min_border_margin_fraction: float = 0.10
    max_text_count: int = 5
    require_caption_match: bool = True

    def __post_init__(self):
        if not (0.0 < self.min_text_area_fraction < 1.0):
            raise ValueError("min_text_area_fraction must be in (0, 1)")
        if not (0.0 < self.min_border_margin_fraction < 1.0):
            raise ValueError("min_border_margin_fraction must be in (0, 1)")
        if self.max_text_count < 1:
            raise ValueError("max_text_count must be >= 1")


def filter_sample(s: DataSample, r: FilterRules) -> tuple[bool, list[str]]:
    """Pure predicate: (accepted, reasons). Accepted iff reasons is empty."""
    reasons: list[str] = []
    h, w, _ = s.image.shape

    if min(h, w) < r.min_side:
        reasons.append(f"min_side: image {w}x{h} below {r.min_side}")

    for word, m in zip(s.glyph_words, s.masks):
        if m.area_fraction < r.min_text_area_fraction:
            reasons.append(
                f"text_area: {word!r} covers {m.area_fraction:.4f} < {r.min_text_area_fraction}"
            )

    mx, my = r.min_border_margin_fraction * w, r.min_border_margin_fraction * h
    for word, m in zip(s.glyph_words, s.masks):
        x, y, bw, bh = m.bbox
        if x < mx or y < my or x + bw > w - mx or y + bh > h - my:
            reasons.append(f"border_margin: {word!r} bbox {m.bbox} too close to border")

    if len(s.glyph_words) > r.max_text_count:
        reasons.append(f"text_count: {len(s.glyph_words)} words exceed {r.max_text_count}")

    if r.require_caption_match and s.glyph_words:
        if not any(word in s.caption for word in s.glyph_words):
            reasons.append("caption_match: no glyph word appears in caption")

    return (not reasons, reasons)
