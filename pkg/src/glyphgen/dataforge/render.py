"""Glyph word rendering and exact segmentation masks.

Words are rasterized with PIL onto a black canvas with white ink, centered,
so downstream masks can be cut from the ink itself instead of a detector.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from glyphgen.errors import (
    CanvasOverflow,
    EmptyMask,
    NonEmptyWordRequired,
    UnsupportedGlyph,
)

_DEJAVU_DIR = Path("/usr/share/fonts/truetype/dejavu")

# font_id -> ttf path; extendable via register_font()
_FONT_PATHS: dict[str, Path] = {
    "sans": _DEJAVU_DIR / "DejaVuSans.ttf",
    "sans-bold": _DEJAVU_DIR / "DejaVuSans-Bold.ttf",
    "serif": _DEJAVU_DIR / "DejaVuSerif.ttf",
    "serif-bold": _DEJAVU_DIR / "DejaVuSerif-Bold.ttf",
    "mono": _DEJAVU_DIR / "DejaVuSansMono.ttf",
    "mono-bold": _DEJAVU_DIR / "DejaVuSansMono-Bold.ttf",
}

DEFAULT_FONT = "sans"

# Codepoints the registered fonts are known to cover. The double quote is
# excluded on purpose: it is the glyph-word marker in captions.
_SUPPORTED_CHARS = set(string.ascii_letters + string.digits + "!#$%&'()*+,-./:;=?@_")

_font_cache: dict[tuple[str, int], ImageFont.FreeTypeFont] = {}


def available_fonts() -> list[str]:
    return sorted(_FONT_PATHS)


def register_font(font_id: str, path: str | Path) -> None:
    """Add a font to the registry. Coverage checks still use the ASCII set."""
    _FONT_PATHS[font_id] = Path(path)


def _load_font(font_id: str, point_size: int) -> ImageFont.FreeTypeFont:
    key = (font_id, point_size)
    if key not in _font_cache:
        if font_id not in _FONT_PATHS:
            raise UnsupportedGlyph(f"unknown font_id {font_id!r}")
        _font_cache[key] = ImageFont.truetype(str(_FONT_PATHS[font_id]), point_size)
    return _font_cache[key]


@dataclass
class GlyphImage:
    """A rendered glyph word: grayscale ink in [0, 1] on a zero background."""

    pixels: np.ndarray  # (h, w) float32 in [0, 1]
    word: str
    font_id: str
    point_size: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass
class SegMask:
    """Binary footprint of one word inside a parent image."""

    mask: np.ndarray  # (h, w) bool
    bbox: tuple[int, int, int, int]  # (x, y, w, h)
    area_fraction: float = field(default=0.0)

    def __post_init__(self):
        if not self.mask.any():
            raise EmptyMask("mask has no set pixels")
        self.area_fraction = float(self.mask.sum()) / self.mask.size

    def intersects(self, other: "SegMask") -> bool:
        return bool((self.mask & other.mask).any())


def render_word(
    word: str,
    font_id: str = DEFAULT_FONT,
    point_size: int = 24,
    canvas: tuple[int, int] = (48, 192),
) -> GlyphImage:
    """Render `word` centered on a (h, w) canvas, background 0 and ink near 1.

    Deterministic: identical inputs produce bit-identical rasters.
    """
    if not word:
        raise NonEmptyWordRequired("cannot render an empty word")
    unsupported = [c for c in word if c not in _SUPPORTED_CHARS]
    if unsupported:
        raise UnsupportedGlyph(f"unsupported codepoints in {word!r}: {unsupported}")

    font = _load_font(font_id, point_size)
    h, w = canvas
    left, top, right, bottom = font.getbbox(word)
    text_w, text_h = right - left, bottom - top
    if text_w > w or text_h > h:
        raise CanvasOverflow(
            f"{word!r} at {point_size}pt needs {text_w}x{text_h}, canvas is {w}x{h}"
        )

    img = Image.new("L", (w, h), color=0)
    draw = ImageDraw.Draw(img)
    x = (w - text_w) // 2 - left
    y = (h - text_h) // 2 - top
    draw.text((x, y), word, font=font, fill=255)
    pixels = np.asarray(img, dtype=np.float32) / 255.0
    return GlyphImage(pixels=pixels, word=word, font_id=font_id, point_size=point_size)


def fit_point_size(
    word: str,
    font_id: str,
    canvas: tuple[int, int],
    margin: int = 1,
    max_size: int = 72,
) -> int:
    """Largest point size whose rendered bbox fits the canvas minus margin."""
    h, w = canvas
    best = 0
    for size in range(4, max_size + 1):
        font = _load_font(font_id, size)
        left, top, right, bottom = font.getbbox(word)
        if right - left <= w - 2 * margin and bottom - top <= h - 2 * margin:
            best = size
        else:
            break
    if best == 0:
        raise CanvasOverflow(f"{word!r} does not fit {canvas} at any size >= 4")
    return best


def mask_from_render(g: GlyphImage, threshold: float = 0.5) -> SegMask:
    """Binarize a render at `threshold`; bbox is the tight box of set pixels."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    mask = g.pixels >= threshold
    if not mask.any():
        raise EmptyMask(f"no pixel of {g.word!r} reaches threshold {threshold}")
    ys, xs = np.nonzero(mask)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return SegMask(mask=mask, bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
