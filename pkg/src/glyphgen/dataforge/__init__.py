"""Synthetic text-in-scene data generation with exact per-word masks."""

from glyphgen.dataforge.compose import (
    BACKGROUND_KINDS,
    CAPTION_TEMPLATES,
    TEXT_FREE_TEMPLATES,
    DataSample,
    FilterRules,
    compose_scene,
    filter_sample,
    make_background,
    splice_words,
)
from glyphgen.dataforge.dataset import (
    DatasetConfig,
    DatasetManifest,
    build_dataset,
    generate_candidate,
    load_dataset,
    load_sample,
    rle_decode,
    rle_encode,
)
from glyphgen.dataforge.render import (
    DEFAULT_FONT,
    GlyphImage,
    SegMask,
    available_fonts,
    fit_point_size,
    mask_from_render,
    register_font,
    render_word,
)

__all__ = [
    "BACKGROUND_KINDS",
    "CAPTION_TEMPLATES",
    "TEXT_FREE_TEMPLATES",
    "DEFAULT_FONT",
    "DataSample",
    "DatasetConfig",
    "DatasetManifest",
    "FilterRules",
    "GlyphImage",
    "SegMask",
    "available_fonts",
    "build_dataset",
    "compose_scene",
    "filter_sample",
    "fit_point_size",
    "generate_candidate",
    "load_dataset",
    "load_sample",
    "make_background",
    "mask_from_render",
    "register_font",
    "render_word",
    "rle_decode",
    "rle_encode",
    "splice_words",
]
