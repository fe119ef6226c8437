"""Prompt parsing, tokenization strategies, and the conditioning encoder."""

from glyphgen.text_encoder.bpe import GLYPH, PAD, UNK, Vocabulary, train_bpe
from glyphgen.text_encoder.encoder import (
    EMBED_CANVAS,
    EMBED_FONT,
    GlyphProjector,
    TextEmbedding,
    TextEncoderModel,
    embed_render,
    encode,
    encode_batch,
    glyph_feature,
    substituted_input_rows,
)
from glyphgen.text_encoder.prompts import PromptSpec, parse_prompt
from glyphgen.text_encoder.tokenizer import (
    BPE,
    CHAR_BPE,
    KIND_CONTEXT,
    KIND_GLYPH_CHAR,
    KIND_GLYPH_WORD,
    STRATEGIES,
    WHOLE_WORD,
    TokenSequence,
    tokenize,
)

__all__ = [
    "BPE",
    "CHAR_BPE",
    "EMBED_CANVAS",
    "EMBED_FONT",
    "GLYPH",
    "KIND_CONTEXT",
    "KIND_GLYPH_CHAR",
    "KIND_GLYPH_WORD",
    "PAD",
    "STRATEGIES",
    "UNK",
    "WHOLE_WORD",
    "GlyphProjector",
    "PromptSpec",
    "TextEmbedding",
    "TextEncoderModel",
    "TokenSequence",
    "Vocabulary",
    "embed_render",
    "encode",
    "encode_batch",
    "glyph_feature",
    "parse_prompt",
    "substituted_input_rows",
    "tokenize",
    "train_bpe",
]
