"""Conditioning encoder: token embeddings, glyph-row substitution, transformer.

Under the whole-word strategy each glyph word occupies one placeholder token
whose embedding row is replaced, before the transformer runs, by a linear
projection of the frozen recognizer's features for a canonical render of the
word. Other strategies embed glyph tokens from the table like any token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from glyphgen.dataforge.render import GlyphImage, fit_point_size, render_word
from glyphgen.ocr.model import OCRModel, extract_features
from glyphgen.text_encoder.bpe import Vocabulary
from glyphgen.text_encoder.prompts import PromptSpec
from glyphgen.text_encoder.tokenizer import TokenSequence

EMBED_FONT = "sans"
EMBED_CANVAS = (OCRModel.height, OCRModel.width)


@dataclass
class TextEmbedding:
    rows: torch.Tensor  # (seq_len, embed_dim)
    glyph_rows: list[list[int]]  # row indices per glyph word


class GlyphProjector(nn.Module):
    """Linear map from recognizer feature space to encoder embedding space."""

    def __init__(self, feature_dim: int, embed_dim: int):
        super().__init__()
        self.linear = nn.Linear(feature_dim, embed_dim)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.linear(features)


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int = 2):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim), nn.GELU(), nn.Linear(mlp_ratio * dim, dim)
        )

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor | None) -> torch.Tensor:
        h = self.norm1(x)
        attn_out, _ = self.attn(h, h, h, key_padding_mask=pad_mask, need_weights=False)
        x = x + attn_out
        return x + self.mlp(self.norm2(x))


class TextEncoderModel(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        embed_dim: int = 64,
        depth: int = 2,
        heads: int = 4,
        max_seq_len: int = 32,
    ):
        super().__init__()
        self.embed_dim = embed_dim
        self.max_seq_len = max_seq_len
        self.token_emb = nn.Embedding(vocab_size, embed_dim)
        self.pos_emb = nn.Parameter(torch.zeros(max_seq_len, embed_dim))
        nn.init.normal_(self.pos_emb, std=0.02)
        self.blocks = nn.ModuleList(_Block(embed_dim, heads) for _ in range(depth))
        self.norm = nn.LayerNorm(embed_dim)

    def embed_ids(self, ids: torch.Tensor) -> torch.Tensor:
        """Table lookup only; substitution happens on this output."""
        return self.token_emb(ids)

    def forward_rows(self, x: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        """(B, L, D) input rows -> contextualized rows of the same shape."""
        L = x.shape[1]
        x = x + self.pos_emb[:L][None]
        for block in self.blocks:
            x = block(x, pad_mask)
        return self.norm(x)


def embed_render(word: str, font_id: str = EMBED_FONT) -> GlyphImage:
    """Canonical render used for a word's OCR-feature embedding."""
    point = min(24, fit_point_size(word, font_id, EMBED_CANVAS, margin=2))
    return render_word(word, font_id, point, canvas=EMBED_CANVAS)


def glyph_feature(
    ocr_model: OCRModel, word: str, cache: dict[str, torch.Tensor] | None = None
) -> torch.Tensor:
    if cache is not None and word in cache:
        return cache[word]
    feat = extract_features(ocr_model, embed_render(word))
    if cache is not None:
        cache[word] = feat
    return feat


def substituted_input_rows(
    encoder: TextEncoderModel,
    t: TokenSequence,
    vocab: Vocabulary,
    prompt: PromptSpec,
    ocr_model: OCRModel | None,
    projector: GlyphProjector | None,
    feature_cache: dict[str, torch.Tensor] | None = None,
) -> torch.Tensor:
    """Embedding-table rows with glyph placeholders replaced, shape (L, D)."""
    ids = torch.tensor(t.ids, dtype=torch.long)
    rows = encoder.embed_ids(ids)
    for i, (tid, gi) in enumerate(zip(t.ids, t.glyph_index)):
        if tid == vocab.glyph_id and gi is not None:
            if ocr_model is None or projector is None:
                raise ValueError("whole-word tokens need a recognizer and projector")
            feat = glyph_feature(ocr_model, prompt.glyph_words[gi], feature_cache)
            rows = rows.clone()
            rows[i] = projector(feat)
    return rows


def encode(
    p: PromptSpec,
    t: TokenSequence,
    ocr_model: OCRModel | None,
    projector: GlyphProjector | None,
    encoder: TextEncoderModel,
    vocab: Vocabulary,
    feature_cache: dict[str, torch.Tensor] | None = None,
) -> TextEmbedding:
    """Produce the conditioning sequence for one prompt.

    Glyph placeholder rows are substituted before the transformer runs; a
    prompt without glyph words takes the plain encoder path bit-exactly.
    """
    rows = substituted_input_rows(encoder, t, vocab, p, ocr_model, projector, feature_cache)
    out = encoder.forward_rows(rows[None])[0]
    glyph_rows = [t.positions_of_word(k) for k in range(p.n_glyph_words)]
    return TextEmbedding(rows=out, glyph_rows=glyph_rows)


def encode_batch(
    prompts: list[PromptSpec],
    seqs: list[TokenSequence],
    ocr_model: OCRModel | None,
    projector: GlyphProjector | None,
    encoder: TextEncoderModel,
    vocab: Vocabulary,
    feature_cache: dict[str, torch.Tensor] | None = None,
    pad_to: int | None = None,
) -> tuple[torch.Tensor, torch.Tensor, list[list[list[int]]]]:
    """Padded batch encode.

    Returns (rows (B, L, D), pad_mask (B, L) with True at padding, glyph row
    positions per item per word).
    """
    L = pad_to or max(len(s) for s in seqs)
    B = len(seqs)
    rows = torch.zeros(B, L, encoder.embed_dim)
    pad_mask = torch.ones(B, L, dtype=torch.bool)
    pad_row = encoder.embed_ids(torch.tensor([vocab.pad_id]))[0]
    glyph_rows_all: list[list[list[int]]] = []
    parts = []
    for b, (p, t) in enumerate(zip(prompts, seqs)):
        r = substituted_input_rows(encoder, t, vocab, p, ocr_model, projector, feature_cache)
        n = r.shape[0]
        if n > L:
            raise ValueError(f"sequence of {n} tokens exceeds pad_to={L}")
        padded = torch.cat([r, pad_row[None].expand(L - n, -1)]) if n < L else r
        parts.append(padded)
        pad_mask[b, :n] = False
        glyph_rows_all.append([t.positions_of_word(k) for k in range(p.n_glyph_words)])
    rows = torch.stack(parts)
    out = encoder.forward_rows(rows, pad_mask)
    return out, pad_mask, glyph_rows_all
