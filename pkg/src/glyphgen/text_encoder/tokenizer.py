"""Tokenization with selectable glyph-word granularity.

Context text is always subword-tokenized. Glyph words become:
    whole-word  one <glyph> placeholder token per word (its embedding row is
                later replaced by projected OCR features)
    char+bpe    one token per character
    bpe         ordinary subword tokens

Tokens belonging to a glyph word keep its index so losses and evaluation can
find the word's attention columns under any strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from glyphgen.errors import SequenceTooLong
from glyphgen.text_encoder.bpe import Vocabulary
from glyphgen.text_encoder.prompts import PromptSpec

WHOLE_WORD = "whole-word"
CHAR_BPE = "char+bpe"
BPE = "bpe"
STRATEGIES = (WHOLE_WORD, CHAR_BPE, BPE)

KIND_CONTEXT = "context"
KIND_GLYPH_WORD = "glyph-word"
KIND_GLYPH_CHAR = "glyph-char"


@dataclass
class TokenSequence:
    ids: list[int]
    kinds: list[str]
    glyph_index: list[int | None]
    strategy: str = field(default=WHOLE_WORD)

    def __post_init__(self):
        if not (len(self.ids) == len(self.kinds) == len(self.glyph_index)):
            raise ValueError("ids, kinds and glyph_index must be parallel")
        for kind, gi in zip(self.kinds, self.glyph_index):
            if kind != KIND_CONTEXT and gi is None:
                raise ValueError(f"{kind} token missing its glyph index")

    def __len__(self) -> int:
        return len(self.ids)

    def positions_of_word(self, k: int) -> list[int]:
        return [i for i, gi in enumerate(self.glyph_index) if gi == k]

    def context_ids(self) -> list[int]:
        return [t for t, gi in zip(self.ids, self.glyph_index) if gi is None]


def tokenize(
    p: PromptSpec,
    strategy: str,
    vocab: Vocabulary,
    max_seq_len: int = 32,
) -> TokenSequence:
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")

    ids: list[int] = []
    kinds: list[str] = []
    glyph_index: list[int | None] = []

    def add_context(text: str) -> None:
        for word in text.split():
            for tid in vocab.encode_word(word):
                ids.append(tid)
                kinds.append(KIND_CONTEXT)
                glyph_index.append(None)

    for k, word in enumerate(p.glyph_words):
        add_context(p.context_segments[k])
        if strategy == WHOLE_WORD:
            ids.append(vocab.glyph_id)
            kinds.append(KIND_GLYPH_WORD)
            glyph_index.append(k)
        elif strategy == CHAR_BPE:
            for tid in vocab.char_ids(word):
                ids.append(tid)
                kinds.append(KIND_GLYPH_CHAR)
                glyph_index.append(k)
        else:  # BPE
            for tid in vocab.encode_word(word):
                ids.append(tid)
                kinds.append(KIND_GLYPH_WORD)
                glyph_index.append(k)
    add_context(p.context_segments[len(p.glyph_words)])

    if len(ids) > max_seq_len:
        raise SequenceTooLong(f"{len(ids)} tokens exceed max_seq_len={max_seq_len}")
    return TokenSequence(ids=ids, kinds=kinds, glyph_index=glyph_index, strategy=strategy)
