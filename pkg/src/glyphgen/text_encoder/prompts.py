"""Prompt parsing: double-quoted spans mark glyph words.

`a car with "speed limit" painted` yields glyph words [speed, limit]; the
text outside quoted spans is the context the subword tokenizer sees.
"""

from __future__ import annotations

from dataclasses import dataclass

from glyphgen.errors import UnbalancedQuotes


@dataclass
class PromptSpec:
    raw: str
    context_segments: list[str]  # quote-stripped text between glyph words, len = N + 1
    glyph_words: list[str]
    glyph_spans: list[tuple[int, int]]  # char range of each glyph word in raw

    @property
    def n_glyph_words(self) -> int:
        return len(self.glyph_words)

    def caption_without_quotes(self) -> str:
        """Interleave segments and words: the caption with quote marks removed."""
        out = []
        for seg, word in zip(self.context_segments, self.glyph_words):
            out.append(seg)
            out.append(word)
        out.append(self.context_segments[-1])
        return "".join(out)


def parse_prompt(raw: str) -> PromptSpec:
    """Split a prompt into context text and ordered glyph words.

    Every maximal double-quoted span contributes its whitespace-separated
    words, in order. No quotes means no glyph words.
    """
    if not raw:
        raise ValueError("prompt must be non-empty")
    quote_positions = [i for i, c in enumerate(raw) if c == '"']
    if len(quote_positions) % 2 != 0:
        raise UnbalancedQuotes(f"odd number of double quotes in {raw!r}")

    glyph_words: list[str] = []
    glyph_spans: list[tuple[int, int]] = []
    for open_q, close_q in zip(quote_positions[::2], quote_positions[1::2]):
        pos = open_q + 1
        for word in raw[open_q + 1 : close_q].split():
            start = raw.index(word, pos, close_q)
            glyph_words.append(word)
            glyph_spans.append((start, start + len(word)))
            pos = start + len(word)

    context_segments: list[str] = []
    prev_end = 0
    for start, end in glyph_spans:
        context_segments.append(raw[prev_end:start].replace('"', ""))
        prev_end = end
    context_segments.append(raw[prev_end:].replace('"', ""))
    return PromptSpec(
        raw=raw,
        context_segments=context_segments,
        glyph_words=glyph_words,
        glyph_spans=glyph_spans,
    )
