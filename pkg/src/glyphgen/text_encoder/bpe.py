"""A small byte-pair-style subword vocabulary.

Merges are learned by repeatedly fusing the most frequent adjacent symbol
pair inside words (ties broken lexicographically, so training is
deterministic). The vocabulary file is plain text, one entry per line:

    #glyphgen-vocab v1
    #specials
    <pad>
    <unk>
    <glyph>
    #chars
    a
    ...
    #merges
    t h
    th e

Token ids are assigned in file order: specials, then single characters,
then one token per merge (the fused pair).
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

PAD, UNK, GLYPH = "<pad>", "<unk>", "<glyph>"
_SPECIALS = (PAD, UNK, GLYPH)
_HEADER = "#glyphgen-vocab v1"


class Vocabulary:
    def __init__(self, chars: list[str], merges: list[tuple[str, str]]):
        self.chars = list(chars)
        self.merges = [tuple(m) for m in merges]
        tokens = list(_SPECIALS) + self.chars + ["".join(m) for m in self.merges]
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.token_to_id = {t: i for i, t in enumerate(tokens)}
        self.id_to_token = tokens

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    @property
    def glyph_id(self) -> int:
        return self.token_to_id[GLYPH]

    def split_word(self, word: str) -> list[str]:
        """Apply merges in learned order to the word's character sequence."""
        parts = [c if c in self.token_to_id else UNK for c in word]
        for a, b in self.merges:
            i = 0
            while i < len(parts) - 1:
                if parts[i] == a and parts[i + 1] == b:
                    parts[i : i + 2] = [a + b]
                else:
                    i += 1
        return parts

    def encode_word(self, word: str) -> list[int]:
        return [self.token_to_id.get(p, self.unk_id) for p in self.split_word(word)]

    def char_ids(self, word: str) -> list[int]:
        return [self.token_to_id.get(c, self.unk_id) for c in word]

    def is_whole(self, word: str) -> bool:
        """True when BPE keeps the word as a single token."""
        return len(self.split_word(word)) == 1

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_lines(Path(path).read_text().splitlines())

    def to_lines(self) -> list[str]:
        lines = [_HEADER, "#specials", *_SPECIALS, "#chars", *self.chars, "#merges"]
        return lines + [f"{a} {b}" for a, b in self.merges]

    @classmethod
    def from_lines(cls, lines: list[str]) -> "Vocabulary":
        if not lines or lines[0] != _HEADER:
            raise ValueError("not a vocabulary file (bad header)")
        section = None
        chars: list[str] = []
        merges: list[tuple[str, str]] = []
        for line in lines[1:]:
            if line in ("#specials", "#chars", "#merges"):
                section = line
                continue
            if section == "#chars":
                chars.append(line)
            elif section == "#merges":
                a, b = line.split(" ")
                merges.append((a, b))
        return cls(chars, merges)


def train_bpe(corpus: list[str], num_merges: int) -> Vocabulary:
    """Learn a merge list from whitespace-split words of `corpus`."""
    word_freq = Counter()
    for text in corpus:
        for word in text.split():
            word_freq[word] += 1
    chars = sorted({c for w in word_freq for c in w})

    # each word as a symbol sequence, weighted by frequency
    seqs: dict[tuple[str, ...], int] = {}
    for word, freq in word_freq.items():
        seqs[tuple(word)] = seqs.get(tuple(word), 0) + freq

    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        pair_freq: Counter = Counter()
        for seq, freq in seqs.items():
            for a, b in zip(seq, seq[1:]):
                pair_freq[(a, b)] += freq
        if not pair_freq:
            break
        best_count = max(pair_freq.values())
        best = min(p for p, c in pair_freq.items() if c == best_count)
        merges.append(best)
        merged: dict[tuple[str, ...], int] = {}
        for seq, freq in seqs.items():
            out: list[str] = []
            i = 0
            while i < len(seq):
                if i < len(seq) - 1 and (seq[i], seq[i + 1]) == best:
                    out.append(seq[i] + seq[i + 1])
                    i += 2
                else:
                    out.append(seq[i])
                    i += 1
            key = tuple(out)
            merged[key] = merged.get(key, 0) + freq
        seqs = merged

    return Vocabulary(chars, merges)
