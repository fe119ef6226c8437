"""Label space for CTC: ordered symbols plus a reserved blank class."""

from __future__ import annotations

from dataclasses import dataclass

from glyphgen.errors import UnknownSymbol


@dataclass(frozen=True)
class Alphabet:
    """Symbols map to class indices 0..n-1; blank takes the last class."""

    symbols: str

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")
        if len(self.symbols) < 1:
            raise ValueError("alphabet needs at least one symbol besides blank")

    @property
    def blank_index(self) -> int:
        return len(self.symbols)

    @property
    def num_classes(self) -> int:
        return len(self.symbols) + 1

    def __contains__(self, ch: str) -> bool:
        return ch in self.symbols

    def encode(self, text: str) -> list[int]:
        try:
            return [self.symbols.index(c) for c in text]
        except ValueError:
            bad = [c for c in text if c not in self.symbols]
            raise UnknownSymbol(f"symbols {bad} of {text!r} not in alphabet") from None

    def decode(self, classes: list[int]) -> str:
        return "".join(self.symbols[i] for i in classes)

    @classmethod
    def from_vocabulary(cls, words: list[str]) -> "Alphabet":
        return cls("".join(sorted(set("".join(words)))))
