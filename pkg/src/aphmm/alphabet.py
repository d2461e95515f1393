"""Symbol alphabets for DNA and protein sequences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownSymbol


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of emission symbols.

    Symbol order is significant: emission tables are indexed by it.
    """

    symbols: str
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UnknownSymbol(0, symbol) from None

    def encode(self, sequence: str) -> np.ndarray:
        """Map a sequence to symbol indices, raising UnknownSymbol on the first bad character."""
        out = np.empty(len(sequence), dtype=np.int64)
        idx = self._index
        for pos, ch in enumerate(sequence):
            code = idx.get(ch)
            if code is None:
                raise UnknownSymbol(pos, ch)
            out[pos] = code
        return out

    def decode(self, indices) -> str:
        return "".join(self.symbols[int(i)] for i in indices)


DNA = Alphabet("ACGT")
PROTEIN = Alphabet("ACDEFGHIKLMNPQRSTVWY")


def by_name(name: str) -> Alphabet:
    name = name.lower()
    if name == "dna":
        return DNA
    if name == "protein":
        return PROTEIN
    raise ValueError(f"unknown alphabet name: {name}")
