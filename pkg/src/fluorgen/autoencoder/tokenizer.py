"""SMILES tokenization and vocabulary handling.

Character-level tokens with two-character elements (Cl, Br), bracket atoms,
and %nn ring closures kept atomic. The vocabulary is built from a training
corpus and always contains PAD/BOS/EOS.
"""

from __future__ import annotations

import re

from ..errors import ContractError

PAD, BOS, EOS = 0, 1, 2
SPECIALS = ["<pad>", "<bos>", "<eos>"]

_TOKEN_RE = re.compile(r"(\[[^\]]+\]|Cl|Br|%\d{2}|.)")


def tokenize(smiles: str) -> list[str]:
    tokens = _TOKEN_RE.findall(smiles)
    if "".join(tokens) != smiles:
        raise ContractError(f"tokenization lost characters in {smiles!r}")
    return tokens


class Vocabulary:
    def __init__(self, tokens: list[str]):
        if tokens[: len(SPECIALS)] != SPECIALS:
            tokens = SPECIALS + [t for t in tokens if t not in SPECIALS]
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_corpus(cls, corpus: list[str]) -> "Vocabulary":
        seen = sorted({t for smiles in corpus for t in tokenize(smiles)})
        return cls(SPECIALS + seen)

    def encode(self, smiles: str) -> list[int]:
        ids = []
        for t in tokenize(smiles):
            if t not in self.index:
                raise ContractError(f"token {t!r} missing from vocabulary")
            ids.append(self.index[t])
        return ids

    def decode(self, ids) -> str:
        out = []
        for i in ids:
            i = int(i)
            if i == EOS:
                break
            if i in (PAD, BOS):
                continue
            out.append(self.tokens[i])
        return "".join(out)
