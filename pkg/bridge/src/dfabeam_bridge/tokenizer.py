"""Deterministic word-piece tokenizer for the stub model.

Words split into fixed-width pieces with a leading word-boundary marker
on the first piece, mirroring how subword vocabularies shape real
models: short words cost one output, long words several.
"""

from __future__ import annotations

from typing import Iterable

PIECE_WIDTH = 4
BOUNDARY = "▁"  # visual word-boundary marker
PAD_TOKEN = "<pad>"
EOS_TOKEN = "<eos>"

# common words kept in every vocabulary so a generator has filler to emit
FILLER_WORDS = ("the", "a", "and", "is", "on", "in", "it", "was")


def word_pieces(word: str) -> list[str]:
    """Split a word into boundary-marked fixed-width pieces."""
    if not word:
        raise ValueError("cannot tokenize an empty word")
    pieces = [BOUNDARY + word[:PIECE_WIDTH]]
    for start in range(PIECE_WIDTH, len(word), PIECE_WIDTH):
        pieces.append(word[start:start + PIECE_WIDTH])
    return pieces


class StubTokenizer:
    """Closed vocabulary over the served words plus fillers and specials."""

    def __init__(self, words: Iterable[str]):
        tokens = [PAD_TOKEN, EOS_TOKEN]
        seen = set(tokens)
        for word in list(words) + list(FILLER_WORDS):
            for piece in word_pieces(word):
                if piece not in seen:
                    seen.add(piece)
                    tokens.append(piece)
        self.tokens = tuple(tokens)
        self.index = {tok: i for i, tok in enumerate(tokens)}
        self.pad_id = self.index[PAD_TOKEN]
        self.eos_id = self.index[EOS_TOKEN]

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    def encode_word(self, word: str) -> list[int]:
        """Canonical leading-boundary tokenization of one word."""
        try:
            return [self.index[piece] for piece in word_pieces(word)]
        except KeyError as exc:
            raise KeyError(f"word {word!r} is outside the vocabulary: "
                           f"missing piece {exc.args[0]!r}") from None
