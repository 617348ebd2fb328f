"""Concept table export: canonical tokenizations and per-concept costs in
the decoder's table file format."""

from __future__ import annotations

from typing import Mapping, Sequence

__all__ = ["ConceptCollisionError", "export_concept_table"]


class ConceptCollisionError(ValueError):
    """Two concepts share (or nest within) one canonical tokenization."""


def export_concept_table(model, concepts: Sequence[str] | Mapping[str, str],
                         *, include_eos: bool = True) -> dict:
    """Map each concept name to the canonical tokenization of its word.

    ``concepts`` is a list of words (names equal the words) or a mapping
    of atom-safe names to surface words (for punctuation such as
    ``{"dot": "."}``).  The end marker is included as ``eos`` unless
    disabled.  Costs in the decoder follow from the sequence lengths.
    """
    if not concepts:
        raise ValueError("at least one concept is required")
    if isinstance(concepts, Mapping):
        named = dict(concepts)
    else:
        named = {word: word for word in concepts}

    table: dict[str, list[int]] = {}
    by_sequence: dict[tuple[int, ...], str] = {}
    for name, word in named.items():
        sequence = tuple(model.encode_word(word))
        if sequence in by_sequence:
            raise ConceptCollisionError(
                f"{name!r} and {by_sequence[sequence]!r} tokenize "
                f"identically: {list(sequence)}")
        by_sequence[sequence] = name
        table[name] = list(sequence)
    if include_eos and "eos" not in table:
        table["eos"] = [model.eos_id]
    sequences = {name: tuple(seq) for name, seq in table.items()}
    for name, seq in sequences.items():
        for other, longer in sequences.items():
            if other != name and longer[:len(seq)] == seq:
                raise ConceptCollisionError(
                    f"tokenization of {name!r} is a prefix of {other!r}; "
                    f"the decoder would never recognize the longer concept")
    payload: dict = dict(sorted(table.items()))
    payload["noMatch_policy"] = "flush-one"
    return payload
