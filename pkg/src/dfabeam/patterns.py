"""Generators for the bundled constraint patterns.

Two families: the keyword pattern (every concept appears before the end
marker, in any order) and the ordered-keyword pattern (concepts appear
in the given order, sentences end at the first dot, every step is a
known symbol).  The wardrobe suite used by the sequence-classification
experiments ships as a fixture file.
"""

from __future__ import annotations

from importlib import resources
from typing import Sequence

__all__ = [
    "unordered_pattern", "ordered_pattern", "load_outfit_suite",
    "OUTFIT_CLASSES",
]

OUTFIT_CLASSES = (
    "t_shirt_top", "trouser", "pullover", "dress", "coat",
    "sandal", "shirt", "sneaker", "bag", "ankle_boot",
)


def unordered_pattern(concepts: Sequence[str], *, eos: str = "eos") -> str:
    """Each concept at least once before the end marker, then the marker."""
    if not concepts:
        raise ValueError("at least one concept is required")
    parts = [f"((!{eos} U {c}) & F({c}))" for c in concepts]
    parts.append(f"F({eos})")
    return " & ".join(parts)


def ordered_pattern(concepts: Sequence[str], *, dot: str = "dot",
                    eos: str = "eos", no_match: str = "noMatch") -> str:
    """Concepts in order, nothing skipping ahead past a dot, dot followed
    by the end marker, and every step drawn from the known symbols."""
    if not concepts:
        raise ValueError("at least one concept is required")
    parts = []
    for current, following in zip(concepts, concepts[1:]):
        parts.append(f"((!({following} | {dot}) U {current}) & F({following}))")
    parts.append(f"((!({eos} | {dot}) U {concepts[-1]}) & F({eos}))")
    parts.append(f"G({dot} -> X {eos})")
    everything = " | ".join(list(concepts) + [dot, eos, no_match])
    parts.append(f"G({everything})")
    return " & ".join(parts)


def load_outfit_suite() -> list[str]:
    """The 13 wardrobe constraints, one formula per line; the full
    specification is their conjunction."""
    text = (resources.files("dfabeam") / "fixtures" /
            "ordered_outfits.ltl").read_text()
    return [line.strip() for line in text.splitlines()
            if line.strip() and not line.startswith("#")]
