"""Bridge between raw model outputs and automaton concepts.

A :class:`ConceptTable` maps each concept to its canonical output
sequence.  The incremental matcher consumes one output at a time:
an output span equal to some canonical sequence steps the automaton
on that concept, a span that can still be extended keeps the state
and grows the pending buffer, and a span that can no longer reach any
concept is flushed as a single ``noMatch`` step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .dfa import NO_MATCH, Dfa

__all__ = [
    "ConceptTable", "ConceptTableError", "MatchState", "StepKind",
    "EMPTY_MATCH",
]


class ConceptTableError(ValueError):
    """Invalid concept table (empty, colliding or nested sequences)."""


@dataclass(frozen=True)
class MatchState:
    """Per-beam matcher position: the pending output suffix since the last
    concept boundary, plus its position in the table's prefix trie."""

    pending: tuple[int, ...] = ()
    node: int = 0


EMPTY_MATCH = MatchState()


class StepKind:
    COMPLETE = "complete"   # pending+output equals some canonical sequence
    EXTEND = "extend"       # strict prefix of at least one canonical sequence
    NO_MATCH = "noMatch"    # span can no longer reach any concept


class ConceptTable:
    """Immutable concept-to-outputs table with a prefix trie for matching."""

    def __init__(self, entries: Mapping[str, Sequence[int]]):
        if not entries:
            raise ConceptTableError("concept table must not be empty")
        self.entries: dict[str, tuple[int, ...]] = {}
        for concept, outputs in entries.items():
            seq = tuple(int(x) for x in outputs)
            if not seq:
                raise ConceptTableError(f"empty output sequence for {concept!r}")
            if concept == NO_MATCH:
                raise ConceptTableError("noMatch cannot be mapped to outputs")
            self.entries[concept] = seq
        by_seq: dict[tuple[int, ...], str] = {}
        for concept, seq in self.entries.items():
            if seq in by_seq:
                raise ConceptTableError(
                    f"{concept!r} and {by_seq[seq]!r} share the same outputs")
            by_seq[seq] = concept
        for concept, seq in self.entries.items():
            for other, longer in self.entries.items():
                if other != concept and longer[:len(seq)] == seq:
                    raise ConceptTableError(
                        f"outputs of {concept!r} are a prefix of {other!r}; "
                        f"the shorter concept would shadow the longer one")
        # trie over canonical output sequences; node 0 is the empty span
        self._children: list[dict[int, int]] = [{}]
        self._concept_at: list[str | None] = [None]
        self._subtree: list[list[str]] = [[]]
        self._span: list[tuple[int, ...]] = [()]
        for concept in sorted(self.entries):
            node = 0
            for output in self.entries[concept]:
                nxt = self._children[node].get(output)
                if nxt is None:
                    nxt = len(self._children)
                    self._children[node][output] = nxt
                    self._children.append({})
                    self._concept_at.append(None)
                    self._subtree.append([])
                    self._span.append(self._span[node] + (output,))
                node = nxt
                self._subtree[node].append(concept)
            self._concept_at[node] = concept

    @classmethod
    def identity(cls, concepts: Sequence[str]) -> "ConceptTable":
        """One output per concept, in the given order; every cost is 1."""
        return cls({c: (i,) for i, c in enumerate(concepts)})

    @classmethod
    def from_json(cls, text: str) -> "ConceptTable":
        data = json.loads(text)
        entries = {k: v for k, v in data.items() if k != "noMatch_policy"}
        policy = data.get("noMatch_policy", "flush-one")
        if policy != "flush-one":
            raise ConceptTableError(f"unsupported noMatch policy {policy!r}")
        return cls(entries)

    def to_json(self) -> str:
        payload: dict[str, object] = {c: list(seq)
                                      for c, seq in sorted(self.entries.items())}
        payload["noMatch_policy"] = "flush-one"
        return json.dumps(payload)

    def cost(self, concept: str) -> int:
        return len(self.entries[concept])

    def costs(self) -> dict[str, int]:
        return {c: len(seq) for c, seq in self.entries.items()}

    def concepts(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    # -- incremental matching ----------------------------------------------

    def classify(self, match: MatchState, output: int) \
            -> tuple[str, str | None, MatchState]:
        """Advance the matcher by one output.

        Returns ``(kind, concept, new_match)`` where ``kind`` is a
        :class:`StepKind` value and ``concept`` is set for COMPLETE steps.
        """
        nxt = self._children[match.node].get(output)
        if nxt is None:
            return StepKind.NO_MATCH, None, EMPTY_MATCH
        concept = self._concept_at[nxt]
        if concept is not None:
            return StepKind.COMPLETE, concept, EMPTY_MATCH
        return (StepKind.EXTEND, None,
                MatchState(match.pending + (output,), nxt))

    def compatible_concepts(self, match: MatchState, output: int) -> list[str]:
        """Concepts whose canonical outputs have pending+output as a prefix."""
        nxt = self._children[match.node].get(output)
        if nxt is None:
            return []
        return list(self._subtree[nxt])

    def compatible(self, pending: Sequence[int], output: int,
                   concept: str) -> bool:
        """Whether pending+output is a strict or full prefix of the
        concept's canonical outputs."""
        if concept not in self.entries:
            return False
        span = tuple(pending) + (output,)
        return self.entries[concept][:len(span)] == span

    def locate(self, pending: Sequence[int]) -> MatchState:
        """Matcher state for an explicit pending buffer."""
        node = 0
        for output in pending:
            node = self._children[node].get(output)
            if node is None:
                raise ValueError(f"{tuple(pending)!r} is not a live span")
            if self._concept_at[node] is not None:
                raise ValueError(f"{tuple(pending)!r} completes a concept")
        return MatchState(tuple(pending), node)

    # -- automaton stepping -------------------------------------------------

    def next_state(self, dfa: Dfa, state: int, output: int,
                   match: MatchState = EMPTY_MATCH) -> tuple[int, MatchState]:
        """One output of progress: step the automaton on a completed concept
        or a flushed noMatch span, or keep the state on a live prefix."""
        kind, concept, new_match = self.classify(match, output)
        if kind == StepKind.COMPLETE:
            return dfa.step(state, concept), new_match
        if kind == StepKind.NO_MATCH:
            return dfa.step(state, NO_MATCH), new_match
        return state, new_match

    def best_quasi_next_state(self, dfa: Dfa, state: int, output: int,
                              match: MatchState = EMPTY_MATCH) -> int | None:
        """The lowest-distance state reachable by completing any concept
        compatible with pending+output; ``None`` when no concept fits."""
        best = None
        best_distance = float("inf")
        for concept in self.compatible_concepts(match, output):
            succ = dfa.step(state, concept)
            if dfa.distance[succ] < best_distance:
                best = succ
                best_distance = dfa.distance[succ]
        return best

    def interpret(self, outputs: Iterable[int]) -> list[str]:
        """Batch segmentation of an output sequence into concepts and
        noMatch fillers; a trailing incomplete span contributes nothing."""
        concepts = []
        match = EMPTY_MATCH
        for output in outputs:
            kind, concept, match = self.classify(match, output)
            if kind == StepKind.COMPLETE:
                concepts.append(concept)
            elif kind == StepKind.NO_MATCH:
                concepts.append(NO_MATCH)
        return concepts

    def validate_against(self, dfa: Dfa) -> None:
        """Check the table and automaton agree on concepts and costs."""
        table_concepts = set(self.entries)
        dfa_concepts = set(dfa.concepts) - {NO_MATCH}
        if table_concepts != dfa_concepts:
            raise ConceptTableError(
                f"table concepts {sorted(table_concepts)} do not match "
                f"automaton concepts {sorted(dfa_concepts)}")
        for concept, seq in self.entries.items():
            if dfa.cost[concept] != len(seq):
                raise ConceptTableError(
                    f"automaton cost {dfa.cost[concept]} for {concept!r} "
                    f"differs from output count {len(seq)}")
