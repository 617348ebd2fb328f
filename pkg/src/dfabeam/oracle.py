"""Exact constrained maximum-likelihood search by exhaustive enumeration.

Ground truth for the beam decoder on small instances: walks every output
sequence of the given length, keeps those whose concept interpretation
the automaton accepts, and returns the one minimizing negative
log-likelihood (lexicographically smallest on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

from .concepts import EMPTY_MATCH, ConceptTable, StepKind
from .dfa import NO_MATCH, Dfa
from .scorers import Scorer

__all__ = ["OracleResult", "EnumerationCapError", "brute_force_map", "feasible"]


class EnumerationCapError(RuntimeError):
    """The search space exceeds the enumeration cap."""


@dataclass(frozen=True)
class OracleResult:
    best_outputs: tuple[int, ...] | None
    best_nll: float
    feasible_count: int
    enumerated: int


def brute_force_map(scorer: Scorer, dfa: Dfa, table: ConceptTable,
                    horizon: int, *, cap: int = 1_000_000) -> OracleResult:
    """Exact argmin of negative log-likelihood over all length-``horizon``
    output sequences whose concept interpretation is accepted."""
    if not dfa.distance:
        raise ValueError("automaton must be annotated")
    table.validate_against(dfa)
    vocab = scorer.vocab_size
    if vocab ** horizon > cap:
        raise EnumerationCapError(
            f"{vocab}^{horizon} sequences exceed the cap of {cap}")

    best: tuple[int, ...] | None = None
    best_nll = float("inf")
    feasible_count = 0
    enumerated = 0

    # depth-first over the prefix tree: one scorer row per interior node,
    # stepping the same incremental matcher the decoder uses
    stack = [((), 0.0, dfa.initial, EMPTY_MATCH)]
    while stack:
        prefix, loglik, state, match = stack.pop()
        if len(prefix) == horizon:
            enumerated += 1
            if state in dfa.accepting:
                feasible_count += 1
                nll = -loglik
                if nll < best_nll or (nll == best_nll and
                                      (best is None or prefix < best)):
                    best = prefix
                    best_nll = nll
            continue
        row = scorer.score([prefix])[0]
        for output in range(vocab - 1, -1, -1):
            kind, concept, new_match = table.classify(match, output)
            if kind == StepKind.COMPLETE:
                new_state = dfa.step(state, concept)
            elif kind == StepKind.NO_MATCH:
                new_state = dfa.step(state, NO_MATCH)
            else:
                new_state = state
            stack.append((prefix + (output,), loglik + float(row[output]),
                          new_state, new_match))

    if best is None:
        best_nll = float("inf")
    return OracleResult(best, best_nll, feasible_count, enumerated)


def feasible(dfa: Dfa, horizon: int) -> bool:
    """Whether an accepting completion fits in ``horizon`` outputs from the
    initial state."""
    if not dfa.distance:
        raise ValueError("automaton must be annotated")
    return dfa.distance[dfa.initial] <= horizon
