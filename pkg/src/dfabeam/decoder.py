"""Automaton-guided beam search with guaranteed constraint satisfaction.

Each step scores every (beam, output) pair, discards outputs whose
successor position could no longer reach acceptance within the remaining
budget, pushes distance-decreasing candidates up toward the row maximum
with a ramping coefficient, keeps the top-k by accumulated score (padding
with copies when fewer survive), and finally re-ranks the surviving beams
by their unmodified log-likelihood.

Feasibility is judged on a beam's position, the pair of automaton state
and matcher node: an output survives only if its successor position can
still complete an accepting sequence in exactly the remaining number of
outputs.  This keeps tight horizons exact for multi-output concepts and
never strands a beam in a position with no legal continuation.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .concepts import EMPTY_MATCH, ConceptTable, MatchState
from .dfa import NO_MATCH, Dfa, accepts
from .scorers import Scorer

__all__ = [
    "Beam", "DecodeConfig", "InfeasibleError", "DecodeInternalError",
    "ramp_push_up", "decode", "decode_batch", "result_to_json",
]

_INF = float("inf")


class InfeasibleError(RuntimeError):
    """No accepting completion exists within the horizon."""


class DecodeInternalError(AssertionError):
    """A decoder invariant failed; indicates a bug, not bad input."""


@dataclass(frozen=True)
class Beam:
    """One hypothesis: generated outputs, accumulated (boosted) score,
    raw log-likelihood, automaton state and matcher position."""

    outputs: tuple[int, ...] = ()
    score: float = 0.0
    natural_loglik: float = 0.0
    state: int = 0
    match: MatchState = EMPTY_MATCH
    finished: bool = False


@dataclass(frozen=True)
class DecodeConfig:
    """Decoder parameters.

    ``epsilon`` must stay below 1/2 so the boost keeps a positive slope
    on the original score even at full push strength.  ``eos_output``
    optionally freezes a beam that emitted it from a state whose every
    reachable state accepts; frozen beams stop growing and keep competing
    at an unchanged score.
    """

    beams: int
    horizon: int
    alpha_min: float = 0.5
    gamma: float = 1.0
    epsilon: float = 0.1
    seed: int = 0
    tie_jitter: bool = False
    eos_output: int | None = None
    prompt_advances_dfa: bool = False

    def __post_init__(self):
        if self.beams < 1:
            raise ValueError("beams must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.alpha_min <= 1.0:
            raise ValueError("alpha_min must be within [0, 1]")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("epsilon must be within [0, 1/2)")


def ramp_push_up(alpha_min: float, d: float, remaining: int,
                 gamma: float) -> float:
    """Push strength in [alpha_min, 1]: alpha_min plus the clamped ratio
    of distance to remaining steps raised to gamma.  Zero distance gives
    alpha_min; an exhausted or insufficient budget gives 1."""
    if d <= 0:
        return alpha_min
    if remaining <= 0 or d >= remaining:
        return 1.0
    return alpha_min + (1.0 - alpha_min) * min(1.0, (d / remaining) ** gamma)


class _Engine:
    """Per-(state, matcher-node) transition caches plus the exact-length
    feasibility table, shared by every beam of a decode call."""

    def __init__(self, dfa: Dfa, table: ConceptTable, vocab_size: int,
                 horizon: int):
        self.dfa = dfa
        self.table = table
        self.vocab_size = vocab_size
        self._nomatch_next = [dfa.step(q, NO_MATCH)
                              for q in range(dfa.num_states)]
        self._trans: dict[tuple[int, int], list] = {}
        self._trans_np: dict[tuple[int, int], tuple] = {}
        self._quasi: dict[tuple[int, int], float] = {}
        self._closed: dict[int, bool] = {}
        self._feasible = self._feasibility_table(horizon)

    def _positions(self) -> tuple[list[tuple[int, int]], list[list[int]]]:
        """Position graph: nodes are (state, matcher node) pairs, one edge
        per distinct successor a single output can produce."""
        table, dfa = self.table, self.dfa
        num_nodes = len(table._children)
        positions = [(q, n) for q in range(dfa.num_states)
                     for n in range(num_nodes)]
        index = {p: i for i, p in enumerate(positions)}
        succs: list[list[int]] = []
        for q, node in positions:
            out = set()
            children = table._children[node]
            for nxt in children.values():
                concept = table._concept_at[nxt]
                if concept is not None:
                    out.add(index[(dfa.step(q, concept), 0)])
                else:
                    out.add(index[(q, nxt)])
            if len(children) < self.vocab_size:
                # some output falls outside every canonical sequence
                out.add(index[(self._nomatch_next[q], 0)])
            succs.append(sorted(out))
        return positions, succs

    def _feasibility_table(self, horizon: int) -> np.ndarray:
        """feasible[m][p]: an accepting sequence of exactly m further
        outputs exists from position p.  A trailing incomplete span is
        fine: interpretation drops it, so only the state must accept."""
        positions, succs = self._positions()
        self._position_index = {p: i for i, p in enumerate(positions)}
        rows = np.zeros((horizon + 1, len(positions)), dtype=bool)
        rows[0] = [q in self.dfa.accepting for q, _node in positions]
        for m in range(1, horizon + 1):
            previous = rows[m - 1]
            rows[m] = [bool(previous[succ].any()) for succ in succs]
        return rows

    def feasible_at(self, state: int, node: int, remaining: int) -> bool:
        return bool(self._feasible[remaining,
                                   self._position_index[(state, node)]])

    def quasi_distance(self, state: int, node: int) -> float:
        """Distance of the best state reachable by completing any concept
        whose canonical outputs pass through this matcher node."""
        key = (state, node)
        value = self._quasi.get(key)
        if value is None:
            dfa = self.dfa
            value = min((dfa.distance[dfa.step(state, c)]
                         for c in self.table._subtree[node]), default=_INF)
            self._quasi[key] = value
        return value

    def transitions(self, state: int, node: int) -> list:
        """Per output: (next state, next match, state distance, quasi
        distance)."""
        key = (state, node)
        cached = self._trans.get(key)
        if cached is None:
            dfa, table = self.dfa, self.table
            children = table._children[node]
            cached = []
            for output in range(self.vocab_size):
                nxt = children.get(output)
                if nxt is None:
                    q2, m2 = self._nomatch_next[state], EMPTY_MATCH
                    quasi = _INF
                elif table._concept_at[nxt] is not None:
                    q2 = dfa.step(state, table._concept_at[nxt])
                    m2 = EMPTY_MATCH
                    quasi = self.quasi_distance(state, nxt)
                else:
                    q2 = state
                    m2 = MatchState(table._span[nxt], nxt)
                    quasi = self.quasi_distance(state, nxt)
                cached.append((q2, m2, dfa.distance[q2], quasi))
            self._trans[key] = cached
        return cached

    def transition_arrays(self, state: int, node: int):
        """Vector view of :meth:`transitions`: (position ids, state
        distances, quasi distances) as arrays indexed by output."""
        key = (state, node)
        cached = self._trans_np.get(key)
        if cached is None:
            rows = self.transitions(state, node)
            index = self._position_index
            cached = (
                np.fromiter((index[(q2, m2.node)] for q2, m2, _, _ in rows),
                            dtype=np.int64, count=len(rows)),
                np.fromiter((d2 for _, _, d2, _ in rows), dtype=float,
                            count=len(rows)),
                np.fromiter((quasi for _, _, _, quasi in rows), dtype=float,
                            count=len(rows)),
            )
            self._trans_np[key] = cached
        return cached

    def accepting_closed(self, state: int) -> bool:
        value = self._closed.get(state)
        if value is None:
            value = (state in self.dfa.accepting
                     and self.dfa.reachable(state) <= self.dfa.accepting)
            self._closed[state] = value
        return value


@dataclass
class _Run:
    prompt: tuple[int, ...]
    beams: list[Beam] = field(default_factory=list)


def decode(scorer: Scorer, dfa: Dfa, table: ConceptTable,
           prompt: Sequence[int] = (), cfg: DecodeConfig | None = None,
           **kwargs) -> Beam:
    """Decode one sequence; see :func:`decode_batch`."""
    if cfg is None:
        cfg = DecodeConfig(**kwargs)
    return decode_batch(scorer, dfa, table, [prompt], cfg)[0]


def decode_batch(scorer: Scorer, dfa: Dfa, table: ConceptTable,
                 prompts: Sequence[Sequence[int]],
                 cfg: DecodeConfig) -> list[Beam]:
    """Run the guided beam search for every prompt, scoring all live beams
    of all prompts in a single scorer call per step.

    Returns the highest raw-likelihood beam per prompt.  The returned
    outputs, interpreted as concepts, always satisfy the compiled
    constraint; prompts whose start position cannot reach acceptance
    within the horizon raise :class:`InfeasibleError`.
    """
    if not dfa.distance:
        raise ValueError("automaton must be annotated before decoding")
    table.validate_against(dfa)
    max_output = max((max(seq) for seq in table.entries.values()), default=-1)
    if max_output >= scorer.vocab_size:
        raise ValueError(f"table output id {max_output} exceeds scorer "
                         f"vocabulary of {scorer.vocab_size}")
    engine = _Engine(dfa, table, scorer.vocab_size, cfg.horizon)
    rng = random.Random(cfg.seed) if cfg.tie_jitter else None

    runs = []
    for prompt in prompts:
        state, match = dfa.initial, EMPTY_MATCH
        if cfg.prompt_advances_dfa:
            for output in prompt:
                state, match = table.next_state(dfa, state, output, match)
        if not engine.feasible_at(state, match.node, cfg.horizon):
            d0 = dfa.distance[state]
            if d0 > cfg.horizon:
                raise InfeasibleError(f"start distance {d0} exceeds "
                                      f"horizon {cfg.horizon}")
            raise InfeasibleError(
                f"no accepting sequence of exactly {cfg.horizon} outputs "
                f"exists from the start position")
        runs.append(_Run(tuple(prompt), [Beam(state=state, match=match)]))

    vocab = scorer.vocab_size
    for t in range(1, cfg.horizon + 1):
        remaining = cfg.horizon - t
        feas_row = engine._feasible[remaining]
        # padded copies would only produce duplicate candidates, so each
        # run scores its distinct beams only
        gathered = []  # (run, live (bi, beam) pairs, frozen (bi, beam) pairs)
        prefixes: list[tuple[int, ...]] = []
        for run in runs:
            live, frozen = [], []
            seen: set[tuple[int, ...]] = set()
            for bi, beam in enumerate(run.beams):
                if beam.outputs in seen:
                    continue
                seen.add(beam.outputs)
                if beam.finished:
                    frozen.append((bi, beam))
                else:
                    live.append((bi, beam))
                    prefixes.append(run.prompt + beam.outputs)
            gathered.append((run, live, frozen))
        if prefixes:
            raw_all = np.asarray(scorer.score(prefixes), dtype=float)
            if raw_all.shape != (len(prefixes), vocab):
                raise ValueError(f"scorer returned shape {raw_all.shape}, "
                                 f"expected {(len(prefixes), vocab)}")
        offset = 0
        for run, live, frozen in gathered:
            n = len(live)
            raw = raw_all[offset:offset + n] if n else np.empty((0, vocab))
            offset += n
            boosted = raw.copy()
            alive = np.zeros((n, vocab), dtype=bool)
            transition_rows = []
            for i, (bi, beam) in enumerate(live):
                pos_ids, d2, quasi = engine.transition_arrays(
                    beam.state, beam.match.node)
                transition_rows.append(
                    engine.transitions(beam.state, beam.match.node))
                mask = feas_row[pos_ids]
                alive[i] = mask
                if not mask.any():
                    continue
                row = raw[i]
                row_max = row[mask].max()
                if not np.isfinite(row_max):
                    continue  # hard zeros are never boosted
                d_i = dfa.distance[beam.state]
                alpha = ramp_push_up(cfg.alpha_min, d_i, remaining, cfg.gamma)
                finite = mask & (row > -_INF)
                completed = finite & (d2 < d_i)
                quasi_only = finite & ~completed & (quasi < d_i)
                if completed.any():
                    boosted[i, completed] = (
                        alpha * row_max
                        + (1 - alpha + 2 * alpha * cfg.epsilon) * row[completed])
                if quasi_only.any():
                    boosted[i, quasi_only] = (
                        alpha * row_max
                        + (1 - alpha + alpha * cfg.epsilon) * row[quasi_only])
            base = np.fromiter((b.score for _, b in live), float, count=n)
            flat_scores = (boosted + base[:, None]).ravel()
            flat_alive = alive.ravel()
            scores_all = np.concatenate([
                flat_scores,
                np.fromiter((b.score for _, b in frozen), float,
                            count=len(frozen))])
            alive_all = np.concatenate([
                flat_alive, np.ones(len(frozen), dtype=bool)])
            beam_ids = np.concatenate([
                np.repeat(np.fromiter((bi for bi, _ in live), np.int64,
                                      count=n), vocab),
                np.fromiter((bi for bi, _ in frozen), np.int64,
                            count=len(frozen))])
            out_ids = np.concatenate([
                np.tile(np.arange(vocab, dtype=np.int64), n),
                np.full(len(frozen), -1, dtype=np.int64)])
            if rng is not None:
                scores_all = scores_all + np.asarray(
                    [rng.uniform(0.0, 1e-9) for _ in range(scores_all.size)])
            candidates = np.flatnonzero(alive_all)
            if candidates.size == 0:
                raise DecodeInternalError(
                    "no feasible continuation for any beam")
            # stable order: score desc, then beam index, then output id
            order = candidates[np.lexsort((out_ids[candidates],
                                           beam_ids[candidates],
                                           -scores_all[candidates]))]
            selected = []
            for j in order[:cfg.beams]:
                j = int(j)
                if j >= n * vocab:
                    selected.append(frozen[j - n * vocab][1])
                    continue
                i, output = divmod(j, vocab)
                _, beam = live[i]
                q2, m2, _, _ = transition_rows[i][output]
                finished = (cfg.eos_output is not None
                            and output == cfg.eos_output
                            and engine.accepting_closed(q2))
                selected.append(Beam(beam.outputs + (output,),
                                     float(scores_all[j]),
                                     beam.natural_loglik + float(raw[i, output]),
                                     q2, m2, finished))
            pad, width = 0, len(selected)
            while len(selected) < cfg.beams:
                selected.append(selected[pad % width])
                pad += 1
            for beam in selected:
                if not beam.finished and not engine.feasible_at(
                        beam.state, beam.match.node, remaining):
                    raise DecodeInternalError("feasibility invariant violated")
                if (not beam.finished and not beam.match.pending
                        and dfa.distance[beam.state] > remaining):
                    raise DecodeInternalError("distance invariant violated")
            run.beams = selected

    results = []
    for run in runs:
        for beam in run.beams:
            if not beam.finished and beam.state not in dfa.accepting:
                raise DecodeInternalError("surviving beam is not accepting")
        best = min(enumerate(run.beams),
                   key=lambda pair: (-pair[1].natural_loglik, pair[0]))[1]
        results.append(best)
    return results


def result_to_json(beam: Beam, dfa: Dfa, table: ConceptTable) -> str:
    """Decode result in the documented wire shape."""
    concepts = table.interpret(beam.outputs)
    return json.dumps({
        "outputs": list(beam.outputs),
        "concepts": concepts,
        "natural_loglik": beam.natural_loglik,
        "satisfied": accepts(dfa, concepts),
        "steps": len(beam.outputs),
    })
