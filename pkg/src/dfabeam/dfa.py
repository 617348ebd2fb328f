"""Compile temporal formulas into distance-annotated automata.

Compilation works by formula progression (symbolic derivatives): each
automaton state is the residual obligation on the rest of the trace, the
transition on a symbol is the derivative of that residual, and a state
accepts when its residual holds of the already-ended trace.  Residuals
are kept as reduced ordered BDDs over the formula's temporal subterms,
which makes the state space canonical and provably finite.  The alphabet
is one-hot: each symbol asserts exactly one concept (a reserved
``noMatch`` symbol is always present).  After construction the automaton
is Hopcroft minimized and annotated with per-state shortest distances to
acceptance using Dijkstra over the symbol-cost weighted transition graph.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .ltlf import (And, Atom, Formula, Next, Not, Top, Until, desugar,
                   validate_atom_name)

__all__ = [
    "Dfa", "TransitionMatrixExport", "StateBudgetError", "NO_MATCH",
    "compile_formula", "annotate", "accepts", "export_dot", "export_matrix",
    "import_matrix", "languages_equal",
]

NO_MATCH = "noMatch"

# True on every non-empty trace, false once the trace has ended; used as
# the residual guard of a strong next.
_NONEMPTY = Until(Top(), Top())


class StateBudgetError(RuntimeError):
    """Construction exceeded the configured state budget."""


@lru_cache(maxsize=None)
def _nullable(f: Formula) -> bool:
    """Whether a core-grammar residual holds once the trace has ended."""
    if isinstance(f, Top):
        return True
    if isinstance(f, (Atom, Next, Until)):
        return False
    if isinstance(f, Not):
        return not _nullable(f.operand)
    if isinstance(f, And):
        return _nullable(f.left) and _nullable(f.right)
    raise TypeError(f"non-core node in residual: {f!r}")


class _Residuals:
    """Residual algebra for one compilation: a reduced ordered BDD whose
    variables are the temporal leaves (atoms, next- and until-subterms)
    of the desugared formula.  Every leaf is false on the ended trace, so
    a residual accepts exactly when its all-false evaluation is true.
    """

    def __init__(self, formula: Formula):
        self.leaves: list[Formula] = []
        self.leaf_id: dict[Formula, int] = {}
        self._collect(formula)
        if _NONEMPTY not in self.leaf_id:
            self.leaf_id[_NONEMPTY] = len(self.leaves)
            self.leaves.append(_NONEMPTY)
        # nodes[i] = (var, lo, hi); 0 and 1 are the terminals
        self.nodes: list[tuple[int, int, int]] = [(1 << 30, 0, 0),
                                                  (1 << 30, 1, 1)]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._ite_memo: dict[tuple[int, int, int], int] = {}
        self._formula_memo: dict[Formula, int] = {}
        self._deriv_memo: dict[tuple[Formula, str], int] = {}
        self._subst_memo: dict[tuple[str, int], int] = {}

    def _collect(self, f: Formula) -> None:
        if isinstance(f, (Atom, Next, Until)) and f not in self.leaf_id:
            self.leaf_id[f] = len(self.leaves)
            self.leaves.append(f)
        if isinstance(f, (Not, Next)):
            self._collect(f.operand)
        elif isinstance(f, (And, Until)):
            self._collect(f.left)
            self._collect(f.right)

    # -- BDD primitives ------------------------------------------------------

    def _mk(self, var: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (var, lo, hi)
        node = self._unique.get(key)
        if node is None:
            node = len(self.nodes)
            self.nodes.append(key)
            self._unique[key] = node
        return node

    def _cofactor(self, node: int, var: int) -> tuple[int, int]:
        nvar, lo, hi = self.nodes[node]
        if nvar == var:
            return lo, hi
        return node, node

    def ite(self, f: int, g: int, h: int) -> int:
        if f == 1:
            return g
        if f == 0:
            return h
        if g == h:
            return g
        if g == 1 and h == 0:
            return f
        key = (f, g, h)
        node = self._ite_memo.get(key)
        if node is None:
            var = min(self.nodes[f][0], self.nodes[g][0], self.nodes[h][0])
            f0, f1 = self._cofactor(f, var)
            g0, g1 = self._cofactor(g, var)
            h0, h1 = self._cofactor(h, var)
            node = self._mk(var, self.ite(f0, g0, h0), self.ite(f1, g1, h1))
            self._ite_memo[key] = node
        return node

    def neg(self, f: int) -> int:
        return self.ite(f, 0, 1)

    def conj(self, f: int, g: int) -> int:
        return self.ite(f, g, 0)

    def disj(self, f: int, g: int) -> int:
        return self.ite(f, 1, g)

    # -- residual construction and progression --------------------------------

    def of_formula(self, f: Formula) -> int:
        node = self._formula_memo.get(f)
        if node is None:
            if isinstance(f, Top):
                node = 1
            elif isinstance(f, (Atom, Next, Until)):
                node = self._mk(self.leaf_id[f], 0, 1)
            elif isinstance(f, Not):
                node = self.neg(self.of_formula(f.operand))
            elif isinstance(f, And):
                node = self.conj(self.of_formula(f.left),
                                 self.of_formula(f.right))
            else:
                raise TypeError(f"non-core node in residual: {f!r}")
            self._formula_memo[f] = node
        return node

    def _strong(self, f: Formula) -> int:
        # residual of X: the rest of the trace must also be non-empty
        node = self.of_formula(f)
        if _nullable(f):
            node = self.conj(node, self.of_formula(_NONEMPTY))
        return node

    def _derive_formula(self, f: Formula, concept: str) -> int:
        key = (f, concept)
        node = self._deriv_memo.get(key)
        if node is None:
            if isinstance(f, Top):
                node = 1
            elif isinstance(f, Atom):
                node = 1 if f.name == concept else 0
            elif isinstance(f, Not):
                node = self.neg(self._derive_formula(f.operand, concept))
            elif isinstance(f, And):
                node = self.conj(self._derive_formula(f.left, concept),
                                 self._derive_formula(f.right, concept))
            elif isinstance(f, Next):
                node = self._strong(f.operand)
            elif isinstance(f, Until):
                node = self.disj(
                    self._derive_formula(f.right, concept),
                    self.conj(self._derive_formula(f.left, concept),
                              self.of_formula(f)))
            else:
                raise TypeError(f"non-core node in residual: {f!r}")
            self._deriv_memo[key] = node
        return node

    def derive(self, state: int, concept: str) -> int:
        """Residual after reading the one-hot symbol asserting ``concept``:
        substitute every leaf with its own derivative."""
        if state <= 1:
            return state
        key = (concept, state)
        node = self._subst_memo.get(key)
        if node is None:
            var, lo, hi = self.nodes[state]
            replacement = self._derive_formula(self.leaves[var], concept)
            node = self.ite(replacement, self.derive(hi, concept),
                            self.derive(lo, concept))
            self._subst_memo[key] = node
        return node

    def accepting(self, state: int) -> bool:
        # every leaf is false once the trace has ended
        while state > 1:
            state = self.nodes[state][1]
        return state == 1


# ---------------------------------------------------------------------------
# The automaton.

@dataclass(frozen=True)
class Dfa:
    """Complete deterministic automaton over a one-hot concept alphabet.

    Immutable after construction; safe to share across decoder instances.
    ``distance[q]`` is the cheapest total symbol cost from ``q`` to any
    accepting state (0 on accepting states, ``inf`` on deadlocks).
    """

    concepts: tuple[str, ...]          # column order, noMatch last
    num_states: int
    initial: int
    accepting: frozenset[int]
    delta: tuple[tuple[int, ...], ...]  # delta[state][symbol index]
    cost: dict[str, int]
    distance: tuple[float, ...] = ()
    formula: Formula | None = field(default=None, compare=False)

    @property
    def symbol_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.concepts)}

    def step(self, state: int, concept: str) -> int:
        try:
            sym = self.concepts.index(concept)
        except ValueError:
            raise KeyError(f"unknown concept {concept!r}") from None
        return self.delta[state][sym]

    def is_deadlock(self, state: int) -> bool:
        return self.distance[state] == float("inf")

    def reachable(self, state: int) -> frozenset[int]:
        """All states reachable from ``state`` via any symbol sequence."""
        return self._reach_sets()[state]

    def _reach_sets(self) -> tuple[frozenset[int], ...]:
        cached = self.__dict__.get("_reach")
        if cached is None:
            cached = _reach_closure(self.num_states, self.delta)
            self.__dict__["_reach"] = cached
        return cached


def _reach_closure(n: int, delta) -> tuple[frozenset[int], ...]:
    # Tarjan SCCs (iterative), then bitmask closure in reverse topological order.
    index = [0] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    order: list[int] = []  # components in completion order (reverse topological)
    counter = 1
    for root in range(n):
        if index[root]:
            continue
        work = [(root, 0)]
        while work:
            v, ei = work[-1]
            if ei == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            if ei < len(delta[v]):
                work[-1] = (v, ei + 1)
                w = delta[v][ei]
                if not index[w]:
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    members = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp[w] = len(order)
                        members.append(w)
                        if w == v:
                            break
                    order.append(members)
    comp_mask = [0] * len(order)
    for ci, members in enumerate(order):
        mask = 0
        for v in members:
            mask |= 1 << v
        for v in members:
            for w in delta[v]:
                mask |= comp_mask[comp[w]] if comp[w] != ci else 1 << w
        comp_mask[ci] = mask
    result = []
    for v in range(n):
        mask = comp_mask[comp[v]]
        result.append(frozenset(i for i in range(n) if mask >> i & 1))
    return tuple(result)


# ---------------------------------------------------------------------------
# Compilation.

def compile_formula(formula: Formula, concepts: Sequence[str],
                    costs: Mapping[str, int] | None = None, *,
                    minimize: bool = True,
                    state_cap: int = 1_000_000) -> Dfa:
    """Build the automaton whose one-hot traces are the formula's models.

    ``concepts`` is the declared concept list; ``noMatch`` is appended
    automatically.  ``costs`` gives the output count per concept symbol
    (default 1 everywhere).  Raises :class:`StateBudgetError` when the
    residual state space exceeds ``state_cap``.
    """
    alphabet = [validate_atom_name(c) for c in concepts]
    if NO_MATCH not in alphabet:
        alphabet.append(NO_MATCH)
    if len(set(alphabet)) != len(alphabet):
        raise ValueError("duplicate concept names")

    cost = {c: 1 for c in alphabet}
    for name, value in (costs or {}).items():
        if name not in cost:
            raise ValueError(f"cost given for unknown concept {name!r}")
        if not isinstance(value, int) or value < 1:
            raise ValueError(f"cost of {name!r} must be a positive integer")
        cost[name] = value

    from .ltlf import atoms_of
    undeclared = atoms_of(formula) - set(alphabet)
    if undeclared:
        raise ValueError(f"formula atoms not in alphabet: {sorted(undeclared)}")

    core = desugar(formula)
    residuals = _Residuals(core)
    start = residuals.of_formula(core)
    states: dict[int, int] = {start: 0}
    rows: list[list[int]] = []
    queue = [start]
    while queue:
        residual = queue.pop(0)
        row = []
        for concept in alphabet:
            succ = residuals.derive(residual, concept)
            if succ not in states:
                if len(states) >= state_cap:
                    raise StateBudgetError(
                        f"state budget of {state_cap} exceeded while compiling")
                states[succ] = len(states)
                queue.append(succ)
            row.append(states[succ])
        rows.append(row)

    accepting = frozenset(i for r, i in states.items()
                          if residuals.accepting(r))
    delta = tuple(tuple(r) for r in rows)
    n = len(states)
    initial = 0

    if minimize:
        n, initial, delta, accepting = _hopcroft(n, len(alphabet), delta,
                                                 accepting, initial)
    n, initial, delta, accepting = _canonical(n, len(alphabet), delta,
                                              accepting, initial)
    dfa = Dfa(concepts=tuple(alphabet), num_states=n, initial=initial,
              accepting=accepting, delta=delta, cost=cost, formula=formula)
    return annotate(dfa)


def _hopcroft(n, n_syms, delta, accepting, initial):
    """Merge language-equivalent states (all states are reachable here)."""
    inv: list[list[list[int]]] = [[[] for _ in range(n)] for _ in range(n_syms)]
    for q in range(n):
        for s in range(n_syms):
            inv[s][delta[q][s]].append(q)

    acc = frozenset(accepting)
    non_acc = frozenset(range(n)) - acc
    partition = {b for b in (acc, non_acc) if b}
    block_of = {}
    for block in partition:
        for q in block:
            block_of[q] = block
    worklist = set()
    if acc and non_acc:
        worklist.add(acc if len(acc) <= len(non_acc) else non_acc)

    while worklist:
        splitter = worklist.pop()
        for s in range(n_syms):
            affected: dict[frozenset, set] = {}
            for target in splitter:
                for q in inv[s][target]:
                    affected.setdefault(block_of[q], set()).add(q)
            for block, overlap in affected.items():
                if len(overlap) == len(block):
                    continue
                part1 = frozenset(overlap)
                part2 = block - part1
                partition.remove(block)
                partition.update((part1, part2))
                for q in part1:
                    block_of[q] = part1
                for q in part2:
                    block_of[q] = part2
                if block in worklist:
                    worklist.remove(block)
                    worklist.update((part1, part2))
                else:
                    worklist.add(part1 if len(part1) <= len(part2) else part2)

    blocks = sorted(partition, key=min)
    class_of = [0] * n
    for ci, block in enumerate(blocks):
        for q in block:
            class_of[q] = ci
    new_delta = []
    for block in blocks:
        rep = min(block)
        new_delta.append(tuple(class_of[delta[rep][s]] for s in range(n_syms)))
    new_accepting = frozenset(class_of[q] for q in accepting)
    return len(blocks), class_of[initial], tuple(new_delta), new_accepting


def _canonical(n, n_syms, delta, accepting, initial):
    """Renumber states in breadth-first order from the initial state."""
    order = [initial]
    seen = {initial}
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for s in range(n_syms):
            succ = delta[q][s]
            if succ not in seen:
                seen.add(succ)
                order.append(succ)
    remap = {old: new for new, old in enumerate(order)}
    new_delta = tuple(tuple(remap[delta[old][s]] for s in range(n_syms))
                      for old in order)
    new_accepting = frozenset(remap[q] for q in accepting if q in remap)
    return len(order), 0, new_delta, new_accepting


# ---------------------------------------------------------------------------
# Annotation and acceptance.

def annotate(dfa: Dfa) -> Dfa:
    """Populate shortest distances to acceptance (Dijkstra, cost weighted)."""
    n = dfa.num_states
    costs = [dfa.cost[c] for c in dfa.concepts]
    rev: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for q in range(n):
        for s, succ in enumerate(dfa.delta[q]):
            rev[succ].append((q, costs[s]))
    dist = [float("inf")] * n
    heap: list[tuple[float, int]] = []
    for q in dfa.accepting:
        dist[q] = 0
        heapq.heappush(heap, (0, q))
    while heap:
        d, q = heapq.heappop(heap)
        if d > dist[q]:
            continue
        for pred, w in rev[q]:
            nd = d + w
            if nd < dist[pred]:
                dist[pred] = nd
                heapq.heappush(heap, (nd, pred))
    return Dfa(concepts=dfa.concepts, num_states=n, initial=dfa.initial,
               accepting=dfa.accepting, delta=dfa.delta, cost=dict(dfa.cost),
               distance=tuple(dist), formula=dfa.formula)


def accepts(dfa: Dfa, trace: Iterable[str]) -> bool:
    """Run the automaton over a concept sequence; empty runs test the
    initial state."""
    index = dfa.symbol_index
    state = dfa.initial
    for concept in trace:
        if concept not in index:
            raise KeyError(f"unknown concept {concept!r}")
        state = dfa.delta[state][index[concept]]
    return state in dfa.accepting


def languages_equal(a: Dfa, b: Dfa) -> bool:
    """Exact language comparison via breadth-first product exploration."""
    if a.concepts != b.concepts:
        raise ValueError("automata have different alphabets")
    seen = {(a.initial, b.initial)}
    queue = [(a.initial, b.initial)]
    while queue:
        qa, qb = queue.pop(0)
        if (qa in a.accepting) != (qb in b.accepting):
            return False
        for s in range(len(a.concepts)):
            pair = (a.delta[qa][s], b.delta[qb][s])
            if pair not in seen:
                seen.add(pair)
                queue.append(pair)
    return True


# ---------------------------------------------------------------------------
# Exports.

@dataclass(frozen=True)
class TransitionMatrixExport:
    """Row-per-state view of the transition table with (cost, next) cells."""

    states: tuple[int, ...]
    initial: int
    accepting: tuple[int, ...]
    concepts: tuple[str, ...]
    cost: dict[str, int]
    delta: tuple[tuple[int, ...], ...]
    distance: tuple[float, ...]

    def cell(self, state: int, concept: str) -> tuple[int, int]:
        sym = self.concepts.index(concept)
        return (self.cost[concept], self.delta[state][sym])

    def to_json(self) -> str:
        payload = {
            "states": list(self.states),
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "concepts": list(self.concepts),
            "cost": {c: self.cost[c] for c in self.concepts},
            "delta": [list(row) for row in self.delta],
            "distance": [None if d == float("inf") else d
                         for d in self.distance],
        }
        return json.dumps(payload)


def export_matrix(dfa: Dfa) -> TransitionMatrixExport:
    if not dfa.distance:
        raise ValueError("annotate the automaton before exporting")
    return TransitionMatrixExport(
        states=tuple(range(dfa.num_states)), initial=dfa.initial,
        accepting=tuple(sorted(dfa.accepting)), concepts=dfa.concepts,
        cost=dict(dfa.cost), delta=dfa.delta, distance=dfa.distance)


def import_matrix(text: str) -> Dfa:
    data = json.loads(text)
    distance = tuple(float("inf") if d is None else float(d)
                     for d in data["distance"])
    return Dfa(concepts=tuple(data["concepts"]), num_states=len(data["states"]),
               initial=data["initial"], accepting=frozenset(data["accepting"]),
               delta=tuple(tuple(row) for row in data["delta"]),
               cost={c: int(v) for c, v in data["cost"].items()},
               distance=distance)


def export_dot(dfa: Dfa) -> str:
    if not dfa.distance:
        raise ValueError("annotate the automaton before exporting")
    lines = ["digraph dfa {", "  rankdir=LR;", '  __start [shape=point];',
             f"  __start -> q{dfa.initial};"]
    for q in range(dfa.num_states):
        shape = "doublecircle" if q in dfa.accepting else "circle"
        extra = ', color=red, style=filled, fillcolor="#ffdddd"' \
            if dfa.is_deadlock(q) else ""
        d = dfa.distance[q]
        label = f"q{q}\\nd={'inf' if d == float('inf') else int(d)}"
        lines.append(f'  q{q} [shape={shape}, label="{label}"{extra}];')
    for q in range(dfa.num_states):
        grouped: dict[int, list[str]] = {}
        for s, concept in enumerate(dfa.concepts):
            grouped.setdefault(dfa.delta[q][s], []).append(concept)
        for succ, labels in sorted(grouped.items()):
            text = ", ".join(f"{c} ({dfa.cost[c]})" for c in labels)
            lines.append(f'  q{q} -> q{succ} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines)
