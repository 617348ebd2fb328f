import itertools
import math
import random

import pytest

from dfabeam.concepts import ConceptTable
from dfabeam.decoder import DecodeConfig, decode
from dfabeam.dfa import accepts, compile_formula
from dfabeam.ltlf import (eval_trace, one_hot_trace, parse_formula,
                          random_formula)
from dfabeam.oracle import EnumerationCapError, brute_force_map, feasible
from dfabeam.scorers import MarkovTableScorer

from test_decoder import FixedPathScorer, simple_order_dfa


class TestBruteForce:
    def test_contradiction_has_no_solution(self):
        phi = parse_formula("F a & G !a", ["a", "noMatch"])
        table = ConceptTable({"a": [0]})
        dfa = compile_formula(phi, ["a"], table.costs() | {"noMatch": 1})
        result = brute_force_map(MarkovTableScorer.uniform(2), dfa, table, 3)
        assert result.best_outputs is None
        assert result.feasible_count == 0
        assert result.enumerated == 8

    def test_deterministic_scorer_gives_zero_nll(self):
        _, dfa, table = simple_order_dfa()
        result = brute_force_map(FixedPathScorer([0, 2, 1], 3), dfa, table, 3)
        assert result.best_outputs == (0, 2, 1)
        assert result.best_nll == 0.0

    def test_pinned_ordering_fixture(self):
        # first-before-eos over a 3-output vocabulary, horizon 4, uniform
        # scorer: 25 of the 81 sequences satisfy, every one at 4*ln(3)
        _, dfa, table = simple_order_dfa()
        result = brute_force_map(MarkovTableScorer.uniform(3), dfa, table, 4)
        assert result.enumerated == 81
        assert result.feasible_count == 25
        assert result.best_nll == pytest.approx(4 * math.log(3), abs=1e-12)
        assert result.best_outputs == (0, 0, 0, 1)  # lexicographic tie break

    def test_matches_direct_trace_enumeration(self):
        # independent route: enumerate concept traces with eval_trace
        phi, dfa, table = simple_order_dfa()
        names = {0: "first", 1: "eos", 2: "noMatch"}
        want = sum(
            1 for seq in itertools.product(range(3), repeat=4)
            if eval_trace(phi, one_hot_trace([names[x] for x in seq])))
        got = brute_force_map(MarkovTableScorer.uniform(3), dfa, table, 4)
        assert got.feasible_count == want

    def test_cap_exceeded(self):
        _, dfa, table = simple_order_dfa()
        with pytest.raises(EnumerationCapError):
            brute_force_map(MarkovTableScorer.uniform(3), dfa, table, 10,
                            cap=1000)


class TestFeasible:
    def test_keyword_example_thresholds(self, keyword_dfa):
        assert not feasible(keyword_dfa, 4)
        assert feasible(keyword_dfa, 5)

    def test_accepting_initial_at_zero(self):
        dfa = compile_formula(parse_formula("true", []), [])
        assert feasible(dfa, 0)

    def test_matches_oracle_on_exhaustive_fixtures(self):
        # where acceptance can stall, the distance test and the exact count
        # agree; horizons below the distance always have zero solutions
        _, dfa, table = simple_order_dfa()
        scorer = MarkovTableScorer.uniform(3)
        for horizon in range(1, 6):
            result = brute_force_map(scorer, dfa, table, horizon)
            assert feasible(dfa, horizon) == (result.feasible_count > 0)


class TestDecoderAgreement:
    def test_decode_is_never_better_and_always_feasible(self):
        rng = random.Random(17)
        checked = 0
        while checked < 25:
            concepts = ["a", "b"][: 1 + rng.randrange(2)]
            phi = random_formula(3, concepts, rng.randrange(10 ** 6))
            table = ConceptTable({c: [i] for i, c in enumerate(concepts)})
            dfa = compile_formula(phi, concepts,
                                  table.costs() | {"noMatch": 1})
            vocab = len(concepts) + 1
            horizon = rng.randrange(2, 6)
            scorer = MarkovTableScorer.random(vocab, rng.randrange(10 ** 6))
            oracle = brute_force_map(scorer, dfa, table, horizon)
            if oracle.feasible_count == 0:
                continue
            # a nonzero feasible count means decode must not refuse
            k = rng.choice([1, 2, 4])
            beam = decode(scorer, dfa, table, (),
                          DecodeConfig(beams=k, horizon=horizon))
            assert -beam.natural_loglik >= oracle.best_nll - 1e-12
            assert accepts(dfa, table.interpret(beam.outputs))
            checked += 1
