import pytest

from dfabeam.concepts import ConceptTable
from dfabeam.dfa import compile_formula
from dfabeam.ltlf import parse_formula

from keyword_fixture import KEYWORD_FORMULA, KEYWORD_ALPHABET

@pytest.fixture(scope="session")
def keyword_formula():
    return parse_formula(KEYWORD_FORMULA, KEYWORD_ALPHABET)


@pytest.fixture(scope="session")
def keyword_table():
    return ConceptTable({"cat": [0], "politician": [1, 2, 3], "eos": [4]})


@pytest.fixture(scope="session")
def keyword_dfa(keyword_formula, keyword_table):
    costs = keyword_table.costs() | {"noMatch": 1}
    return compile_formula(keyword_formula, ["cat", "politician", "eos"],
                           costs)


@pytest.fixture(scope="session")
def paper_states(keyword_dfa):
    """Resolve the published state names against the compiled automaton by
    walking transitions from the initial state."""
    d = keyword_dfa
    s1 = d.initial
    s3 = d.step(s1, "cat")
    s2 = d.step(s1, "politician")
    s4 = d.step(s1, "eos")
    s5 = d.step(s3, "politician")
    s6 = d.step(s5, "eos")
    return {"s1": s1, "s2": s2, "s3": s3, "s4": s4, "s5": s5, "s6": s6}
