"""DFA-guided constrained decoding for temporal constraints on finite traces."""

from .ltlf import (Always, And, Atom, Eventually, Formula, Next, Not, Or,
                   ParseError, Release, Top, UndeclaredAtomError, Until,
                   WeakNext, desugar, eval_trace, parse_formula,
                   random_formula, to_text)
from .dfa import (Dfa, NO_MATCH, StateBudgetError, accepts, annotate,
                  compile_formula, export_dot, export_matrix, import_matrix)
from .concepts import ConceptTable, ConceptTableError, MatchState
from .scorers import (LogitFileScorer, MarkovTableScorer, NormalizationError,
                      ProtocolError, RemoteScorer, Scorer)
from .decoder import (Beam, DecodeConfig, DecodeInternalError,
                      InfeasibleError, decode, decode_batch, ramp_push_up)
from .oracle import OracleResult, brute_force_map, feasible

__version__ = "0.1.0"
