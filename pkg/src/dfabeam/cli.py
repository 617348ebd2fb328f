"""Command line surface: compile formulas, inspect automata, check traces,
decode under constraints, generate constraint patterns and run benchmarks.

Exit codes: 0 success, 2 bad input, 3 infeasible instance, 4 budget
exceeded.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time

from .concepts import ConceptTable, ConceptTableError
from .decoder import DecodeConfig, InfeasibleError, decode, result_to_json
from .dfa import (StateBudgetError, accepts, compile_formula, export_dot,
                  export_matrix, import_matrix)
from .ltlf import ParseError, parse_formula, trace_from_json
from .oracle import EnumerationCapError, feasible
from .patterns import ordered_pattern, unordered_pattern
from .scorers import (LogitFileScorer, MarkovTableScorer, RemoteScorer,
                      load_logit_file)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_BUDGET = 4


class _Manifest:
    """Everything needed to reproduce a run: argv, parameters, seeds,
    per-phase timing, and produced artifact paths."""

    def __init__(self, command: str, argv: list[str]):
        self.data = {"command": command, "argv": argv, "params": {},
                     "seeds": {}, "timing_sec": {}, "coverage": None,
                     "outputs": {}}
        self._marks: dict[str, float] = {}

    def start(self, phase: str) -> None:
        self._marks[phase] = time.perf_counter()

    def stop(self, phase: str) -> None:
        self.data["timing_sec"][phase] = round(
            time.perf_counter() - self._marks.pop(phase), 6)

    def write(self, path: str | None) -> None:
        if path:
            with open(path, "w") as handle:
                json.dump(self.data, handle, indent=2)
            self.data["outputs"]["manifest"] = path


def _read(path: str) -> str:
    with open(path) as handle:
        return handle.read()


def _load_concepts(path: str) -> tuple[list[str], dict[str, int]]:
    """Concepts file: a JSON list of names, or an object with ``concepts``
    and optional ``costs``, or a concept-table mapping names to output
    sequences (costs follow from the sequence lengths)."""
    data = json.loads(_read(path))
    if isinstance(data, list):
        return [str(c) for c in data], {}
    if isinstance(data, dict):
        if "concepts" in data:
            return ([str(c) for c in data["concepts"]],
                    {str(k): int(v) for k, v in data.get("costs", {}).items()})
        table = ConceptTable({k: v for k, v in data.items()
                              if k != "noMatch_policy"})
        return sorted(table.entries), table.costs()
    raise ValueError("unrecognized concepts file")


def _load_scorer(spec: str, sequence: str | None):
    kind, _, arg = spec.partition(":")
    if kind == "markov":
        return MarkovTableScorer.from_json(_read(arg))
    if kind == "logits":
        _, sequences = load_logit_file(_read(arg))
        if sequence is None:
            if len(sequences) != 1:
                raise ValueError("--sequence is required with several "
                                 "stored sequences")
            sequence = next(iter(sequences))
        return LogitFileScorer(sequences, sequence)
    if kind == "remote":
        return RemoteScorer.http(arg)
    raise ValueError(f"unknown scorer spec {spec!r}")


def _decode_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beams", type=int, default=64)
    parser.add_argument("--horizon", type=int, required=True)
    parser.add_argument("--alpha-min", type=float, default=0.5)
    parser.add_argument("--gamma", type=float, default=1.0)
    parser.add_argument("--epsilon", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)


def _config(args: argparse.Namespace, beams: int | None = None) -> DecodeConfig:
    return DecodeConfig(beams=beams or args.beams, horizon=args.horizon,
                        alpha_min=args.alpha_min, gamma=args.gamma,
                        epsilon=args.epsilon, seed=args.seed)


# ---------------------------------------------------------------------------
# Commands.

def cmd_compile(args, manifest: _Manifest) -> int:
    concepts, costs = _load_concepts(args.concepts)
    formula_text = _read(args.formula).strip()
    alphabet = list(concepts) + (["noMatch"] if "noMatch" not in concepts else [])
    formula = parse_formula(formula_text, alphabet)
    manifest.start("compile")
    dfa = compile_formula(formula, concepts, costs or None,
                          state_cap=args.state_cap)
    manifest.stop("compile")
    deadlocks = sum(1 for q in range(dfa.num_states) if dfa.is_deadlock(q))
    d0 = dfa.distance[dfa.initial]
    manifest.data["params"].update(states=dfa.num_states, deadlocks=deadlocks,
                                   d0=None if d0 == float("inf") else d0)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(export_matrix(dfa).to_json())
        manifest.data["outputs"]["matrix"] = args.out
    if args.dot:
        with open(args.dot, "w") as handle:
            handle.write(export_dot(dfa))
        manifest.data["outputs"]["dot"] = args.dot
    if args.format == "json":
        print(export_matrix(dfa).to_json())
    elif args.format == "dot":
        print(export_dot(dfa))
    else:
        print(f"states: {dfa.num_states}")
        print(f"accepting: {len(dfa.accepting)}")
        print(f"deadlocks: {deadlocks}")
        print(f"d0: {'inf' if d0 == float('inf') else int(d0)}")
        print("distance: " + " ".join(
            "inf" if d == float("inf") else str(int(d)) for d in dfa.distance))
    return EXIT_OK


def cmd_check(args, manifest: _Manifest) -> int:
    dfa = import_matrix(_read(args.dfa))
    had_errors = False
    results = []
    with open(args.traces) as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                trace = trace_from_json(json.loads(line))
                symbols = []
                for instant in trace:
                    if len(instant) != 1:
                        raise ValueError("each instant must hold exactly "
                                         "one concept")
                    symbols.append(next(iter(instant)))
                verdict = "ACCEPT" if accepts(dfa, symbols) else "REJECT"
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                verdict = f"ERROR: {exc}"
                had_errors = True
            results.append(verdict)
            print(f"line {number}: {verdict}")
    manifest.data["params"]["lines"] = len(results)
    manifest.data["params"]["errors"] = had_errors
    return EXIT_OK


def cmd_decode(args, manifest: _Manifest) -> int:
    dfa = import_matrix(_read(args.dfa))
    table = ConceptTable.from_json(_read(args.table))
    scorer = _load_scorer(args.scorer, args.sequence)
    prompt = tuple(int(x) for x in args.prompt.split(",")) if args.prompt else ()
    cfg = _config(args)
    manifest.data["params"].update(beams=cfg.beams, horizon=cfg.horizon,
                                   alpha_min=cfg.alpha_min, gamma=cfg.gamma,
                                   epsilon=cfg.epsilon)
    manifest.data["seeds"]["decode"] = cfg.seed
    manifest.start("decode")
    beam = decode(scorer, dfa, table, prompt, cfg)
    manifest.stop("decode")
    payload = result_to_json(beam, dfa, table)
    manifest.data["coverage"] = 1.0 if json.loads(payload)["satisfied"] else 0.0
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(payload)
        manifest.data["outputs"]["result"] = args.out
    if args.format == "text":
        data = json.loads(payload)
        print("outputs:", " ".join(map(str, data["outputs"])))
        print("concepts:", " ".join(data["concepts"]))
        print(f"natural_loglik: {data['natural_loglik']:.6f}")
        print(f"satisfied: {data['satisfied']}")
    else:
        print(payload)
    return EXIT_OK


def cmd_gen_constraints(args, manifest: _Manifest) -> int:
    if args.mode == "ordered":
        text = ordered_pattern(args.concepts)
    else:
        text = unordered_pattern(args.concepts)
    manifest.data["params"].update(mode=args.mode, concepts=args.concepts)
    print(text)
    return EXIT_OK


def cmd_bench(args, manifest: _Manifest) -> int:
    concepts, costs = _load_concepts(args.concepts)
    formula = parse_formula(
        _read(args.formula).strip(),
        list(concepts) + (["noMatch"] if "noMatch" not in concepts else []))
    dfa = compile_formula(formula, concepts, costs or None)
    table = ConceptTable.from_json(_read(args.table))
    scorer = _load_scorer(args.scorer, args.sequence)
    sweep = [int(k) for k in args.beams.split(",")]
    if not feasible(dfa, args.horizon):
        raise InfeasibleError(f"start distance exceeds horizon {args.horizon}")

    rows = []
    satisfied = 0
    for k in sweep:
        cfg = _config(args, beams=k)
        times = []
        result = None
        for _ in range(args.repeats):
            start = time.perf_counter()
            beam = decode(scorer, dfa, table, (), cfg)
            times.append(time.perf_counter() - start)
            result = beam
        satisfied += accepts(dfa, table.interpret(result.outputs))
        rows.append({
            "beams": k,
            "mean_sec": statistics.mean(times),
            "stderr_sec": (statistics.stdev(times) / len(times) ** 0.5
                           if len(times) > 1 else 0.0),
            "outputs": list(result.outputs),
            "natural_loglik": result.natural_loglik,
        })
    manifest.data["coverage"] = satisfied / len(sweep)
    header = "beams   " + "".join(f"{row['beams']:>12d}" for row in rows)
    line = "time(s) " + "".join(
        f"{row['mean_sec']:>7.3f}±{row['stderr_sec']:.3f}" for row in rows)
    print(header)
    print(line)
    manifest.data["params"].update(beams=sweep, horizon=args.horizon,
                                   repeats=args.repeats)
    manifest.data["seeds"]["decode"] = args.seed
    if args.results:
        deterministic = [{k: row[k] for k in
                          ("beams", "outputs", "natural_loglik")}
                         for row in rows]
        with open(args.results, "w") as handle:
            json.dump({"horizon": args.horizon, "rows": deterministic},
                      handle, indent=2)
        manifest.data["outputs"]["results"] = args.results
    if args.timings:
        with open(args.timings, "w") as handle:
            json.dump(rows, handle, indent=2)
        manifest.data["outputs"]["timings"] = args.timings
    return EXIT_OK


def cmd_replay(args, manifest: _Manifest) -> int:
    recorded = json.loads(_read(args.manifest_file))
    argv = list(recorded["argv"])
    # strip any nested manifest flag; the replay has its own
    if "--manifest" in argv:
        where = argv.index("--manifest")
        del argv[where:where + 2]
    return main(argv)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfabeam",
        description="Compile temporal constraints and decode under them.")
    parser.add_argument("--manifest", help="write a reproducibility manifest")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="formula -> annotated automaton")
    p.add_argument("formula", help="file holding the formula text")
    p.add_argument("--concepts", required=True, help="concepts JSON file")
    p.add_argument("--out", help="write the matrix JSON here")
    p.add_argument("--dot", help="write DOT here")
    p.add_argument("--format", choices=("json", "dot", "text"), default="text")
    p.add_argument("--state-cap", type=int, default=1_000_000)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("check", help="run traces through an automaton")
    p.add_argument("dfa", help="matrix JSON file")
    p.add_argument("traces", help="one JSON trace per line")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("decode", help="constrained beam search")
    p.add_argument("dfa", help="matrix JSON file")
    p.add_argument("--table", required=True, help="concept table JSON file")
    p.add_argument("--scorer", required=True,
                   help="markov:FILE | logits:FILE | remote:URL")
    p.add_argument("--sequence", help="sequence id for logits scorers")
    p.add_argument("--prompt", default="", help="comma separated output ids")
    p.add_argument("--out", help="write the result JSON here")
    p.add_argument("--format", choices=("json", "text"), default="json")
    _decode_args(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gen-constraints", help="emit a constraint pattern")
    p.add_argument("--mode", choices=("ordered", "unordered"), required=True)
    p.add_argument("concepts", nargs="+")
    p.set_defaults(func=cmd_gen_constraints)

    p = sub.add_parser("bench", help="timing sweep over beam counts")
    p.add_argument("formula", help="file holding the formula text")
    p.add_argument("--concepts", required=True, help="concepts JSON file")
    p.add_argument("--table", required=True, help="concept table JSON file")
    p.add_argument("--scorer", required=True)
    p.add_argument("--sequence")
    p.add_argument("--beams", default="4,8,16")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--alpha-min", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--results", help="deterministic outputs JSON")
    p.add_argument("--timings", help="timing rows JSON")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = _Manifest(args.command, argv)
    try:
        code = args.func(args, manifest)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (StateBudgetError, EnumerationCapError) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParseError, ConceptTableError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    manifest.write(args.manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
