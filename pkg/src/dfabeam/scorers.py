"""Reference scorers implementing the next-output log-probability contract.

A scorer exposes ``vocab_size`` and ``score(prefixes)``, returning one
log-distribution row per prefix.  Rows must normalize (logsumexp 0
within 1e-4) and may contain ``-inf`` for hard zeros.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import IO, Sequence

import numpy as np

__all__ = [
    "Scorer", "MarkovTableScorer", "LogitFileScorer", "RemoteScorer",
    "ProtocolError", "NormalizationError", "validate_logprob_rows",
    "load_logit_file", "save_logit_file",
]

_NORM_TOL = 1e-4


class ProtocolError(RuntimeError):
    """Remote peer violated the wire protocol."""


class NormalizationError(ValueError):
    """A score row does not form a log-distribution."""


def validate_logprob_rows(rows: np.ndarray, tol: float = _NORM_TOL) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise NormalizationError(f"expected a 2-d score matrix, got {rows.ndim}-d")
    if np.isnan(rows).any() or (rows == np.inf).any():
        raise NormalizationError("rows contain NaN or +inf")
    with np.errstate(over="ignore"):
        mass = np.logaddexp.reduce(rows, axis=1)
    bad = ~np.isclose(mass, 0.0, atol=tol)
    if bad.any():
        raise NormalizationError(
            f"rows {np.flatnonzero(bad).tolist()} have logsumexp "
            f"{mass[bad].tolist()}")
    return rows


class Scorer:
    """Contract: one log-distribution row per prefix, deterministic, and
    safe to call with step-sized batches.  Scorers that cannot tolerate
    concurrent callers set ``concurrent_safe`` to False and the decoder
    serializes on them."""

    vocab_size: int
    concurrent_safe: bool = True

    def score(self, prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        raise NotImplementedError


class MarkovTableScorer(Scorer):
    """Time-homogeneous Markov chain over output ids."""

    def __init__(self, initial: Sequence[float],
                 transition: Sequence[Sequence[float]]):
        initial = np.asarray(initial, dtype=float)
        transition = np.asarray(transition, dtype=float)
        if transition.shape != (initial.size, initial.size):
            raise ValueError("transition matrix shape does not match initial")
        if not np.isclose(initial.sum(), 1.0, atol=1e-8):
            raise ValueError("initial distribution must sum to 1")
        if not np.allclose(transition.sum(axis=1), 1.0, atol=1e-8):
            raise ValueError("transition rows must sum to 1")
        with np.errstate(divide="ignore"):
            self._log_initial = np.log(initial)
            self._log_transition = np.log(transition)
        self.vocab_size = int(initial.size)

    @classmethod
    def uniform(cls, vocab_size: int) -> "MarkovTableScorer":
        row = np.full(vocab_size, 1.0 / vocab_size)
        return cls(row, np.tile(row, (vocab_size, 1)))

    @classmethod
    def random(cls, vocab_size: int, seed: int) -> "MarkovTableScorer":
        rng = np.random.default_rng(seed)
        initial = rng.dirichlet(np.ones(vocab_size))
        transition = rng.dirichlet(np.ones(vocab_size), size=vocab_size)
        return cls(initial, transition)

    @classmethod
    def from_json(cls, text: str) -> "MarkovTableScorer":
        data = json.loads(text)
        return cls(data["initial"], data["transition"])

    def to_json(self) -> str:
        return json.dumps({
            "initial": np.exp(self._log_initial).tolist(),
            "transition": np.exp(self._log_transition).tolist(),
        })

    def score(self, prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        rows = np.empty((len(prefixes), self.vocab_size))
        for i, prefix in enumerate(prefixes):
            if prefix:
                last = prefix[-1]
                if not 0 <= last < self.vocab_size:
                    raise IndexError(f"output id {last} out of range")
                rows[i] = self._log_transition[last]
            else:
                rows[i] = self._log_initial
        return rows


class LogitFileScorer(Scorer):
    """Per-step emission rows loaded from a file, keyed by sequence id.

    Emissions are context independent: the row served for a prefix is the
    stored row at index ``len(prefix)``.  Suits per-item classifier
    outputs exported once and decoded many times.
    """

    def __init__(self, sequences: dict[str, np.ndarray], sequence_id: str):
        if sequence_id not in sequences:
            raise KeyError(f"unknown sequence id {sequence_id!r}")
        self._rows = validate_logprob_rows(sequences[sequence_id])
        self.sequence_id = sequence_id
        self.vocab_size = int(self._rows.shape[1])
        self.num_steps = int(self._rows.shape[0])

    def score(self, prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        rows = np.empty((len(prefixes), self.vocab_size))
        for i, prefix in enumerate(prefixes):
            step = len(prefix)
            if step >= self.num_steps:
                raise IndexError(
                    f"step {step} beyond stored horizon {self.num_steps}")
            rows[i] = self._rows[step]
        return rows


def load_logit_file(text: str) -> tuple[int, dict[str, np.ndarray]]:
    data = json.loads(text)
    vocab = int(data["vocab"])
    sequences = {}
    for sid, rows in data["sequences"].items():
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != vocab:
            raise ValueError(f"sequence {sid!r} rows do not match vocab {vocab}")
        sequences[sid] = validate_logprob_rows(arr)
    return vocab, sequences


def save_logit_file(vocab: int, sequences: dict[str, np.ndarray]) -> str:
    return json.dumps({
        "vocab": vocab,
        "sequences": {sid: np.asarray(rows).tolist()
                      for sid, rows in sequences.items()},
    })


# ---------------------------------------------------------------------------
# Remote scorer: newline-delimited JSON over a byte stream, or HTTP POST.
# Request  {"id": n, "prefixes": [[int, ...], ...]}
# Response {"id": n, "logprobs": [[float, ...], ...]}
# Handshake GET /vocab (or {"id": n, "op": "vocab"} over a stream):
#          {"vocab_size": V, "concept_table": {...}}

class _HttpTransport:
    def __init__(self, url: str, timeout: float):
        self.url = url.rstrip("/")
        self.timeout = timeout

    def request(self, payload: dict) -> dict:
        body = json.dumps(payload).encode()
        req = urllib.request.Request(self.url + "/score", data=body,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return _decode_json_line(resp.read())
        except TimeoutError:
            raise
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise TimeoutError(str(exc)) from exc
            raise ProtocolError(f"transport failure: {exc}") from exc

    def handshake(self) -> dict:
        try:
            with urllib.request.urlopen(self.url + "/vocab",
                                        timeout=self.timeout) as resp:
                return _decode_json_line(resp.read())
        except TimeoutError:
            raise
        except urllib.error.URLError as exc:
            raise ProtocolError(f"transport failure: {exc}") from exc


class _StdioTransport:
    """One request line out, one response line back, over byte streams."""

    def __init__(self, writer: IO[bytes], reader: IO[bytes]):
        self.writer = writer
        self.reader = reader

    def request(self, payload: dict) -> dict:
        self.writer.write(json.dumps(payload).encode() + b"\n")
        self.writer.flush()
        line = self.reader.readline()
        if not line:
            raise ProtocolError("peer closed the stream")
        return _decode_json_line(line)

    def handshake(self) -> dict:
        return self.request({"id": 0, "op": "vocab"})


def _decode_json_line(raw: bytes) -> dict:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON from peer: {exc}") from exc
    if not isinstance(data, dict):
        raise ProtocolError("peer response is not a JSON object")
    return data


class RemoteScorer(Scorer):
    """Client for an out-of-process scorer speaking the wire protocol."""

    concurrent_safe = False

    def __init__(self, transport, *, batch_limit: int = 64):
        if batch_limit < 1:
            raise ValueError("batch_limit must be >= 1")
        self._transport = transport
        self._batch_limit = batch_limit
        self._next_id = 1
        handshake = transport.handshake()
        if "vocab_size" not in handshake:
            raise ProtocolError("handshake lacks vocab_size")
        self.vocab_size = int(handshake["vocab_size"])
        self.concept_table = handshake.get("concept_table")

    @classmethod
    def http(cls, url: str, *, timeout: float = 30.0,
             batch_limit: int = 64) -> "RemoteScorer":
        return cls(_HttpTransport(url, timeout), batch_limit=batch_limit)

    @classmethod
    def stdio(cls, writer: IO[bytes], reader: IO[bytes], *,
              batch_limit: int = 64) -> "RemoteScorer":
        return cls(_StdioTransport(writer, reader), batch_limit=batch_limit)

    def score(self, prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        chunks = []
        for start in range(0, len(prefixes), self._batch_limit):
            chunk = prefixes[start:start + self._batch_limit]
            request_id = self._next_id
            self._next_id += 1
            response = self._transport.request(
                {"id": request_id, "prefixes": [list(p) for p in chunk]})
            if response.get("id") != request_id:
                raise ProtocolError(
                    f"response id {response.get('id')!r} does not match "
                    f"request id {request_id}")
            if "error" in response:
                raise ProtocolError(f"peer error: {response['error']}")
            if "logprobs" not in response:
                raise ProtocolError("response lacks logprobs")
            rows = np.asarray(
                [[float("-inf") if v is None else float(v) for v in row]
                 for row in response["logprobs"]], dtype=float)
            if rows.shape != (len(chunk), self.vocab_size):
                raise ProtocolError(
                    f"expected {(len(chunk), self.vocab_size)} logprobs, "
                    f"got {rows.shape}")
            chunks.append(validate_logprob_rows(rows))
        if not chunks:
            return np.empty((0, self.vocab_size))
        return np.concatenate(chunks, axis=0)
