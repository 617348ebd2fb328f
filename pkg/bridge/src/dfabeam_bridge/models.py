"""Model backends: a deterministic uniform stub and a lazy wrapper around
a causal language model from the transformers hub.

Both expose ``vocab_size``, ``logprob_rows(prefixes)`` returning one
log-softmax row per prefix, and ``encode_word`` for concept export.
"""

from __future__ import annotations

import math
from typing import Sequence

from .tokenizer import StubTokenizer

__all__ = ["StubUniformModel", "HfCausalModel", "load_model"]


class StubUniformModel:
    """Uniform next-output distribution over a closed stub vocabulary."""

    def __init__(self, words: Sequence[str]):
        self.tokenizer = StubTokenizer(words)
        self.vocab_size = self.tokenizer.vocab_size
        self.eos_id = self.tokenizer.eos_id
        self._row = [math.log(1.0 / self.vocab_size)] * self.vocab_size

    def logprob_rows(self, prefixes: Sequence[Sequence[int]]) -> list[list[float]]:
        for prefix in prefixes:
            for output in prefix:
                if not 0 <= output < self.vocab_size:
                    raise ValueError(f"output id {output} out of range")
        return [list(self._row) for _ in prefixes]

    def encode_word(self, word: str) -> list[int]:
        return self.tokenizer.encode_word(word)


class HfCausalModel:
    """Next-token distributions from a hub causal LM; imports stay local so
    the stub path never needs torch installed."""

    def __init__(self, name: str, device: str | None = None):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(name)
        self.model = AutoModelForCausalLM.from_pretrained(name)
        self.model.eval()
        self.device = device or "cpu"
        self.model.to(self.device)
        self.vocab_size = int(self.model.get_output_embeddings().weight.shape[0])
        self.eos_id = int(self.tokenizer.eos_token_id)

    def logprob_rows(self, prefixes: Sequence[Sequence[int]]) -> list[list[float]]:
        torch = self._torch
        bos = self.tokenizer.bos_token_id
        if bos is None:
            bos = self.eos_id
        rows = []
        with torch.no_grad():
            for prefix in prefixes:  # ragged prefixes: one forward each
                ids = torch.tensor([[bos, *prefix]], device=self.device)
                logits = self.model(ids).logits[0, -1]
                rows.append(torch.log_softmax(logits.float(), dim=-1).tolist())
        return rows

    def encode_word(self, word: str) -> list[int]:
        # leading space pins the canonical in-sentence form
        return self.tokenizer.encode(" " + word, add_special_tokens=False)


def load_model(spec: str, words: Sequence[str]):
    """``stub`` serves the uniform stub over the given words;
    ``hf:NAME`` serves a hub model."""
    if spec == "stub":
        return StubUniformModel(words)
    kind, _, name = spec.partition(":")
    if kind == "hf" and name:
        return HfCausalModel(name)
    raise ValueError(f"unknown model spec {spec!r}")
