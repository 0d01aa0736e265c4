"""Language-model interface and deterministic n-gram reference models.

Everything here is desk-scale and exactly reproducible: models are plain
count tables, distributions are dense numpy vectors over a fixed vocabulary,
and all tie-breaking is by ascending token index.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError

MODEL_FORMAT = "treespec-ngram"
MODEL_FORMAT_VERSION = 1

TokenSeq = Sequence[int]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, duplicate-free token inventory; index <-> token is a bijection."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.tokens) < 2:
            raise InputError("vocabulary needs at least 2 tokens")
        if len(set(self.tokens)) != len(self.tokens):
            raise InputError("vocabulary tokens must be unique")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def index_of(self, token: str) -> int:
        idx = self._index.get(token)  # type: ignore[attr-defined]
        if idx is None:
            raise InputError(f"token {token!r} not in vocabulary")
        return idx

    def get(self, token: str, default: int | None = None) -> int | None:
        return self._index.get(token, default)  # type: ignore[attr-defined]

    def token_of(self, index: int) -> str:
        if not 0 <= index < len(self.tokens):
            raise InputError(f"token index {index} out of range")
        return self.tokens[index]


def validate_dist(probs: np.ndarray | Sequence[float], size: int | None = None) -> np.ndarray:
    """Check that ``probs`` is a distribution (non-negative, sums to 1 within 1e-9)."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError("distribution must be one-dimensional")
    if size is not None and arr.shape[0] != size:
        raise InputError(f"distribution has length {arr.shape[0]}, expected {size}")
    if arr.shape[0] < 1:
        raise InputError("distribution must be non-empty")
    if np.any(arr < 0.0):
        raise InputError("distribution has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > 1e-9:
        raise InputError(f"distribution sums to {total!r}, not 1")
    return arr


def entropy_nats(dist: np.ndarray | Sequence[float]) -> float:
    """Shannon entropy -sum(p ln p) in nats, with 0 ln 0 taken as 0."""
    arr = np.asarray(dist, dtype=np.float64)
    pos = arr[arr > 0.0]
    return float(-(pos * np.log(pos)).sum()) + 0.0


def top_candidates(dist: np.ndarray | Sequence[float], k: int) -> list[tuple[int, float]]:
    """The k highest-probability (token, probability) pairs, descending.

    Ties are broken by ascending token index so results are reproducible.
    """
    arr = np.asarray(dist, dtype=np.float64)
    if not 1 <= k <= arr.shape[0]:
        raise InputError(f"k={k} out of range for vocabulary of {arr.shape[0]}")
    order = np.argsort(-arr, kind="stable")[:k]
    return [(int(i), float(arr[i])) for i in order]


class LanguageModel(abc.ABC):
    """Yields a normalized next-token distribution for any token context.

    Implementations are immutable after construction and safe for concurrent
    reads. Contexts are sequences of token indices into ``vocab``.
    """

    vocab: Vocabulary

    @abc.abstractmethod
    def next_token_dist(self, context: TokenSeq) -> np.ndarray:
        """Next-token distribution given ``context``; deterministic per input."""

    def next_token_dists(self, contexts: Sequence[TokenSeq]) -> list[np.ndarray]:
        """Score many contexts in one invocation (the batched call boundary)."""
        return [self.next_token_dist(c) for c in contexts]

    def _check_context(self, context: TokenSeq) -> None:
        if len(context) == 0:
            return
        arr = np.asarray(context, dtype=np.int64)
        if arr.min() < 0 or arr.max() >= self.vocab.size:
            raise InputError("context contains a token outside the model vocabulary")


class NGramModel(LanguageModel):
    """Additively smoothed order-n count model.

    ``counts`` maps a context tuple (the last ``order - 1`` tokens; shorter
    tuples occur near document starts) to per-token successor counts. The
    conditional is (count + smoothing) / (total + smoothing * |V|), so any
    positive smoothing guarantees full support on unseen contexts. A context
    with zero total mass (possible only at smoothing 0) falls back to uniform
    so the output is always a valid distribution.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        order: int,
        counts: Mapping[tuple[int, ...], Mapping[int, int]],
        smoothing: float,
    ) -> None:
        if order < 1:
            raise InputError("order must be >= 1")
        if smoothing < 0:
            raise InputError("smoothing must be >= 0")
        self.vocab = vocab
        self.order = order
        self.smoothing = float(smoothing)
        self.counts: dict[tuple[int, ...], dict[int, int]] = {
            tuple(ctx): dict(row) for ctx, row in counts.items()
        }
        self._totals = {ctx: sum(row.values()) for ctx, row in self.counts.items()}

    @classmethod
    def fit(
        cls,
        vocab: Vocabulary,
        documents: Sequence[TokenSeq],
        order: int,
        smoothing: float,
    ) -> "NGramModel":
        """Count successor statistics over ``documents`` (index sequences)."""
        if order < 1:
            raise InputError("order must be >= 1")
        counts: dict[tuple[int, ...], dict[int, int]] = {}
        span = order - 1
        for doc in documents:
            doc = list(doc)
            for i, token in enumerate(doc):
                ctx = tuple(doc[max(0, i - span):i])
                row = counts.setdefault(ctx, {})
                row[token] = row.get(token, 0) + 1
        return cls(vocab, order, counts, smoothing)

    def _context_key(self, context: TokenSeq) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(int(t) for t in context[-(self.order - 1):])

    def next_token_dist(self, context: TokenSeq) -> np.ndarray:
        self._check_context(context)
        key = self._context_key(context)
        row = self.counts.get(key)
        total = self._totals.get(key, 0)
        size = self.vocab.size
        denom = total + self.smoothing * size
        if denom <= 0.0:
            return np.full(size, 1.0 / size)
        probs = np.full(size, self.smoothing, dtype=np.float64)
        if row:
            for token, count in row.items():
                probs[token] += count
        probs /= denom
        return probs


class TableModel(LanguageModel):
    """Hand-built model: explicit distributions per exact context tuple.

    Contexts absent from the table get ``default``. Useful for constructing
    worked examples and oracle tests with known probabilities.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        default: np.ndarray | Sequence[float],
        table: Mapping[tuple[int, ...], np.ndarray | Sequence[float]] | None = None,
    ) -> None:
        self.vocab = vocab
        self.default = validate_dist(default, vocab.size)
        self.table = {
            tuple(ctx): validate_dist(d, vocab.size) for ctx, d in (table or {}).items()
        }

    def next_token_dist(self, context: TokenSeq) -> np.ndarray:
        self._check_context(context)
        return self.table.get(tuple(int(t) for t in context), self.default)


def save_model(model: NGramModel, path: str | Path) -> None:
    """Write an NGramModel to a versioned JSON file (see ``load_model``)."""
    entries = [
        [list(ctx), {str(tok): c for tok, c in sorted(row.items())}]
        for ctx, row in sorted(model.counts.items())
    ]
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "order": model.order,
        "smoothing": model.smoothing,
        "vocab": list(model.vocab.tokens),
        "counts": entries,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> NGramModel:
    """Read a model produced by ``save_model``; rejects unknown formats."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_FORMAT_VERSION:
        raise InputError(f"unsupported model file format in {path}")
    counts = {
        tuple(ctx): {int(tok): int(c) for tok, c in row.items()}
        for ctx, row in payload["counts"]
    }
    return NGramModel(
        Vocabulary(tuple(payload["vocab"])),
        int(payload["order"]),
        counts,
        float(payload["smoothing"]),
    )
