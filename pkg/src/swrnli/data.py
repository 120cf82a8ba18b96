"""Readers and writers for treebanks, NLI pairs and word vectors; tokenization and padding."""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ContractError, FormatError, LabelError, MalformedTreeError

logger = logging.getLogger(__name__)

PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"

THREE_WAY = ("entailment", "contradiction", "neutral")
TWO_WAY = ("entailment", "neutral")
LABEL_SETS = {"3way": THREE_WAY, "snli": THREE_WAY, "mnli": THREE_WAY,
              "2way": TWO_WAY, "scitail": TWO_WAY}

_TERMINAL_PUNCT = ".,!?;:"


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenization with trailing punctuation split off.

    >>> tokenize("A dog runs.")
    ['a', 'dog', 'runs', '.']
    """
    if text is None or not text.strip():
        raise ContractError("cannot tokenize empty text")
    tokens = []
    for chunk in text.lower().split():
        trailing = []
        while len(chunk) > 1 and chunk[-1] in _TERMINAL_PUNCT:
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.append(chunk)
        tokens.extend(reversed(trailing))
    return tokens


class Vocabulary:
    """Token/index map with ``<pad>`` at 0 and ``<unk>`` at 1."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self.stoi: dict[str, int] = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        for tok in tokens:
            self.add(tok)

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
        counts = Counter(tok.lower() for seq in sequences for tok in seq)
        return cls(sorted(t for t, c in counts.items() if c >= min_count))

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token.lower(), UNK)

    def encode(self, tokens: Sequence[str]) -> TokenSequence:
        return TokenSequence(tuple(tokens), tuple(self.index(t) for t in tokens))

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos: Sequence[str]) -> Vocabulary:
        if list(itos[:2]) != [PAD_TOKEN, UNK_TOKEN]:
            raise FormatError("vocabulary must start with <pad>, <unk>")
        return cls(itos[2:])


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    ids: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ContractError("token sequence is empty")
        if len(self.tokens) != len(self.ids):
            raise ContractError("tokens and ids differ in length")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class EmbeddingMatrix:
    vocabulary: Vocabulary
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def load_embeddings(path, expected_dim: int) -> EmbeddingMatrix:
    """Read GloVe-style ``token v1 ... vd`` lines.

    Rows 0 and 1 are prepended for padding (zeros) and unknown words (the mean
    of the loaded vectors).  Repeated tokens keep their first vector.
    """
    vocab = Vocabulary()
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != expected_dim + 1:
                raise FormatError(
                    f"expected {expected_dim} values, found {len(parts) - 1}", line=lineno)
            if parts[0] in vocab:
                continue
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise FormatError(f"non-numeric value: {exc}", line=lineno) from None
            vocab.add(parts[0])
    if not rows:
        raise FormatError(f"no vectors found in {path}")
    loaded = np.asarray(rows, dtype=np.float64)
    vectors = np.vstack([np.zeros(expected_dim), loaded.mean(axis=0), loaded])
    return EmbeddingMatrix(vocab, vectors)


# -- treebanks ------------------------------------------------------------------
@dataclass
class DepSentence:
    """One CoNLL-U sentence reduced to word forms, heads and relation labels.

    ``heads[i]`` is the 1-based head of token ``i + 1``; 0 marks the root.
    """
    tokens: list[str]
    heads: list[int]
    deprels: list[str]

    def __post_init__(self):
        if not (len(self.tokens) == len(self.heads) == len(self.deprels)):
            raise ContractError("tokens, heads and deprels differ in length")

    def __len__(self) -> int:
        return len(self.tokens)


def check_tree(heads: Sequence[int]) -> str | None:
    """Return a description of why ``heads`` is not a single-rooted tree, or ``None``."""
    n = len(heads)
    if n == 0:
        return "empty sentence"
    for i, h in enumerate(heads, start=1):
        if not 0 <= h <= n:
            return f"token {i} has out-of-range head {h}"
        if h == i:
            return f"token {i} heads itself"
    roots = [i for i, h in enumerate(heads, start=1) if h == 0]
    if len(roots) != 1:
        return f"expected exactly one root, found {len(roots)}"
    for start in range(1, n + 1):
        node, steps = start, 0
        while node != 0:
            node = heads[node - 1]
            steps += 1
            if steps > n:
                return f"cycle through token {start}"
    return None


def read_conllu(lines: Iterable[str]) -> list[DepSentence]:
    sentences: list[DepSentence] = []
    tokens, heads, rels = [], [], []
    start_line = 1

    def flush():
        if not tokens:
            return
        problem = check_tree(heads)
        if problem:
            raise MalformedTreeError(f"{problem} (starting line {start_line})",
                                     sentence_index=len(sentences))
        sentences.append(DepSentence(list(tokens), list(heads), list(rels)))
        tokens.clear()
        heads.clear()
        rels.clear()

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush()
            start_line = lineno + 1
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise FormatError(f"expected 10 tab-separated columns, found {len(cols)}", line=lineno)
        if "-" in cols[0] or "." in cols[0]:
            continue
        try:
            head = int(cols[6])
        except ValueError:
            raise FormatError(f"non-integer HEAD {cols[6]!r}", line=lineno) from None
        tokens.append(cols[1])
        heads.append(head)
        rels.append(cols[7])
    flush()
    return sentences


def load_conllu(path) -> list[DepSentence]:
    with open(path, encoding="utf-8") as fh:
        return read_conllu(fh)


def format_conllu(sentences: Iterable[DepSentence]) -> str:
    blocks = []
    for sent in sentences:
        lines = [
            "\t".join([str(i), form, "_", "_", "_", "_", str(head), rel, "_", "_"])
            for i, (form, head, rel) in enumerate(zip(sent.tokens, sent.heads, sent.deprels), start=1)
        ]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def write_conllu(sentences: Iterable[DepSentence], path) -> None:
    Path(path).write_text(format_conllu(sentences), encoding="utf-8")


# -- NLI pairs --------------------------------------------------------------------
@dataclass(frozen=True)
class NLIExample:
    premise: tuple[str, ...]
    hypothesis: tuple[str, ...]
    label: str
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def from_text(cls, premise: str, hypothesis: str, label: str, **extra) -> NLIExample:
        return cls(tuple(tokenize(premise)), tuple(tokenize(hypothesis)), label, extra)


def resolve_label_set(label_set) -> tuple[str, ...]:
    if isinstance(label_set, str):
        try:
            return LABEL_SETS[label_set.lower()]
        except KeyError:
            raise LabelError(f"unknown label set {label_set!r}") from None
    return tuple(label_set)


def load_nli_jsonl(path, label_set=THREE_WAY, return_dropped: bool = False):
    """Read ``sentence1``/``sentence2``/``gold_label`` JSON lines.

    Pairs labelled ``-`` (no annotator consensus) are skipped and counted.
    """
    labels = resolve_label_set(label_set)
    examples, dropped = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                premise, hypothesis, gold = record["sentence1"], record["sentence2"], record["gold_label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"malformed record: {exc}", line=lineno) from None
            if gold == "-":
                dropped += 1
                continue
            if gold not in labels:
                raise LabelError(f"line {lineno}: label {gold!r} not in {list(labels)}")
            extra = {k: v for k, v in record.items() if k not in ("sentence1", "sentence2", "gold_label")}
            examples.append(NLIExample.from_text(premise, hypothesis, gold, **extra))
    if not examples:
        logger.warning("no labelled examples in %s", path)
    if dropped:
        logger.info("dropped %d unlabelled pairs from %s", dropped, path)
    return (examples, dropped) if return_dropped else examples


def write_nli_jsonl(examples: Iterable[NLIExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            record = {"sentence1": " ".join(ex.premise), "sentence2": " ".join(ex.hypothesis),
                      "gold_label": ex.label}
            record.update(ex.extra)
            fh.write(json.dumps(record, sort_keys=True) + "\n")


# -- batching ---------------------------------------------------------------------
def pad_batch(sequences: Sequence[Sequence[int] | TokenSequence], pad_index: int = PAD):
    """Right-pad id sequences to the longest one.

    Returns an int64 ``B x Lmax`` id matrix and a boolean mask that is true on real tokens.
    """
    if not sequences:
        raise ContractError("cannot pad an empty batch")
    rows = [s.ids if isinstance(s, TokenSequence) else s for s in sequences]
    width = max(len(r) for r in rows)
    ids = np.full((len(rows), width), pad_index, dtype=np.int64)
    mask = np.zeros((len(rows), width), dtype=bool)
    for i, r in enumerate(rows):
        ids[i, :len(r)] = r
        mask[i, :len(r)] = True
    return ids, mask
