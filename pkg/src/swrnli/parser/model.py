"""BiLSTM encoder with biaffine arc and label scorers."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import tensor as T
from ..data import DepSentence, TokenSequence, Vocabulary, pad_batch
from ..exceptions import ContractError
from ..layers import BiLSTM, Linear, Module
from ..tensor import Tensor


@dataclass
class ParserConfig:
    embed_dim: int = 100
    encoder_hidden: int = 64
    encoder_layers: int = 2
    arc_mlp_dim: int = 64
    label_mlp_dim: int = 32
    n_labels: int = 1
    dropout: float = 0.33

    def __post_init__(self):
        for name in ("embed_dim", "encoder_hidden", "encoder_layers", "arc_mlp_dim",
                     "label_mlp_dim", "n_labels"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractError("dropout must lie in [0, 1)")

    @property
    def swr_dim(self) -> int:
        return 2 * self.encoder_hidden

    def to_dict(self) -> dict:
        return asdict(self)


class ParserModel(Module):
    """Word embeddings, a stacked BiLSTM and Dozat-Manning style biaffine scorers.

    ROOT is a learned vector in encoder space that is prepended to the head
    candidates only, so encoder outputs stay one-per-token.
    """

    def __init__(self, config: ParserConfig, vocab: Vocabulary, labels, rng: np.random.Generator,
                 embeddings: np.ndarray | None = None):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.labels = list(labels)
        self.frozen = False
        c = config
        if embeddings is None:
            embeddings = rng.normal(0.0, 1.0 / np.sqrt(c.embed_dim), size=(len(vocab), c.embed_dim))
            embeddings[0] = 0.0
        elif embeddings.shape != (len(vocab), c.embed_dim):
            raise ContractError(f"embedding matrix shape {embeddings.shape} does not match "
                                f"vocabulary size {len(vocab)} x {c.embed_dim}")
        self.embedding = T.parameter(embeddings)
        self.encoder = BiLSTM(c.embed_dim, c.encoder_hidden, c.encoder_layers, rng, c.dropout)
        d = c.swr_dim
        self.root = T.parameter(rng.normal(0.0, 0.1, size=d))
        self.arc_dep = Linear(d, c.arc_mlp_dim, rng)
        self.arc_head = Linear(d, c.arc_mlp_dim, rng)
        self.arc_u = T.parameter(np.zeros((c.arc_mlp_dim, c.arc_mlp_dim)))
        self.arc_b = T.parameter(np.zeros((c.arc_mlp_dim, 1)))
        self.label_dep = Linear(d, c.label_mlp_dim, rng)
        self.label_head = Linear(d, c.label_mlp_dim, rng)
        self.label_u = T.parameter(np.zeros((c.label_mlp_dim, c.n_labels * c.label_mlp_dim)))
        self.label_wd = T.parameter(np.zeros((c.label_mlp_dim, c.n_labels)))
        self.label_wh = T.parameter(np.zeros((c.label_mlp_dim, c.n_labels)))
        self.label_bias = T.parameter(np.zeros(c.n_labels))

    # -- encoding -------------------------------------------------------------
    def encode_batch(self, ids: np.ndarray, mask: np.ndarray, training: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        if ids.size and (ids.min() < 0 or ids.max() >= len(self.vocab)):
            raise ContractError("token index outside the parser vocabulary")
        x = self.embedding[ids]
        x = T.dropout(x, self.config.dropout, rng, training)
        x = self.encoder(x, mask, rng, training)
        return T.dropout(x, self.config.dropout, rng, training)

    def encode(self, sentence: TokenSequence, train_mode: bool = False,
               rng: np.random.Generator | None = None) -> Tensor:
        """Per-token ``[forward ; backward]`` final-layer states, ``L x 2*hidden``."""
        ids, mask = pad_batch([sentence])
        out = self.encode_batch(ids, mask, train_mode, rng)
        return T.reshape(out, out.shape[1:])

    # -- scoring --------------------------------------------------------------
    def _with_root(self, encoded: Tensor) -> Tensor:
        batch = encoded.shape[0]
        root = T.add(T.reshape(self.root, (1, 1, -1)), np.zeros((batch, 1, encoded.shape[-1])))
        return T.concat([root, encoded], axis=1)

    def arc_scores(self, encoded: Tensor) -> Tensor:
        """``B x L x (L+1)`` scores: dep_i U head_j + b . head_j."""
        dep = T.leaky_relu(self.arc_dep(encoded))
        head = T.leaky_relu(self.arc_head(self._with_root(encoded)))
        bilinear = (dep @ self.arc_u) @ T.swapaxes(head)
        head_bias = T.swapaxes(head @ self.arc_b)
        return bilinear + head_bias

    def _label_parts(self, encoded: Tensor):
        dep = T.leaky_relu(self.label_dep(encoded))
        head = T.leaky_relu(self.label_head(self._with_root(encoded)))
        return dep, head

    def label_scores(self, encoded: Tensor) -> Tensor:
        """``B x L x (L+1) x n_labels`` scores for every candidate head."""
        dep, head = self._label_parts(encoded)
        B, L, k = dep.shape
        R = self.config.n_labels
        bil = T.reshape(dep @ self.label_u, (B, L * R, k)) @ T.swapaxes(head)
        bil = T.transpose(T.reshape(bil, (B, L, R, L + 1)), (0, 1, 3, 2))
        lin_dep = T.reshape(dep @ self.label_wd, (B, L, 1, R))
        lin_head = T.reshape(head @ self.label_wh, (B, 1, L + 1, R))
        return bil + lin_dep + lin_head + self.label_bias

    def label_scores_at(self, encoded: Tensor, heads: np.ndarray) -> Tensor:
        """``B x L x n_labels`` scores for the label of each token's given head."""
        dep, head = self._label_parts(encoded)
        B, L, k = dep.shape
        R = self.config.n_labels
        chosen = head[np.arange(B)[:, None], heads]
        bil = T.reshape(dep @ self.label_u, (B, L, R, k)) * T.reshape(chosen, (B, L, 1, k))
        return bil.sum(axis=-1) + dep @ self.label_wd + chosen @ self.label_wh + self.label_bias

    def score_arcs_labels(self, encoded: Tensor) -> tuple[Tensor, Tensor]:
        """Unbatched scores for one ``L x d`` encoding."""
        batched = encoded if encoded.ndim == 3 else T.reshape(encoded, (1,) + encoded.shape)
        arcs, labels = self.arc_scores(batched), self.label_scores(batched)
        if encoded.ndim == 2:
            arcs = T.reshape(arcs, arcs.shape[1:])
            labels = T.reshape(labels, labels.shape[1:])
        return arcs, labels

    # -- training objective ---------------------------------------------------------
    def loss(self, ids: np.ndarray, mask: np.ndarray, heads: np.ndarray, rels: np.ndarray,
             training: bool = True, rng: np.random.Generator | None = None) -> Tensor:
        """Arc cross-entropy plus label cross-entropy at the gold head."""
        encoded = self.encode_batch(ids, mask, training, rng)
        arcs = self.arc_scores(encoded)
        B, L, _ = arcs.shape
        candidates = head_candidate_mask(mask)
        weights = mask.reshape(-1).astype(np.float64)
        arc_loss = T.cross_entropy(T.reshape(arcs, (B * L, L + 1)), heads.reshape(-1),
                                   candidates.reshape(B * L, L + 1), weights)
        labels = self.label_scores_at(encoded, heads)
        label_loss = T.cross_entropy(T.reshape(labels, (B * L, -1)), rels.reshape(-1), None, weights)
        return arc_loss + label_loss

    def batch_arrays(self, sentences: list[DepSentence]):
        ids, mask = pad_batch([self.vocab.encode(s.tokens) for s in sentences])
        label_index = {lab: i for i, lab in enumerate(self.labels)}
        heads = np.zeros_like(ids)
        rels = np.zeros_like(ids)
        for b, s in enumerate(sentences):
            heads[b, :len(s)] = s.heads
            rels[b, :len(s)] = [label_index.get(r, 0) for r in s.deprels]
        return ids, mask, heads, rels

    def freeze(self) -> ParserModel:
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None
        self.frozen = True
        return self


def head_candidate_mask(mask: np.ndarray) -> np.ndarray:
    """``B x L x (L+1)``: ROOT or a real token other than the dependent itself."""
    B, L = mask.shape
    cand = np.concatenate([np.ones((B, 1), dtype=bool), mask], axis=1)
    cand = np.broadcast_to(cand[:, None, :], (B, L, L + 1)).copy()
    idx = np.arange(L)
    cand[:, idx, idx + 1] = False
    return cand
