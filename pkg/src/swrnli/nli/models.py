"""Decomposable attention and ESIM networks with optional syntactic fusion."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import tensor as T
from ..exceptions import ContractError
from ..layers import BiLSTM, FeedForward, Linear, Module, glorot, masked_max, masked_mean, masked_sum
from ..tensor import Tensor
from .fusion import FusionMode, compute_attention


def _check_dropout(**rates):
    for name, rate in rates.items():
        if not 0.0 <= rate < 1.0:
            raise ContractError(f"{name} must lie in [0, 1), got {rate}")


@dataclass
class DAConfig:
    attend_hidden: int = 295
    compare_hidden: int = 108
    aggregate_hidden: int = 172
    attend_dropout: float = 0.29
    compare_dropout: float = 0.34
    aggregate_dropout: float = 0.54
    lr: float = 3e-4

    def __post_init__(self):
        for name in ("attend_hidden", "compare_hidden", "aggregate_hidden"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        _check_dropout(attend_dropout=self.attend_dropout, compare_dropout=self.compare_dropout,
                       aggregate_dropout=self.aggregate_dropout)

    def to_dict(self):
        return asdict(self)


@dataclass
class ESIMConfig:
    encoder_hidden: int = 300
    composition_hidden: int = 300
    output_hidden: int = 300
    model_dropout: float = 0.5
    output_dropout: float = 0.5
    lr: float = 4e-4

    def __post_init__(self):
        for name in ("encoder_hidden", "composition_hidden", "output_hidden"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        _check_dropout(model_dropout=self.model_dropout, output_dropout=self.output_dropout)

    def to_dict(self):
        return asdict(self)


class ClassifierHead(Module):
    """``H``: one tanh hidden layer and a linear output.

    Under late fusion the first layer gets extra input columns for the two
    final-position parser vectors.  They are kept as a separate weight so
    that ``H([e, s_p, s_h])`` with zero extra columns reproduces ``H(e)`` exactly.
    """

    def __init__(self, e_dim: int, hidden: int, n_classes: int, rng: np.random.Generator,
                 swr_dim: int = 0, dropout: float = 0.0):
        super().__init__()
        self.first = Linear(e_dim, hidden, rng)
        self.swr_dim = swr_dim
        if swr_dim:
            self.swr_weight = T.parameter(glorot(rng, e_dim + 2 * swr_dim, hidden, (2 * swr_dim, hidden)))
        self.out = Linear(hidden, n_classes, rng)
        self.dropout = dropout
        self.e_dim = e_dim

    @property
    def input_dim(self) -> int:
        return self.e_dim + 2 * self.swr_dim

    def __call__(self, e: Tensor, swr_last_p=None, swr_last_h=None, rng=None,
                 training: bool = False) -> Tensor:
        if e.shape[-1] != self.e_dim:
            raise ContractError(f"classifier expects e of width {self.e_dim}, got {e.shape[-1]}")
        e = T.dropout(e, self.dropout, rng, training)
        z = self.first(e)
        if self.swr_dim:
            if swr_last_p is None or swr_last_h is None:
                raise ContractError("late fusion needs final-position representations")
            extra = np.concatenate([np.asarray(swr_last_p, dtype=np.float64),
                                    np.asarray(swr_last_h, dtype=np.float64)], axis=-1)
            if extra.shape[-1] != 2 * self.swr_dim:
                raise ContractError(f"expected {self.swr_dim}-dimensional representations, "
                                    f"got {extra.shape[-1] // 2}")
            z = z + T.as_tensor(extra) @ self.swr_weight
        elif swr_last_p is not None or swr_last_h is not None:
            raise ContractError("this classifier has no late-fusion columns")
        z = T.dropout(T.tanh(z), self.dropout, rng, training)
        return self.out(z)


def classify_head(model, e: Tensor, swr_last_p=None, swr_last_h=None, mode=None) -> Tensor:
    mode = FusionMode(mode or model.fusion)
    if mode.late != (swr_last_p is not None):
        raise ContractError(f"fusion mode {mode.value!r} and supplied representations disagree")
    return model.head(e, swr_last_p, swr_last_h)


class NLIModel(Module):
    """Shared plumbing: embeddings, fusion bookkeeping and the classifier head."""

    architecture = ""

    def __init__(self, vocab_size: int, embed_dim: int, n_classes: int, fusion: FusionMode,
                 swr_dim: int, rng: np.random.Generator, embeddings: np.ndarray | None,
                 train_embeddings: bool):
        super().__init__()
        self.fusion = FusionMode(fusion)
        if self.fusion.uses_swr and swr_dim < 1:
            raise ContractError(f"fusion mode {self.fusion.value!r} needs a positive swr_dim")
        self.swr_dim = swr_dim if self.fusion.uses_swr else 0
        self.n_classes = n_classes
        if embeddings is None:
            embeddings = rng.normal(0.0, 1.0, size=(vocab_size, embed_dim))
            embeddings[0] = 0.0
        self.embedding = T.Tensor(embeddings, requires_grad=train_embeddings)

    def _check_swrs(self, swrs):
        if self.fusion.uses_swr and swrs is None:
            raise ContractError(f"fusion mode {self.fusion.value!r} needs syntactic representations")
        if not self.fusion.uses_swr and swrs is not None:
            raise ContractError("baseline mode takes no syntactic representations")

    def _classify(self, e, swrs, p_mask, h_mask, rng, training):
        if self.fusion.late:
            sp, sh = swrs
            lengths_p, lengths_h = p_mask.sum(axis=1), h_mask.sum(axis=1)
            rows = np.arange(len(sp))
            return self.head(e, sp[rows, lengths_p - 1], sh[rows, lengths_h - 1], rng, training)
        return self.head(e, None, None, rng, training)


class DecomposableAttention(NLIModel):
    """Attend, compare, aggregate; position-blind apart from optional parser states."""

    architecture = "da"

    def __init__(self, config: DAConfig, vocab_size: int, embed_dim: int, n_classes: int,
                 rng: np.random.Generator, fusion: FusionMode = FusionMode.BASELINE, swr_dim: int = 0,
                 embeddings: np.ndarray | None = None, train_embeddings: bool = True):
        super().__init__(vocab_size, embed_dim, n_classes, fusion, swr_dim, rng, embeddings,
                         train_embeddings)
        c = self.config = config
        self.attend = FeedForward(embed_dim, [c.attend_hidden] * 2, rng, "relu", c.attend_dropout)
        self.compare = FeedForward(2 * embed_dim, [c.compare_hidden] * 2, rng, "relu", c.compare_dropout)
        self.aggregate = FeedForward(2 * c.compare_hidden, [c.aggregate_hidden], rng, "relu",
                                     c.aggregate_dropout)
        self.head = ClassifierHead(c.aggregate_hidden, c.aggregate_hidden, n_classes, rng,
                                   self.swr_dim if self.fusion.late else 0, c.aggregate_dropout)

    def forward(self, p_ids, p_mask, h_ids, h_mask, swrs=None, rng=None, training=False) -> Tensor:
        self._check_swrs(swrs)
        p = self.embedding[p_ids]
        h = self.embedding[h_ids]
        p_bar = self.attend(p, rng, training)
        h_bar = self.attend(h, rng, training)
        if self.fusion.attention:
            sim = compute_attention(p_bar, h_bar, swrs[0], swrs[1], self.fusion)
        else:
            sim = compute_attention(p_bar, h_bar)
        p_to_h = T.softmax_rows(sim, h_mask[:, None, :])
        h_to_p = T.softmax_rows(T.swapaxes(sim), p_mask[:, None, :])
        aligned_h = p_to_h @ h
        aligned_p = h_to_p @ p
        cmp_p = self.compare(T.concat([p, aligned_h], axis=-1), rng, training)
        cmp_h = self.compare(T.concat([h, aligned_p], axis=-1), rng, training)
        v = T.concat([masked_sum(cmp_p, p_mask), masked_sum(cmp_h, h_mask)], axis=-1)
        e = self.aggregate(v, rng, training)
        return self._classify(e, swrs, p_mask, h_mask, rng, training)


class ESIM(NLIModel):
    """BiLSTM encoding, soft alignment, enhancement, BiLSTM composition, mean+max pooling."""

    architecture = "esim"

    def __init__(self, config: ESIMConfig, vocab_size: int, embed_dim: int, n_classes: int,
                 rng: np.random.Generator, fusion: FusionMode = FusionMode.BASELINE, swr_dim: int = 0,
                 embeddings: np.ndarray | None = None, train_embeddings: bool = True):
        super().__init__(vocab_size, embed_dim, n_classes, fusion, swr_dim, rng, embeddings,
                         train_embeddings)
        c = self.config = config
        self.encoder = BiLSTM(embed_dim, c.encoder_hidden, 1, rng)
        self.projection = Linear(8 * c.encoder_hidden, c.composition_hidden, rng)
        self.composition = BiLSTM(c.composition_hidden, c.composition_hidden, 1, rng)
        self.head = ClassifierHead(8 * c.composition_hidden, c.output_hidden, n_classes, rng,
                                   self.swr_dim if self.fusion.late else 0, c.output_dropout)

    def forward(self, p_ids, p_mask, h_ids, h_mask, swrs=None, rng=None, training=False) -> Tensor:
        self._check_swrs(swrs)
        drop = self.config.model_dropout
        p = T.dropout(self.embedding[p_ids], drop, rng, training)
        h = T.dropout(self.embedding[h_ids], drop, rng, training)
        p_bar = self.encoder(p, p_mask)
        h_bar = self.encoder(h, h_mask)
        if self.fusion.attention:
            sim = compute_attention(p_bar, h_bar, swrs[0], swrs[1], self.fusion)
        else:
            sim = compute_attention(p_bar, h_bar)
        p_tilde = T.softmax_rows(sim, h_mask[:, None, :]) @ h_bar
        h_tilde = T.softmax_rows(T.swapaxes(sim), p_mask[:, None, :]) @ p_bar
        v_p = self._compose(p_bar, p_tilde, p_mask, rng, training)
        v_h = self._compose(h_bar, h_tilde, h_mask, rng, training)
        e = T.concat([masked_mean(v_p, p_mask), masked_max(v_p, p_mask),
                      masked_mean(v_h, h_mask), masked_max(v_h, h_mask)], axis=-1)
        return self._classify(e, swrs, p_mask, h_mask, rng, training)

    def _compose(self, enc, aligned, mask, rng, training):
        enhanced = T.concat([enc, aligned, enc - aligned, enc * aligned], axis=-1)
        projected = T.relu(self.projection(enhanced))
        projected = T.dropout(projected, self.config.model_dropout, rng, training)
        return self.composition(projected, mask)


def count_parameters(model: Module) -> int:
    """Number of trainable scalars (frozen embeddings and parser weights excluded)."""
    return int(sum(p.size for p in model.parameters(trainable_only=True)))


def build_model(architecture: str, config, vocab_size: int, embed_dim: int, n_classes: int,
                rng: np.random.Generator, fusion=FusionMode.BASELINE, swr_dim: int = 0,
                embeddings=None, train_embeddings: bool = True) -> NLIModel:
    cls = {"da": DecomposableAttention, "esim": ESIM}.get(architecture)
    if cls is None:
        raise ContractError(f"unknown architecture {architecture!r}")
    return cls(config, vocab_size, embed_dim, n_classes, rng, FusionMode(fusion), swr_dim,
               embeddings, train_embeddings)
