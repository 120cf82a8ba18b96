"""Training loop and the scikit-learn style :class:`BiaffineParser`."""
from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .. import tensor as T
from ..data import DepSentence, TokenSequence, Vocabulary, load_embeddings, pad_batch, tokenize
from ..exceptions import ContractError, DivergenceError, FrozenParserError
from ..optim import Adam
from .decode import decode_tree
from .metrics import corpus_attachment_scores
from .model import ParserConfig, ParserModel

logger = logging.getLogger(__name__)


def _batches(n: int, batch_size: int, rng: np.random.Generator | None):
    order = np.arange(n) if rng is None else rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def predict_trees(model: ParserModel, sentences, mode: str = "mst", batch_size: int = 64):
    """``(heads, labels)`` for each token list, decoded in evaluation mode."""
    out = []
    with T.no_grad():
        for start in range(0, len(sentences), batch_size):
            chunk = sentences[start:start + batch_size]
            ids, mask = pad_batch([model.vocab.encode(toks) for toks in chunk])
            encoded = model.encode_batch(ids, mask)
            arcs = model.arc_scores(encoded).data
            heads = np.zeros(ids.shape, dtype=np.int64)
            for b, toks in enumerate(chunk):
                n = len(toks)
                heads[b, :n] = decode_tree(arcs[b, :n, :n + 1], mode)
            rels = np.argmax(model.label_scores_at(encoded, heads).data, axis=-1)
            for b, toks in enumerate(chunk):
                n = len(toks)
                out.append(([int(h) for h in heads[b, :n]],
                            [model.labels[r] for r in rels[b, :n]]))
    return out


def train_parser(model: ParserModel, treebank: list[DepSentence], epochs: int, lr: float = 2e-3,
                 betas=(0.9, 0.9), batch_size: int = 32, seed: int = 0, decode: str = "mst",
                 eval_every: int = 1):
    """Minimise arc + label cross-entropy; returns per-epoch ``{loss, uas}`` history."""
    if not treebank:
        raise ContractError("treebank is empty")
    if model.frozen:
        raise FrozenParserError("cannot train a frozen parser")
    shuffle_rng, dropout_rng = (np.random.default_rng(s)
                                for s in np.random.SeedSequence(seed).spawn(2))
    optimizer = Adam(model.parameters(trainable_only=True), lr=lr, betas=betas)
    history = []
    step = 0
    for epoch in range(epochs):
        total, count = 0.0, 0
        for batch in _batches(len(treebank), batch_size, shuffle_rng):
            sents = [treebank[i] for i in batch]
            optimizer.zero_grad()
            loss = model.loss(*model.batch_arrays(sents), training=True, rng=dropout_rng)
            step += 1
            if not np.isfinite(loss.item()):
                raise DivergenceError(step)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(sents)
            count += len(sents)
        record = {"epoch": epoch + 1, "loss": total / count}
        if eval_every and ((epoch + 1) % eval_every == 0 or epoch + 1 == epochs):
            preds = predict_trees(model, [s.tokens for s in treebank], decode)
            record["uas"], record["las"] = corpus_attachment_scores(preds, treebank)
        logger.debug("parser epoch %d: %s", epoch + 1, record)
        history.append(record)
    return history


def extract_swrs(frozen: ParserModel, sentence) -> np.ndarray:
    """Encoder states of one sentence, computed without dropout and detached from the parser."""
    if not frozen.frozen:
        raise FrozenParserError("syntactic representations require a frozen parser; call freeze()")
    if not isinstance(sentence, TokenSequence):
        sentence = frozen.vocab.encode(list(sentence))
    with T.no_grad():
        out = frozen.encode(sentence, train_mode=False).data.copy()
    out.setflags(write=False)
    return out


def _as_tokens(x):
    if isinstance(x, DepSentence):
        return list(x.tokens)
    if isinstance(x, TokenSequence):
        return list(x.tokens)
    if isinstance(x, str):
        return tokenize(x)
    return list(x)


class BiaffineParser(BaseEstimator):
    """Graph-based dependency parser whose encoder states serve as SWRs.

    ``fit`` trains on a list of :class:`~swrnli.data.DepSentence`; ``predict``
    returns ``(heads, labels)`` per sentence; after :meth:`freeze`,
    ``transform`` returns one ``L x 2*encoder_hidden`` array per sentence.
    """

    def __init__(self, embed_dim=100, encoder_hidden=64, encoder_layers=2, arc_mlp_dim=64,
                 label_mlp_dim=32, dropout=0.33, lr=2e-3, epochs=30, batch_size=32,
                 decode="mst", embeddings=None, random_state=0):
        self.embed_dim = embed_dim
        self.encoder_hidden = encoder_hidden
        self.encoder_layers = encoder_layers
        self.arc_mlp_dim = arc_mlp_dim
        self.label_mlp_dim = label_mlp_dim
        self.dropout = dropout
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.decode = decode
        self.embeddings = embeddings
        self.random_state = random_state

    def _config(self, n_labels: int) -> ParserConfig:
        return ParserConfig(self.embed_dim, self.encoder_hidden, self.encoder_layers,
                            self.arc_mlp_dim, self.label_mlp_dim, n_labels, self.dropout)

    def _build(self, vocab, labels, vectors=None) -> ParserModel:
        init_seed, _ = np.random.SeedSequence(self.random_state).spawn(2)
        return ParserModel(self._config(len(labels)), vocab, labels,
                           np.random.default_rng(init_seed), vectors)

    def fit(self, X, y=None):
        treebank = list(X)
        if not treebank or not all(isinstance(s, DepSentence) for s in treebank):
            raise ContractError("fit expects a non-empty list of DepSentence")
        vectors = None
        if self.embeddings is not None:
            emb = load_embeddings(self.embeddings, self.embed_dim)
            vocab, vectors = emb.vocabulary, emb.vectors
        else:
            vocab = Vocabulary.build(s.tokens for s in treebank)
        labels = sorted({r for s in treebank for r in s.deprels})
        self.model_ = self._build(vocab, labels, vectors)
        _, train_seed = np.random.SeedSequence(self.random_state).spawn(2)
        self.history_ = train_parser(self.model_, treebank, self.epochs, self.lr,
                                     batch_size=self.batch_size,
                                     seed=int(train_seed.generate_state(1)[0]),
                                     decode=self.decode)
        return self

    def freeze(self) -> BiaffineParser:
        check_is_fitted(self, "model_")
        self.model_.freeze()
        return self

    @property
    def frozen_(self) -> bool:
        return hasattr(self, "model_") and self.model_.frozen

    @property
    def swr_dim_(self) -> int:
        check_is_fitted(self, "model_")
        return self.model_.config.swr_dim

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict_trees(self.model_, [_as_tokens(x) for x in X], self.decode)

    def score(self, X, y=None) -> float:
        """Unlabeled attachment score on a list of gold sentences."""
        gold = list(X)
        uas, _ = corpus_attachment_scores(self.predict(gold), gold)
        return uas

    def transform(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [extract_swrs(self.model_, _as_tokens(x)) for x in X]

    def transform_batch(self, sentences, batch_size: int = 64) -> list[np.ndarray]:
        """Batched equivalent of :meth:`transform` for token lists."""
        check_is_fitted(self, "model_")
        if not self.model_.frozen:
            raise FrozenParserError("syntactic representations require a frozen parser; call freeze()")
        out = []
        with T.no_grad():
            for start in range(0, len(sentences), batch_size):
                chunk = [_as_tokens(s) for s in sentences[start:start + batch_size]]
                ids, mask = pad_batch([self.model_.vocab.encode(t) for t in chunk])
                enc = self.model_.encode_batch(ids, mask).data
                for b, toks in enumerate(chunk):
                    arr = enc[b, :len(toks)].copy()
                    arr.setflags(write=False)
                    out.append(arr)
        return out
