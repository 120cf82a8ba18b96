"""scikit-learn style NLI classifiers and their training loop."""
from __future__ import annotations

import logging
import time
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .. import tensor as T
from ..data import NLIExample, Vocabulary, load_embeddings, pad_batch, resolve_label_set, tokenize
from ..exceptions import ContractError, DivergenceError, FrozenParserError, LabelError
from ..optim import Adam
from .fusion import FusionMode, noise_for_tokens, sample_noise_swr
from .models import DAConfig, ESIMConfig, build_model, count_parameters

logger = logging.getLogger(__name__)


def _tokens(x) -> tuple[str, ...]:
    if isinstance(x, str):
        return tuple(tokenize(x))
    tokens = tuple(x)
    if not tokens:
        raise ContractError("empty sentence")
    return tokens


def as_pairs(X, y=None):
    """Normalise ``X`` (NLIExamples or premise/hypothesis pairs) to token tuples and labels."""
    pairs, labels = [], []
    for item in X:
        if isinstance(item, NLIExample):
            pairs.append((item.premise, item.hypothesis))
            labels.append(item.label)
        else:
            premise, hypothesis = item
            pairs.append((_tokens(premise), _tokens(hypothesis)))
    if y is not None:
        labels = list(y)
        if len(labels) != len(pairs):
            raise ContractError(f"{len(pairs)} pairs but {len(labels)} labels")
    return pairs, (labels or None)


class _NLIClassifier(ClassifierMixin, BaseEstimator):
    """Fit/predict plumbing shared by the DA and ESIM estimators.

    ``parser`` is a frozen :class:`~swrnli.parser.BiaffineParser` supplying
    syntactic word representations for the ``lf`` and ``sa`` fusion modes.  The
    noise modes need only their dimension, taken from ``parser`` or ``swr_dim``.
    """

    architecture = ""

    def _network_config(self):
        raise NotImplementedError

    # -- setup ----------------------------------------------------------------
    def _seeds(self):
        seq = np.random.SeedSequence(self.random_state)
        return [np.random.default_rng(s) for s in seq.spawn(4)]  # init, shuffle, dropout, noise

    def _resolve_swr_dim(self, mode: FusionMode) -> int:
        if not mode.uses_swr:
            return 0
        if mode.uses_parser:
            if self.parser is None:
                raise ContractError(f"fusion mode {mode.value!r} needs a parser")
            if not self.parser.frozen_:
                raise FrozenParserError("the parser must be frozen before NLI training")
            return self.parser.swr_dim_
        if self.parser is not None:
            return self.parser.swr_dim_
        if not self.swr_dim:
            raise ContractError("noise fusion needs swr_dim or a parser to match")
        return int(self.swr_dim)

    def _init_network(self, pairs):
        mode = FusionMode(self.fusion)
        self.fusion_ = mode
        self.swr_dim_ = self._resolve_swr_dim(mode)
        vectors = None
        if self.embeddings is not None:
            emb = load_embeddings(self.embeddings, self.embed_dim)
            self.vocab_, vectors = emb.vocabulary, emb.vectors
        else:
            self.vocab_ = Vocabulary.build(s for pair in pairs for s in pair)
        init_rng = self._rngs[0]
        self.network_ = build_model(self.architecture, self._network_config(), len(self.vocab_),
                                    self.embed_dim, len(self.classes_), init_rng, mode,
                                    self.swr_dim_, vectors, not self.freeze_embeddings)
        self._swr_cache = {}

    # -- batching ---------------------------------------------------------------
    def _swr(self, tokens, noise_rng):
        mode = self.fusion_
        if mode.uses_parser:
            return self._swr_cache[tokens]
        if self.noise_sampling == "per_example":
            return noise_for_tokens(tokens, self.swr_dim_, self.random_state)
        return sample_noise_swr((len(tokens), self.swr_dim_), noise_rng)

    def _warm_cache(self, pairs):
        if not self.fusion_.uses_parser:
            return
        missing = sorted({s for pair in pairs for s in pair} - self._swr_cache.keys())
        if missing:
            for sent, arr in zip(missing, self.parser.transform_batch(missing)):
                self._swr_cache[sent] = arr

    def _batch(self, pairs, noise_rng):
        p_ids, p_mask = pad_batch([[self.vocab_.index(t) for t in p] for p, _ in pairs])
        h_ids, h_mask = pad_batch([[self.vocab_.index(t) for t in h] for _, h in pairs])
        swrs = None
        if self.fusion_.uses_swr:
            d = self.swr_dim_
            sp = np.zeros(p_ids.shape + (d,))
            sh = np.zeros(h_ids.shape + (d,))
            for b, (p, h) in enumerate(pairs):
                sp[b, :len(p)] = self._swr(p, noise_rng)
                sh[b, :len(h)] = self._swr(h, noise_rng)
            swrs = (sp, sh)
        return p_ids, p_mask, h_ids, h_mask, swrs

    def _logits(self, pairs, rng=None, training=False, noise_rng=None):
        p_ids, p_mask, h_ids, h_mask, swrs = self._batch(pairs, noise_rng)
        return self.network_.forward(p_ids, p_mask, h_ids, h_mask, swrs, rng, training)

    # -- public API -------------------------------------------------------------
    def fit(self, X, y=None, validation_data=None):
        """Train with Adam on cross-entropy; keeps the parameters with the best dev accuracy.

        ``validation_data`` is ``(X_dev, y_dev)`` or a list of NLIExamples.
        """
        pairs, labels = as_pairs(X, y)
        if not pairs:
            raise ContractError("training set is empty")
        if labels is None:
            raise ContractError("training labels are required")
        self.classes_ = np.array(resolve_label_set(self.label_set))
        index = {c: i for i, c in enumerate(self.classes_)}
        unknown = sorted(set(labels) - index.keys())
        if unknown:
            raise LabelError(f"labels {unknown} not in label set {list(self.classes_)}")
        targets = np.array([index[lab] for lab in labels])
        dev = None
        if validation_data is not None:
            dev_pairs, dev_labels = (as_pairs(validation_data) if isinstance(validation_data, list)
                                     else as_pairs(*validation_data))
            bad = sorted(set(dev_labels) - index.keys())
            if bad:
                raise LabelError(f"dev labels {bad} not in label set {list(self.classes_)}")
            dev = (dev_pairs, np.array([index[lab] for lab in dev_labels]))

        self._rngs = self._seeds()
        self._init_network(pairs)
        parser_bytes = (self.parser.model_.parameter_bytes()
                        if self.fusion_.uses_parser else None)
        self._warm_cache(pairs + (dev[0] if dev else []))
        self.history_ = self._train(pairs, targets, dev)
        if parser_bytes is not None and self.parser.model_.parameter_bytes() != parser_bytes:
            raise FrozenParserError("parser parameters changed during NLI training")
        return self

    def _train(self, pairs, targets, dev):
        _, shuffle_rng, dropout_rng, noise_rng = self._rngs
        params = self.network_.parameters(trainable_only=True)
        optimizer = Adam(params, lr=self.lr)
        history, best_acc, best_state, since_best, step = [], -1.0, None, 0, 0
        for epoch in range(self.epochs):
            start = time.perf_counter()
            order = shuffle_rng.permutation(len(pairs))
            total = 0.0
            for s in range(0, len(order), self.batch_size):
                idx = order[s:s + self.batch_size]
                optimizer.zero_grad()
                logits = self._logits([pairs[i] for i in idx], dropout_rng, True, noise_rng)
                loss = T.cross_entropy(logits, targets[idx])
                step += 1
                if not np.isfinite(loss.item()):
                    raise DivergenceError(step)
                loss.backward()
                optimizer.step()
                total += loss.item() * len(idx)
            record = {"epoch": epoch + 1, "loss": total / len(pairs)}
            if dev is not None:
                record["dev_accuracy"] = self._accuracy(*dev, noise_rng)
            record["seconds"] = time.perf_counter() - start
            history.append(record)
            logger.debug("%s epoch %d: %s", self.architecture, epoch + 1, record)
            if dev is None:
                continue
            if record["dev_accuracy"] > best_acc:
                best_acc, since_best = record["dev_accuracy"], 0
                best_state = {k: v.copy() for k, v in self.network_.state_dict().items()}
            else:
                since_best += 1
                if since_best > self.patience:
                    break
        if best_state is not None:
            self.network_.load_state_dict(best_state)
        self.n_steps_ = step
        return history

    def _predict_indices(self, pairs, noise_rng=None, batch_size=256):
        if noise_rng is None:
            noise_rng = self._rngs[3]
        self._warm_cache(pairs)
        out = []
        with T.no_grad():
            for s in range(0, len(pairs), batch_size):
                logits = self._logits(pairs[s:s + batch_size], noise_rng=noise_rng).data
                out.append(np.argmax(logits, axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=int)

    def _accuracy(self, pairs, targets, noise_rng=None) -> float:
        if len(pairs) == 0:
            raise ContractError("cannot score an empty split")
        return float(np.mean(self._predict_indices(pairs, noise_rng) == targets))

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        pairs, _ = as_pairs(X)
        self._warm_cache(pairs)
        with T.no_grad():
            return self._logits(pairs, noise_rng=self._rngs[3]).data.copy()

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        pairs, _ = as_pairs(X)
        return self.classes_[self._predict_indices(pairs)]

    def score(self, X, y=None, sample_weight=None) -> float:
        return evaluate_accuracy(self, X, y)

    @property
    def n_parameters_(self) -> int:
        check_is_fitted(self, "network_")
        return count_parameters(self.network_)


class DecomposableAttentionClassifier(_NLIClassifier):
    """Decomposable attention NLI model.  Defaults are the tuned baseline values."""

    architecture = "da"

    def __init__(self, fusion="baseline", parser=None, swr_dim=None, label_set="3way",
                 embed_dim=300, embeddings=None, freeze_embeddings=False,
                 attend_hidden=295, compare_hidden=108, aggregate_hidden=172,
                 attend_dropout=0.29, compare_dropout=0.34, aggregate_dropout=0.54,
                 lr=3e-4, epochs=75, batch_size=32, patience=10, noise_sampling="per_forward",
                 random_state=0):
        self.fusion = fusion
        self.parser = parser
        self.swr_dim = swr_dim
        self.label_set = label_set
        self.embed_dim = embed_dim
        self.embeddings = embeddings
        self.freeze_embeddings = freeze_embeddings
        self.attend_hidden = attend_hidden
        self.compare_hidden = compare_hidden
        self.aggregate_hidden = aggregate_hidden
        self.attend_dropout = attend_dropout
        self.compare_dropout = compare_dropout
        self.aggregate_dropout = aggregate_dropout
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.noise_sampling = noise_sampling
        self.random_state = random_state

    def _network_config(self):
        return DAConfig(self.attend_hidden, self.compare_hidden, self.aggregate_hidden,
                        self.attend_dropout, self.compare_dropout, self.aggregate_dropout, self.lr)


class ESIMClassifier(_NLIClassifier):
    """Sequential ESIM.  Sizes default to the common 300-unit setup."""

    architecture = "esim"

    def __init__(self, fusion="baseline", parser=None, swr_dim=None, label_set="3way",
                 embed_dim=300, embeddings=None, freeze_embeddings=False,
                 encoder_hidden=300, composition_hidden=300, output_hidden=300,
                 model_dropout=0.5, output_dropout=0.5, lr=4e-4, epochs=75, batch_size=32,
                 patience=10, noise_sampling="per_forward", random_state=0):
        self.fusion = fusion
        self.parser = parser
        self.swr_dim = swr_dim
        self.label_set = label_set
        self.embed_dim = embed_dim
        self.embeddings = embeddings
        self.freeze_embeddings = freeze_embeddings
        self.encoder_hidden = encoder_hidden
        self.composition_hidden = composition_hidden
        self.output_hidden = output_hidden
        self.model_dropout = model_dropout
        self.output_dropout = output_dropout
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.noise_sampling = noise_sampling
        self.random_state = random_state

    def _network_config(self):
        return ESIMConfig(self.encoder_hidden, self.composition_hidden, self.output_hidden,
                          self.model_dropout, self.output_dropout, self.lr)


ESTIMATORS = {"da": DecomposableAttentionClassifier, "esim": ESIMClassifier}


def evaluate_accuracy(model: _NLIClassifier, X: Sequence, y=None) -> float:
    """Argmax accuracy; ties resolve to the lowest label index."""
    check_is_fitted(model, "network_")
    pairs, labels = as_pairs(X, y)
    if not pairs:
        raise ContractError("cannot score an empty split")
    index = {c: i for i, c in enumerate(model.classes_)}
    return model._accuracy(pairs, np.array([index[lab] for lab in labels]))


def train_nli(model: _NLIClassifier, train: Sequence[NLIExample], dev: Sequence[NLIExample] | None = None,
              **overrides):
    """Fit ``model`` (with any hyperparameter overrides) and return it with its history."""
    if overrides:
        model.set_params(**overrides)
    model.fit(list(train), validation_data=list(dev) if dev else None)
    return model, model.history_
