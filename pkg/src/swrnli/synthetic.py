"""Generated treebanks and the agent/patient order task used for desk-scale experiments."""
from __future__ import annotations

import numpy as np

from .data import TWO_WAY, DepSentence, NLIExample
from .probes import DEFAULT_LEXICON, Lexicon


def _pick(rng, words, exclude=()):
    choices = [w for w in words if w not in exclude]
    return choices[int(rng.integers(len(choices)))]


def _transitive(rng, lex):
    n1 = _pick(rng, lex.singular_nouns)
    n2 = _pick(rng, lex.singular_nouns, (n1,))
    v = _pick(rng, lex.transitive_verbs)
    return DepSentence(["the", n1, v, "the", n2], [2, 3, 0, 5, 3],
                       ["det", "nsubj", "root", "det", "obj"])


def _transitive_adverb(rng, lex):
    s = _transitive(rng, lex)
    return DepSentence(s.tokens + [_pick(rng, lex.adverbs)], s.heads + [3], s.deprels + ["advmod"])


def _intransitive(rng, lex):
    n = _pick(rng, lex.singular_nouns + lex.plural_nouns)
    v = _pick(rng, lex.intransitive_verbs)
    return DepSentence(["the", n, v], [2, 3, 0], ["det", "nsubj", "root"])


def _pp_subject(rng, lex):
    n1 = _pick(rng, lex.singular_nouns)
    n2 = _pick(rng, lex.singular_nouns, (n1,))
    return DepSentence(["the", n1, _pick(rng, lex.prepositions), "the", n2,
                        _pick(rng, lex.intransitive_verbs)],
                       [2, 6, 5, 5, 2, 0], ["det", "nsubj", "case", "det", "nmod", "root"])


def _passive(rng, lex):
    n1 = _pick(rng, lex.singular_nouns)
    n2 = _pick(rng, lex.singular_nouns, (n1,))
    return DepSentence(["the", n1, "was", _pick(rng, lex.transitive_verbs), "by", "the", n2],
                       [2, 4, 4, 0, 7, 7, 4],
                       ["det", "nsubj:pass", "aux:pass", "root", "case", "det", "obl"])


_CONSTRUCTIONS = {
    "transitive": _transitive,
    "transitive_adverb": _transitive_adverb,
    "intransitive": _intransitive,
    "pp_subject": _pp_subject,
    "passive": _passive,
}


def make_treebank(n_sentences: int, seed: int = 0, lexicon: Lexicon = DEFAULT_LEXICON,
                  constructions=("transitive", "transitive_adverb", "intransitive",
                                 "pp_subject", "passive")) -> list[DepSentence]:
    """Small UD-style treebank over the lexicon; half the sentences are plain transitives."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_sentences):
        if i % 2 == 0:
            name = "transitive"
        else:
            name = constructions[int(rng.integers(len(constructions)))]
        out.append(_CONSTRUCTIONS[name](rng, lexicon))
    return out


def make_order_task(n_pairs: int = 2000, seed: int = 0, lexicon: Lexicon = DEFAULT_LEXICON,
                    labels=TWO_WAY, splits=(0.7, 0.15, 0.15)):
    """Premise/hypothesis pairs whose label depends only on who did what to whom.

    Every premise ``the A <verb> the B`` appears twice: with itself as the
    hypothesis (entailment) and with agent and patient swapped (the second
    label).  Both hypotheses contain the same bag of words, so a model that
    ignores word order cannot beat chance.  Premise groups are kept within one
    split.  Returns ``{"train": [...], "dev": [...], "test": [...]}``.
    """
    entail, other = labels[0], labels[-1]
    n_premises = n_pairs // 2
    rng = np.random.default_rng(seed)
    nouns, verbs = lexicon.singular_nouns, lexicon.transitive_verbs
    capacity = len(nouns) * (len(nouns) - 1) * len(verbs)
    if n_premises > capacity:
        raise ValueError(f"lexicon supports {capacity} distinct premises, {n_premises} requested")
    flat = rng.choice(capacity, size=n_premises, replace=False)
    groups = []
    for code in flat:
        v, rest = divmod(int(code), len(nouns) * (len(nouns) - 1))
        i, j = divmod(rest, len(nouns) - 1)
        a = nouns[i]
        b = [n for n in nouns if n != a][j]
        premise = ("the", a, verbs[v], "the", b)
        swapped = ("the", b, verbs[v], "the", a)
        groups.append([NLIExample(premise, premise, entail), NLIExample(premise, swapped, other)])
    n_train = int(round(splits[0] * n_premises))
    n_dev = int(round(splits[1] * n_premises))
    parts = {"train": groups[:n_train], "dev": groups[n_train:n_train + n_dev],
             "test": groups[n_train + n_dev:]}
    out = {}
    for name, part in parts.items():
        examples = [ex for g in part for ex in g]
        if name == "train":
            examples = [examples[k] for k in rng.permutation(len(examples))]
        out[name] = examples
    return out
