"""Small builders shared by the NLI and acceptance tests."""
import numpy as np

from swrnli import tensor as T
from swrnli.gradcheck import grad_check
from swrnli.nli.fusion import FusionMode
from swrnli.nli.models import DAConfig, ESIMConfig, build_model

VOCAB = 12
EMBED = 5
SWR = 4


def tiny_config(architecture, dropout=0.0):
    if architecture == "da":
        return DAConfig(6, 5, 4, dropout, dropout, dropout)
    return ESIMConfig(2, 2, 3, dropout, dropout)


def tiny_network(architecture, fusion, seed=0, n_classes=3, dropout=0.0):
    mode = FusionMode(fusion)
    return build_model(architecture, tiny_config(architecture, dropout), VOCAB, EMBED, n_classes,
                       np.random.default_rng(seed), mode, SWR if mode.uses_swr else 0)


def random_batch(seed, lengths_p=(4, 2), lengths_h=(3, 5), with_swrs=True):
    rng = np.random.default_rng(seed)

    def side(lengths):
        width = max(lengths)
        ids = np.zeros((len(lengths), width), dtype=np.int64)
        mask = np.zeros((len(lengths), width), dtype=bool)
        for b, n in enumerate(lengths):
            ids[b, :n] = rng.integers(2, VOCAB, n)
            mask[b, :n] = True
        swr = rng.normal(size=(len(lengths), width, SWR)) * mask[:, :, None]
        return ids, mask, swr

    p_ids, p_mask, sp = side(lengths_p)
    h_ids, h_mask, sh = side(lengths_h)
    targets = rng.integers(0, 3, len(lengths_p))
    return p_ids, p_mask, h_ids, h_mask, ((sp, sh) if with_swrs else None), targets


def full_model_grad_check(architecture, fusion, seed, step=1e-6, tol=1e-3, dropout=0.3):
    """Check every trainable parameter of a tiny model on a 2-example batch.

    Dropout is active with a generator re-seeded on each call so the loss is a
    fixed function of the weights; SWRs (or noise) are drawn once up front.
    Weights are redrawn with nonzero biases: zero-initialised biases put dead
    relu rows exactly on the kink, where central differences disagree with any
    one-sided derivative.
    """
    net = tiny_network(architecture, fusion, seed, dropout=dropout)
    redraw = np.random.default_rng(seed + 2000)
    p_ids, p_mask, h_ids, h_mask, swrs, targets = random_batch(
        seed, with_swrs=FusionMode(fusion).uses_swr)
    params = net.parameters(trainable_only=True)
    for p in params:
        p.data = redraw.normal(scale=0.5, size=p.shape)

    def loss(_):
        rng = np.random.default_rng(seed + 1000)
        logits = net.forward(p_ids, p_mask, h_ids, h_mask, swrs, rng, training=True)
        return T.cross_entropy(logits, targets)

    return grad_check(loss, params, step=step, tol=tol)
