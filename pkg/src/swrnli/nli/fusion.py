"""Fusion modes and the attention primitive that optionally mixes in parser states."""
from __future__ import annotations

import enum
import zlib

import numpy as np

from .. import tensor as T
from ..exceptions import ContractError
from ..tensor import Tensor


class FusionMode(str, enum.Enum):
    BASELINE = "baseline"
    LATE_FUSION = "lf"
    SYNTACTIC_ATTENTION = "sa"
    LATE_FUSION_NOISE = "lf_noise"
    SYNTACTIC_ATTENTION_NOISE = "sa_noise"

    @property
    def attention(self) -> bool:
        return self in (FusionMode.SYNTACTIC_ATTENTION, FusionMode.SYNTACTIC_ATTENTION_NOISE)

    @property
    def late(self) -> bool:
        return self in (FusionMode.LATE_FUSION, FusionMode.LATE_FUSION_NOISE)

    @property
    def noise(self) -> bool:
        return self in (FusionMode.LATE_FUSION_NOISE, FusionMode.SYNTACTIC_ATTENTION_NOISE)

    @property
    def uses_parser(self) -> bool:
        return self in (FusionMode.LATE_FUSION, FusionMode.SYNTACTIC_ATTENTION)

    @property
    def uses_swr(self) -> bool:
        return self is not FusionMode.BASELINE

    @property
    def label(self) -> str:
        return {"baseline": "", "lf": "+LF", "sa": "+SA", "lf_noise": "+LF_N",
                "sa_noise": "+SA_N"}[self.value]


def compute_attention(p_bar: Tensor, h_bar: Tensor, swr_p=None, swr_h=None,
                      mode: FusionMode | str = FusionMode.BASELINE) -> Tensor:
    """Unnormalised alignment scores between premise and hypothesis positions.

    Baseline: ``a_ij = p_i . h_j``.  With syntactic attention the parser states
    are appended to both sides before the dot product, which equals adding
    ``swr_p_i . swr_h_j``; they carry no learned weights.  Works on ``L x d``
    pairs or ``B x L x d`` batches.
    """
    mode = FusionMode(mode)
    base = p_bar @ T.swapaxes(h_bar)
    if not mode.attention:
        if swr_p is not None or swr_h is not None:
            raise ContractError(f"fusion mode {mode.value!r} takes no syntactic representations")
        return base
    if swr_p is None or swr_h is None:
        raise ContractError(f"fusion mode {mode.value!r} needs premise and hypothesis representations")
    sp = swr_p.data if isinstance(swr_p, Tensor) else np.asarray(swr_p, dtype=np.float64)
    sh = swr_h.data if isinstance(swr_h, Tensor) else np.asarray(swr_h, dtype=np.float64)
    if sp.shape[:-1] != p_bar.shape[:-1] or sh.shape[:-1] != h_bar.shape[:-1]:
        raise ContractError(
            f"representation lengths {sp.shape[:-1]}/{sh.shape[:-1]} do not match "
            f"encoded lengths {p_bar.shape[:-1]}/{h_bar.shape[:-1]}")
    return base + np.matmul(sp, np.swapaxes(sh, -1, -2))


def sample_noise_swr(shape, rng: np.random.Generator) -> np.ndarray:
    """Standard normal stand-ins for parser states."""
    return rng.standard_normal(shape)


def noise_for_tokens(tokens, dim: int, seed: int) -> np.ndarray:
    """Noise fixed per sentence (keyed on its tokens) for the per-example ablation variant."""
    key = zlib.crc32(" ".join(tokens).encode("utf-8"))
    return np.random.default_rng([seed, key]).standard_normal((len(tokens), dim))
