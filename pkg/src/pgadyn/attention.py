"""Multi-head geometric-algebra attention with block-causal masking over
flattened (timestep x object) tokens."""

import numpy as np

from . import ga
from . import tensor as T
from .layers import CliffordLinear


def build_block_causal_mask(timesteps, objects):
    """Boolean (S*K, S*K) mask: token q may attend to token k iff
    timestep(q) >= timestep(k); within-timestep blocks are fully allowed."""
    n = timesteps * objects
    step = np.arange(n) // objects
    return step[:, None] >= step[None, :]


def ga_attention(x, q_map, k_map, v_map, mask, scale_scores=True):
    """Single-head attention with the PGA inner product as score kernel.

    x: (..., N, C, 8); scores are summed over channels and the four
    inner-product-active blade slots, optionally scaled by 1/sqrt(4*C).
    """
    q = q_map(x)
    k = k_map(x)
    v = v_map(x)
    scores = T.einsum("...qca,...kca->...qk", q, T.mul(k, ga.INNER_WEIGHTS))
    if scale_scores:
        scores = T.scale(scores, 1.0 / np.sqrt(4.0 * q.shape[-2]))
    weights = T.softmax_masked(scores, mask)
    return T.einsum("...qk,...kca->...qca", weights, v)


class MultiHeadGAAttention:
    """H-way channel split, per-head GA attention, concat, output projection.

    The projection uses the same linear mode as the rest of the variant so
    the e mode stays exactly equivariant end to end.
    """

    def __init__(self, store, prefix, channels, heads, mode, rng, scale_scores=True):
        if channels % heads != 0:
            raise ValueError(f"channels {channels} not divisible by heads {heads}")
        self.channels = channels
        self.heads = heads
        self.scale_scores = scale_scores
        self.q = CliffordLinear(store, f"{prefix}.q", channels, channels, mode, rng)
        self.k = CliffordLinear(store, f"{prefix}.k", channels, channels, mode, rng)
        self.v = CliffordLinear(store, f"{prefix}.v", channels, channels, mode, rng)
        self.out = CliffordLinear(store, f"{prefix}.out", channels, channels, mode, rng)

    def __call__(self, x, mask):
        h = self.heads
        ch = self.channels // h
        lead = x.shape[:-3]
        n = x.shape[-3]
        q = T.reshape(self.q(x), lead + (n, h, ch, 8))
        k = T.reshape(self.k(x), lead + (n, h, ch, 8))
        v = T.reshape(self.v(x), lead + (n, h, ch, 8))
        scores = T.einsum("...qhca,...khca->...hqk", q, T.mul(k, ga.INNER_WEIGHTS))
        if self.scale_scores:
            scores = T.scale(scores, 1.0 / np.sqrt(4.0 * ch))
        weights = T.softmax_masked(scores, mask)
        mixed = T.einsum("...hqk,...khca->...qhca", weights, v)
        return self.out(T.reshape(mixed, lead + (n, self.channels, 8)))
