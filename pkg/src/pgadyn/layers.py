"""Clifford linear-map families, gated sigmoid, Clifford MLP and dense
baselines. All layers act on Tensors whose trailing axes are
(channels, 8) for multivector features or (features,) for dense ones.
"""

import numpy as np

from . import ga
from . import tensor as T

MODES = ("s", "s-ad", "e")

# grade-projection matrices P_k and the e3-multiplied projections; the
# e3 * grade-3 term vanishes identically so only k=0..2 appear there
_PROJ = np.stack([np.diag((ga.GRADES == k).astype(float)) for k in range(4)])
EQUIVARIANT_BASIS = np.concatenate(
    [_PROJ, np.stack([ga.E3_LEFT @ _PROJ[k] for k in range(3)])]
)  # (7, 8, 8), applied as out_a = B[m, a, b] x_b

# scalar slot of a geometric product: (x * y)_0 = x_a F0[a, b] y_b
_F0 = ga.STRUCTURE[:, :, 0].copy()


def _identity_channel_matrix(out_ch, in_ch):
    m = np.zeros((out_ch, in_ch))
    for o in range(out_ch):
        m[o, o % in_ch] = 1.0
    return m


class CliffordLinear:
    """Linear map on multivector channels in one of three modes.

    s     out_i = sum_j W[i,j] * x_j                (geometric product)
    s-ad  out_i = sum_j W[i,j] * x_j * rev(W[i,j])  (per-term sandwich)
    e     rank-wise combinations of grade projections and their e3
          multiples; exactly equivariant under the twisted adjoint
    """

    def __init__(self, store, prefix, in_ch, out_ch, mode, rng, identity_init=False):
        if mode not in MODES:
            raise ValueError(f"unknown linear mode {mode!r}")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.mode = mode
        if mode == "e":
            w = rng.normal(0.0, 1.0 / np.sqrt(in_ch), size=(out_ch, in_ch, 7))
            w[:, :, 4:] *= 0.1  # e3-channel mixing starts small
            if identity_init:
                w[:] = 0.0
                eye = _identity_channel_matrix(out_ch, in_ch)
                for k in range(4):
                    w[:, :, k] = eye
            self.w = store.add(f"{prefix}.w", w)
        elif mode == "s-ad":
            # near-identity start: sandwiches square the weight scale
            w = rng.normal(0.0, 0.02, size=(out_ch, in_ch, 8))
            w[:, :, 0] += _identity_channel_matrix(out_ch, in_ch)
            self.w = store.add(f"{prefix}.w", w)
        else:
            # the product contracts 8 blade slots per channel, so the fan-in
            # for variance purposes is 8 * in_ch
            w = rng.normal(0.0, 1.0 / np.sqrt(8.0 * in_ch), size=(out_ch, in_ch, 8))
            if identity_init:
                w[:] = 0.0
                w[:, :, 0] = _identity_channel_matrix(out_ch, in_ch)
            self.w = store.add(f"{prefix}.w", w)

    def __call__(self, x):
        if x.shape[-2] != self.in_ch:
            raise ValueError(
                f"expected {self.in_ch} input channels, got {x.shape[-2]}"
            )
        # fold the weights into the structure tables first so the data-sized
        # contraction has two operands and hits the fast BLAS path
        if self.mode == "s":
            mat = T.einsum("oja,abk->ojbk", self.w, ga.STRUCTURE)
            return T.einsum("...jb,ojbk->...ok", x, mat)
        if self.mode == "s-ad":
            wrev = T.mul(self.w, ga.REVERSE_SIGNS)
            lmat = T.einsum("oja,abk->ojbk", self.w, ga.STRUCTURE)
            left = T.einsum("...jb,ojbk->...ojk", x, lmat)
            rmat = T.einsum("ojd,cdk->ojck", wrev, ga.STRUCTURE)
            return T.einsum("...ojc,ojck->...ok", left, rmat)
        mat = T.einsum("ojm,mab->ojab", self.w, EQUIVARIANT_BASIS)
        return T.einsum("...jb,ojab->...oa", x, mat)


class GatedSigmoid:
    """Channel-wise scalar gate: out_c = sigmoid(gate_c) * x_c.

    In s/s-ad mode the gate argument is the scalar (grade-0) part of a
    geometric-product contraction with multivector gate weights; in e mode
    it is a plain linear map of the invariant scalar slots, which keeps
    the activation exactly equivariant.
    """

    def __init__(self, store, prefix, channels, mode, rng):
        self.channels = channels
        self.mode = mode
        if mode == "e":
            self.w = store.add(
                f"{prefix}.gate", rng.normal(0.0, 1.0 / np.sqrt(channels), size=(channels, channels))
            )
        else:
            self.w = store.add(
                f"{prefix}.gate",
                rng.normal(0.0, 1.0 / np.sqrt(channels), size=(channels, channels, 8)),
            )

    def __call__(self, x):
        if self.mode == "e":
            pre = T.einsum("cj,...j->...c", self.w, x[..., 0])
        else:
            wf = T.einsum("cja,ab->cjb", self.w, _F0)
            pre = T.einsum("...jb,cjb->...c", x, wf)
        gate = T.sigmoid(pre)
        return T.mul(x, T.reshape(gate, gate.shape + (1,)))


class CliffordMLP:
    """Linear layers per the width spec, gated sigmoid after all but the last."""

    def __init__(self, store, prefix, in_ch, widths, mode, rng):
        self.layers = []
        prev = in_ch
        for i, width in enumerate(widths):
            self.layers.append(
                CliffordLinear(store, f"{prefix}.lin{i}", prev, width, mode, rng)
            )
            if i < len(widths) - 1:
                self.layers.append(GatedSigmoid(store, f"{prefix}.act{i}", width, mode, rng))
            prev = width

    def __call__(self, x):
        for layer in self.layers:
            x = layer(x)
        return x


class DenseLinear:
    def __init__(self, store, prefix, in_dim, out_dim, rng, zero_init=False):
        w = np.zeros((out_dim, in_dim)) if zero_init else rng.normal(
            0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim)
        )
        self.w = store.add(f"{prefix}.w", w)
        self.b = store.add(f"{prefix}.b", np.zeros(out_dim))

    def __call__(self, x):
        return T.add(T.einsum("oi,...i->...o", self.w, x), self.b)


class DenseMLP:
    """Two-layer ReLU-activated dense network."""

    def __init__(self, store, prefix, in_dim, hidden, out_dim, rng):
        self.fc1 = DenseLinear(store, f"{prefix}.fc1", in_dim, hidden, rng)
        self.fc2 = DenseLinear(store, f"{prefix}.fc2", hidden, out_dim, rng)

    def __call__(self, x):
        return self.fc2(T.relu(self.fc1(x)))


def apply_versor(g, x):
    """Twisted adjoint of versor g applied over the trailing (…, 8) axis."""
    m = ga.adjoint_matrix(g)
    if isinstance(x, T.Tensor):
        return T.einsum("ab,...b->...a", m, x)
    return np.einsum("ab,...b->...a", m, np.asarray(x))


def equivariance_gap(layer, g, x):
    """max-norm of layer(Ad_g x) - Ad_g layer(x) for one versor/input pair."""
    lhs = layer(T.tensor(apply_versor(g, x)))
    rhs = apply_versor(g, layer(T.tensor(x)).data)
    return float(np.max(np.abs(lhs.data - rhs)))


def max_equivariance_violation(layer, rng, trials=50, channels=None, kinds=None):
    """Random search for an equivariance violation; returns the largest gap."""
    channels = channels if channels is not None else layer.in_ch
    kinds = kinds or ("rotor", "translator", "reflection")
    worst = 0.0
    for _ in range(trials):
        g = ga.random_versor(rng, kinds)
        x = rng.normal(size=(channels, 8))
        worst = max(worst, equivariance_gap(layer, g, x))
    return worst


def match_parameter_count(target, build_count, lo=1, hi=4096, tolerance=0.02):
    """Smallest integer width whose parameter count is within tolerance of
    target; build_count maps a width to a count. Raises if no width fits."""
    best = None
    best_err = None
    for width in range(lo, hi + 1):
        err = abs(build_count(width) - target) / target
        if best_err is None or err < best_err:
            best, best_err = width, err
        if err <= tolerance:
            # counts grow monotonically; take the closest of this and next
            nxt = abs(build_count(width + 1) - target) / target
            return width + 1 if nxt < err else width
    raise ValueError(
        f"no width in [{lo},{hi}] matches {target} parameters "
        f"(closest: width {best}, off by {best_err:.1%})"
    )
