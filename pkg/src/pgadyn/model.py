"""World-model assembly: state embedding, positional codes, the
transformer variants and frame-level baselines, and rollout.

Object states are arrays with trailing axis (x, y, vx, vy, angle, omega);
embedded tokens carry four multivector channels per object.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import ga  # noqa: F401  (blade order contract)
from . import tensor as T
from .attention import MultiHeadGAAttention, build_block_causal_mask
from .layers import CliffordLinear, CliffordMLP, DenseLinear, DenseMLP

VARIANTS = ("s", "s-ad", "e", "transformer", "mlp", "clifford-mlp", "ad-clifford-mlp")
EMBED_CHANNELS = 4  # position, velocity, orientation rotor, spin rotor


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    objects: int
    blocks: int = 2
    heads: int = 4
    mv_channels: int = 8
    seq_len: int = 2
    embed_dim: int = 0  # baseline transformer width; 0 = parameter-match
    hidden: int = 0  # baseline MLP width; 0 = parameter-match
    mlp_mult: int = 2  # transformer feed-forward expansion
    seed: int = 0
    use_positional: bool = True
    param_target: int = 0  # 0 = match the s-variant of this config


def embed_state(states):
    """(…, 6) state arrays to (…, 4, 8) multivector channels."""
    states = np.asarray(states, dtype=np.float64)
    out = np.zeros(states.shape[:-1] + (EMBED_CHANNELS, 8))
    out[..., 0, 5] = states[..., 0]  # x e13
    out[..., 0, 6] = states[..., 1]  # y e23
    out[..., 1, 1] = states[..., 2]  # vx e1
    out[..., 1, 2] = states[..., 3]  # vy e2
    out[..., 2, 0] = np.cos(states[..., 4])
    out[..., 2, 4] = np.sin(states[..., 4])
    out[..., 3, 0] = np.cos(states[..., 5])
    out[..., 3, 4] = np.sin(states[..., 5])
    return out


def decode_state(channels):
    """(…, 4, 8) multivector channels back to (…, 6) states.

    Angles come out of atan2, so an all-zero rotor channel decodes to 0.
    """
    channels = np.asarray(channels)
    out = np.zeros(channels.shape[:-2] + (6,))
    out[..., 0] = channels[..., 0, 5]
    out[..., 1] = channels[..., 0, 6]
    out[..., 2] = channels[..., 1, 1]
    out[..., 3] = channels[..., 1, 2]
    out[..., 4] = np.arctan2(channels[..., 2, 4], channels[..., 2, 0])
    out[..., 5] = np.arctan2(channels[..., 3, 4], channels[..., 3, 0])
    return out


def positional_code(seq_len, channels):
    """(S, channels, 8) interleaved sin/cos code over the flattened C*8
    feature axis; deterministic in (position, channels) only."""
    dim = channels * 8
    pos = np.arange(seq_len)[:, None]
    idx = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (idx // 2 * 2) / dim)
    code = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return code.reshape(seq_len, channels, 8)


class DenseMultiHeadAttention:
    """Standard scaled dot-product attention on a dense feature axis."""

    def __init__(self, store, prefix, dim, heads, rng):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.q = DenseLinear(store, f"{prefix}.q", dim, dim, rng)
        self.k = DenseLinear(store, f"{prefix}.k", dim, dim, rng)
        self.v = DenseLinear(store, f"{prefix}.v", dim, dim, rng)
        self.out = DenseLinear(store, f"{prefix}.out", dim, dim, rng)

    def __call__(self, x, mask):
        h = self.heads
        d = self.dim // h
        lead = x.shape[:-2]
        n = x.shape[-2]
        q = T.reshape(self.q(x), lead + (n, h, d))
        k = T.reshape(self.k(x), lead + (n, h, d))
        v = T.reshape(self.v(x), lead + (n, h, d))
        scores = T.scale(T.einsum("...qhd,...khd->...hqk", q, k), 1.0 / np.sqrt(d))
        weights = T.softmax_masked(scores, mask)
        mixed = T.einsum("...hqk,...khd->...qhd", weights, v)
        return self.out(T.reshape(mixed, lead + (n, self.dim)))


class CliffordTransformer:
    """Residual stack of GA attention and gated Clifford MLP blocks."""

    def __init__(self, config, store):
        c = config
        rng = np.random.default_rng(c.seed)
        mode = c.variant
        ch = c.mv_channels
        self.expand = CliffordLinear(store, "expand", EMBED_CHANNELS, ch, mode, rng)
        self.attn = []
        self.mlp = []
        for b in range(c.blocks):
            self.attn.append(
                MultiHeadGAAttention(store, f"block{b}.attn", ch, c.heads, mode, rng)
            )
            self.mlp.append(
                CliffordMLP(store, f"block{b}.mlp", ch, (c.mlp_mult * ch, ch), mode, rng)
            )
        self.contract = CliffordLinear(store, "contract", ch, EMBED_CHANNELS, mode, rng)
        self.pos = positional_code(c.seq_len, ch) if c.use_positional else None

    def __call__(self, tokens, steps, objects):
        # tokens: Tensor (B, S, K, C, 8)
        lead = tokens.shape[:-4]
        x = self.expand(tokens)
        if self.pos is not None:
            x = T.add(x, self.pos[:steps, None, :, :])
        x = T.reshape(x, lead + (steps * objects,) + x.shape[-2:])
        mask = build_block_causal_mask(steps, objects)
        for attn, mlp in zip(self.attn, self.mlp):
            x = T.add(x, attn(x, mask))
            x = T.add(x, mlp(x))
        x = T.reshape(x, lead + (steps, objects) + x.shape[-2:])
        return self.contract(x)


class DenseTransformer:
    """Same topology as the Clifford stack on a flat embed_dim feature axis."""

    def __init__(self, config, store, dim, hidden=0):
        c = config
        rng = np.random.default_rng(c.seed)
        self.dim = dim
        hidden = hidden or c.mlp_mult * dim
        self.embed = DenseLinear(store, "embed", EMBED_CHANNELS * 8, dim, rng)
        self.attn = []
        self.mlp = []
        for b in range(c.blocks):
            self.attn.append(
                DenseMultiHeadAttention(store, f"block{b}.attn", dim, c.heads, rng)
            )
            self.mlp.append(
                DenseMLP(store, f"block{b}.mlp", dim, hidden, dim, rng)
            )
        self.unembed = DenseLinear(store, "unembed", dim, EMBED_CHANNELS * 8, rng)
        self.pos = (
            positional_code(c.seq_len, dim // 8 + 1).reshape(c.seq_len, -1)[:, :dim]
            if c.use_positional
            else None
        )

    def __call__(self, tokens, steps, objects):
        lead = tokens.shape[:-4]
        flat = T.reshape(tokens, tokens.shape[:-2] + (EMBED_CHANNELS * 8,))
        x = self.embed(flat)
        if self.pos is not None:
            x = T.add(x, self.pos[:steps, None, :])
        x = T.reshape(x, lead + (steps * objects, self.dim))
        mask = build_block_causal_mask(steps, objects)
        for attn, mlp in zip(self.attn, self.mlp):
            x = T.add(x, attn(x, mask))
            x = T.add(x, mlp(x))
        x = self.unembed(x)
        return T.reshape(x, lead + (steps, objects, EMBED_CHANNELS, 8))


class FrameDense:
    """Per-frame baseline: two-layer ReLU MLP on the concatenated K-object
    feature stack; every timestep is predicted independently."""

    def __init__(self, config, store, hidden):
        rng = np.random.default_rng(config.seed)
        dim = config.objects * EMBED_CHANNELS * 8
        self.net = DenseMLP(store, "net", dim, hidden, dim, rng)

    def __call__(self, tokens, steps, objects):
        lead = tokens.shape[:-4]
        x = T.reshape(tokens, lead + (steps, objects * EMBED_CHANNELS * 8))
        x = self.net(x)
        return T.reshape(x, lead + (steps, objects, EMBED_CHANNELS, 8))


class FrameClifford:
    """Per-frame Clifford MLP on the concatenated K-object channel stack."""

    def __init__(self, config, store, mode):
        c = config
        rng = np.random.default_rng(c.seed)
        ch = c.objects * EMBED_CHANNELS
        self.net = CliffordMLP(store, "net", ch, (c.mv_channels * c.objects, ch), mode, rng)

    def __call__(self, tokens, steps, objects):
        lead = tokens.shape[:-4]
        x = T.reshape(tokens, lead + (steps, objects * EMBED_CHANNELS, 8))
        x = self.net(x)
        return T.reshape(x, lead + (steps, objects, EMBED_CHANNELS, 8))


class WorldModel:
    """Uniform wrapper: forward on state arrays, autoregressive rollout."""

    def __init__(self, config, store, net):
        self.config = config
        self.store = store
        self.net = net

    def forward(self, states):
        """(B, S, K, 6) or (S, K, 6) states to predicted next-step
        multivector channels of the same token layout."""
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 3:
            states = states[None]
        b, s, k, _ = states.shape
        if s > self.config.seq_len:
            raise ValueError(
                f"got {s} timesteps but the model context is {self.config.seq_len}"
            )
        if k != self.config.objects:
            raise ValueError(f"expected {self.config.objects} objects, got {k}")
        tokens = T.tensor(embed_state(states))
        return self.net(tokens, s, k)

    def rollout(self, context, horizon):
        """Feed predictions back through a sliding window of seq_len frames.

        context: (T0, K, 6) with T0 >= 1; returns (horizon, K, 6).
        """
        context = np.asarray(context, dtype=np.float64)
        window = list(context[-self.config.seq_len:])
        frames = []
        for _ in range(horizon):
            pred = self.forward(np.stack(window)[None]).data[0, -1]
            state = decode_state(pred)
            frames.append(state)
            window.append(state)
            window = window[-self.config.seq_len:]
        return np.stack(frames)


def teacher_forcing_loss(model, windows):
    """Mean squared multivector-component error of next-frame prediction.

    windows: (B, S+1, K, 6); inputs are frames 0..S-1, targets 1..S.
    """
    windows = np.asarray(windows, dtype=np.float64)
    pred = model.forward(windows[:, :-1])
    target = embed_state(windows[:, 1:])
    return T.l2_loss(pred, target)


def _count_params(build):
    store = T.ParamStore()
    build(store)
    return store.count()


def _grow_to_target(target, build_count, step, tolerance=0.02):
    """Smallest-error width on a monotone count curve, stepping up from
    one unit until the target is bracketed."""
    width = step
    count = build_count(width)
    while count < target:
        width += step
        count = build_count(width)
    best = min(
        (w for w in (width - step, width) if w > 0),
        key=lambda w: abs(build_count(w) - target),
    )
    err = abs(build_count(best) - target) / target
    if err > tolerance:
        raise ValueError(
            f"cannot match {target} parameters within {tolerance:.0%} "
            f"at step {step} (closest width {best}, off by {err:.1%})"
        )
    return best


def clifford_param_count(config):
    cfg = replace(config, variant="s")
    return _count_params(lambda store: CliffordTransformer(cfg, store))


def build_variant(config):
    """Construct the model named by config.variant; dense baselines are
    auto-sized to the parameter count of the matching s-variant."""
    if config.variant not in VARIANTS:
        raise ValueError(
            f"unknown variant {config.variant!r}; choose one of {', '.join(VARIANTS)}"
        )
    store = T.ParamStore()
    if config.variant in ("s", "s-ad", "e"):
        return WorldModel(config, store, CliffordTransformer(config, store))
    if config.variant == "transformer":
        dim, hidden = config.embed_dim, 0
        if dim == 0:
            # widest head-divisible attention width not exceeding the target,
            # then the feed-forward width absorbs the remainder
            target = config.param_target or clifford_param_count(config)

            def count(d, h=0):
                return _count_params(lambda s: DenseTransformer(config, s, d, h))

            dim = config.heads
            while count(dim + config.heads) <= target:
                dim += config.heads
            hidden = _grow_to_target(target, lambda h: count(dim, h), step=1)
        return WorldModel(config, store, DenseTransformer(config, store, dim, hidden))
    if config.variant == "mlp":
        hidden = config.hidden
        if hidden == 0:
            target = config.param_target or clifford_param_count(config)
            # a two-layer net moves ~2*K*32 params per hidden unit, which can
            # exceed 2% of a small target; accept the nearest width
            hidden = _grow_to_target(
                target,
                lambda h: _count_params(lambda s: FrameDense(config, s, h)),
                step=1,
                tolerance=0.1,
            )
        return WorldModel(config, store, FrameDense(config, store, hidden))
    mode = "s-ad" if config.variant == "ad-clifford-mlp" else "s"
    return WorldModel(config, store, FrameClifford(config, store, mode))


def save_model(model, path):
    """Checkpoint plus a human-readable config file next to it."""
    T.save_checkpoint(model.store, path)
    entries = {k: getattr(model.config, k) for k in model.config.__dataclass_fields__}
    with open(str(path) + ".cfg", "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")


def load_model(path):
    fields = ModelConfig.__dataclass_fields__
    entries = {}
    with open(str(path) + ".cfg") as fh:
        for line in fh:
            key, _, value = line.strip().partition("=")
            if key in fields:
                typ = fields[key].type
                if typ in (bool, "bool"):
                    entries[key] = value == "True"
                elif typ in (int, "int"):
                    entries[key] = int(value)
                else:
                    entries[key] = value
    model = build_variant(ModelConfig(**entries))
    loaded = T.load_checkpoint(path)
    if set(loaded.params) != set(model.store.params):
        raise ValueError(f"{path}: parameter names do not match the config")
    for name, p in model.store.params.items():
        src = loaded.params[name].data
        if src.shape != p.data.shape:
            raise ValueError(f"{path}: shape mismatch for {name!r}")
        p.data[:] = src
    return model
