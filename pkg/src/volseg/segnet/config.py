"""Network configuration and the derived parameter layout."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class NetworkConfig:
    """Toy 3D segmentation network description.

    Encoder stage i carries ``base_channels * 2**i`` channels; after
    ``depth`` stride-2 stages the bottleneck runs multi-head linear
    self-attention at ``attention_dim`` features, then a mirrored
    decoder with skip connections restores full resolution.
    """

    patch_size: tuple[int, int, int] = (16, 16, 16)
    base_channels: int = 4
    depth: int = 2
    attention_heads: int = 2
    attention_dim: int = 16
    num_classes: int = 2
    learning_rate: float = 0.01
    batch_size: int = 2
    epochs: int = 600
    seed: int = 0

    def __post_init__(self):
        ps = tuple(int(p) for p in self.patch_size)
        if len(ps) != 3 or not all(_is_pow2(p) for p in ps):
            raise ValueError(f"patch_size must be 3 powers of two, got {self.patch_size}")
        if any(p % (2 ** self.depth) for p in ps):
            raise ValueError(
                f"patch dims {ps} must be divisible by 2^depth = {2 ** self.depth}"
            )
        if self.attention_dim % self.attention_heads:
            raise ValueError(
                f"attention_dim {self.attention_dim} not divisible by "
                f"{self.attention_heads} heads"
            )
        if self.base_channels < 1 or self.depth < 1 or self.num_classes != 2:
            raise ValueError("base_channels >= 1, depth >= 1, num_classes == 2 required")
        object.__setattr__(self, "patch_size", ps)

    @property
    def encoder_channels(self) -> list[int]:
        """Channels at each resolution level, full-res first."""
        return [self.base_channels * 2 ** i for i in range(self.depth + 1)]

    @property
    def bottleneck_tokens(self) -> int:
        px, py, pz = self.patch_size
        f = 8 ** self.depth
        return (px * py * pz) // f

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        if "patch_size" in d:
            d["patch_size"] = tuple(d["patch_size"])
        return cls(**d)


def parameter_shapes(config: NetworkConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map for every learnable block."""
    chans = config.encoder_channels
    d = config.attention_dim
    shapes: dict[str, tuple[int, ...]] = {}
    shapes["stem.conv.w"] = (chans[0], 1, 3, 3, 3)
    shapes["stem.norm.gamma"] = (chans[0],)
    shapes["stem.norm.beta"] = (chans[0],)
    for i in range(1, config.depth + 1):
        shapes[f"enc{i}.conv.w"] = (chans[i], chans[i - 1], 3, 3, 3)
        shapes[f"enc{i}.norm.gamma"] = (chans[i],)
        shapes[f"enc{i}.norm.beta"] = (chans[i],)
    c_bot = chans[-1]
    shapes["attn.embed.w"] = (c_bot, d)
    for nm in ("wq", "wk", "wv", "wo"):
        shapes[f"attn.{nm}"] = (d, d)
    shapes["attn.unembed.w"] = (d, c_bot)
    for i in range(config.depth, 0, -1):
        shapes[f"dec{i}.up.w"] = (chans[i - 1], chans[i], 3, 3, 3)
        shapes[f"dec{i}.upnorm.gamma"] = (chans[i - 1],)
        shapes[f"dec{i}.upnorm.beta"] = (chans[i - 1],)
        shapes[f"dec{i}.merge.w"] = (chans[i - 1], 2 * chans[i - 1], 3, 3, 3)
        shapes[f"dec{i}.norm.gamma"] = (chans[i - 1],)
        shapes[f"dec{i}.norm.beta"] = (chans[i - 1],)
    shapes["head.w"] = (config.num_classes, chans[0], 1, 1, 1)
    shapes["head.b"] = (config.num_classes,)
    return shapes


def parameter_count(config: NetworkConfig) -> int:
    total = 0
    for shape in parameter_shapes(config).values():
        n = 1
        for s in shape:
            n *= s
        total += n
    return total
