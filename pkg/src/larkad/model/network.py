"""Encoder, bottleneck and mirrored decoder producing the feature pyramids."""

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ContractError
from .blocks import BlockSpec, ConvBlock, LayerNorm2d
from .config import ModelConfig

ENCODER = "encoder"
DECODER = "decoder"


def _init_convs(root):
    """Orthogonal pointwise/spatial convolutions, truncated-normal depthwise.

    Keeps feature spectra well conditioned through depth, which matters when
    the frozen encoder runs from random initialization.
    """
    for module in root.modules():
        if isinstance(module, nn.Conv2d):
            if module.groups == module.in_channels and module.groups > 1:
                nn.init.trunc_normal_(module.weight, std=0.02)
            else:
                nn.init.orthogonal_(module.weight)
            if module.bias is not None:
                nn.init.zeros_(module.bias)


@dataclass
class FeaturePyramid:
    """Three per-level feature maps, shallow to deep, spatial size halving."""

    levels: list
    origin: str

    def __post_init__(self):
        if len(self.levels) != 3:
            raise ContractError(f"a feature pyramid has 3 levels, got {len(self.levels)}")
        if self.origin not in (ENCODER, DECODER):
            raise ContractError(f"unknown pyramid origin {self.origin!r}")
        for shallow, deep in zip(self.levels, self.levels[1:]):
            if shallow.shape[0] != deep.shape[0]:
                raise ContractError("pyramid levels disagree on batch size")
            if shallow.shape[2] != 2 * deep.shape[2] or shallow.shape[3] != 2 * deep.shape[3]:
                raise ContractError(
                    f"spatial size must halve per level, got {tuple(shallow.shape)} -> {tuple(deep.shape)}"
                )

    def shapes(self):
        return [tuple(level.shape) for level in self.levels]

    def detach(self):
        return FeaturePyramid([level.detach() for level in self.levels], self.origin)

    def all_finite(self):
        return all(bool(torch.isfinite(level).all()) for level in self.levels)

    def __iter__(self):
        return iter(self.levels)


def _stage_blocks(lark_count, smak_count, channels, lark_kernel, smak_kernel):
    """Interleave LarK and SmaK blocks, leading with LarK."""
    specs = []
    remaining = [lark_count, smak_count]
    kinds = [BlockSpec.lark(channels, lark_kernel), BlockSpec.smak(channels, smak_kernel)]
    turn = 0
    while remaining[0] or remaining[1]:
        if not remaining[turn]:
            turn = 1 - turn
        specs.append(kinds[turn])
        remaining[turn] -= 1
        turn = 1 - turn
    return nn.Sequential(*[ConvBlock(spec) for spec in specs])


class Stem(nn.Module):
    """Stride-4 entry: two stride-2 convolutions."""

    def __init__(self, in_channels, out_channels):
        super().__init__()
        mid = max(out_channels // 2, 1)
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, mid, 3, stride=2, padding=1),
            LayerNorm2d(mid),
            nn.GELU(),
            nn.Conv2d(mid, out_channels, 3, stride=2, padding=1),
            LayerNorm2d(out_channels),
        )

    def forward(self, x):
        return self.net(x)


def _downsample(in_channels, out_channels):
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 3, stride=2, padding=1),
        LayerNorm2d(out_channels),
    )


def _upsample(in_channels, out_channels):
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="nearest"),
        nn.Conv2d(in_channels, out_channels, 3, padding=1),
        LayerNorm2d(out_channels),
    )


class Encoder(nn.Module):
    """Multi-scale feature extractor with pyramid strides 4/8/16."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c1, c2, c3 = config.stage_channels
        self.stem = Stem(config.in_channels, c1)
        self.stages = nn.ModuleList(
            _stage_blocks(lark, smak, ch, config.lark_kernel, config.smak_kernel)
            for (lark, smak), ch in zip(config.stage_depths, config.stage_channels)
        )
        self.downsamples = nn.ModuleList([_downsample(c1, c2), _downsample(c2, c3)])
        _init_convs(self)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ContractError(f"expected batch x {self.config.in_channels} x H x W input, got {tuple(x.shape)}")
        if x.shape[2] % 32 != 0 or x.shape[3] % 32 != 0:
            raise ContractError(f"input resolution {x.shape[2]}x{x.shape[3]} must be divisible by 32")
        levels = []
        y = self.stem(x)
        for i, stage in enumerate(self.stages):
            y = stage(y)
            levels.append(y)
            if i < 2:
                y = self.downsamples[i](y)
        return FeaturePyramid(levels, ENCODER)


class Bottleneck(nn.Module):
    """Fuse the pyramid into one embedding one stride-2 below the deepest level.

    Shallow levels are convolved down to the deepest grid, concatenated and
    1x1-compressed; a final stride-2 stage feeds two SmaK blocks.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        c1, c2, c3 = config.stage_channels
        c_emb = config.embedding_channels
        self.reduce1 = nn.Sequential(
            nn.Conv2d(c1, c1, 3, stride=2, padding=1),
            LayerNorm2d(c1),
            nn.GELU(),
            nn.Conv2d(c1, c1, 3, stride=2, padding=1),
            LayerNorm2d(c1),
        )
        self.reduce2 = _downsample(c2, c2)
        self.compress = nn.Sequential(nn.Conv2d(c1 + c2 + c3, c3, 1), LayerNorm2d(c3))
        self.down = _downsample(c3, c_emb)
        self.blocks = nn.Sequential(
            *[ConvBlock(BlockSpec.smak(c_emb, config.smak_kernel)) for _ in range(config.bottleneck_depth)]
        )
        _init_convs(self)

    def forward(self, pyramid: FeaturePyramid):
        if pyramid.origin != ENCODER:
            raise ContractError("bottleneck expects an encoder-origin pyramid")
        e1, e2, e3 = pyramid.levels
        fused = torch.cat([self.reduce1(e1), self.reduce2(e2), e3], dim=1)
        y = self.compress(fused)
        y = self.down(y)
        return self.blocks(y)


class Decoder(nn.Module):
    """Inverse counterpart of the encoder: upsample and mirror each stage."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c1, c2, c3 = config.stage_channels
        c_emb = config.embedding_channels
        self.ups = nn.ModuleList([_upsample(c_emb, c3), _upsample(c3, c2), _upsample(c2, c1)])
        self.stages = nn.ModuleList(
            _stage_blocks(lark, smak, ch, config.lark_kernel, config.smak_kernel)
            for (lark, smak), ch in zip(reversed(config.stage_depths), reversed(config.stage_channels))
        )
        _init_convs(self)

    def forward(self, embedding):
        deep_to_shallow = []
        y = embedding
        for up, stage in zip(self.ups, self.stages):
            y = up(y)
            y = stage(y)
            deep_to_shallow.append(y)
        return FeaturePyramid(list(reversed(deep_to_shallow)), DECODER)


class ReverseDistillationModel(nn.Module):
    """Frozen-teacher autoencoder: encoder, bottleneck and student decoder."""

    def __init__(self, config: ModelConfig = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.encoder = Encoder(self.config)
        self.bottleneck = Bottleneck(self.config)
        self.decoder = Decoder(self.config)

    def encode(self, images):
        return self.encoder(images)

    def reconstruct(self, pyramid):
        return self.decoder(self.bottleneck(pyramid))

    def forward(self, images):
        enc = self.encode(images)
        dec = self.reconstruct(enc)
        return enc, dec

    def freeze_encoder(self):
        for p in self.encoder.parameters():
            p.requires_grad_(False)
        self.encoder.eval()
        return self

    def trainable_parameters(self):
        yield from self.bottleneck.parameters()
        yield from self.decoder.parameters()

    def merge_reparam_(self):
        """Fold all dilated-reparam convolutions into dense kernels."""
        from .blocks import DilatedReparamConv

        targets = [m for m in self.modules() if isinstance(m, DilatedReparamConv)]
        for module in targets:
            module.merge_()
        return self
