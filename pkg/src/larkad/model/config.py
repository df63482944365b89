"""Model geometry: stage depths, widths, kernels and named presets."""

from dataclasses import dataclass, field

from ..errors import ConfigurationError

# Per-stage (lark_count, smak_count). Stage 1 is the small-kernel stage; the
# deeper stages carry the large kernels.
DEFAULT_DEPTHS = ((0, 2), (2, 0), (8, 0))
DEFAULT_CHANNELS = (80, 160, 320)


@dataclass(frozen=True)
class ModelConfig:
    """Geometry of the three-stage encoder and its mirrored decoder."""

    stage_depths: tuple = DEFAULT_DEPTHS
    stage_channels: tuple = DEFAULT_CHANNELS
    bottleneck_depth: int = 2
    input_resolution: tuple = (256, 256)
    lark_kernel: int = 13
    smak_kernel: int = 3
    in_channels: int = 3
    embedding_channels: int = field(default=None)

    def __post_init__(self):
        if len(self.stage_depths) != 3 or len(self.stage_channels) != 3:
            raise ConfigurationError("exactly three stages are required")
        for lark, smak in self.stage_depths:
            if lark < 0 or smak < 0 or lark + smak < 1:
                raise ConfigurationError(f"invalid stage depth ({lark}, {smak})")
        if not all(a < b for a, b in zip(self.stage_channels, self.stage_channels[1:])):
            raise ConfigurationError(f"channels must strictly increase, got {self.stage_channels}")
        if self.bottleneck_depth < 1:
            raise ConfigurationError("bottleneck depth must be positive")
        h, w = self.input_resolution
        if h % 32 != 0 or w % 32 != 0:
            raise ConfigurationError(f"input resolution {h}x{w} must be divisible by 32")
        if self.embedding_channels is None:
            object.__setattr__(self, "embedding_channels", 2 * self.stage_channels[-1])

    @property
    def level_strides(self):
        return (4, 8, 16)

    def level_shapes(self, resolution=None):
        h, w = resolution or self.input_resolution
        return [(h // s, w // s) for s in self.level_strides]


# Named sizes of the large-kernel backbone family, three pyramid stages each,
# plus the reduced desk-scale geometry used for CI-speed runs.
PRESETS = {
    "desk": ModelConfig(
        stage_depths=((0, 1), (1, 0), (2, 0)),
        stage_channels=(32, 64, 128),
        input_resolution=(64, 64),
    ),
    "f": ModelConfig(stage_depths=((0, 2), (2, 0), (6, 0)), stage_channels=(48, 96, 192)),
    "p": ModelConfig(stage_depths=((0, 2), (2, 0), (6, 0)), stage_channels=(64, 128, 256)),
    "n": ModelConfig(stage_depths=((0, 2), (2, 0), (8, 0)), stage_channels=(80, 160, 320)),
    "t": ModelConfig(stage_depths=((0, 2), (2, 0), (9, 9)), stage_channels=(80, 160, 320)),
    "s": ModelConfig(stage_depths=((0, 2), (2, 0), (9, 18)), stage_channels=(96, 192, 384)),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown model preset {name!r}; choose from {sorted(PRESETS)}") from None
