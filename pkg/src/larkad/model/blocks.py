"""Large-kernel (LarK) and small-kernel (SmaK) inverted-bottleneck blocks.

A LarK block carries a dilated-reparam depthwise convolution: a dense
large kernel plus parallel small kernels at increasing dilation, summed.
The parallel form is used for training; ``merge_dilated_branches`` folds
all branches into one dense kernel for inference.
"""

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigurationError
from .grn import GRN

LARK = "lark"
SMAK = "smak"


class LayerNorm2d(nn.Module):
    """Channel-wise LayerNorm for NCHW tensors."""

    def __init__(self, channels, eps=1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        u = x.mean(dim=1, keepdim=True)
        s = (x - u).pow(2).mean(dim=1, keepdim=True)
        x = (x - u) / torch.sqrt(s + self.eps)
        return self.weight[:, None, None] * x + self.bias[:, None, None]


def default_branches(kernel_size):
    """Parallel (kernel, dilation) branches for a dense kernel of this size.

    Every branch's equivalent extent ``(k - 1) * d + 1`` fits inside the
    dense kernel. Small kernels get the dense kernel alone.
    """
    table = {
        13: ((13, 1), (5, 1), (7, 2), (3, 3), (3, 4), (3, 5)),
        11: ((11, 1), (5, 1), (5, 2), (3, 3), (3, 4), (3, 5)),
        9: ((9, 1), (5, 1), (5, 2), (3, 3), (3, 4)),
        7: ((7, 1), (5, 1), (3, 2), (3, 3)),
        5: ((5, 1), (3, 1), (3, 2)),
    }
    if kernel_size in table:
        return table[kernel_size]
    if kernel_size >= 15:
        return ((kernel_size, 1), (5, 1), (3, 2), (3, 3))
    return ((kernel_size, 1),)


@dataclass(frozen=True)
class BlockSpec:
    """Kind, kernel geometry and width of one block."""

    kind: str
    kernel_size: int
    channels: int
    dilated_branches: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in (LARK, SMAK):
            raise ConfigurationError(f"unknown block kind {self.kind!r}")
        if self.kernel_size % 2 != 1 or self.kernel_size < 1:
            raise ConfigurationError(f"kernel size must be odd and positive, got {self.kernel_size}")
        if self.channels < 1:
            raise ConfigurationError("channels must be positive")
        branches = self.dilated_branches
        if branches is None:
            branches = default_branches(self.kernel_size) if self.kind == LARK else ((self.kernel_size, 1),)
            object.__setattr__(self, "dilated_branches", tuple(branches))
        for k, d in self.dilated_branches:
            if k % 2 != 1 or d < 1:
                raise ConfigurationError(f"branch ({k}, {d}) must have odd kernel and dilation >= 1")
            if (k - 1) * d + 1 > self.kernel_size:
                raise ConfigurationError(
                    f"branch ({k}, {d}) spans {(k - 1) * d + 1} pixels, "
                    f"exceeding the dense kernel size {self.kernel_size}"
                )

    @classmethod
    def lark(cls, channels, kernel_size=13, dilated_branches=None):
        return cls(LARK, kernel_size, channels, dilated_branches)

    @classmethod
    def smak(cls, channels, kernel_size=3):
        return cls(SMAK, kernel_size, channels, ((kernel_size, 1),))


def merge_dilated_branches(spec, branch_weights):
    """Fold parallel dilated depthwise kernels into one dense kernel.

    Each branch weight has shape ``(C, 1, k, k)``; its taps are scattered
    onto the dense ``(C, 1, K, K)`` grid at spacing ``d`` around the center,
    so convolving with the merged kernel equals summing the branch
    convolutions exactly.
    """
    size = spec.kernel_size
    if len(branch_weights) != len(spec.dilated_branches):
        raise ConfigurationError("one weight tensor per branch is required")
    dense = None
    center = (size - 1) // 2
    for (k, d), w in zip(spec.dilated_branches, branch_weights):
        if w.shape[-2:] != (k, k):
            raise ConfigurationError(f"branch weight shape {tuple(w.shape)} does not match kernel {k}")
        if (k - 1) * d + 1 > size:
            raise ConfigurationError(f"branch ({k}, {d}) does not fit in a {size}x{size} kernel")
        if dense is None:
            dense = w.new_zeros(w.shape[0], w.shape[1], size, size)
        offsets = [center + d * (i - (k - 1) // 2) for i in range(k)]
        for i, oi in enumerate(offsets):
            for j, oj in enumerate(offsets):
                dense[:, :, oi, oj] += w[:, :, i, j]
    return dense


class DilatedReparamConv(nn.Module):
    """Depthwise convolution as a sum of parallel dilated branches.

    ``merge_()`` collapses the branches into a single dense kernel; the
    forward pass is equivalent either way (up to float rounding).
    """

    def __init__(self, spec):
        super().__init__()
        if spec.kind != LARK:
            raise ConfigurationError("dilated reparam convolution is a LarK component")
        self.spec = spec
        self.branch_weights = nn.ParameterList()
        for k, _ in spec.dilated_branches:
            w = torch.empty(spec.channels, 1, k, k)
            nn.init.trunc_normal_(w, std=0.02)
            self.branch_weights.append(nn.Parameter(w))
        self.bias = nn.Parameter(torch.zeros(spec.channels))
        self.merged_weight = None

    def forward(self, x):
        if self.merged_weight is not None:
            pad = (self.spec.kernel_size - 1) // 2
            return F.conv2d(x, self.merged_weight, self.bias, padding=pad, groups=self.spec.channels)
        out = None
        for (k, d), w in zip(self.spec.dilated_branches, self.branch_weights):
            pad = (k - 1) * d // 2
            y = F.conv2d(x, w, None, padding=pad, dilation=d, groups=self.spec.channels)
            out = y if out is None else out + y
        return out + self.bias[:, None, None]

    def merged_kernel(self):
        return merge_dilated_branches(self.spec, [w.detach() for w in self.branch_weights])

    def merge_(self):
        """Switch to the merged dense kernel in place."""
        merged = self.merged_kernel()
        self.merged_weight = nn.Parameter(merged)
        self.branch_weights = nn.ParameterList()
        return self


class ConvBlock(nn.Module):
    """Inverted-bottleneck block: depthwise conv, norm, expand, GRN, project, residual.

    LarK blocks use the dilated-reparam depthwise convolution; SmaK blocks a
    plain depthwise kernel. Channel count and spatial size are preserved.
    """

    expansion = 4

    def __init__(self, spec):
        super().__init__()
        self.spec = spec
        dim = spec.channels
        if spec.kind == LARK:
            self.dw = DilatedReparamConv(spec)
        else:
            k = spec.kernel_size
            self.dw = nn.Conv2d(dim, dim, k, padding=(k - 1) // 2, groups=dim)
        self.norm = LayerNorm2d(dim)
        self.pw1 = nn.Conv2d(dim, self.expansion * dim, 1)
        self.act = nn.GELU()
        self.grn = GRN(self.expansion * dim)
        self.pw2 = nn.Conv2d(self.expansion * dim, dim, 1)

    def forward(self, x):
        y = self.dw(x)
        y = self.norm(y)
        y = self.pw1(y)
        y = self.act(y)
        y = self.grn(y)
        y = self.pw2(y)
        return x + y
