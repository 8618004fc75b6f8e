"""Residual multi-head network for attribute classification.

A small convolutional backbone is shared by one softmax head per attribute
set.  The stem maps the grayscale glyph to ``base_maps`` feature maps; each
later stage opens with a stride-2 average pool and doubles the width, so the
default four stages take a 64x64 input down to a 4x4 map before the shared
global average pool.
"""

from __future__ import annotations

import torch
import torch.nn as nn

# Architecture choices not fixed by the layer table; recorded in checkpoints.
DESIGN_NOTES = (
    "kernel sizes are 3x3 throughout; every stage after the first opens with a stride-2 average pool",
    "each residual block holds two convolutions, each followed by batch normalization",
    "width-changing skip connections use a 1x1 projection convolution with batch normalization",
    "a single shared global average pool feeds all classifier heads",
    "training uses plain SGD on the summed per-set cross entropy",
)


class ResidualBlock(nn.Module):
    def __init__(self, in_maps: int, out_maps: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_maps, out_maps, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_maps)
        self.conv2 = nn.Conv2d(out_maps, out_maps, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_maps)
        self.relu = nn.ReLU(inplace=True)
        if in_maps == out_maps:
            self.project = None
        else:
            self.project = nn.Sequential(
                nn.Conv2d(in_maps, out_maps, 1, bias=False),
                nn.BatchNorm2d(out_maps),
            )

    def forward(self, x):
        skip = x if self.project is None else self.project(x)
        y = self.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return self.relu(y + skip)


class AttributeNet(nn.Module):
    """Shared residual backbone with one linear head per attribute set."""

    def __init__(self, head_sizes, blocks_per_stage=(1, 1, 1, 1), base_maps: int = 16):
        super().__init__()
        self.head_sizes = tuple(int(k) for k in head_sizes)
        self.blocks_per_stage = tuple(int(b) for b in blocks_per_stage)
        self.base_maps = int(base_maps)

        self.stem = nn.Sequential(
            nn.Conv2d(1, self.base_maps, 3, padding=1, bias=False),
            nn.BatchNorm2d(self.base_maps),
            nn.ReLU(inplace=True),
        )
        stages = []
        width = self.base_maps
        for stage, count in enumerate(self.blocks_per_stage):
            out_maps = self.base_maps * (2 ** stage)
            layers: list[nn.Module] = [nn.AvgPool2d(2)]
            for _ in range(count):
                layers.append(ResidualBlock(width, out_maps))
                width = out_maps
            stages.append(nn.Sequential(*layers))
        self.stages = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.heads = nn.ModuleList(nn.Linear(width, k) for k in self.head_sizes)
        self.feature_width = width

    def forward(self, x):
        y = self.stages(self.stem(x))
        feats = self.pool(y).flatten(1)
        return [head(feats) for head in self.heads]


def init_xavier(model: nn.Module) -> None:
    """Xavier-uniform weights for every convolution and linear layer."""
    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.xavier_uniform_(m.weight)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
