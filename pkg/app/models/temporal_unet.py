# app/models/temporal_unet.py
import torch
import torch.nn as nn
import torch.nn.functional as F

from app.models.base import NODE_DIM, DenoiserBase, check_finite


def _groups(channels: int, limit: int = 8) -> int:
    groups = min(limit, channels)
    while groups > 1 and channels % groups:
        groups -= 1
    return groups


class ResidualBlock1D(nn.Module):
    """Two convolutions with a FiLM-style bias from the conditioning vector."""

    def __init__(self, in_channels: int, out_channels: int, cond_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_channels), in_channels)
        self.conv1 = nn.Conv1d(in_channels, out_channels, kernel_size=3, padding=1)
        self.norm2 = nn.GroupNorm(_groups(out_channels), out_channels)
        self.conv2 = nn.Conv1d(out_channels, out_channels, kernel_size=3, padding=1)
        self.cond_mlp = nn.Sequential(nn.SiLU(), nn.Linear(cond_dim, out_channels))
        self.skip = nn.Conv1d(in_channels, out_channels, 1) if in_channels != out_channels else nn.Identity()

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.cond_mlp(cond)[..., None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class TemporalUNet(DenoiserBase):
    """1D convolutional U-Net over the horizon axis."""

    kind = "unet"

    def __init__(self, context_dim: int, channels: tuple[int, ...] = (64, 128, 256), cond_dim: int = 128, zero_init: bool = True):
        super().__init__(context_dim, cond_dim)
        self.channels = tuple(channels)
        self.zero_init = zero_init
        self.init_conv = nn.Conv1d(NODE_DIM, self.channels[0], kernel_size=3, padding=1)
        self.downs = nn.ModuleList()
        prev = self.channels[0]
        for i, ch in enumerate(self.channels):
            last = i == len(self.channels) - 1
            self.downs.append(nn.ModuleList([
                ResidualBlock1D(prev, ch, cond_dim),
                nn.Conv1d(ch, ch, kernel_size=3, stride=2, padding=1) if not last else nn.Identity(),
            ]))
            prev = ch
        self.mid = ResidualBlock1D(prev, prev, cond_dim)
        self.ups = nn.ModuleList()
        for i, ch in enumerate(reversed(self.channels)):
            first = i == 0
            self.ups.append(nn.ModuleList([
                nn.Upsample(scale_factor=2, mode="nearest") if not first else nn.Identity(),
                ResidualBlock1D(prev + ch, ch, cond_dim),
            ]))
            prev = ch
        self.final = nn.Sequential(
            nn.GroupNorm(_groups(prev), prev), nn.SiLU(), nn.Conv1d(prev, NODE_DIM, kernel_size=3, padding=1)
        )
        if zero_init:
            nn.init.zeros_(self.final[-1].weight)
            nn.init.zeros_(self.final[-1].bias)

    def hyperparameters(self) -> dict:
        return {
            "kind": self.kind,
            "context_dim": self.context_dim,
            "channels": list(self.channels),
            "cond_dim": self.cond_dim,
        }

    def backbone(self, x: torch.Tensor, cond: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        horizon = x.shape[1]
        multiple = 2 ** (len(self.channels) - 1)
        padded = -(-horizon // multiple) * multiple
        h = x.transpose(1, 2)
        if padded != horizon:
            h = F.pad(h, (0, padded - horizon), mode="replicate")
        h = self.init_conv(h)
        skips = []
        for index, (block, down) in enumerate(self.downs):
            h = check_finite(block(h, cond), index)
            skips.append(h)
            h = down(h)
        h = check_finite(self.mid(h, cond), len(self.downs))
        for index, (up, block) in enumerate(self.ups):
            h = up(h)
            h = block(torch.cat([h, skips.pop()], dim=1), cond)
            check_finite(h, len(self.downs) + 1 + index)
        out = self.final(h)[..., :horizon]
        return out.transpose(1, 2)
