# app/models/dit.py
import torch
import torch.nn as nn

from app.models.base import NODE_DIM, DenoiserBase, SinusoidalPosEmb, check_finite


def modulate(x: torch.Tensor, shift: torch.Tensor, scale: torch.Tensor) -> torch.Tensor:
    return x * (1 + scale[:, None, :]) + shift[:, None, :]


class SelfAttention(nn.Module):
    """Plain multi-head self-attention without masking."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = width // heads
        self.scale = self.head_dim ** -0.5
        self.to_qkv = nn.Linear(width, 3 * width)
        self.to_out = nn.Linear(width, width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, h, c = x.shape
        q, k, v = self.to_qkv(x).chunk(3, dim=-1)
        q, k, v = (z.reshape(b, h, self.heads, self.head_dim).transpose(1, 2) for z in (q, k, v))
        attn = (torch.einsum("bhid,bhjd->bhij", q, k) * self.scale).softmax(dim=-1)
        out = torch.einsum("bhij,bhjd->bhid", attn, v).transpose(1, 2).reshape(b, h, c)
        return self.to_out(out)


class DiTBlock(nn.Module):
    """Pre-norm attention and MLP sublayers with adaLN-Zero modulation."""

    def __init__(self, width: int, heads: int, mlp_ratio: float):
        super().__init__()
        hidden = int(width * mlp_ratio)
        self.norm1 = nn.LayerNorm(width, elementwise_affine=False, eps=1e-6)
        self.attn = SelfAttention(width, heads)
        self.norm2 = nn.LayerNorm(width, elementwise_affine=False, eps=1e-6)
        self.mlp = nn.Sequential(nn.Linear(width, hidden), nn.GELU(approximate="tanh"), nn.Linear(hidden, width))
        self.ada_ln = nn.Sequential(nn.SiLU(), nn.Linear(width, 6 * width))

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        shift1, scale1, gate1, shift2, scale2, gate2 = self.ada_ln(cond).chunk(6, dim=-1)
        x = x + gate1[:, None, :] * self.attn(modulate(self.norm1(x), shift1, scale1))
        x = x + gate2[:, None, :] * self.mlp(modulate(self.norm2(x), shift2, scale2))
        return x


class FinalLayer(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.norm = nn.LayerNorm(width, elementwise_affine=False, eps=1e-6)
        self.ada_ln = nn.Sequential(nn.SiLU(), nn.Linear(width, 2 * width))
        self.linear = nn.Linear(width, NODE_DIM)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        shift, scale = self.ada_ln(cond).chunk(2, dim=-1)
        return self.linear(modulate(self.norm(x), shift, scale))


class DiTDenoiser(DenoiserBase):
    """Transformer denoiser over trajectory nodes."""

    kind = "dit"

    def __init__(
        self,
        context_dim: int,
        width: int = 128,
        depth: int = 6,
        heads: int = 4,
        mlp_ratio: float = 4.0,
        zero_init: bool = True,
    ):
        super().__init__(context_dim, width)
        if width % heads:
            raise ValueError(f"width {width} is not divisible by heads {heads}")
        self.width, self.depth, self.heads, self.mlp_ratio = width, depth, heads, mlp_ratio
        self.zero_init = zero_init
        self.token_in = nn.Linear(NODE_DIM, width)
        self.pos_emb = SinusoidalPosEmb(width)
        self.blocks = nn.ModuleList([DiTBlock(width, heads, mlp_ratio) for _ in range(depth)])
        self.final = FinalLayer(width)
        if zero_init:
            for block in self.blocks:
                nn.init.zeros_(block.ada_ln[-1].weight)
                nn.init.zeros_(block.ada_ln[-1].bias)
            nn.init.zeros_(self.final.ada_ln[-1].weight)
            nn.init.zeros_(self.final.ada_ln[-1].bias)
            nn.init.zeros_(self.final.linear.weight)
            nn.init.zeros_(self.final.linear.bias)

    def hyperparameters(self) -> dict:
        return {
            "kind": self.kind,
            "context_dim": self.context_dim,
            "width": self.width,
            "depth": self.depth,
            "heads": self.heads,
            "mlp_ratio": self.mlp_ratio,
        }

    def backbone(self, x: torch.Tensor, cond: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        h = self.token_in(x) + self.pos_emb(positions).to(cond.dtype)
        for index, block in enumerate(self.blocks):
            h = check_finite(block(h, cond), index)
        return check_finite(self.final(h, cond), len(self.blocks), "output head")
