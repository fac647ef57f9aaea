"""Conditional denoiser: a small encoder-decoder with skip connections,
conditioned on the noise level (Fourier features of log sigma) and on the
condition grid by channel concatenation.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class ResBlock(nn.Module):
    def __init__(self, ch: int, emb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(8, ch)
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.emb = nn.Linear(emb_dim, ch)
        self.norm2 = nn.GroupNorm(8, ch)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.emb(emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return x + h


class ConditionalUNet(nn.Module):
    """Two downsamplings, residual blocks throughout, zero-initialized
    output head. Input is [noised grid, condition grid] stacked on the
    channel axis; spatial dims must be divisible by 4."""

    def __init__(self, base: int = 16, emb_dim: int = 64):
        super().__init__()
        self.base = base
        self.emb_dim = emb_dim
        self.fc1 = nn.Linear(emb_dim, emb_dim)
        self.fc2 = nn.Linear(emb_dim, emb_dim)
        b = base
        self.inp = nn.Conv2d(2, b, 3, padding=1)
        self.rb1 = ResBlock(b, emb_dim)
        self.down1 = nn.Conv2d(b, 2 * b, 3, stride=2, padding=1)
        self.rb2 = ResBlock(2 * b, emb_dim)
        self.down2 = nn.Conv2d(2 * b, 4 * b, 3, stride=2, padding=1)
        self.rb3 = ResBlock(4 * b, emb_dim)
        self.mid = ResBlock(4 * b, emb_dim)
        self.up1 = nn.ConvTranspose2d(4 * b, 2 * b, 4, stride=2, padding=1)
        self.rb4 = ResBlock(2 * b, emb_dim)
        self.up2 = nn.ConvTranspose2d(2 * b, b, 4, stride=2, padding=1)
        self.rb5 = ResBlock(b, emb_dim)
        self.out = nn.Conv2d(b, 1, 3, padding=1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def noise_embedding(self, sigma: torch.Tensor) -> torch.Tensor:
        half = self.emb_dim // 2
        freqs = torch.exp(torch.linspace(0.0, 6.0, half, device=sigma.device))
        ang = torch.log(sigma)[:, None] * freqs[None, :]
        emb = torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)
        return F.silu(self.fc2(F.silu(self.fc1(emb))))

    def forward(self, x: torch.Tensor, sigma: torch.Tensor,
                cond: torch.Tensor) -> torch.Tensor:
        emb = self.noise_embedding(sigma)
        h1 = self.rb1(self.inp(torch.cat([x, cond], dim=1)), emb)
        h2 = self.rb2(self.down1(h1), emb)
        h3 = self.rb3(self.down2(h2), emb)
        m = self.mid(h3, emb)
        u1 = self.rb4(self.up1(m) + h2, emb)
        u2 = self.rb5(self.up2(u1) + h1, emb)
        return self.out(u2)
