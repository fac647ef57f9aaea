"""Consistency distillation: compress the multi-step teacher into a
single-step student with the same architecture.

The student maps any point on the teacher's sampling trajectory straight
to the clean grid; training enforces self-consistency across adjacent
schedule noise levels, with the teacher providing the one-step ODE jump
and an EMA copy of the student as the regression target.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch

from .data import DiffusionSample
from .edm import SIGMA_DATA, NoiseSchedule, _to_tensors, edm_denoise
from .model import ConditionalUNet


def consistency_output(net: ConditionalUNet, x: torch.Tensor,
                       sigma: torch.Tensor, cond: torch.Tensor,
                       sigma_min: float) -> torch.Tensor:
    """f(x; sigma, c) with the boundary condition f(x; sigma_min) = x."""
    ds = sigma - sigma_min
    c_skip = SIGMA_DATA ** 2 / (ds ** 2 + SIGMA_DATA ** 2)
    c_out = ds * SIGMA_DATA / torch.sqrt(sigma ** 2 + SIGMA_DATA ** 2)
    c_in = 1.0 / torch.sqrt(sigma ** 2 + SIGMA_DATA ** 2)
    raw = net(c_in[:, None, None, None] * x, sigma, cond)
    return c_skip[:, None, None, None] * x + c_out[:, None, None, None] * raw


@dataclass
class DistillConfig:
    steps: int = 700
    batch_size: int = 8
    lr: float = 1e-3
    ema_decay: float = 0.95
    log_every: int = 50


def distill(teacher: ConditionalUNet, samples: list[DiffusionSample],
            cfg: DistillConfig = DistillConfig(),
            schedule: NoiseSchedule = NoiseSchedule(), seed: int = 0,
            log=print) -> tuple[ConditionalUNet, list[float]]:
    """Returns the student network (teacher-initialized) and the loss trace."""
    if not samples:
        raise ValueError("distillation needs at least one sample")
    torch.manual_seed(seed)
    student = copy.deepcopy(teacher)
    target_net = copy.deepcopy(teacher)
    for p in target_net.parameters():
        p.requires_grad_(False)
    teacher.eval()
    opt = torch.optim.Adam(student.parameters(), lr=cfg.lr)
    cond, targ = _to_tensors(samples)
    sigmas = schedule.sigmas()
    gen = torch.Generator().manual_seed(seed)
    smin = schedule.sigma_min
    losses: list[float] = []
    for step in range(cfg.steps):
        idx = torch.randint(0, len(samples), (cfg.batch_size,), generator=gen)
        x0 = targ[idx]
        c = cond[idx]
        n = torch.randint(0, schedule.num_steps - 1, (1,), generator=gen).item()
        s_hi = sigmas[n].repeat(cfg.batch_size)
        s_lo = sigmas[n + 1].repeat(cfg.batch_size)
        eps = torch.randn(x0.shape, generator=gen)
        x_hi = x0 + s_hi[:, None, None, None] * eps
        with torch.no_grad():
            # one teacher Heun step from sigma_n down to sigma_{n+1}
            d = (x_hi - edm_denoise(teacher, x_hi, s_hi, c)) / sigmas[n]
            x_lo = x_hi + (sigmas[n + 1] - sigmas[n]) * d
            d2 = (x_lo - edm_denoise(teacher, x_lo, s_lo, c)) / sigmas[n + 1]
            x_lo = x_hi + (sigmas[n + 1] - sigmas[n]) * 0.5 * (d + d2)
            target = consistency_output(target_net, x_lo, s_lo, c, smin)
        pred = consistency_output(student, x_hi, s_hi, c, smin)
        loss = ((pred - target) ** 2).mean()
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite distillation loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(loss.item())
        with torch.no_grad():
            for pt, ps in zip(target_net.parameters(), student.parameters()):
                pt.mul_(cfg.ema_decay).add_(ps, alpha=1.0 - cfg.ema_decay)
        if log is not None and step % cfg.log_every == 0:
            recent = losses[-cfg.log_every:]
            log(f"distill {step:5d}  loss {float(np.mean(recent)):.5f}")
    student.eval()
    return student, losses


@torch.no_grad()
def sample_single_step(student: ConditionalUNet, condition: np.ndarray,
                       schedule: NoiseSchedule = NoiseSchedule(),
                       seed: int = 0) -> np.ndarray:
    """One forward pass from pure noise at sigma_max."""
    single = condition.ndim == 2
    cond_np = condition[None] if single else condition
    cond = torch.tensor(np.asarray(cond_np, dtype=np.float32))[:, None] * 2.0 - 1.0
    n = cond.shape[0]
    gen = torch.Generator().manual_seed(seed)
    sigma = torch.full((n,), schedule.sigma_max)
    x = torch.randn((n, 1, *cond.shape[-2:]), generator=gen) * schedule.sigma_max
    out = consistency_output(student, x, sigma, cond, schedule.sigma_min)
    img = ((out[:, 0].numpy() + 1.0) * 127.5).clip(0.0, 255.0).round().astype(np.uint8)
    return img[0] if single else img
