"""Training objective: segmentation, edge and edge-consistency losses.

All losses take an optional ignore mask (True = pixel excluded) so the
unlabeled real lesion region cannot punish the network.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch

from yoho.errors import AllIgnored, ShapeError

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    mu1: float = 1.0
    mu2: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.5
    tau: float = 0.5

    def __post_init__(self):
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be positive")
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie in (0, 1)")
        if min(self.mu1, self.mu2, self.lambda2, self.lambda3) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class LossBreakdown:
    seg: torch.Tensor
    edge: torch.Tensor
    consist: torch.Tensor
    total: torch.Tensor

    def detached(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in ("seg", "edge", "consist", "total")}


def _check_shapes(*tensors: torch.Tensor | None) -> None:
    shapes = {tuple(t.shape) for t in tensors if t is not None}
    if len(shapes) > 1:
        raise ShapeError(f"mismatched shapes: {sorted(shapes)}")


def _valid_mask(like: torch.Tensor, ignore_mask: torch.Tensor | None) -> torch.Tensor:
    if ignore_mask is None:
        return torch.ones_like(like, dtype=torch.bool)
    valid = ~ignore_mask.bool()
    if not valid.any():
        raise AllIgnored("every pixel is ignored")
    return valid


def seg_loss(
    s_hat: torch.Tensor,
    s: torch.Tensor,
    ignore_mask: torch.Tensor | None = None,
    mu1: float = 1.0,
    mu2: float = 1.0,
) -> torch.Tensor:
    """mu1 * mean BCE + mu2 * Dice loss over the non-ignored pixels."""
    _check_shapes(s_hat, s, ignore_mask)
    valid = _valid_mask(s_hat, ignore_mask)
    p = s_hat[valid].clamp(EPS, 1.0 - EPS)
    t = s[valid].to(p.dtype)
    bce = -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)).mean()
    dice = 1.0 - 2.0 * (p * t).sum() / (p.sum() + t.sum() + EPS)
    return mu1 * bce + mu2 * dice


def _wce(p: torch.Tensor, t: torch.Tensor, context: str) -> torch.Tensor:
    """Class-balanced cross entropy with per-image weights w+ = |Y-|/|Y|,
    w- = |Y+|/|Y|; falls back to unweighted BCE on single-class targets."""
    n = t.numel()
    n_pos = t.sum()
    n_neg = n - n_pos
    log_p = torch.log(p)
    log_not_p = torch.log(1.0 - p)
    if n_pos == 0 or n_neg == 0:
        warnings.warn(f"{context}: single-class edge target, using unweighted BCE", stacklevel=3)
        return -(t * log_p + (1.0 - t) * log_not_p).mean()
    w_pos = n_neg.to(p.dtype) / n
    w_neg = n_pos.to(p.dtype) / n
    return -(w_pos * t * log_p + w_neg * (1.0 - t) * log_not_p).mean()


def edge_loss(
    e_hat: torch.Tensor,
    e: torch.Tensor,
    ignore_mask: torch.Tensor | None = None,
) -> torch.Tensor:
    """Weighted cross entropy balancing sparse edge pixels against background."""
    _check_shapes(e_hat, e, ignore_mask)
    valid = _valid_mask(e_hat, ignore_mask)
    p = e_hat[valid].clamp(EPS, 1.0 - EPS)
    t = e[valid].to(p.dtype)
    return _wce(p, t, "edge_loss")


def consistency_loss(
    e_hat_prime: torch.Tensor,
    e_hat: torch.Tensor,
    tau: float = 0.5,
    ignore_mask: torch.Tensor | None = None,
) -> torch.Tensor:
    """Tie the boundary-enhanced map to the detector output binarized at tau.

    The binarized target is a constructed label: no gradient flows back
    into e_hat from here, only into e_hat_prime.
    """
    _check_shapes(e_hat_prime, e_hat, ignore_mask)
    target = (e_hat.detach() >= tau).to(e_hat_prime.dtype)
    return edge_loss(e_hat_prime, target, ignore_mask)


def total_loss(
    outputs,
    s: torch.Tensor,
    e: torch.Tensor,
    ignore_mask: torch.Tensor | None = None,
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    """Weighted sum of the three losses; total = l1*seg + l2*edge + l3*consist.

    ``outputs`` is anything exposing s_hat / e_hat / e_hat_prime tensors
    (normally a ModelOutputs).
    """
    seg = seg_loss(outputs.s_hat, s, ignore_mask, weights.mu1, weights.mu2)
    edge = edge_loss(outputs.e_hat, e, ignore_mask)
    consist = consistency_loss(outputs.e_hat_prime, outputs.e_hat, weights.tau, ignore_mask)
    total = weights.lambda1 * seg + weights.lambda2 * edge + weights.lambda3 * consist
    return LossBreakdown(seg=seg, edge=edge, consist=consist, total=total)
