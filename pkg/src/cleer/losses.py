"""Temporal, instance-wise, dual and hierarchical contrastive losses, plus
the joint objective that adds classification cross-entropy.

Both losses score raw dot products: no temperature, no L2 normalization.
Positives are same-timestamp cross-view pairs; negatives are other overlap
timestamps within an instance (temporal) or other batch instances at the
same timestamp (instance-wise). All softmax denominators go through a
log-sum-exp-stable path; same-element self terms are excluded by masking
with -inf, which contributes exactly zero mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, ShapeError
from . import tensor as T
from .tensor import DiffTensor


@dataclass
class LevelLoss:
    level: int
    length: int
    tcl: float
    icl: float
    dcl: float


@dataclass
class LossBreakdown:
    per_level: list[LevelLoss] = field(default_factory=list)
    hcl: float = 0.0
    class_loss: float = 0.0
    total: float = 0.0


def _check_views(z, z_prime):
    if not isinstance(z, DiffTensor) or not isinstance(z_prime, DiffTensor):
        raise ShapeError("losses expect DiffTensor views")
    if z.ndim != 3 or z_prime.ndim != 3:
        raise ShapeError(
            f"views must be (B, K, D), got {z.shape} and {z_prime.shape}")
    if z.shape != z_prime.shape:
        raise ShapeError(f"view shapes differ: {z.shape} vs {z_prime.shape}")


def _contrast(anchor, other, anchor_same):
    """Shared core: -log softmax of the positive among cross-view entries
    plus same-view entries with the self term masked out.

    anchor, other, anchor_same: (G, M, D) where M indexes the contrast set
    (timestamps for TCL after grouping by instance, instances for ICL after
    grouping by timestamp).
    """
    M = anchor.shape[1]
    pos = T.sum_(T.mul(anchor, other), axis=-1)                 # (G, M)
    cross = T.matmul(anchor, other.transpose(0, 2, 1))          # (G, M, M)
    same = T.matmul(anchor, anchor_same.transpose(0, 2, 1))     # (G, M, M)
    eye = np.broadcast_to(np.eye(M, dtype=bool), same.shape)
    same = T.masked_fill(same, eye, -np.inf)
    logits = T.concatenate([cross, same], axis=-1)              # (G, M, 2M)
    lse = T.logsumexp(logits, axis=-1)                          # (G, M)
    return T.mean(T.add(lse, T.mul(pos, -1.0)))


def tcl_loss(z, z_prime, symmetrize=False):
    """Temporal contrastive loss over aligned overlap views (B, K, D).

    Per (i, t): -log exp(z_it . z'_it) / (sum_t' exp(z_it . z'_it') +
    sum_t'!=t exp(z_it . z_it')), averaged over all (i, t). Exactly zero
    when K == 1. One-directional unless symmetrize is set.
    """
    _check_views(z, z_prime)
    loss = _contrast(z, z_prime, z)
    if symmetrize:
        loss = T.mul(T.add(loss, _contrast(z_prime, z, z_prime)), 0.5)
    return loss


def icl_loss(z, z_prime, symmetrize=False):
    """Instance-wise contrastive loss over aligned views (B, K, D).

    Per (i, t): -log exp(z_it . z'_it) / (sum_j exp(z_it . z'_jt) +
    sum_j!=i exp(z_it . z_jt)), averaged over all (i, t). Exactly zero when
    B == 1.
    """
    _check_views(z, z_prime)
    zt = z.transpose(1, 0, 2)              # (K, B, D)
    zpt = z_prime.transpose(1, 0, 2)
    loss = _contrast(zt, zpt, zt)
    if symmetrize:
        loss = T.mul(T.add(loss, _contrast(zpt, zt, zpt)), 0.5)
    return loss


def dcl_loss(z, z_prime, symmetrize=False):
    """Dual loss at one resolution: mean over (i, t) of the temporal plus
    instance-wise terms, i.e. tcl_loss + icl_loss."""
    return T.add(tcl_loss(z, z_prime, symmetrize),
                 icl_loss(z, z_prime, symmetrize))


def _halve_time(z):
    """Max-pool (kernel 2, stride 2, ceil) along the middle (time) axis of a
    (B, K, D) tensor."""
    return T.maxpool1d(z.transpose(0, 2, 1)).transpose(0, 2, 1)


def hcl_loss(z, z_prime, symmetrize=False):
    """Hierarchical loss: dual loss at full resolution and after repeated
    halving max-pools until the series length reaches 1; the result is the
    mean over levels. Returns (scalar DiffTensor, LossBreakdown with
    per-level values and hcl filled in).

    The final length-1 level keeps its instance-wise component; its temporal
    component is 0 by construction.
    """
    _check_views(z, z_prime)
    if z.shape[1] == 0:
        raise EmptyInputError("hcl_loss: empty overlap (K=0)")
    breakdown = LossBreakdown()
    total = None
    level = 0
    while True:
        t_l = tcl_loss(z, z_prime, symmetrize)
        i_l = icl_loss(z, z_prime, symmetrize)
        d_l = T.add(t_l, i_l)
        breakdown.per_level.append(LevelLoss(
            level=level, length=z.shape[1],
            tcl=float(t_l.data), icl=float(i_l.data), dcl=float(d_l.data)))
        total = d_l if total is None else T.add(total, d_l)
        if z.shape[1] == 1:
            break
        z = _halve_time(z)
        z_prime = _halve_time(z_prime)
        level += 1
    hcl = T.mul(total, 1.0 / len(breakdown.per_level))
    breakdown.hcl = float(hcl.data)
    breakdown.total = breakdown.hcl
    return hcl, breakdown


def joint_loss(hcl, class_probs, labels, lambda_class=1.0, breakdown=None):
    """Total objective: hcl + lambda_class * cross_entropy(probs, labels).

    Returns (scalar DiffTensor, LossBreakdown). Pass the breakdown from
    hcl_loss to keep its per-level records; otherwise a fresh one is made.
    """
    if breakdown is None:
        breakdown = LossBreakdown(hcl=float(hcl.data))
    ce = T.cross_entropy(class_probs, labels)
    total = T.add(hcl, T.mul(ce, lambda_class))
    breakdown.class_loss = float(ce.data)
    breakdown.total = float(total.data)
    return total, breakdown


def n_levels(overlap_length):
    """Number of hierarchy levels produced for an overlap of length K."""
    if overlap_length < 1:
        raise EmptyInputError("n_levels: overlap length must be >= 1")
    return int(np.ceil(np.log2(overlap_length))) + 1 if overlap_length > 1 else 1
