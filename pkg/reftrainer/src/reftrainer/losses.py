"""Joint loss: masked-token cross-entropy plus 2-way classification.

The masked-token term is the mean cross-entropy over positions whose
target is not the ignore marker (-1), matching the shard producer's
reference definition exactly.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

IGNORE_INDEX = -1


def masked_token_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean CE over non-ignored positions. logits: (B, L, V); targets (B, L)."""
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        targets.reshape(-1),
        ignore_index=IGNORE_INDEX,
    )


def classification_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """CE of the 2-way head. logits: (B, 2); labels: (B,)."""
    return F.cross_entropy(logits, labels)


def joint_loss(
    mlm_logits: torch.Tensor,
    mlm_targets: torch.Tensor,
    cls_logits: torch.Tensor,
    cls_labels: torch.Tensor,
    ecls_weight: float = 1.0,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    l_smlm = masked_token_loss(mlm_logits, mlm_targets)
    l_ecls = classification_loss(cls_logits, cls_labels)
    return l_smlm, l_ecls, l_smlm + ecls_weight * l_ecls
