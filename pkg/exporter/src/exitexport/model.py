"""Toy multi-exit classifier and its training recipe.

The backbone is an MLP: L blocks of Linear+ReLU with a linear classification
head attached after every block, the L-th head doubling as the final
classifier.  All exits train jointly; the loss for exit i is cross-entropy
plus, when distillation is on, the KL divergence from the exit's
distribution to the final layer's (teacher gradients stopped), and exits are
combined as sum(i * loss_i) / sum(i) so deeper, costlier exits weigh more.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


class MultiExitMLP(nn.Module):
    def __init__(self, in_dim: int, hidden: int, n_classes: int, n_layers: int):
        super().__init__()
        if n_layers < 2:
            raise ValueError(f"need at least two exits, got {n_layers}")
        self.n_layers = n_layers
        self.n_classes = n_classes
        blocks = []
        width = in_dim
        for _ in range(n_layers):
            blocks.append(nn.Sequential(nn.Linear(width, hidden), nn.ReLU()))
            width = hidden
        self.blocks = nn.ModuleList(blocks)
        self.heads = nn.ModuleList(nn.Linear(hidden, n_classes) for _ in range(n_layers))

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Logits per exit, shallow to deep."""
        logits = []
        h = x
        for block, head in zip(self.blocks, self.heads):
            h = block(h)
            logits.append(head(h))
        return logits


def exit_loss_weights(n_layers: int) -> torch.Tensor:
    """Per-exit combination weights i / sum(1..L)."""
    i = torch.arange(1, n_layers + 1, dtype=torch.float32)
    return i / i.sum()


def distillation_kl(exit_probs: torch.Tensor, final_probs: torch.Tensor) -> torch.Tensor:
    """KL(exit distribution || final distribution), teacher detached."""
    teacher = final_probs.detach().clamp_min(1e-12)
    return F.kl_div(teacher.log(), exit_probs, reduction="batchmean")


def joint_loss(logits: list[torch.Tensor], y: torch.Tensor, distill: bool) -> torch.Tensor:
    weights = exit_loss_weights(len(logits))
    final_probs = F.softmax(logits[-1], dim=1)
    total = logits[0].new_zeros(())
    for i, exit_logits in enumerate(logits):
        loss_i = F.cross_entropy(exit_logits, y)
        if distill:
            loss_i = loss_i + distillation_kl(F.softmax(exit_logits, dim=1), final_probs)
        total = total + weights[i] * loss_i
    return total


def train_multi_exit(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_layers: int,
    hidden: int = 64,
    epochs: int = 8,
    distill: bool = True,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
) -> MultiExitMLP:
    """Train all exits jointly on (X, y); deterministic given the seed."""
    torch.manual_seed(seed)
    model = MultiExitMLP(X.shape[1], hidden, n_classes, n_layers)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    Xt = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32))
    yt = torch.from_numpy(np.ascontiguousarray(y, dtype=np.int64))
    order_rng = np.random.default_rng(seed)

    model.train()
    for _ in range(epochs):
        order = order_rng.permutation(len(yt))
        for start in range(0, len(yt), batch_size):
            idx = order[start : start + batch_size]
            opt.zero_grad()
            loss = joint_loss(model(Xt[idx]), yt[idx], distill)
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss.item()!r}")
            loss.backward()
            opt.step()
    model.eval()
    return model


@torch.no_grad()
def exit_probabilities(model: MultiExitMLP, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """(N, L, C) softmax outputs of every exit."""
    model.eval()
    Xt = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32))
    chunks = []
    for start in range(0, len(Xt), batch_size):
        logits = model(Xt[start : start + batch_size])
        probs = torch.stack([F.softmax(l, dim=1) for l in logits], dim=1)
        chunks.append(probs.cpu().numpy())
    return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, model.n_layers, model.n_classes))


def per_exit_accuracy(model: MultiExitMLP, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Standalone accuracy of each exit (argmax of its own distribution)."""
    probs = exit_probabilities(model, X)
    preds = probs.argmax(axis=2)
    return (preds == y[:, None]).mean(axis=0)
