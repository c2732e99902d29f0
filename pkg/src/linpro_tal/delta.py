"""Label differencing across pseudo-label generations and the signed soft-target CE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linpro import PseudoLabel


@dataclass(frozen=True)
class DeltaLabel:
    dG: np.ndarray

    def __post_init__(self) -> None:
        dG = np.array(self.dG, dtype=np.float64)
        if not np.all(np.isfinite(dG)):
            raise ValueError("delta label has non-finite entries")
        dG.setflags(write=False)
        object.__setattr__(self, "dG", dG)


@dataclass(frozen=True)
class LabelHistory:
    previous: PseudoLabel | None = None
    generation_index: int = 0

    def renewed(self, current: PseudoLabel) -> LabelHistory:
        return LabelHistory(current, self.generation_index + 1)


def delta_labels(current: PseudoLabel, history: LabelHistory) -> DeltaLabel:
    """G^t - G^(t-1); the first generation is differenced against zeros."""
    if history.previous is None:
        return DeltaLabel(current.G.copy())
    if history.previous.G.shape != current.G.shape:
        raise ValueError(f"shape mismatch: {history.previous.G.shape} vs {current.G.shape}")
    return DeltaLabel(current.G - history.previous.G)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _check(logits: np.ndarray, dG: np.ndarray) -> None:
    if logits.ndim != 2 or dG.ndim != 2 or logits.shape[0] != dG.shape[0] or logits.shape[1] != dG.shape[1] + 1:
        raise ValueError(f"logits {logits.shape} must be l x (K+1) for targets {dG.shape}")


def delta_ce_loss(logits: np.ndarray, dG: DeltaLabel | np.ndarray, weight: float = 1.0) -> float:
    """weight * sum_j sum_{c<K} -dG[j, c] * log softmax(logits[j])[c].

    The last logit column is background and receives no target.
    """
    logits = np.asarray(logits, dtype=np.float64)
    d = dG.dG if isinstance(dG, DeltaLabel) else np.asarray(dG, dtype=np.float64)
    _check(logits, d)
    logp = _log_softmax(logits)[:, :-1]
    return float(weight * -(d * logp).sum())


def delta_ce_grad(logits: np.ndarray, dG: DeltaLabel | np.ndarray, weight: float = 1.0) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    d = dG.dG if isinstance(dG, DeltaLabel) else np.asarray(dG, dtype=np.float64)
    _check(logits, d)
    P = np.exp(_log_softmax(logits))
    grad = P * d.sum(axis=1, keepdims=True)
    grad[:, :-1] -= d
    return weight * grad
