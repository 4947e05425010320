"""Vectorized projective steps over a batch of replicas.

Each replica carries a simplex row vector ``X`` (shape ``(B, p)``); one step
right-multiplies by that replica's matrix and returns the cocycle
increment ``ln |X M|``.
"""

from __future__ import annotations

import numpy as np

from bprelab.errors import DegenerateMatrix


def act_right_batch(x: np.ndarray, mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(X . M, ln |X M|)`` row by row; ``mats`` has shape ``(B, p, p)``."""
    y = np.einsum("bi,bij->bj", x, mats)
    s = y.sum(axis=1)
    if np.any(s <= 0):
        raise DegenerateMatrix("xM vanishes for some replica", replicas=int(np.sum(s <= 0)))
    return y / s[:, None], np.log(s)


def product_log_norms_batch(mats_seq: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    """``ln |M_{0,n}|`` for every replica of an ``(B, n)`` atom-index block."""
    replicas, n = atoms.shape
    p = mats_seq.shape[1]
    unit = np.broadcast_to(np.eye(p), (replicas, p, p)).copy()
    log_norm = np.zeros(replicas)
    for k in range(n):
        unit = unit @ mats_seq[atoms[:, k]]
        s = unit.sum(axis=(1, 2))
        if np.any(s <= 0):
            raise DegenerateMatrix("a product vanishes", step=k)
        unit /= s[:, None, None]
        log_norm += np.log(s)
    if n == 0:
        log_norm += np.log(p)
    return log_norm
