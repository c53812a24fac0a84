"""Full-rate real-valued orthogonal space-time block codes.

A code of dimension K is described by K real coefficient matrices C_k so that
the code block for a symbol vector u is X(u) = sum_k u_k C_k.  For real u the
block is orthogonal, X(u)^T X(u) = |u|^2 I.  Real codes reach full rate only for
K in {1, 2, 4, 8}.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_DIMENSIONS = (1, 2, 4, 8)

# Entry (r, c) holds +-(k+1): the block entry is sign * u_k.
_TABLES = {
    1: [[1]],
    2: [[1, 2],
        [-2, 1]],
    4: [[1, 2, 3, 4],
        [-2, 1, -4, 3],
        [-3, 4, 1, -2],
        [-4, -3, 2, 1]],
    8: [[1, 2, 3, 4, 5, 6, 7, 8],
        [-2, 1, 4, -3, 6, -5, -8, 7],
        [-3, -4, 1, 2, 7, 8, -5, -6],
        [-4, 3, -2, 1, 8, -7, 6, -5],
        [-5, -6, -7, -8, 1, 2, 3, 4],
        [-6, 5, -8, 7, -2, 1, -4, 3],
        [-7, 8, 5, -6, -3, 4, 1, -2],
        [-8, -7, 6, 5, -4, -3, 2, 1]],
}


@dataclass(frozen=True, eq=False)
class OstbcCode:
    """Coefficient matrices of a real OSTBC; ``coeffs`` has shape (K, K, K)."""

    K: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    def encode(self, u):
        return encode(self, u)

    def equalize(self, g, y_tilde):
        return equalize(self, g, y_tilde)


@lru_cache(maxsize=None)
def build_code(K: int) -> OstbcCode:
    if K not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"unsupported code dimension: {K}")
    table = np.array(_TABLES[K])
    coeffs = np.zeros((K, K, K))
    for k in range(K):
        coeffs[k] = np.where(np.abs(table) == k + 1, np.sign(table), 0)
    return OstbcCode(K, coeffs)


def encode(code: OstbcCode, u) -> np.ndarray:
    """Return X(u).

    ``u`` may carry leading batch dimensions, shape (..., K); the result then
    has shape (..., K, K).  Complex symbols are allowed.
    """
    u = np.asarray(u)
    if u.shape[-1] != code.K:
        raise ValueError(f"expected {code.K} symbols per block, got {u.shape[-1]}")
    return np.tensordot(u, code.coeffs, axes=([-1], [0]))


def equalize(code: OstbcCode, g, y_tilde) -> np.ndarray:
    """Symbol estimate X(g)^H y_tilde / |g|^2 for a real virtual channel ``g``.

    ``y_tilde`` is the sign-adjusted receive vector and may be batched as
    (..., K).
    """
    g = np.asarray(g)
    if np.iscomplexobj(g):
        if np.max(np.abs(g.imag), initial=0.0) > 1e-9 * max(np.linalg.norm(g), 1e-300):
            raise ValueError("virtual channel must be real")
        g = g.real
    norm2 = float(g @ g)
    if norm2 == 0.0:
        raise ValueError("zero virtual channel")
    Xg = encode(code, g)
    return np.asarray(y_tilde) @ Xg / norm2


def receive_sign_pattern(K: int) -> np.ndarray:
    """Diagonal of the sign flip mapping y to y_tilde: [1, -1, ..., -1]."""
    d = -np.ones(K)
    d[0] = 1.0
    return d
