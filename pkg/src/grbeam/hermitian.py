"""Real coordinates for Hermitian matrices and the trace systems built on them.

A K x K Hermitian matrix has K^2 real coordinates with respect to the
Frobenius-orthonormal basis: the K diagonal units, then for every pair k < j
the symmetric unit (e_k e_j^T + e_j e_k^T)/sqrt(2) followed by the
antisymmetric unit i (e_k e_j^T - e_j e_k^T)/sqrt(2).
"""

import numpy as np

_SQRT2 = np.sqrt(2.0)


def _pairs(K):
    return np.triu_indices(K, k=1)


def coords(B):
    """Return Tr(B E) for every basis element E; B may be batched (..., K, K)."""
    B = np.asarray(B)
    K = B.shape[-1]
    iu, ju = _pairs(K)
    diag = np.real(np.diagonal(B, axis1=-2, axis2=-1))
    upper = B[..., iu, ju]
    lower = B[..., ju, iu]
    sym = np.real(upper + lower) / _SQRT2
    anti = np.real(1j * (lower - upper)) / _SQRT2
    off = np.stack([sym, anti], axis=-1).reshape(B.shape[:-2] + (-1,))
    return np.concatenate([diag, off], axis=-1)


def from_coords(v, K):
    v = np.asarray(v, dtype=float)
    D = np.zeros((K, K), dtype=complex)
    D[np.diag_indices(K)] = v[:K]
    iu, ju = _pairs(K)
    off = v[K:].reshape(-1, 2)
    vals = (off[:, 0] + 1j * off[:, 1]) / _SQRT2
    D[iu, ju] = vals
    D[ju, iu] = vals.conj()
    return D


def factor(X, rel_threshold):
    """Q with X ~ Q Q^H from the eigenpairs with eigenvalue >= rel_threshold * trace."""
    w, U = np.linalg.eigh(X)
    total = float(np.sum(w))
    if total <= 0:
        return np.zeros((X.shape[0], 0), dtype=complex)
    keep = w >= rel_threshold * total
    w, U = w[keep][::-1], U[:, keep][:, ::-1]
    return U * np.sqrt(w)


def trace_system(A, Q_list):
    """Matrix T with T @ concat(coords(Delta_m)) = sum_m Tr(Q_m^H A_lm Q_m Delta_m).

    ``A`` has shape (R, M, N, N); the result has shape (R, sum_m K_m^2).
    """
    cols = []
    for m, Q in enumerate(Q_list):
        if Q.shape[1] == 0:
            continue
        B = Q.conj().T @ A[:, m] @ Q
        cols.append(coords(B))
    if not cols:
        return np.zeros((A.shape[0], 0))
    return np.concatenate(cols, axis=1)


def split_coords(v, Q_list):
    """Split a stacked coordinate vector back into Hermitian blocks."""
    out, pos = [], 0
    for Q in Q_list:
        K = Q.shape[1]
        out.append(from_coords(v[pos:pos + K * K], K))
        pos += K * K
    return out
