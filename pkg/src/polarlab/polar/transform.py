"""The polar transform ``x = u G_N`` with ``G_N = B_N F^{(x)n}`` over GF(2)."""

from __future__ import annotations

import numpy as np

from ..errors import BadLength, BudgetExceeded

MAX_ENUM_BITS = 26


def log2_length(N):
    """Return ``n`` with ``N == 2**n`` or raise :class:`BadLength`."""
    N = int(N)
    if N < 1 or N & (N - 1):
        raise BadLength(f"block length {N} is not a power of two")
    return N.bit_length() - 1


def bit_reversal(n):
    """Permutation ``perm[i] = reverse of the n-bit binary expansion of i``."""
    idx = np.arange(1 << n)
    rev = np.zeros_like(idx)
    for b in range(n):
        rev |= ((idx >> b) & 1) << (n - 1 - b)
    return rev


def encode(u):
    """Polar-encode the last axis of ``u`` (any leading batch shape).

    Butterfly for ``F^{(x)n}`` followed by the bit-reversal permutation;
    O(N log N) per word.  The transform is its own inverse.
    """
    u = np.asarray(u)
    if u.ndim == 0:
        raise BadLength("cannot encode a scalar")
    N = u.shape[-1]
    n = log2_length(N)
    x = (u.astype(np.uint8) & 1).copy()
    h = N // 2
    while h >= 1:
        v = x.reshape(x.shape[:-1] + (N // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x[..., bit_reversal(n)]


def all_words(N):
    """All ``2**N`` binary words of length N, row ``c`` = binary expansion of c (MSB first)."""
    if N > MAX_ENUM_BITS:
        raise BudgetExceeded(f"enumerating 2**{N} words exceeds the limit of 2**{MAX_ENUM_BITS}")
    c = np.arange(1 << N)
    return ((c[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1).astype(np.uint8)


def words_to_index(words):
    words = np.asarray(words, dtype=np.int64)
    N = words.shape[-1]
    return (words << (N - 1 - np.arange(N))).sum(axis=-1)


def generator_matrix(N):
    """Explicit ``G_N`` as an N x N 0/1 matrix (rows = images of unit vectors)."""
    return encode(np.eye(N, dtype=np.uint8))
