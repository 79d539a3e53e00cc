"""Exact split-channel recursion for binary-input classical channels.

A binary-input channel is kept as two aligned likelihood vectors
``a[y] = W(y|0)`` and ``b[y] = W(y|1)``.  One polarization step maps a
channel to its minus and plus versions,

    minus:  (y1, y2)      -> ( (a1 a2 + b1 b2) / 2,  (b1 a2 + a1 b2) / 2 )
    plus:   (y1, y2, u1)  -> u1 = 0: (a1 a2 / 2, b1 b2 / 2)
                             u1 = 1: (b1 a2 / 2, a1 b2 / 2)

and ``W_{2N}^{(2i-1)} = (W_N^{(i)})^-``, ``W_{2N}^{(2i)} = (W_N^{(i)})^+``.
Outputs with the same likelihood ratio are merged after every step; the
ratio is a sufficient statistic, so mutual information and the
Bhattacharyya parameter are unchanged by the merge.
"""

from __future__ import annotations

import numpy as np

from ..errors import BudgetExceeded
from .transform import log2_length

MAX_PAIRS = 20_000_000
_KEY_DIGITS = 13


def merge_outputs(a, b):
    """Merge output letters with equal likelihood ratio; drop zero-mass letters."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = a + b
    live = m > 0
    a, b, m = a[live], b[live], m[live]
    key = np.round(a / m, _KEY_DIGITS)
    uniq, inv = np.unique(key, return_inverse=True)
    return np.bincount(inv, weights=a, minlength=uniq.size), np.bincount(inv, weights=b, minlength=uniq.size)


def minus(a, b):
    a1, a2 = a[:, None], a[None, :]
    b1, b2 = b[:, None], b[None, :]
    return merge_outputs((0.5 * (a1 * a2 + b1 * b2)).ravel(), (0.5 * (b1 * a2 + a1 * b2)).ravel())


def plus(a, b):
    a1, a2 = a[:, None], a[None, :]
    b1, b2 = b[:, None], b[None, :]
    na = np.concatenate([(0.5 * a1 * a2).ravel(), (0.5 * b1 * a2).ravel()])
    nb = np.concatenate([(0.5 * b1 * b2).ravel(), (0.5 * a1 * b2).ravel()])
    return merge_outputs(na, nb)


def mutual_information(a, b):
    """``I(U; Y)`` in bits for a uniform binary input."""
    m = 0.5 * (a + b)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ta = np.where(a > 0, a * np.log2(np.where(a > 0, a, 1.0) / np.where(m > 0, m, 1.0)), 0.0)
        tb = np.where(b > 0, b * np.log2(np.where(b > 0, b, 1.0) / np.where(m > 0, m, 1.0)), 0.0)
    return float(max(0.5 * (ta.sum() + tb.sum()), 0.0))


def bhattacharyya(a, b):
    return float(np.sqrt(a * b).sum())


def split_channels(transition, N, max_pairs=MAX_PAIRS):
    """All ``N`` split channels as merged ``(a, b)`` pairs, in index order."""
    n = log2_length(N)
    w = np.asarray(transition, dtype=float)
    chans = [merge_outputs(w[0], w[1])]
    for _ in range(n):
        work = sum(a.size**2 for a, _ in chans) * 2
        if work > max_pairs:
            raise BudgetExceeded(f"classical recursion needs {work} output pairs (limit {max_pairs})")
        nxt = []
        for a, b in chans:
            nxt.append(minus(a, b))
            nxt.append(plus(a, b))
        chans = nxt
    return chans


def split_params(transition, N, max_pairs=MAX_PAIRS):
    """Per-index mutual information and Bhattacharyya parameter."""
    chans = split_channels(transition, N, max_pairs)
    info = np.array([mutual_information(a, b) for a, b in chans])
    z = np.array([bhattacharyya(a, b) for a, b in chans])
    return info, z


def bec_erasure_probabilities(eps, N):
    """Erasure probabilities of the BEC split channels via ``e- = 2e - e^2``, ``e+ = e^2``."""
    n = log2_length(N)
    e = np.array([float(eps)])
    for _ in range(n):
        e = np.stack([2 * e - e * e, e * e], axis=1).ravel()
    return e
