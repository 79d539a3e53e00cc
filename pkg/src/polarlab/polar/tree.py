"""Exact prefix trees of averaged output states.

Every exact computation in the package has the same shape: ``M`` classical
bits ``s_1 .. s_M`` are revealed one at a time (in decoding order), and each
configuration ``s^M`` produces an output state on ``B^N``.  The state at a
prefix ``s^k`` is the conditional average over the remaining bits,

    rho_bar(s^k) = sum_{s_{k+1}^M} P(s^M | s^k) rho(s^M).

From the tree of these states we read off per-step conditional mutual
informations, Bhattacharyya parameters and the SC measurement projectors.

Leaves are configurations indexed MSB-first, so prefix ``p`` of length ``k``
owns leaves ``p * 2**(M-k) .. (p+1) * 2**(M-k) - 1``.
"""

from __future__ import annotations

import numpy as np

from .. import qmath
from ..errors import BudgetExceeded

DEFAULT_BUDGET = 2 * 1024**3  # bytes
_CHUNK_BYTES = 64 * 1024**2


class ProductLeaves:
    """Leaf states ``(x)_k table[symbols[c, k]]`` for product-form outputs."""

    def __init__(self, table, symbols):
        self.table = np.asarray(table)
        self.symbols = np.asarray(symbols, dtype=np.int64)
        self.diagonal = not np.iscomplexobj(self.table)
        self.n_uses = self.symbols.shape[1]
        self.use_dim = self.table.shape[1]
        self.dim = self.use_dim**self.n_uses
        self._ent = qmath.entropies(self.table)
        t = self.table
        S = t.shape[0]
        if self.diagonal:
            self._sf = np.sqrt(np.clip(t[:, None, :], 0, None) * np.clip(t[None, :, :], 0, None)).sum(-1)
        else:
            self._sf = np.array([[qmath.sqrt_fidelities(t[a], t[b]) for b in range(S)] for a in range(S)])

    def __len__(self):
        return self.symbols.shape[0]

    def states(self, idx):
        sym = self.symbols[idx]
        out = self.table[sym[:, 0]]
        for k in range(1, self.n_uses):
            nxt = self.table[sym[:, k]]
            if self.diagonal:
                out = (out[:, :, None] * nxt[:, None, :]).reshape(len(idx), -1)
            else:
                d = out.shape[1] * nxt.shape[1]
                out = np.einsum("aij,akl->aikjl", out, nxt).reshape(len(idx), d, d)
        return out

    def entropies(self, idx):
        return self._ent[self.symbols[idx]].sum(axis=1)

    def sqrt_fidelities(self, idx0, idx1):
        return self._sf[self.symbols[idx0], self.symbols[idx1]].prod(axis=1)


class ExplicitLeaves:
    """Leaf states given as a full array ``(L, D, D)`` or ``(L, D)``."""

    def __init__(self, states):
        self._states = np.asarray(states)
        self.diagonal = not np.iscomplexobj(self._states)
        self.dim = self._states.shape[1]

    def __len__(self):
        return self._states.shape[0]

    def states(self, idx):
        return self._states[idx]

    def entropies(self, idx):
        return qmath.entropies(self._states[idx])

    def sqrt_fidelities(self, idx0, idx1):
        return qmath.sqrt_fidelities(self._states[idx0], self._states[idx1])


def estimate_bytes(n_bits, dim, diagonal):
    per = dim * (8 if diagonal else 16 * dim)
    return (1 << n_bits) * per


def check_product_budget(n_bits, table, n_sys, budget=DEFAULT_BUDGET):
    """Budget check for leaves that are ``n_sys``-fold products of rows of ``table``."""
    table = np.asarray(table)
    check_budget(n_bits, table.shape[-1] ** n_sys, table.ndim == 2, budget)


def check_budget(n_bits, dim, diagonal, budget=DEFAULT_BUDGET):
    need = estimate_bytes(n_bits, dim, diagonal)
    if need > budget:
        raise BudgetExceeded(
            f"exact enumeration needs about {need / 2**20:.4g} MiB "
            f"(2**{n_bits} branches at dimension {dim:.4g}); budget is {budget / 2**20:.0f} MiB"
        )
    return need


class StateTree:
    """Conditional-state tree over ``n_bits`` revealed bits.

    ``weights`` are leaf probabilities (uniform when omitted).  Levels
    ``0 .. n_bits - 1`` are materialised; the leaf level stays implicit in the
    leaf model.
    """

    def __init__(self, leaves, n_bits, weights=None, budget=DEFAULT_BUDGET):
        if len(leaves) != 1 << n_bits:
            raise ValueError(f"{len(leaves)} leaves for {n_bits} bits")
        check_budget(n_bits, leaves.dim, leaves.diagonal, budget)
        self.leaves = leaves
        self.n_bits = n_bits
        self.diagonal = leaves.diagonal
        if weights is None:
            weights = np.full(1 << n_bits, 1.0 / (1 << n_bits))
        w = np.asarray(weights, dtype=float)
        self.weights = [None] * (n_bits + 1)
        self.weights[n_bits] = w
        for k in range(n_bits - 1, -1, -1):
            self.weights[k] = self.weights[k + 1].reshape(-1, 2).sum(axis=1)
        self.states = [None] * n_bits
        self._build()
        self._entropy = {}

    # -- construction -------------------------------------------------------

    def _combine(self, w0, s0, w1, s1, w):
        safe = np.where(w > 0, w, 1.0)
        a = (w0 / safe).reshape((-1,) + (1,) * (s0.ndim - 1))
        b = (w1 / safe).reshape((-1,) + (1,) * (s1.ndim - 1))
        return a * s0 + b * s1

    def _build(self):
        M = self.n_bits
        if M == 0:
            return
        wl = self.weights[M]
        wp = self.weights[M - 1]
        n_par = 1 << (M - 1)
        per = self.leaves.dim * (8 if self.diagonal else 16 * self.leaves.dim)
        chunk = max(1, _CHUNK_BYTES // max(per, 1) // 2)
        parts = []
        for start in range(0, n_par, chunk):
            par = np.arange(start, min(n_par, start + chunk))
            s0 = self.leaves.states(2 * par)
            s1 = self.leaves.states(2 * par + 1)
            parts.append(self._combine(wl[2 * par], s0, wl[2 * par + 1], s1, wp[par]))
        self.states[M - 1] = np.concatenate(parts)
        for k in range(M - 2, -1, -1):
            s = self.states[k + 1]
            w = self.weights[k + 1]
            self.states[k] = self._combine(w[0::2], s[0::2], w[1::2], s[1::2], self.weights[k])

    # -- queries ------------------------------------------------------------

    def node_states(self, level, idx):
        if level == self.n_bits:
            return self.leaves.states(np.asarray(idx))
        return self.states[level][idx]

    def level_entropies(self, level):
        if level not in self._entropy:
            if level == self.n_bits:
                ent = self.leaves.entropies(np.arange(1 << level))
            else:
                ent = qmath.entropies(self.states[level])
            self._entropy[level] = ent
        return self._entropy[level]

    def step_information(self, k):
        """``I(s_k ; B | s^{k-1})`` for step ``k`` (1-based)."""
        hp = self.level_entropies(k - 1)
        hc = self.level_entropies(k)
        val = float((self.weights[k - 1] * hp).sum() - (self.weights[k] * hc).sum())
        return max(val, 0.0)

    def step_sqrt_fidelities(self, k):
        """Per-parent root fidelities between the two children at step ``k``."""
        n_par = 1 << (k - 1)
        c0 = 2 * np.arange(n_par)
        if k == self.n_bits:
            return self.leaves.sqrt_fidelities(c0, c0 + 1)
        s = self.states[k]
        return qmath.sqrt_fidelities(s[0::2], s[1::2])

    def step_bhattacharyya(self, k, quantum=True):
        """``Z(s_k | s^{k-1} B)`` (or without ``B``)."""
        w = self.weights[k]
        coef = 2.0 * np.sqrt(w[0::2] * w[1::2])
        if not quantum:
            return float(coef.sum())
        live = coef > 0
        if not np.any(live):
            return 0.0
        sf = self.step_sqrt_fidelities(k)
        return float((coef[live] * sf[live]).sum())

    def step_projectors(self, k):
        """Projectors ``{sqrt(rho_bar_{p0}) - sqrt(rho_bar_{p1}) >= 0}`` for every parent ``p``.

        Returns boolean masks ``(2**(k-1), D)`` for diagonal trees and
        projector matrices ``(2**(k-1), D, D)`` otherwise.
        """
        n_par = 1 << (k - 1)
        c0 = 2 * np.arange(n_par)
        s0 = self.node_states(k, c0)
        s1 = self.node_states(k, c0 + 1)
        if self.diagonal:
            return np.sqrt(np.clip(s0, 0, None)) - np.sqrt(np.clip(s1, 0, None)) >= -qmath.TOL_EIG
        return qmath.projector_batch(qmath.sqrtm_batch(s0) - qmath.sqrtm_batch(s1))
