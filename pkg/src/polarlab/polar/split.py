"""Exact split channels ``W_N^{(i)}`` and their parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import qmath
from ..channels import ClassicalDMC, CqChannel
from ..errors import DimMismatch
from . import classical
from .transform import all_words, encode, log2_length
from .tree import DEFAULT_BUDGET, ProductLeaves, StateTree, check_product_budget


def as_cq(w):
    """Accept a :class:`CqChannel` or :class:`ClassicalDMC`; require binary input."""
    if isinstance(w, ClassicalDMC):
        w = w.to_cq()
    if not isinstance(w, CqChannel):
        raise TypeError(f"expected a channel, got {type(w).__name__}")
    if not w.is_binary:
        raise DimMismatch(f"polarization needs a binary input alphabet, got {w.input_alphabet_size} letters")
    return w


def output_table(w):
    """Per-letter outputs: real diagonals for commuting channels, matrices otherwise."""
    w = as_cq(w)
    return w.diagonals() if w.is_diagonal() else w.outputs


def polar_tree(w, N, weights=None, order=None, budget=DEFAULT_BUDGET):
    """State tree of ``u -> (x)_k rho_{x_k}`` with ``x = u G_N``.

    ``order`` lists the (0-based) positions of ``u`` in the order they are
    revealed; the default is natural SC order.  ``weights`` are probabilities
    of the revealed-bit configurations (indexed MSB first in reveal order).
    """
    log2_length(N)
    table = output_table(w)
    check_product_budget(N, table, N, budget)
    words = all_words(N)
    if order is not None:
        order = np.asarray(order)
        u = np.empty_like(words)
        u[:, order] = words
        words = u
    leaves = ProductLeaves(table, encode(words))
    return StateTree(leaves, N, weights=weights, budget=budget)


@dataclass(frozen=True, eq=False)
class SplitChannel:
    """Exact ``W_N^{(i)}``: for each ``u_i`` a mixture over past-bit branches.

    ``states[u, p]`` is the averaged output on ``B^N`` given branch ``p`` (the
    past bits ``u_1^{i-1}`` as an MSB-first integer) and ``u_i = u``;
    ``weights[u, p] = P(u_1^{i-1} = p, u_i = u)``.
    """

    index: int
    N: int
    states: np.ndarray
    weights: np.ndarray

    @property
    def n_branches(self):
        return self.states.shape[1]

    @property
    def branches(self):
        return all_words(self.index - 1) if self.index > 1 else np.zeros((1, 0), dtype=np.uint8)

    @property
    def diagonal(self):
        return not np.iscomplexobj(self.states)

    def block_state(self, u):
        """Dense ``sum_p P(p|u) |p><p| (x) rho_bar_{p,u}`` (small cases only)."""
        pu = self.weights[u].sum()
        cond = self.weights[u] / pu
        blocks = self.states[u] if not self.diagonal else np.array([np.diag(s) for s in self.states[u]])
        D = blocks.shape[-1]
        out = np.zeros((self.n_branches * D,) * 2, dtype=complex)
        for p in range(self.n_branches):
            out[p * D:(p + 1) * D, p * D:(p + 1) * D] = cond[p] * blocks[p]
        return out

    def holevo(self):
        """``I(U_i; U_1^{i-1} B^N)``."""
        w = self.weights
        pu = w.sum(axis=1)
        pb = w.sum(axis=0)
        ent = qmath.entropies(self.states)  # (2, P)
        safe = np.where(pb > 0, pb, 1.0)
        avg = (w[0][:, None] * self._flat(0) + w[1][:, None] * self._flat(1)) / safe[:, None]
        ent_avg = qmath.entropies(avg.reshape(self.states.shape[1:]))
        h_joint_b = qmath.shannon_entropy(pb) + float((pb * ent_avg).sum())
        h_cond = 0.0
        for u in (0, 1):
            if pu[u] > 0:
                cond = w[u] / pu[u]
                h_cond += pu[u] * (qmath.shannon_entropy(cond) + float((cond * ent[u]).sum()))
        return max(h_joint_b - h_cond, 0.0)

    def _flat(self, u):
        return self.states[u].reshape(self.n_branches, -1)

    def sqrt_fidelity(self):
        """Root fidelity of the two block states; for uniform weights equals ``Z``."""
        pu = self.weights.sum(axis=1)
        c0 = self.weights[0] / pu[0]
        c1 = self.weights[1] / pu[1]
        sf = qmath.sqrt_fidelities(self.states[0], self.states[1])
        return float((np.sqrt(c0 * c1) * sf).sum())


def split_channel(w, N, i, budget=DEFAULT_BUDGET):
    """Exact ``W_N^{(i)}`` under uniform inputs."""
    if not 1 <= i <= N:
        raise ValueError(f"index {i} outside [1, {N}]")
    tree = polar_tree(w, N, budget=budget)
    n_par = 1 << (i - 1)
    par = np.arange(n_par)
    states = np.stack([tree.node_states(i, 2 * par), tree.node_states(i, 2 * par + 1)])
    wl = tree.weights[i]
    weights = np.stack([wl[0::2], wl[1::2]])
    return SplitChannel(i, N, states, weights)


@dataclass(frozen=True, eq=False)
class SplitParams:
    """Per-index ``I(W_N^{(i)})`` and ``sqrtF(W_N^{(i)})`` (index ``i`` at position ``i-1``)."""

    N: int
    info: np.ndarray
    sqrt_fid: np.ndarray
    method: str

    def rows(self):
        return [(i + 1, float(self.info[i]), float(self.sqrt_fid[i])) for i in range(self.N)]


def split_params(w, N, method="auto", budget=DEFAULT_BUDGET):
    """Exact per-index parameters of all split channels.

    ``method`` is ``"classical"`` (likelihood-ratio recursion, diagonal
    channels only), ``"enumerate"`` (state tree, any channel) or ``"auto"``
    (classical when every output is diagonal).
    """
    w = as_cq(w)
    log2_length(N)
    if method not in ("auto", "classical", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    diag = w.is_diagonal()
    if method == "classical" and not diag:
        raise DimMismatch("the classical recursion needs commuting (diagonal) outputs")
    if method == "classical" or (method == "auto" and diag):
        info, z = classical.split_params(w.diagonals(), N)
        return SplitParams(N, info, z, "classical")
    tree = polar_tree(w, N, budget=budget)
    info = np.array([tree.step_information(k) for k in range(1, N + 1)])
    z = np.array([tree.step_bhattacharyya(k) for k in range(1, N + 1)])
    return SplitParams(N, info, z, "enumerate")


def conservation_check(w, N, method="auto", budget=DEFAULT_BUDGET):
    """``sum_i I(W_N^{(i)})`` next to ``N I(W)``."""
    w = as_cq(w)
    params = split_params(w, N, method=method, budget=budget)
    return {"sum_I": float(params.info.sum()), "N_times_IW": N * w.holevo()}
