"""Monotone chain rules for binary-input cq MACs.

A path ``b`` over the alphabet ``{0, .., k-1}`` with every symbol appearing
``N`` times fixes the order in which the transformed inputs are revealed: the
``t``-th symbol ``s`` reveals the next bit of sender ``s``'s word
``U_s = X_s G_N``.  Rates are the sums of the per-step conditional mutual
informations that belong to each sender, divided by ``N``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import factorial

import numpy as np

from .channels import CqMac
from .decoder import SequentialDecoder
from .errors import BudgetExceeded, DimMismatch, InvariantViolation, NonMonotonePath
from .polar.transform import all_words, encode, log2_length
from .polar.tree import DEFAULT_BUDGET, ProductLeaves, StateTree, check_product_budget

TOL_CHAIN = 1e-6
MAX_PATH_LENGTH = 20


@dataclass(frozen=True)
class DecodePath:
    """Interleaving of ``k`` senders' bit orders, e.g. ``"0110"``."""

    symbols: tuple
    n_senders: int = 2

    def __post_init__(self):
        syms = tuple(int(c) for c in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not syms:
            raise NonMonotonePath("empty path")
        if any(not 0 <= s < self.n_senders for s in syms):
            raise NonMonotonePath(f"path symbols must lie in 0..{self.n_senders - 1}")
        counts = np.bincount(syms, minlength=self.n_senders)
        if np.any(counts != counts[0]):
            raise NonMonotonePath(f"every sender needs the same number of steps, got counts {counts.tolist()}")

    @classmethod
    def parse(cls, text, n_senders=None):
        text = str(text).strip()
        if not text.isdigit():
            raise NonMonotonePath(f"path literal {text!r} must be a digit string")
        k = n_senders if n_senders is not None else max(2, max(int(c) for c in text) + 1)
        return cls(tuple(int(c) for c in text), k)

    @property
    def N(self):
        return len(self.symbols) // self.n_senders

    def __str__(self):
        return "".join(str(s) for s in self.symbols)

    def __len__(self):
        return len(self.symbols)

    def steps(self):
        """``(sender, index)`` per step with 1-based per-sender counters."""
        seen = [0] * self.n_senders
        out = []
        for s in self.symbols:
            seen[s] += 1
            out.append((s, seen[s]))
        return out

    def positions(self, sender):
        """Reveal steps (0-based) that carry the given sender's bits, in bit order."""
        return [t for t, s in enumerate(self.symbols) if s == sender]


def as_path(path, n_senders=2):
    return path if isinstance(path, DecodePath) else DecodePath.parse(path, n_senders)


def _check_mac(mac, N, path):
    if not isinstance(mac, CqMac):
        raise TypeError("expected a CqMac")
    if any(a != 2 for a in mac.alphabets):
        raise DimMismatch("chain rules are implemented for binary senders")
    if path.n_senders != mac.n_senders:
        raise DimMismatch(f"path has {path.n_senders} senders, MAC has {mac.n_senders}")
    if path.N != N:
        raise NonMonotonePath(f"path of length {len(path)} does not fit N={N}")
    log2_length(N)


def mac_table(mac):
    flat = mac.outputs.reshape((-1,) + mac.outputs.shape[-2:])
    if mac.is_diagonal():
        return np.real(np.einsum("kii->ki", flat)).copy()
    return flat


def mac_tree(mac, path, N, budget=DEFAULT_BUDGET):
    """State tree whose reveal order follows ``path``."""
    path = as_path(path, mac.n_senders)
    _check_mac(mac, N, path)
    M = len(path)
    check_product_budget(M, mac_table(mac), N, budget)
    words = all_words(M)
    k = mac.n_senders
    symbols = np.zeros((1 << M, N), dtype=np.int64)
    for s in range(k):
        x = encode(words[:, path.positions(s)]).astype(np.int64)
        symbols += x << (k - 1 - s)
    return StateTree(ProductLeaves(mac_table(mac), symbols), M, budget=budget)


@dataclass(frozen=True, eq=False)
class RatePoint:
    """Per-sender rates of one chain-rule path."""

    path: str
    rates: tuple
    step_info: np.ndarray
    total: float

    @property
    def sum_rate(self):
        return float(sum(self.rates))


def chain_rule_rates(mac, path, N, budget=DEFAULT_BUDGET, tree=None):
    """Exact rate tuple of a monotone chain rule under uniform inputs.

    Raises :class:`InvariantViolation` if the per-step terms do not add up
    to ``N I(X_1..X_k; B)`` within ``1e-6``.
    """
    path = as_path(path, mac.n_senders)
    tree = tree or mac_tree(mac, path, N, budget)
    steps = np.array([tree.step_information(t) for t in range(1, len(path) + 1)])
    total = mac.ensemble().mutual_information(tuple(range(mac.n_senders)))
    gap = abs(steps.sum() - N * total)
    if gap > TOL_CHAIN:
        raise InvariantViolation(f"chain rule off by {gap:.3e}", bound="sum_k I(S_k;B|S^k-1) = N I(X;B)")
    sym = np.asarray(path.symbols)
    rates = tuple(float(steps[sym == s].sum() / N) for s in range(mac.n_senders))
    return RatePoint(str(path), rates, steps, float(total))


def mac_split_params(mac, path, N, budget=DEFAULT_BUDGET):
    """Per-sender ``(I, sqrtF)`` of the split channels along ``path``.

    Entry ``[s][j-1]`` belongs to sender ``s``'s ``j``-th bit, conditioned on
    every bit revealed before it on the path.
    """
    path = as_path(path, mac.n_senders)
    tree = mac_tree(mac, path, N, budget)
    info, sf = [], []
    for s in range(mac.n_senders):
        pos = path.positions(s)
        info.append(np.array([tree.step_information(t + 1) for t in pos]))
        sf.append(np.array([tree.step_bhattacharyya(t + 1) for t in pos]))
    return info, sf


def path_distance(p1, p2, mac, N, budget=DEFAULT_BUDGET):
    """``|R_u - R~_u|``, after checking it equals ``|R_v - R~_v|``."""
    r1 = chain_rule_rates(mac, p1, N, budget)
    r2 = chain_rule_rates(mac, p2, N, budget)
    d = [abs(a - b) for a, b in zip(r1.rates, r2.rates)]
    if mac.n_senders == 2 and abs(d[0] - d[1]) > TOL_CHAIN:
        raise InvariantViolation(f"rate differences disagree: {d[0]!r} vs {d[1]!r}")
    return float(d[0])


def nu_class_paths(N):
    """``{0^i 1^N 0^(N-i) : 0 <= i <= N}``; consecutive members are neighbors."""
    out = [DecodePath(tuple([0] * i + [1] * N + [0] * (N - i))) for i in range(N + 1)]
    for a, b in zip(out, out[1:]):
        if not are_neighbors(a, b):
            raise InvariantViolation(f"{a} and {b} are not neighbors")
    return out


def are_neighbors(p1, p2):
    """``p2`` is ``p1`` with one transposition ``b_i <-> b_j`` (i < j, b_i != b_j)
    whose strictly interior symbols are all equal."""
    a, b = as_path(p1).symbols, as_path(p2).symbols
    if len(a) != len(b):
        return False
    diff = [t for t in range(len(a)) if a[t] != b[t]]
    if len(diff) != 2:
        return False
    i, j = diff
    if not (a[i] == b[j] and a[j] == b[i] and a[i] != a[j]):
        return False
    return len(set(a[i + 1:j])) <= 1


def neighbors(path):
    """All neighbors of a path."""
    path = as_path(path)
    a = list(path.symbols)
    out = []
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            if a[i] != a[j] and len(set(a[i + 1:j])) <= 1:
                b = a.copy()
                b[i], b[j] = b[j], b[i]
                out.append(DecodePath(tuple(b), path.n_senders))
    return out


def scale_path(path, k):
    """Repeat every symbol ``k`` times."""
    path = as_path(path)
    if k < 1:
        raise ValueError("scale factor must be positive")
    return DecodePath(tuple(s for s in path.symbols for _ in range(k)), path.n_senders)


def scaling_rate_invariance(mac, path, N, budget=DEFAULT_BUDGET):
    """Rates of ``b`` at length ``N`` and of ``2b`` at length ``2N``; checks they agree."""
    path = as_path(path, mac.n_senders)
    r1 = chain_rule_rates(mac, path, N, budget)
    r2 = chain_rule_rates(mac, scale_path(path, 2), 2 * N, budget)
    gap = max(abs(a - b) for a, b in zip(r1.rates, r2.rates))
    if gap > TOL_CHAIN:
        raise InvariantViolation(f"scaled path changes the rates by {gap:.3e}")
    return {"rates_b": r1.rates, "rates_2b": r2.rates}


def kuser_paths(k, N):
    """Iterate all monotone interleavings of ``k`` senders with ``N`` bits each."""
    if k < 2:
        raise ValueError("need at least two senders")
    if k * N > MAX_PATH_LENGTH:
        raise BudgetExceeded(f"{k}*{N} path symbols exceed the enumeration limit {MAX_PATH_LENGTH}")
    from sympy.utilities.iterables import multiset_permutations

    for perm in multiset_permutations([s for s in range(k) for _ in range(N)]):
        yield DecodePath(tuple(perm), k)


def count_kuser_paths(k, N):
    return factorial(k * N) // factorial(N) ** k


def mac_sc_decode_exact(codes, path, mac, inputs, budget=DEFAULT_BUDGET):
    """Exact joint SC success probability for one input tuple.

    ``codes[s]`` is sender ``s``'s :class:`PolarCode` (frozen positions are
    not measured); ``inputs[s]`` its transformed word ``u_s``.  Returns the
    genie-aided product along the true path and the success probability of
    the sequential decoder in which measured outcomes steer later steps.
    """
    path = as_path(path, mac.n_senders)
    tree = mac_tree(mac, path, len(path) // mac.n_senders, budget)
    dec = SequentialDecoder(tree)
    measured = np.zeros(len(path), dtype=bool)
    bits = np.zeros(len(path), dtype=np.uint8)
    for s in range(mac.n_senders):
        pos = path.positions(s)
        u = np.asarray(inputs[s], dtype=np.uint8)
        if u.shape != (len(pos),):
            raise DimMismatch(f"sender {s} input has length {u.shape}, expected {len(pos)}")
        measured[pos] = codes[s].info_mask
        bits[pos] = u
    p_genie, steps, _ = dec.genie_path(measured, bits)
    outcomes = dec.outcome_tree_path(measured, bits)
    target = int(sum(int(b) << (len(bits) - 1 - t) for t, b in enumerate(bits)))
    return {"p_success": outcomes.get(target, 0.0), "p_success_genie": p_genie, "step_probs": steps}


def mac_corner_points(mac):
    """``(I(X;B), I(Y;B|X))`` and ``(I(X;B|Y), I(Y;B))`` of a two-sender MAC."""
    ens = mac.ensemble()
    return (
        (ens.mutual_information((0,)), ens.mutual_information((1,), (0,))),
        (ens.mutual_information((0,), (1,)), ens.mutual_information((1,))),
    )


def rate_table_csv(points):
    """CSV ``path,R_x,R_y,sum,I_XY_B`` for two-sender rate points."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["path", "R_x", "R_y", "sum", "I_XY_B"])
    for p in points:
        wr.writerow([p.path, f"{p.rates[0]:.17g}", f"{p.rates[1]:.17g}", f"{p.sum_rate:.17g}", f"{p.total:.17g}"])
    return buf.getvalue()


__all__ = [
    "DecodePath",
    "RatePoint",
    "chain_rule_rates",
    "path_distance",
    "nu_class_paths",
    "scale_path",
    "scaling_rate_invariance",
    "mac_sc_decode_exact",
    "kuser_paths",
]
