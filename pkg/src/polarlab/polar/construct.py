"""Polar code construction by the polar coding rule, and coset encoding."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch
from .split import split_params
from .transform import encode, log2_length


@dataclass(frozen=True, eq=False)
class PolarCode:
    """``(N, K, A, u_{A^c})`` with 1-based information indices.

    ``frozen_values`` has length N; entries at information positions are
    ignored.  ``record`` keeps the construction provenance.
    """

    N: int
    info_set: tuple
    frozen_values: np.ndarray
    record: dict = field(default_factory=dict)

    def __post_init__(self):
        log2_length(self.N)
        A = tuple(sorted(int(i) for i in self.info_set))
        if len(set(A)) != len(A) or any(not 1 <= i <= self.N for i in A):
            raise ValueError(f"information set {A} is not a subset of [1, {self.N}]")
        fv = np.zeros(self.N, dtype=np.uint8) if self.frozen_values is None else np.asarray(self.frozen_values, dtype=np.uint8) & 1
        if fv.shape != (self.N,):
            raise LengthMismatch(f"frozen_values must have length {self.N}")
        object.__setattr__(self, "info_set", A)
        object.__setattr__(self, "frozen_values", fv)

    @property
    def K(self):
        return len(self.info_set)

    @property
    def rate(self):
        return self.K / self.N

    @property
    def info_mask(self):
        m = np.zeros(self.N, dtype=bool)
        m[np.asarray(self.info_set, dtype=int) - 1] = True
        return m

    @property
    def frozen_set(self):
        return tuple(i for i in range(1, self.N + 1) if i not in set(self.info_set))

    def with_frozen(self, values):
        return PolarCode(self.N, self.info_set, values, dict(self.record))

    def scatter(self, info_bits):
        """Full input vector ``u`` (batch-aware) from information bits."""
        info_bits = np.asarray(info_bits, dtype=np.uint8)
        if info_bits.shape[-1] != self.K:
            raise LengthMismatch(f"expected {self.K} information bits, got {info_bits.shape[-1]}")
        u = np.broadcast_to(self.frozen_values, info_bits.shape[:-1] + (self.N,)).copy()
        u[..., self.info_mask] = info_bits
        return u


def coset_encode(code, info_bits):
    """``x = u_A G_N(A) + u_{A^c} G_N(A^c)``."""
    return encode(code.scatter(info_bits))


def select_info_set(sqrt_fid, K):
    """Indices (1-based) of the ``K`` smallest values, ties to the lower index."""
    sqrt_fid = np.asarray(sqrt_fid, dtype=float)
    if not 0 <= K <= sqrt_fid.size:
        raise ValueError(f"K={K} outside [0, {sqrt_fid.size}]")
    order = np.lexsort((np.arange(sqrt_fid.size), sqrt_fid))
    return tuple(sorted(int(i) + 1 for i in order[:K]))


def construct(w, N, K, frozen="zeros", seed=None, method="auto", params=None):
    """Build a polar code for ``w`` by the polar coding rule.

    Parameters
    ----------
    w : CqChannel or ClassicalDMC
        Binary-input channel.
    N, K : int
        Block length (power of two) and number of information bits.
    frozen : {"zeros", "random"}
        Frozen-bit values; ``"random"`` draws them from ``seed``.
    params : SplitParams, optional
        Precomputed split parameters (skips the exact computation).
    """
    if params is None:
        params = split_params(w, N, method=method)
    A = select_info_set(params.sqrt_fid, K)
    if frozen == "zeros":
        fv = np.zeros(N, dtype=np.uint8)
    elif frozen == "random":
        fv = np.random.default_rng(seed).integers(0, 2, N, dtype=np.uint8)
    else:
        raise ValueError(f"unknown frozen policy {frozen!r}")
    record = {
        "rule": "K smallest sqrtF, ties to lower index",
        "method": params.method,
        "info": np.array(params.info),
        "sqrt_fid": np.array(params.sqrt_fid),
        "frozen_policy": frozen,
        "seed": seed,
    }
    return PolarCode(N, A, fv, record)


def check_coding_rule(code):
    """``max_{i in A} sqrtF(i) <= min_{j in A^c} sqrtF(j)``; returns the two sides."""
    sf = np.asarray(code.record["sqrt_fid"])
    mask = code.info_mask
    worst_in = float(sf[mask].max()) if mask.any() else -np.inf
    best_out = float(sf[~mask].min()) if (~mask).any() else np.inf
    return worst_in <= best_out, worst_in, best_out


def construction_csv(code):
    """Per-index CSV ``index,I,sqrtF,in_A`` with 17 significant digits."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["index", "I", "sqrtF", "in_A"])
    info, sf, mask = code.record["info"], code.record["sqrt_fid"], code.info_mask
    for i in range(code.N):
        wr.writerow([i + 1, f"{info[i]:.17g}", f"{sf[i]:.17g}", int(mask[i])])
    return buf.getvalue()
