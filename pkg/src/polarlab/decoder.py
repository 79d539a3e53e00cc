"""Successive-cancellation decoding and block-error analysis.

Classical SC runs in the log-likelihood-ratio domain with the exact
box-plus rule and is vectorised over a batch of received words.  Quantum SC
is simulated exactly: at step ``i`` with past bits ``p`` the decoder measures
``{Pi_0 = {sqrt(rho_bar_{p0}) - sqrt(rho_bar_{p1}) >= 0}, Pi_1 = I - Pi_0}``,
where ``rho_bar`` are the averaged split-channel states, and frozen steps use
the identity.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import qmath
from .channels import ClassicalDMC
from .errors import BadLength, BudgetExceeded, LengthMismatch
from .polar.construct import PolarCode
from .polar.split import as_cq, polar_tree
from .polar.transform import all_words, bit_reversal, encode, log2_length, words_to_index
from .polar.tree import DEFAULT_BUDGET

TIE_TOL = 1e-9
MC_BLOCK = 4096


# ---------------------------------------------------------------------------
# classical SC


def channel_llrs(transition, received):
    """``log W(y|0) - log W(y|1)`` per received symbol (``+-inf`` where one side is 0)."""
    w = np.asarray(transition, dtype=float)
    y = np.asarray(received, dtype=int)
    with np.errstate(divide="ignore"):
        return np.log(w[0, y]) - np.log(w[1, y])


def _f(a, b):
    """Exact check-node rule ``2 atanh(tanh(a/2) tanh(b/2))`` in a stable form."""
    with np.errstate(invalid="ignore", over="ignore"):
        m = np.minimum(np.abs(a), np.abs(b))
        corr = np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))
    corr = np.where(np.isfinite(a) & np.isfinite(b), corr, 0.0)
    return np.sign(a) * np.sign(b) * m + corr


def _g(a, b, u):
    with np.errstate(invalid="ignore"):
        out = b + (1 - 2 * u.astype(float)) * a
    # +inf meeting -inf is a contradiction; treat it as no information
    return np.where(np.isnan(out), 0.0, out)


def _sc(llr, frozen_mask, frozen_vals):
    """Decode ``u`` from LLRs on ``u F^{(x)n}``; returns (u_hat, u_hat F^{(x)n})."""
    n = llr.shape[-1]
    if n == 1:
        if frozen_mask[0]:
            u = np.full(llr.shape, frozen_vals[0], dtype=np.uint8)
        else:
            u = (llr < -TIE_TOL).astype(np.uint8)
        return u, u.copy()
    h = n // 2
    l1, l2 = llr[..., :h], llr[..., h:]
    ua, xa = _sc(_f(l1, l2), frozen_mask[:h], frozen_vals[:h])
    ub, xb = _sc(_g(l1, l2, xa), frozen_mask[h:], frozen_vals[h:])
    return np.concatenate([ua, ub], axis=-1), np.concatenate([xa ^ xb, xb], axis=-1)


def _transition(dmc):
    if isinstance(dmc, np.ndarray):
        return dmc
    if isinstance(dmc, ClassicalDMC):
        return dmc.transition
    cq = as_cq(dmc)
    if not cq.is_diagonal():
        raise TypeError("classical SC needs a classical (diagonal) channel")
    return cq.diagonals()


def classical_sc_decode(code, dmc, received):
    """SC estimate of ``u`` for received output symbols (last axis length N)."""
    received = np.asarray(received, dtype=int)
    if received.shape[-1] != code.N:
        raise BadLength(f"received word has length {received.shape[-1]}, code length is {code.N}")
    rev = bit_reversal(log2_length(code.N))
    llr = channel_llrs(_transition(dmc), received)[..., rev]
    u, _ = _sc(llr.reshape(-1, code.N), ~code.info_mask, code.frozen_values)
    return u.reshape(received.shape).astype(np.uint8)


def _output_words(n_out, N):
    idx = np.arange(n_out**N)
    return (idx[:, None] // n_out ** np.arange(N - 1, -1, -1)[None, :]) % n_out


def classical_sc_success(code, dmc, u=None):
    """Exact SC success probability by enumerating every output word.

    With ``u`` given, the success for that input (frozen bits taken from
    ``u``); otherwise the uniform average over all ``2**N`` inputs.
    """
    W = _transition(dmc)
    N = code.N
    ys = _output_words(W.shape[1], N)
    if ys.shape[0] * (1 << N) > 1 << 24:
        raise BudgetExceeded("output enumeration too large for exhaustive classical SC")
    inputs = all_words(N) if u is None else np.asarray(u, dtype=np.uint8)[None, :]
    total = 0.0
    for uu in inputs:
        x = encode(uu)
        py = np.prod(W[x[None, :], ys], axis=1)
        live = py > 0
        dec = classical_sc_decode(code.with_frozen(uu), W, ys[live])
        total += float(py[live][np.all(dec == uu, axis=1)].sum())
    return total / len(inputs)


# ---------------------------------------------------------------------------
# quantum SC


class SequentialDecoder:
    """Sequential binary measurements driven by a :class:`StateTree`.

    Bits are measured in the tree's reveal order.  At step ``k`` after past
    bits ``prefix`` the outcome-0 projector is built from the two averaged
    child states; steps flagged as known (frozen) use the identity.
    """

    def __init__(self, tree):
        self.tree = tree
        self.n_bits = tree.n_bits
        self.diagonal = tree.diagonal
        self._proj = {}

    def projector(self, k, prefix):
        """``Pi_0`` at step ``k`` (1-based) after past bits ``prefix`` (MSB-first int)."""
        key = (k, prefix)
        if key not in self._proj:
            s = self.tree.node_states(k, np.array([2 * prefix, 2 * prefix + 1]))
            if self.diagonal:
                p = np.sqrt(np.clip(s[0], 0, None)) - np.sqrt(np.clip(s[1], 0, None)) >= -qmath.TOL_EIG
            else:
                p = qmath.projector_batch((qmath.sqrtm_batch(s[:1]) - qmath.sqrtm_batch(s[1:]))[0])
            self._proj[key] = p
        return self._proj[key]

    def _apply(self, proj, bit, rho):
        if self.diagonal:
            return rho * (proj if bit == 0 else ~proj)
        P = proj if bit == 0 else np.eye(proj.shape[0]) - proj
        return P @ rho @ P

    def _trace(self, rho):
        return float(rho.sum()) if self.diagonal else float(np.trace(rho).real)

    def leaf_state(self, bits):
        return self.tree.leaves.states(np.array([int(words_to_index(bits))]))[0]

    def genie_path(self, measured, bits):
        """Sequential product along the true path and the per-step error terms.

        ``measured[k]`` says whether step ``k+1`` is measured; ``bits`` are the
        true values in reveal order.
        """
        bits = np.asarray(bits, dtype=np.uint8)
        rho0 = self.leaf_state(bits)
        rho = rho0
        step_probs, err_terms = [], []
        prefix = 0
        before = 1.0
        for k in range(1, self.n_bits + 1):
            bit = int(bits[k - 1])
            if measured[k - 1]:
                proj = self.projector(k, prefix)
                rho = self._apply(proj, bit, rho)
                after = self._trace(rho)
                step_probs.append(after / before if before > 0 else 0.0)
                before = after
                err_terms.append(1.0 - self._trace(self._apply(proj, bit, rho0)))
            else:
                step_probs.append(1.0)
                err_terms.append(0.0)
            prefix = 2 * prefix + bit
        return self._trace(rho), step_probs, err_terms

    def outcome_tree_path(self, measured, bits):
        """Probability of every outcome string when earlier outcomes steer later measurements."""
        bits = np.asarray(bits, dtype=np.uint8)
        paths = [(0, self.leaf_state(bits))]
        for k in range(1, self.n_bits + 1):
            nxt = []
            if not measured[k - 1]:
                b = int(bits[k - 1])
                for prefix, rho in paths:
                    nxt.append((2 * prefix + b, rho))
            else:
                for prefix, rho in paths:
                    proj = self.projector(k, prefix)
                    for b in (0, 1):
                        r = self._apply(proj, b, rho)
                        if self._trace(r) > 0.0:
                            nxt.append((2 * prefix + b, r))
            paths = nxt
        return {prefix: self._trace(rho) for prefix, rho in paths}


class QuantumSCDecoder(SequentialDecoder):
    """Exact SC measurement family for a binary cq channel at block length N.

    Projectors depend only on the channel and the (true or measured) past
    bits, never on which positions are frozen.
    """

    def __init__(self, w, N, budget=DEFAULT_BUDGET):
        self.w = as_cq(w)
        self.N = N
        super().__init__(polar_tree(self.w, N, budget=budget))

    def genie(self, code, u):
        return self.genie_path(code.info_mask, u)

    def outcome_tree(self, code, u):
        return self.outcome_tree_path(code.info_mask, u)


@dataclass(frozen=True, eq=False)
class DecodingTranscript:
    """Exact decoding record for one input word."""

    u: np.ndarray
    p_success_genie: float
    p_success: float
    outcomes: dict
    step_probs: list
    err_terms: list = field(default_factory=list)

    @property
    def most_likely(self):
        best = max(self.outcomes, key=self.outcomes.get)
        return all_words(len(self.u))[best]


def quantum_sc_decode_exact(code, w, u, decoder=None):
    """Exact genie-aided and sequential (non-genie) success probabilities for input ``u``."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape != (code.N,):
        raise LengthMismatch(f"input word must have length {code.N}")
    dec = decoder or QuantumSCDecoder(w, code.N)
    p_genie, steps, errs = dec.genie(code, u)
    outcomes = dec.outcome_tree(code, u)
    p_seq = outcomes.get(int(words_to_index(u)), 0.0)
    return DecodingTranscript(u, p_genie, p_seq, outcomes, steps, errs)


@dataclass(frozen=True, eq=False)
class BlockErrorReport:
    N: int
    K: int
    P_e_exact: float
    P_e_genie: float
    sen_bound: float
    gao_bound: float
    fidelity_bound: float
    per_index_error: np.ndarray
    sqrt_fid: np.ndarray


def split_error_probabilities(dec):
    """``P_e(W^{(i)})``: error of the step-``i`` measurement averaged over all branches."""
    N = dec.N
    out = np.zeros(N)
    tree = dec.tree
    for k in range(1, N + 1):
        total = 0.0
        for p in range(1 << (k - 1)):
            s = tree.node_states(k, np.array([2 * p, 2 * p + 1]))
            proj = dec.projector(k, p)
            total += 0.5 * (dec._trace(dec._apply(proj, 1, s[0])) + dec._trace(dec._apply(proj, 0, s[1])))
        out[k - 1] = total / (1 << (k - 1))
    return out


def block_error(code, w, decoder=None):
    """Exact block error and the union-type bounds for a cq channel.

    ``P_e`` is the uniform average over all ``2**N`` inputs (frozen values
    follow the input).  The Gao bound is ``4 sum_i tr{(I - Pi_i) rho}``,
    the Sen bound ``2 sqrt(sum_i tr{(I - Pi_i) rho})`` (each averaged over
    inputs), and the fidelity bound ``2 sum_{i in A} sqrtF(W^{(i)})``.
    """
    dec = decoder or QuantumSCDecoder(w, code.N)
    words = all_words(code.N)
    succ, succ_g, gao, sen = [], [], [], []
    for u in words:
        t = quantum_sc_decode_exact(code, w, u, dec)
        succ.append(t.p_success)
        succ_g.append(t.p_success_genie)
        s = float(np.sum(t.err_terms))
        gao.append(4.0 * s)
        sen.append(2.0 * np.sqrt(max(s, 0.0)))
    sf = np.array([dec.tree.step_bhattacharyya(k) for k in range(1, code.N + 1)])
    return BlockErrorReport(
        code.N,
        code.K,
        float(1.0 - np.mean(succ)),
        float(1.0 - np.mean(succ_g)),
        float(np.mean(sen)),
        float(np.mean(gao)),
        float(2.0 * sf[code.info_mask].sum()),
        split_error_probabilities(dec),
        sf,
    )


def bound_chain(code, w, decoder=None):
    """Every link of the block-error derivation as numbers.

    ``P_e <= gao``, ``gao == 4 sum_{i in A} P_e(W^{(i)})`` and
    ``P_e(W^{(i)}) <= sqrtF(W^{(i)}) / 2`` so that ``gao <= fidelity``.
    """
    dec = decoder or QuantumSCDecoder(w, code.N)
    rep = block_error(code, w, dec)
    mask = code.info_mask
    return {
        "P_e": rep.P_e_exact,
        "gao": rep.gao_bound,
        "4*sum P_e(W_i)": float(4.0 * rep.per_index_error[mask].sum()),
        "per_index_error": rep.per_index_error,
        "half_sqrtF": 0.5 * rep.sqrt_fid,
        "fidelity": rep.fidelity_bound,
        "sen": rep.sen_bound,
    }


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    P_e_hat: float
    ci95: tuple
    errors: int
    trials: int
    seed: int


def mc_block_error(code, dmc, trials, seed, block=MC_BLOCK):
    """Empirical SC block error with a Wilson 95% interval.

    Trials run in blocks of ``block`` words, each with its own child seed of
    ``seed``; results depend only on ``(code, dmc, trials, seed, block)``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    W = _transition(dmc)
    cdf = np.cumsum(W, axis=1)
    cdf[:, -1] = 1.0
    n_blocks = -(-trials // block)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    errors = 0
    for b, child in enumerate(children):
        m = min(block, trials - b * block)
        rng = np.random.default_rng(child)
        info = rng.integers(0, 2, (m, code.K), dtype=np.uint8)
        u = code.scatter(info)
        x = encode(u)
        r = rng.random((m, code.N))
        y = np.empty_like(x, dtype=np.int64)
        for sym in (0, 1):
            sel = x == sym
            y[sel] = np.searchsorted(cdf[sym], r[sel], side="right")
        y = np.minimum(y, W.shape[1] - 1)
        dec = classical_sc_decode(code, W, y)
        errors += int(np.any(dec != u, axis=1).sum())
    ci = stats.binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return MonteCarloResult(errors / trials, (float(ci.low), float(ci.high)), errors, trials, seed)


RESULT_FIELDS = ("N", "K", "channel_id", "P_e_exact", "sen_bound", "gao_bound", "fidelity_bound", "seed", "trials")


def result_rows_csv(rows):
    """CSV text for result dicts keyed by :data:`RESULT_FIELDS`."""
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=RESULT_FIELDS, lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: (f"{r[k]:.17g}" if isinstance(r.get(k), float) else r.get(k, "")) for k in RESULT_FIELDS})
    return buf.getvalue()


__all__ = [
    "PolarCode",
    "classical_sc_decode",
    "classical_sc_success",
    "SequentialDecoder",
    "QuantumSCDecoder",
    "quantum_sc_decode_exact",
    "block_error",
    "bound_chain",
    "mc_block_error",
]
