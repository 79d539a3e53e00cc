"""Source polarization: the sets ``F``, ``F^c``, ``I`` and the broadcast H/L sets.

Every conditional Bhattacharyya parameter here has the form
``Z(U_i | U^{i-1}, C[, B^N])`` where ``U = V G_N`` for an i.i.d. binary
source ``V`` and ``C`` is some other (already decoded) transformed word.
Classical conditioning is handled by explicit joint weight arrays; quantum
side information by one :class:`StateTree` per conditioning value.

An index is *high* when ``Z >= 1 - delta`` and *low* when ``Z <= delta``, so
the two sets of a pair are disjoint for ``delta < 1/2`` and need not cover
``[1, N]`` at finite ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import qmath
from ..errors import BudgetExceeded, InvalidDistribution, InvariantViolation
from .split import output_table
from .transform import all_words, encode, log2_length
from .tree import DEFAULT_BUDGET, ProductLeaves, StateTree

DEFAULT_THRESHOLD = 0.01
DEFAULT_BETA = 0.49
MAX_CLASSICAL_BITS = 24
TOL_Z = 1e-9


def resolve_threshold(N, threshold=None, beta=None):
    """Explicit threshold, else ``2**(-N**beta)``, else the default 0.01."""
    if threshold is not None:
        return float(threshold)
    if beta is not None:
        return float(2.0 ** (-(N**beta)))
    return DEFAULT_THRESHOLD


def high_low(z, threshold):
    z = np.asarray(z)
    high = tuple(int(i) + 1 for i in np.flatnonzero(z >= 1.0 - threshold))
    low = tuple(int(i) + 1 for i in np.flatnonzero(z <= threshold))
    return high, low


@dataclass(frozen=True, eq=False)
class PolarizationSets:
    """Named 1-based index sets with the per-index parameters they came from."""

    N: int
    threshold: float
    sets: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.sets[name]

    def sizes(self):
        return {k: len(v) for k, v in self.sets.items()}


# ---------------------------------------------------------------------------
# generic conditional Z


def _word_probs(N, p1):
    """``P(U = u)`` for ``U = V G_N`` with i.i.d. ``V ~ Bern(p1)``."""
    ones = encode(all_words(N)).sum(axis=1)
    return float(p1) ** ones * (1.0 - float(p1)) ** (N - ones)


def classical_z(weights):
    """``Z(U_i | U^{i-1}, C)`` for all ``i`` from a joint array ``weights[c, u]``.

    ``u`` runs over ``2**N`` MSB-first words; ``c`` over conditioning values.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    N = int(np.log2(w.shape[1]))
    out = np.empty(N)
    for k in range(1, N + 1):
        lvl = w.reshape(w.shape[0], 1 << k, -1).sum(axis=2)
        out[k - 1] = 2.0 * np.sqrt(lvl[:, 0::2] * lvl[:, 1::2]).sum()
    return out


def classical_conditional_entropy(weights):
    """``H(U_i | U^{i-1}, C)`` for all ``i`` (bits), same layout as :func:`classical_z`."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    N = int(np.log2(w.shape[1]))
    h = [qmath.shannon_entropy(w.reshape(w.shape[0], 1 << k, -1).sum(axis=2)) for k in range(N + 1)]
    return np.diff(h)


def quantum_z(weights, table, symbols, budget=DEFAULT_BUDGET):
    """``Z(U_i | U^{i-1}, C, B^N)`` with product outputs.

    ``weights[c, u]`` is the joint law, ``symbols[c, u, k]`` the per-use table
    row of configuration ``(c, u)``.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    symbols = np.asarray(symbols)
    if symbols.ndim == 2:
        symbols = symbols[None]
    N = int(np.log2(weights.shape[1]))
    total = np.zeros(N)
    for c in range(weights.shape[0]):
        pc = weights[c].sum()
        if pc <= 0:
            continue
        tree = StateTree(ProductLeaves(table, symbols[c if symbols.shape[0] > 1 else 0]), N, weights[c] / pc, budget)
        total += pc * np.array([tree.step_bhattacharyya(k) for k in range(1, N + 1)])
    return total


def _check_bits(n_bits):
    if n_bits > MAX_CLASSICAL_BITS:
        raise BudgetExceeded(f"{n_bits} enumerated bits exceed the limit of {MAX_CLASSICAL_BITS}")


# ---------------------------------------------------------------------------
# single-source shaping


def shaping_sets(p, N, threshold=None, beta=None):
    """Source polarization of ``U = X G_N`` for ``X ~ Bern(p)`` i.i.d.

    Returns ``F = {Z(U_i|U^{i-1}) >= 1 - t}`` and ``F^c = {Z <= t}`` together
    with the exact ``Z`` and conditional entropies; ``|F|/N`` approaches
    ``H(p)`` as ``N`` grows.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidDistribution(f"source probability {p} outside [0, 1]")
    log2_length(N)
    _check_bits(N)
    t = resolve_threshold(N, threshold, beta)
    w = _word_probs(N, p)
    z = classical_z(w)
    F, Fc = high_low(z, t)
    return PolarizationSets(
        N,
        t,
        {"F": F, "F^c": Fc},
        {"Z(U_i|U^i-1)": z, "H(U_i|U^i-1)": classical_conditional_entropy(w), "H(X)": qmath.binary_entropy(p)},
    )


def shaping_info_set(w, p, N, threshold=None, beta=None, budget=DEFAULT_BUDGET):
    """Information set ``I = {i in F : Z(U_i | U^{i-1}, B^N) <= t}`` under a shaped input.

    Raises :class:`InvariantViolation` if side information ever increases ``Z``.
    """
    base = shaping_sets(p, N, threshold, beta)
    t = base.threshold
    table = output_table(w)
    wts = _word_probs(N, p)
    symbols = encode(all_words(N))
    z_b = quantum_z(wts, table, symbols, budget)
    z0 = base.z["Z(U_i|U^i-1)"]
    bad = np.flatnonzero(z_b > z0 + TOL_Z)
    if bad.size:
        i = int(bad[0])
        raise InvariantViolation(f"Z with side information exceeds Z without at index {i + 1}", index=i + 1, bound="Z(U|B) <= Z(U)")
    F = base["F"]
    info = tuple(i for i in F if z_b[i - 1] <= t)
    if not set(info) <= set(F):
        raise InvariantViolation("I is not a subset of F")
    sets = dict(base.sets)
    sets["I"] = info
    sets["F\\I"] = tuple(i for i in F if i not in set(info))
    zs = dict(base.z)
    zs["Z(U_i|U^i-1,B^N)"] = z_b
    return PolarizationSets(N, t, sets, zs)


# ---------------------------------------------------------------------------
# broadcast sets


def _phi_table(phi):
    if callable(phi):
        return np.array([[[int(phi(v, a, b)) for b in (0, 1)] for a in (0, 1)] for v in (0, 1)])
    return np.asarray(phi, dtype=int).reshape(2, 2, 2)


def _cond(joint, given_axes):
    """Conditional ``p(rest | given)`` of a (2,2,2) array, zero where the condition has no mass."""
    other = tuple(a for a in range(3) if a not in given_axes)
    marg = joint.sum(axis=other, keepdims=True)
    return np.where(marg > 0, joint / np.where(marg > 0, marg, 1.0), 0.0)


def broadcast_sets(bc, joint, phi, N, threshold=None, beta=None, budget=DEFAULT_BUDGET):
    """Exact H/L polarization sets for superposition plus binning over a broadcast channel.

    Parameters
    ----------
    bc : BroadcastChannel
        Two-receiver channel ``x -> rho_x^{B1 B2}``.
    joint : array_like, shape (2, 2, 2)
        Per-use law ``p(v, v1, v2)``.
    phi : callable or array_like
        Deterministic map ``x = phi(v, v1, v2)``.
    N : int
        Block length.

    Notes
    -----
    ``U0 = V G``, ``U1 = V1 G``, ``U2 = V2 G``.  Set names follow the pattern
    ``H_V|B1`` for ``{i : Z(U0_i | U0^{i-1}, B1^N) >= 1 - t}``.
    """
    joint = qmath.validate_distribution(np.asarray(joint, dtype=float).ravel()).reshape(2, 2, 2)
    log2_length(N)
    _check_bits(3 * N)
    t = resolve_threshold(N, threshold, beta)
    phi = _phi_table(phi)
    M = 1 << N
    vw = encode(all_words(N)).astype(int)  # vw[u] = source word of transformed word u

    pv = joint.sum(axis=(1, 2))
    p0 = np.prod(pv[vw], axis=1)  # P(U0 = u0)

    def cond_word(cond):
        # P(U_l = u | U_0 = g) from the per-use table cond[v, v_l]
        out = np.ones((M, M))
        for k in range(N):
            out *= cond[vw[:, k][:, None], vw[:, k][None, :]]
        return out

    z = {}
    z["V"] = classical_z(p0)
    marg_states = {rec: output_table(bc.marginal(rec)) for rec in (1, 2)}

    def mix(tab, coeff):
        # coeff[..., x] weights over channel letters -> mixed per-use states
        return np.tensordot(coeff, tab, axes=(-1, 0))

    letter = np.eye(bc.outputs.shape[0])[phi]  # (2,2,2,X) one-hot of phi
    for rec in (1, 2):
        tab = marg_states[rec]
        # sigma_v = sum_{v1 v2} p(v1 v2 | v) rho_phi
        c_v = _cond(joint, (0,))
        sigma = mix(tab, np.einsum("abc,abcx->ax", c_v, letter))
        z[f"V|B{rec}"] = quantum_z(p0, sigma, vw, budget)

        ax = rec  # axis of V_rec in joint
        other = 3 - rec
        p_v_vl = joint.sum(axis=other)  # (v, v_rec)
        c_l = np.where(pv[:, None] > 0, p_v_vl / np.where(pv[:, None] > 0, pv[:, None], 1.0), 0.0)
        w_l = p0[:, None] * cond_word(c_l)  # (u0, u_l)
        z[f"V{rec}|V"] = classical_z(w_l)
        # tau_{v, v_l} = sum_{other} p(other | v, v_l) rho_phi
        c_vl = _cond(joint, (0, ax))
        coeff = np.einsum("abc,abcx->" + ("abx" if rec == 1 else "acx"), c_vl, letter)
        tau = mix(tab, coeff.reshape(4, -1))
        syms = 2 * vw[:, None, :] + vw[None, :, :]  # (u0, u_l, k)
        z[f"V{rec}|V,B{rec}"] = quantum_z(w_l, tau, syms, budget)

    # Z(U1 | U1^{i-1}, U0, U2): weights over (u0, u2, u1)
    c12 = _cond(joint, (0, 2))  # p(v1 | v, v2) on axes (v, v1, v2)
    p02 = np.ones((M, M))
    p_v_v2 = joint.sum(axis=1)
    for k in range(N):
        p02 *= p_v_v2[vw[:, k][:, None], vw[:, k][None, :]]
    w3 = np.ones((M, M, M))
    for k in range(N):
        a, b, c = vw[:, k][:, None, None], vw[:, k][None, :, None], vw[:, k][None, None, :]
        w3 *= c12[a, c, b]
    w3 *= p02[:, :, None]
    z["V1|V,V2"] = classical_z(w3.reshape(M * M, M))

    sets = {}
    for key in ("V", "V|B1", "V|B2", "V1|V", "V2|V", "V1|V,B1", "V2|V,B2", "V1|V,V2"):
        h, lo = high_low(z[key], t)
        sets["H_" + key], sets["L_" + key] = h, lo

    def cap(*names):
        out = set(sets[names[0]])
        for n in names[1:]:
            out &= set(sets[n])
        return tuple(sorted(out))

    sets["I_sup^(2)"] = cap("H_V", "L_V|B2")
    sets["I_v^(1)"] = cap("H_V", "L_V|B1")
    sets["I_bin^(2)"] = cap("H_V2|V", "L_V|B2")
    sets["I^(1)"] = cap("H_V1|V", "L_V|B1")
    sets["I_bin^(2),cond"] = cap("H_V2|V", "L_V2|V,B2")
    sets["I^(1),cond"] = cap("H_V1|V", "L_V1|V,B1")
    sets["F^(1)"] = cap("L_V1|V,V2", "H_V1|V", "H_V1|V,B1")
    return PolarizationSets(N, t, sets, {"Z(" + k + ")": v for k, v in z.items()})
