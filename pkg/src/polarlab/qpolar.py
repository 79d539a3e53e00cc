"""Amplitude and phase channels of a qubit channel and the simultaneous quantum polar scheme.

The amplitude channel sends ``|z>`` through ``N``; the phase channel sends
``Z^x`` applied to half of a maximally entangled pair and keeps the other
half ``C`` as side information.  Phase bits are transformed by ``G_N^T`` and
decoded from the last index to the first.  Since ``G_N^T = R G_N R`` with
``R`` the index reversal, the phase split parameters are the usual ones read
backwards; :func:`phase_split_params` nevertheless builds them literally.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import qmath
from .channels import CqChannel, QubitChannel, degrade, partial_trace
from .errors import DimMismatch
from .polar.shaping import resolve_threshold
from .polar.split import split_params
from .polar.transform import all_words, generator_matrix, log2_length
from .polar.tree import DEFAULT_BUDGET, ProductLeaves, StateTree, check_product_budget

ASSIGNMENTS = ("info", "|+>", "|0>", "|Phi>")
# (good amplitude, good phase) of member 1 -> coding of that index
_TABLE = {(True, True): "info", (True, False): "|+>", (False, True): "|0>", (False, False): "|Phi>"}


def _bell():
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    return np.outer(phi, phi.conj())


@dataclass(frozen=True, eq=False)
class AmplitudePhasePair:
    """Induced channels ``W_A`` (on B) and ``W_P`` (on B (x) C) with the dilation used."""

    W_A: CqChannel
    W_P: CqChannel
    isometry: np.ndarray
    channel_label: str = ""

    @property
    def holevo_A(self):
        return self.W_A.holevo()

    @property
    def holevo_P(self):
        return self.W_P.holevo()


def induce_amplitude_phase(n):
    """Build ``W_A: z -> N(|z><z|)`` and ``W_P: x -> tr_R U (Z^x)_C |Phi><Phi| (...)^dag``."""
    if not isinstance(n, QubitChannel):
        raise TypeError("expected a QubitChannel")
    if n.input_dim != 2:
        raise DimMismatch(f"amplitude/phase channels need a qubit input, got dimension {n.input_dim}")
    dB, dE = n.output_dim, len(n.kraus)
    V = n.isometry()  # (dB*dE, 2), output ordered B (x) R
    amp = np.array([n.apply(np.diag(np.eye(2)[z]).astype(complex)) for z in range(2)])
    z = np.diag([1.0, -1.0])
    full = np.kron(V, np.eye(2))  # A' (x) C -> B (x) R (x) C
    phase = []
    for x in range(2):
        zx = np.kron(np.eye(2), np.linalg.matrix_power(z, x))
        s = full @ zx @ _bell() @ zx.conj().T @ full.conj().T
        phase.append(partial_trace(s, (dB, dE, 2), [0, 2]))
    return AmplitudePhasePair(CqChannel(amp, f"W_A[{n.label}]"), CqChannel(np.array(phase), f"W_P[{n.label}]"), V, n.label)


def coherent_information(n):
    """``I(A>B) = H(B) - H(AB)`` of ``(id (x) N)(Phi)``."""
    choi = sum(np.kron(np.eye(2), k) @ _bell() @ np.kron(np.eye(2), k).conj().T for k in n.kraus)
    rho_b = partial_trace(choi, (2, n.output_dim), [1])
    return qmath.von_neumann_entropy(rho_b) - qmath.von_neumann_entropy(choi)


def phase_split_params(w_p, N, budget=DEFAULT_BUDGET):
    """``sqrtF`` and ``I`` of the phase split channels under ``G_N^T``.

    Index ``i`` (1-based) is decided knowing bits ``i+1..N`` only.
    """
    log2_length(N)
    check_product_budget(N, w_p.outputs, N, budget)
    order = np.arange(N)[::-1]
    words = all_words(N)
    u = np.empty_like(words)
    u[:, order] = words
    symbols = (u.astype(np.int64) @ generator_matrix(N).T.astype(np.int64)) % 2
    tree = StateTree(ProductLeaves(w_p.outputs, symbols), N, budget=budget)
    sf = np.empty(N)
    info = np.empty(N)
    for k in range(1, N + 1):
        sf[order[k - 1]] = tree.step_bhattacharyya(k)
        info[order[k - 1]] = tree.step_information(k)
    return info, sf


@dataclass(frozen=True, eq=False)
class IndexClassification:
    """Four-way split of ``[1, N]`` by amplitude and phase goodness."""

    N: int
    threshold: float
    sqrt_fid_A: np.ndarray
    sqrt_fid_P: np.ndarray

    def _good(self, which):
        sf = self.sqrt_fid_A if which == "A" else self.sqrt_fid_P
        return set(int(i) + 1 for i in np.flatnonzero(sf < self.threshold))

    def _sets(self):
        ga, gp = self._good("A"), self._good("P")
        full = set(range(1, self.N + 1))
        return {
            "A_N": sorted(ga & gp),
            "X_N": sorted(ga - gp),
            "Z_N": sorted(gp - ga),
            "B_N": sorted(full - ga - gp),
        }

    @property
    def sets(self):
        return self._sets()

    def label(self, i):
        for name, members in self._sets().items():
            if i in members:
                return name
        raise IndexError(i)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index", "sqrtF_A", "sqrtF_P", "class"])
        for i in range(1, self.N + 1):
            wr.writerow([i, f"{self.sqrt_fid_A[i - 1]:.17g}", f"{self.sqrt_fid_P[i - 1]:.17g}", self.label(i)])
        return buf.getvalue()


def classify_indices(pair, N, threshold=None, beta=None, budget=DEFAULT_BUDGET):
    """Split parameters of both induced channels and the ``A/X/Z/B`` partition (good = ``sqrtF < t``)."""
    t = resolve_threshold(N, threshold, beta)
    sf_a = split_params(pair.W_A, N, budget=budget).sqrt_fid
    _, sf_p = phase_split_params(pair.W_P, N, budget)
    return IndexClassification(N, t, np.asarray(sf_a), sf_p)


def net_rate(cls):
    """``(|A_N| - |B_N|) / N``; may be negative at finite ``N``."""
    s = cls.sets
    return (len(s["A_N"]) - len(s["B_N"])) / cls.N


def degraded_pair(n2, d):
    """Induced pairs of ``N_1 = D o N_2`` and ``N_2``, the former built with :func:`degrade`."""
    p2 = induce_amplitude_phase(n2)
    d_bc = QubitChannel(tuple(np.kron(k, np.eye(2)) for k in d.kraus), f"{d.label}(x)id")
    p1 = AmplitudePhasePair(degrade(p2.W_A, d), degrade(p2.W_P, d_bc), p2.isometry, f"{d.label}*{n2.label}")
    return p1, p2


@dataclass(frozen=True, eq=False)
class CombinationTable:
    """Per-index goodness ``(A1, P1, A2, P2)`` and the resulting coding assignment."""

    N: int
    threshold: float
    goodness: np.ndarray  # (N, 4) bool
    assignment: tuple
    anomalies: tuple

    @property
    def n_anomalies(self):
        return len(self.anomalies)

    def rows(self):
        out = []
        for i in range(self.N):
            g = "".join("G" if v else "B" for v in self.goodness[i])
            out.append((i + 1, g, self.assignment[i], (i + 1) in self.anomalies))
        return out

    def net_rate(self):
        """``(#info - #|Phi>) / N`` for member 1."""
        a = list(self.assignment)
        return (a.count("info") - a.count("|Phi>")) / self.N


def degraded_combination_table(pair1, pair2, N, threshold=None, beta=None):
    """Assign each index by member 1's goodness; flag indices good for 1 but bad for 2."""
    c1 = classify_indices(pair1, N, threshold, beta)
    c2 = classify_indices(pair2, N, threshold, beta)
    t = c1.threshold
    g = np.stack([c1.sqrt_fid_A < t, c1.sqrt_fid_P < t, c2.sqrt_fid_A < t, c2.sqrt_fid_P < t], axis=1)
    assign = []
    anomalies = []
    for i in range(N):
        a1, p1, a2, p2 = g[i]
        assign.append(_TABLE[(bool(a1), bool(p1))])
        if (a1 and not a2) or (p1 and not p2):
            anomalies.append(i + 1)
    return CombinationTable(N, t, g, tuple(assign), tuple(anomalies))


def fidelity_sum(pair):
    """``F(W_A) + F(W_P)``; at most 1 is the vanishing-assistance criterion."""
    return qmath.fidelity(*pair.W_A.outputs) + qmath.fidelity(*pair.W_P.outputs)


__all__ = [
    "AmplitudePhasePair",
    "IndexClassification",
    "CombinationTable",
    "induce_amplitude_phase",
    "phase_split_params",
    "classify_indices",
    "net_rate",
    "degraded_pair",
    "degraded_combination_table",
    "coherent_information",
    "fidelity_sum",
]
