"""Channel models: classical DMCs, cq channels, cq MACs, Kraus channels, broadcast channels."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import qmath
from .errors import DimMismatch, InvariantViolation


def _checked_states(mats, what):
    out = []
    for k, m in enumerate(mats):
        try:
            out.append(qmath.validate_density(m))
        except (ValueError, ArithmeticError) as exc:
            raise InvariantViolation(f"{what}[{k}]: {exc}", index=k, bound=type(exc).__name__) from exc
    if len({m.shape for m in out}) > 1:
        raise DimMismatch(f"{what}: output dimensions differ")
    return np.array(out, dtype=complex)


@dataclass(frozen=True, eq=False)
class CqChannel:
    """Classical-quantum channel ``x -> rho_x``."""

    outputs: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "outputs", _checked_states(self.outputs, "outputs"))

    @property
    def input_alphabet_size(self):
        return self.outputs.shape[0]

    @property
    def output_dim(self):
        return self.outputs.shape[1]

    @property
    def is_binary(self):
        return self.input_alphabet_size == 2

    def is_diagonal(self):
        return all(qmath.is_diagonal(r) for r in self.outputs)

    def diagonals(self):
        return np.real(np.array([np.diag(r) for r in self.outputs]))

    def holevo(self, prior=None):
        if prior is None:
            prior = np.full(self.input_alphabet_size, 1.0 / self.input_alphabet_size)
        return qmath.holevo_information(prior, self.outputs)

    def sqrt_fidelity(self):
        return qmath.sqrt_fidelity(self.outputs[0], self.outputs[1])


@dataclass(frozen=True, eq=False)
class ClassicalDMC:
    """Row-stochastic transition matrix ``W[x, y] = P(y | x)``."""

    transition: np.ndarray
    label: str = ""

    def __post_init__(self):
        w = np.asarray(self.transition, dtype=float)
        if w.ndim != 2:
            raise DimMismatch("transition matrix must be 2-d")
        for k, row in enumerate(w):
            if np.any(row < -qmath.TOL_PROB) or abs(row.sum() - 1.0) > qmath.TOL_PROB:
                raise InvariantViolation(f"row {k} is not a probability vector", index=k, bound="row-stochastic")
        object.__setattr__(self, "transition", np.clip(w, 0.0, None))

    @property
    def input_alphabet_size(self):
        return self.transition.shape[0]

    @property
    def n_outputs(self):
        return self.transition.shape[1]

    def to_cq(self):
        return CqChannel(np.array([np.diag(row).astype(complex) for row in self.transition]), self.label)

    def mutual_information(self, prior=None):
        """Shannon mutual information, computed classically."""
        w = self.transition
        if prior is None:
            prior = np.full(w.shape[0], 1.0 / w.shape[0])
        py = prior @ w
        return qmath.shannon_entropy(py) - sum(p * qmath.shannon_entropy(row) for p, row in zip(prior, w))


@dataclass(frozen=True, eq=False)
class CqMac:
    """k-sender cq MAC; ``outputs`` has shape ``alphabets + (D, D)``."""

    outputs: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.outputs, dtype=complex)
        if arr.ndim < 4:
            raise DimMismatch("a MAC needs at least two input indices")
        shape = arr.shape[:-2]
        flat = _checked_states(arr.reshape((-1,) + arr.shape[-2:]), "outputs")
        object.__setattr__(self, "outputs", flat.reshape(shape + flat.shape[1:]))

    @property
    def n_senders(self):
        return self.outputs.ndim - 2

    @property
    def alphabets(self):
        return self.outputs.shape[:-2]

    @property
    def output_dim(self):
        return self.outputs.shape[-1]

    def is_diagonal(self):
        return all(qmath.is_diagonal(r) for r in self.outputs.reshape((-1,) + self.outputs.shape[-2:]))

    def ensemble(self, priors=None):
        """The cq state ``rho^{X1..Xk B}`` under product input distributions."""
        if priors is None:
            priors = [np.full(a, 1.0 / a) for a in self.alphabets]
        probs = np.ones(())
        for p in priors:
            probs = np.multiply.outer(probs, qmath.validate_distribution(p))
        table = self.outputs.reshape((-1,) + self.outputs.shape[-2:])
        return qmath.CqEnsemble(probs, table)


@dataclass(frozen=True, eq=False)
class QubitChannel:
    """Quantum channel in Kraus form, ``N(rho) = sum_j K_j rho K_j^dag``."""

    kraus: tuple
    label: str = ""

    def __post_init__(self):
        ks = [np.asarray(k, dtype=complex) for k in self.kraus]
        if not ks or any(k.shape != ks[0].shape for k in ks):
            raise DimMismatch("Kraus operators must share a shape")
        total = sum(k.conj().T @ k for k in ks)
        dev = np.max(np.abs(total - np.eye(ks[0].shape[1])))
        if dev > qmath.TOL_NUM:
            raise InvariantViolation(f"Kraus completeness violated by {dev:.3e}", bound="completeness")
        object.__setattr__(self, "kraus", tuple(ks))

    @property
    def input_dim(self):
        return self.kraus[0].shape[1]

    @property
    def output_dim(self):
        return self.kraus[0].shape[0]

    def apply(self, rho):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.input_dim, self.input_dim):
            raise DimMismatch(f"channel input dim {self.input_dim}, state shape {rho.shape}")
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def isometry(self):
        """Canonical Stinespring isometry ``V = sum_j K_j (x) |j>_E`` of shape (dB*dE, dA)."""
        d_e = len(self.kraus)
        return sum(np.kron(k, np.eye(d_e)[:, [j]]) for j, k in enumerate(self.kraus))

    def compose(self, other):
        """``self`` after ``other``."""
        return QubitChannel(tuple(a @ b for a in self.kraus for b in other.kraus), f"{self.label}*{other.label}")


@dataclass(frozen=True, eq=False)
class BroadcastChannel:
    """``x -> rho_x^{B1 B2}`` on a ``d1 * d2`` dimensional product space."""

    outputs: np.ndarray
    dims: tuple
    label: str = ""

    def __post_init__(self):
        states = _checked_states(self.outputs, "outputs")
        if int(np.prod(self.dims)) != states.shape[1]:
            raise DimMismatch(f"dims {self.dims} do not multiply to {states.shape[1]}")
        object.__setattr__(self, "outputs", states)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def marginal(self, receiver):
        keep = [receiver - 1]
        return CqChannel(np.array([partial_trace(r, self.dims, keep) for r in self.outputs]), f"{self.label}|B{receiver}")


@dataclass(frozen=True, eq=False)
class CompoundSet:
    """Non-empty family of channels sharing the input alphabet."""

    members: tuple = field(default_factory=tuple)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise InvariantViolation("compound set must be non-empty")
        sizes = {m.alphabets if isinstance(m, CqMac) else m.input_alphabet_size for m in members}
        if len(sizes) != 1:
            raise DimMismatch("compound members must share input alphabets")
        object.__setattr__(self, "members", members)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, k):
        return self.members[k]


# ---------------------------------------------------------------------------
# operations


def partial_trace(rho, dims, keep):
    """Trace out every tensor factor not listed in ``keep`` (0-based)."""
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[0]:
        raise DimMismatch(f"dims {dims} do not match matrix of size {rho.shape[0]}")
    keep = sorted(set(keep))
    n = len(dims)
    t = rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum("".join(row) + "".join(col) + "->" + out, t).reshape(d, d)


def induced_mac(table, dims, receiver):
    """MAC seen by one receiver of a two-receiver interference channel.

    ``table`` has shape ``(|X1|, |X2|, d1*d2, d1*d2)``.
    """
    table = np.asarray(table, dtype=complex)
    if table.ndim != 4:
        raise DimMismatch("interference table must have shape (X1, X2, D, D)")
    out = np.empty(table.shape[:2] + (dims[receiver - 1],) * 2, dtype=complex)
    for x1, x2 in product(range(table.shape[0]), range(table.shape[1])):
        out[x1, x2] = partial_trace(table[x1, x2], dims, [receiver - 1])
    return CqMac(out, f"induced-B{receiver}")


def degrade(channel, d):
    """Post-compose every output of ``channel`` with the Kraus channel ``d``."""
    if d.input_dim != channel.output_dim:
        raise DimMismatch(f"degrading channel input dim {d.input_dim} != output dim {channel.output_dim}")
    outs = np.array([d.apply(r) for r in channel.outputs])
    # re-symmetrise to kill round-off before validation
    outs = 0.5 * (outs + np.conj(np.swapaxes(outs, -1, -2)))
    return CqChannel(outs, f"{d.label}({channel.label})")


# ---------------------------------------------------------------------------
# standard constructors


def bsc(p):
    return ClassicalDMC(np.array([[1 - p, p], [p, 1 - p]]), f"BSC({p})")


def bec(eps):
    """Outputs ordered (0, 1, erasure)."""
    return ClassicalDMC(np.array([[1 - eps, 0.0, eps], [0.0, 1 - eps, eps]]), f"BEC({eps})")


def pure_state_cq(kets, label="pure"):
    return CqChannel(np.array([qmath.ket(k) for k in kets]), label)


def overlap_cq(overlap):
    """Two pure qubit states with real inner product ``overlap``."""
    return pure_state_cq([[1.0, 0.0], [overlap, np.sqrt(1.0 - overlap**2)]], f"pure(overlap={overlap})")


def amplitude_damped_cq(gamma):
    """|+> and |-> sent through amplitude damping; outputs do not commute."""
    ad = amplitude_damping(gamma)
    s = 1 / np.sqrt(2)
    outs = np.array([ad.apply(qmath.ket([s, s])), ad.apply(qmath.ket([s, -s]))])
    return CqChannel(outs, f"AD({gamma})[+/-]")


def identity_channel(d=2):
    return QubitChannel((np.eye(d),), "id")


def dephasing(p):
    """Off-diagonal elements are scaled by ``1 - p``."""
    z = np.diag([1.0, -1.0])
    return QubitChannel((np.sqrt(1 - p / 2) * np.eye(2), np.sqrt(p / 2) * z), f"dephasing({p})")


def depolarizing(p):
    """``rho -> (1-p) rho + p I/2``."""
    x = np.array([[0, 1], [1, 0]])
    y = np.array([[0, -1j], [1j, 0]])
    z = np.diag([1, -1])
    return QubitChannel(
        (np.sqrt(1 - 3 * p / 4) * np.eye(2), np.sqrt(p / 4) * x, np.sqrt(p / 4) * y, np.sqrt(p / 4) * z),
        f"depolarizing({p})",
    )


def amplitude_damping(gamma):
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return QubitChannel((k0, k1), f"AD({gamma})")


def bit_flip(p):
    x = np.array([[0, 1], [1, 0]])
    return QubitChannel((np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * x), f"bitflip({p})")


def product_mac(chan_x, chan_y):
    """``rho_{x,y} = rho_x (x) sigma_y``."""
    chan_x, chan_y = (c.to_cq() if isinstance(c, ClassicalDMC) else c for c in (chan_x, chan_y))
    a, b = chan_x.outputs, chan_y.outputs
    out = np.array([[np.kron(ra, sb) for sb in b] for ra in a])
    return CqMac(out, f"{chan_x.label}x{chan_y.label}")


def classical_mac(table):
    """MAC from ``P(y | x1, x2)`` given as array of shape (X1, X2, Y)."""
    table = np.asarray(table, dtype=float)
    out = np.zeros(table.shape[:-1] + (table.shape[-1],) * 2, dtype=complex)
    for idx in np.ndindex(*table.shape[:-1]):
        out[idx] = np.diag(table[idx])
    return CqMac(out, "classical")


def adder_mac():
    """Binary adder ``Y = X1 + X2`` with outputs {0, 1, 2}."""
    t = np.zeros((2, 2, 3))
    for x1, x2 in product(range(2), range(2)):
        t[x1, x2, x1 + x2] = 1.0
    return classical_mac(t)
