"""Dense Hermitian-matrix kernel.

Everything here works on plain ``numpy`` arrays.  A density matrix is a
square complex array that is Hermitian, positive semi-definite and has unit
trace; the validators below enforce that with the tolerances defined at
module level.  Diagonal (classical) states may be passed to the batched
helpers as 1-d probability vectors, which keeps classical channels cheap.

All entropies are in bits.
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatch, InvalidDistribution, NegativeEigenvalue, NonHermitianInput

TOL_HERMITIAN = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-9
TOL_EIG = 1e-10
TOL_NUM = 1e-8
TOL_PROB = 1e-10


# ---------------------------------------------------------------------------
# validation


def check_hermitian(a, tol=TOL_HERMITIAN):
    """Return ``a`` as a complex square array, raising if it is not Hermitian."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise NonHermitianInput(f"matrix deviates from Hermitian by {dev:.3e} > {tol:.1e}")
    return a


def validate_density(rho, tol_trace=TOL_TRACE, tol_psd=TOL_PSD):
    """Check the density-matrix invariants and return the matrix as complex array."""
    rho = check_hermitian(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol_trace:
        raise InvalidDistribution(f"trace is {tr!r}, expected 1 within {tol_trace:.1e}")
    lam_min = np.linalg.eigvalsh(rho).min()
    if lam_min < -tol_psd:
        raise NegativeEigenvalue(f"minimum eigenvalue {lam_min:.3e} < -{tol_psd:.1e}")
    return rho


def validate_distribution(p, tol=TOL_PROB):
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol):
        raise InvalidDistribution(f"negative probability {p.min()!r}")
    if abs(p.sum() - 1.0) > tol:
        raise InvalidDistribution(f"probabilities sum to {p.sum()!r}")
    return np.clip(p, 0.0, None)


def is_diagonal(a, tol=TOL_HERMITIAN):
    a = np.asarray(a)
    off = a - np.diag(np.diag(a))
    return bool(np.max(np.abs(off), initial=0.0) <= tol)


def _clamped_eigh(a, tol_psd=TOL_PSD):
    lam, vec = np.linalg.eigh(a)
    if lam.size and lam.min() < -tol_psd:
        raise NegativeEigenvalue(f"minimum eigenvalue {lam.min():.3e} < -{tol_psd:.1e}")
    return np.clip(lam, 0.0, None), vec


# ---------------------------------------------------------------------------
# single-matrix operations


def matrix_sqrt(rho):
    """Principal square root of a PSD matrix.

    Eigenvalues in ``[-TOL_PSD, 0)`` are treated as zero; anything more
    negative raises :class:`NegativeEigenvalue`.
    """
    rho = check_hermitian(rho)
    lam, vec = _clamped_eigh(rho)
    lam = np.where(lam > _noise_floor(lam), lam, 0.0)
    return (vec * np.sqrt(lam)) @ vec.conj().T


def trace_norm(a):
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    a = check_hermitian(a)
    return float(np.abs(np.linalg.eigvalsh(a)).sum())


def sqrt_fidelity(rho0, rho1):
    """``|| sqrt(rho0) sqrt(rho1) ||_1``; equals sum_i sqrt(p_i q_i) for commuting states."""
    rho0 = check_hermitian(rho0)
    rho1 = check_hermitian(rho1)
    if rho0.shape != rho1.shape:
        raise DimMismatch(f"{rho0.shape} vs {rho1.shape}")
    s = np.linalg.svd(matrix_sqrt(rho0) @ matrix_sqrt(rho1), compute_uv=False).sum()
    return float(min(max(s, 0.0), 1.0))


def fidelity(rho0, rho1):
    """Squared overlap ``|| sqrt(rho0) sqrt(rho1) ||_1 ** 2``, so that F(rho, rho) = 1."""
    return sqrt_fidelity(rho0, rho1) ** 2


def von_neumann_entropy(rho):
    rho = validate_density(rho)
    return _entropy_from_eigs(np.linalg.eigvalsh(rho))


def nonneg_eigenspace_projector(a, tol=TOL_EIG):
    """Projector onto the span of eigenvectors with eigenvalue >= -tol.

    Zero eigenvalues are included, so the projector of the zero matrix is the
    identity.  ``I - P`` is the projector onto the strictly negative part.
    """
    a = check_hermitian(a)
    lam, vec = np.linalg.eigh(a)
    keep = vec[:, lam >= -tol]
    return keep @ keep.conj().T


def holevo_information(prior, outputs):
    """``H(sum_x p_x rho_x) - sum_x p_x H(rho_x)`` in bits."""
    prior = validate_distribution(prior)
    outputs = [validate_density(r) for r in outputs]
    if len(outputs) != prior.size:
        raise DimMismatch(f"{prior.size} prior entries for {len(outputs)} outputs")
    if len({r.shape for r in outputs}) != 1:
        raise DimMismatch("outputs have different dimensions")
    avg = sum(p * r for p, r in zip(prior, outputs))
    val = von_neumann_entropy(avg) - sum(p * von_neumann_entropy(r) for p, r in zip(prior, outputs))
    return max(float(val), 0.0)


def shannon_entropy(p):
    p = np.asarray(p, dtype=float).ravel()
    return _entropy_from_eigs(p)


def binary_entropy(p):
    return shannon_entropy([p, 1.0 - p])


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def ket(vec):
    v = np.asarray(vec, dtype=complex).reshape(-1, 1)
    return v @ v.conj().T


# ---------------------------------------------------------------------------
# batched helpers (no validation; used in the inner loops)


def _entropy_from_eigs(lam):
    lam = np.clip(np.asarray(lam, dtype=float), 0.0, None)
    nz = lam[lam > 0.0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def entropies(states):
    """Von Neumann entropies of a stack of states ``(..., D, D)`` or diagonals ``(..., D)``."""
    states = np.asarray(states)
    if states.ndim >= 2 and states.shape[-1] == states.shape[-2] and np.iscomplexobj(states):
        lam = np.linalg.eigvalsh(states)
    else:
        lam = states
    lam = np.clip(lam.real if np.iscomplexobj(lam) else lam, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0.0, -lam * np.log2(np.where(lam > 0.0, lam, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _noise_floor(lam):
    """Eigenvalues below ``dim * eps * lambda_max`` are rounding noise of ``eigh``."""
    top = np.max(np.abs(lam), axis=-1, keepdims=True)
    return lam.shape[-1] * np.finfo(float).eps * top


def sqrtm_batch(states):
    lam, vec = np.linalg.eigh(states)
    # sqrt amplifies noise (1e-17 -> 3e-9), so drop it before taking the root
    lam = np.where(lam > _noise_floor(lam), lam, 0.0)
    return (vec * np.sqrt(lam)[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


def sqrt_fidelities(states0, states1):
    """Pairwise root fidelities of two equally shaped stacks (matrix or diagonal form)."""
    states0 = np.asarray(states0)
    states1 = np.asarray(states1)
    if not np.iscomplexobj(states0):
        return np.sqrt(np.clip(states0, 0, None) * np.clip(states1, 0, None)).sum(axis=-1)
    prod = sqrtm_batch(states0) @ sqrtm_batch(states1)
    s = np.linalg.svd(prod, compute_uv=False).sum(axis=-1)
    return np.clip(s, 0.0, 1.0)


def projector_batch(a, tol=TOL_EIG):
    """Stacked version of :func:`nonneg_eigenspace_projector`."""
    lam, vec = np.linalg.eigh(a)
    keep = (lam >= -tol).astype(vec.dtype)
    return (vec * keep[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


# ---------------------------------------------------------------------------
# classical-quantum ensembles


class CqEnsemble:
    """Joint state ``sum_c p(c) |c><c| (x) rho_c`` over binary/finite classical axes.

    ``probs`` has one axis per classical variable.  Output states are given as
    a table ``table[k]`` (matrices or diagonals) together with ``index``, an
    integer array of the same shape as ``probs`` mapping every configuration
    to its table row.  Passing ``index=None`` means ``table`` is indexed by the
    flattened configuration.
    """

    def __init__(self, probs, table, index=None):
        probs = np.asarray(probs, dtype=float)
        validate_distribution(probs.ravel())
        table = np.asarray(table)
        if index is None:
            index = np.arange(probs.size).reshape(probs.shape)
        index = np.asarray(index)
        if index.shape != probs.shape:
            raise DimMismatch(f"index shape {index.shape} vs probs {probs.shape}")
        if index.max() >= table.shape[0]:
            raise DimMismatch("state index out of range")
        self.probs = np.clip(probs, 0.0, None)
        self.table = table
        self.index = index
        self.diagonal = not np.iscomplexobj(table)

    @property
    def n_vars(self):
        return self.probs.ndim

    def _groups(self, axes):
        """Marginal weights and normalised conditional states for a grouping."""
        axes = tuple(sorted(set(axes)))
        other = tuple(a for a in range(self.n_vars) if a not in axes)
        perm = axes + other
        p = np.transpose(self.probs, perm)
        idx = np.transpose(self.index, perm)
        gshape = p.shape[: len(axes)]
        n_groups = int(np.prod(gshape, dtype=int)) if axes else 1
        p = p.reshape(n_groups, -1)
        idx = idx.reshape(n_groups, -1)
        weights = np.zeros((n_groups, self.table.shape[0]))
        rows = np.repeat(np.arange(n_groups), idx.shape[1])
        np.add.at(weights, (rows, idx.ravel()), p.ravel())
        marg = weights.sum(axis=1)
        safe = np.where(marg > 0, marg, 1.0)
        cond = weights / safe[:, None]
        states = np.tensordot(cond, self.table, axes=(1, 0))
        return marg.reshape(gshape) if axes else marg, states.reshape(gshape + self.table.shape[1:])

    def entropy_b_given(self, axes=()):
        """``H(B | C)`` for classical axes ``C``."""
        marg, states = self._groups(axes)
        ent = entropies(states.reshape((-1,) + self.table.shape[1:]))
        return float((marg.ravel() * ent).sum())

    def classical_entropy(self, axes):
        axes = tuple(sorted(set(axes)))
        if not axes:
            return 0.0
        other = tuple(a for a in range(self.n_vars) if a not in axes)
        return shannon_entropy(self.probs.sum(axis=other) if other else self.probs)

    def mutual_information(self, a_axes, c_axes=()):
        """``I(A; B | C)`` with classical ``A``, ``C`` and the quantum output ``B``."""
        ac = tuple(set(a_axes) | set(c_axes))
        return max(self.entropy_b_given(c_axes) - self.entropy_b_given(ac), 0.0)

    def classical_mutual_information(self, a_axes, b_axes, c_axes=()):
        """``I(A; A' | C)`` between classical variables."""
        h = self.classical_entropy
        a, b, c = set(a_axes), set(b_axes), set(c_axes)
        val = h(a | c) + h(b | c) - h(c) - h(a | b | c)
        return max(val, 0.0)

    def conditional_entropy(self, x_axes, c_axes=(), quantum=True):
        """``H(X | C B)`` (or ``H(X | C)`` when ``quantum`` is false)."""
        h = self.classical_entropy
        base = h(set(x_axes) | set(c_axes)) - h(c_axes)
        if quantum:
            base -= self.mutual_information(x_axes, c_axes)
        return max(base, 0.0)

    def bhattacharyya(self, target, c_axes=(), quantum=True):
        """``Z(X | C B)`` for a binary target axis.

        Uses ``2 sqrt(p0 p1) * sqrtF`` per conditioning value, which is the
        classical Bhattacharyya parameter on commuting states.
        """
        if self.probs.shape[target] != 2:
            raise DimMismatch("Z is defined for a binary target only")
        c_axes = tuple(sorted(set(c_axes) - {target}))
        axes = c_axes + (target,)
        marg, states = self._groups(axes)
        # _groups sorts axes; locate the target within the sorted grouping
        order = tuple(sorted(axes))
        t = order.index(target)
        marg = np.moveaxis(marg, t, -1).reshape(-1, 2)
        tail = self.table.shape[1:]
        states = np.moveaxis(states, t, -1 - len(tail)).reshape((-1, 2) + tail)
        coef = 2.0 * np.sqrt(marg[:, 0] * marg[:, 1])
        if not quantum:
            return float(coef.sum())
        live = coef > 0
        if not np.any(live):
            return 0.0
        sf = sqrt_fidelities(states[live, 0], states[live, 1])
        return float((coef[live] * sf).sum())


def conditional_quantities(ensemble, x_axis=0, y_axes=()):
    """``H(X|B)``, ``I(X;B|Y)`` and ``Z(X|B)`` of a cq ensemble."""
    return {
        "H(X|B)": ensemble.conditional_entropy((x_axis,)),
        "I(X;B|Y)": ensemble.mutual_information((x_axis,), y_axes),
        "Z(X|B)": ensemble.bhattacharyya(x_axis),
    }
