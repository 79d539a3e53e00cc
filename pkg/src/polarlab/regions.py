"""Achievable rate regions as explicit linear inequality systems.

Every region is a list of constraints ``sum_j c_j R_j <= bound`` whose
bounds are exact entropic quantities of a given input distribution.  Rates
are implicitly non-negative.  Vertices are found by brute force over all
``d``-subsets of tight constraints, which is cheap for the at most 18
constraints in 4 variables used here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import qmath
from .channels import BroadcastChannel, CqMac, induced_mac
from .errors import DimMismatch, InvalidFactorization, InvariantViolation
from .polar.split import output_table

TOL_VERTEX = 1e-9
TOL_REGION = 1e-6


@dataclass(eq=False)
class RateRegion:
    """``A R <= b`` over named rates, with the quantity behind each bound."""

    names: tuple
    A: np.ndarray
    b: np.ndarray
    labels: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        if self.A.shape != (len(self.b), len(self.names)) or len(self.labels) != len(self.b):
            raise DimMismatch("inconsistent region shapes")
        if not len(self.b) or not np.all(np.isfinite(self.b)):
            raise ValueError("a region needs finite bounds")
        if np.any(self.b < 0):
            # silence is always achievable; keep the raw values for reference
            self.provenance["raw_bounds"] = self.b.tolist()
            self.b = np.clip(self.b, 0.0, None)

    @property
    def dim(self):
        return len(self.names)

    def bound(self, label):
        return float(self.b[self.labels.index(label)])

    def slack(self, point):
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise DimMismatch(f"point has shape {point.shape}, region has {self.dim} rates")
        return self.b - self.A @ point

    def rows(self):
        """``(coefficients, bound, label)`` triples."""
        return [(tuple(int(c) for c in a), float(v), lab) for a, v, lab in zip(self.A, self.b, self.labels)]

    def vertices(self, tol=TOL_VERTEX):
        """Vertices of ``{R >= 0, A R <= b}``, lexicographically sorted."""
        d = self.dim
        A = np.vstack([self.A, -np.eye(d)])
        b = np.concatenate([self.b, np.zeros(d)])
        pts = []
        for rows in combinations(range(len(b)), d):
            M = A[list(rows)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            x = np.linalg.solve(M, b[list(rows)])
            if np.all(A @ x <= b + tol):
                pts.append(x)
        if not pts:
            return np.zeros((0, d))
        pts = np.unique(np.round(np.array(pts), 12) + 0.0, axis=0)
        return pts

    def project(self, matrix):
        """Convex polygon of the image of the region under a ``2 x dim`` map."""
        img = self.vertices() @ np.asarray(matrix, dtype=float).T
        return hull_2d(img)

    def to_dict(self):
        return {
            "names": list(self.names),
            "inequalities": [
                {"coefficients": list(c), "bound": v, "quantity": lab} for c, v, lab in self.rows()
            ],
            "vertices": self.vertices().tolist(),
            "provenance": self.provenance,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(list(self.names) + ["bound", "quantity"])
        for c, v, lab in self.rows():
            wr.writerow(list(c) + [f"{v:.17g}", lab])
        return buf.getvalue()


def hull_2d(points):
    """Counter-clockwise hull of 2-d points; degenerate inputs return the sorted unique points."""
    pts = np.unique(np.round(np.asarray(points, dtype=float), 12) + 0.0, axis=0)
    if len(pts) < 3:
        return pts
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return pts
    return pts[hull.vertices]


def point_in_region(region, point, tol=TOL_REGION):
    """``(inside, slack)``; inside means every slack and every rate is ``>= -tol``."""
    s = region.slack(point)
    ok = bool(np.all(s >= -tol) and np.all(np.asarray(point, dtype=float) >= -tol))
    return ok, s


# ---------------------------------------------------------------------------
# MAC regions


def _subset_name(names, subset):
    return "".join(names[i] for i in subset)


def _mac_bounds(ens, axes, names, out="B"):
    """``sum_{s in S} R_s <= I(X_S; B | X_{S^c})`` for every non-empty subset ``S``."""
    k = len(axes)
    rows, bounds, labels = [], [], []
    for size in range(1, k + 1):
        for sub in combinations(range(k), size):
            rest = tuple(i for i in range(k) if i not in sub)
            val = ens.mutual_information(tuple(axes[i] for i in sub), tuple(axes[i] for i in rest))
            row = np.zeros(k)
            row[list(sub)] = 1
            rows.append(row)
            bounds.append(val)
            cond = f"|{_subset_name(names, rest)}" if rest else ""
            labels.append(f"I({_subset_name(names, sub)};{out}{cond})")
    return rows, bounds, labels


def mac_region(mac, priors=None):
    """Region of a cq MAC under product inputs (all ``2^k - 1`` subset bounds).

    The provenance carries the two dominant-face endpoints for two senders.
    """
    if not isinstance(mac, CqMac):
        raise DimMismatch("mac_region expects a CqMac")
    k = mac.n_senders
    if priors is not None and len(priors) != k:
        raise DimMismatch(f"{len(priors)} priors for {k} senders")
    ens = mac.ensemble(priors)
    names = ("X", "Y") if k == 2 else tuple(f"X{s + 1}" for s in range(k))
    rows, bounds, labels = _mac_bounds(ens, tuple(range(k)), names)
    prov = {"channel": mac.label, "priors": None if priors is None else [list(map(float, p)) for p in priors]}
    if k == 2:
        prov["corners"] = [
            [ens.mutual_information((0,)), ens.mutual_information((1,), (0,))],
            [ens.mutual_information((0,), (1,)), ens.mutual_information((1,))],
        ]
    rate_names = ("R_x", "R_y") if k == 2 else tuple(f"R_{s + 1}" for s in range(k))
    return RateRegion(rate_names, np.array(rows), np.array(bounds), tuple(labels), prov)


# ---------------------------------------------------------------------------
# interference channel


def _receiver_macs(ic, dims=None):
    if isinstance(ic, (tuple, list)) and len(ic) == 2 and all(isinstance(m, CqMac) for m in ic):
        macs = tuple(ic)
    else:
        if dims is None:
            raise DimMismatch("a joint interference table needs receiver dims")
        macs = (induced_mac(ic, dims, 1), induced_mac(ic, dims, 2))
    if macs[0].alphabets != macs[1].alphabets or macs[0].n_senders != 2:
        raise DimMismatch("both receivers must see the same two senders")
    return macs


def hk_region(ic, aux, x1_map, x2_map, dims=None):
    """Han-Kobayashi region over ``(S1, S2, T1, T2)``.

    Parameters
    ----------
    ic : pair of CqMac or array_like
        Receiver-1 and receiver-2 MACs, or a joint table ``(X1, X2, D, D)``
        together with ``dims``.
    aux : sequence of four distributions
        Laws of ``V1, V2, V3, V4`` (independent).  Sender 1 encodes its
        private part ``V1`` and common part ``V3`` as ``x1_map[v1, v3]``;
        sender 2 uses ``x2_map[v2, v4]``.
    Notes
    -----
    Receiver ``r`` decodes its own private part and both common parts, so
    its seven bounds are the region of a three-sender MAC; both are kept in
    the provenance as ``mac_B1`` and ``mac_B2`` over ``(S_r, T1, T2)``.
    """
    macs = _receiver_macs(ic, dims)
    if len(aux) != 4:
        raise DimMismatch("need four auxiliary distributions")
    pv = [qmath.validate_distribution(p) for p in aux]
    x1 = np.asarray(x1_map, dtype=int)
    x2 = np.asarray(x2_map, dtype=int)
    if x1.shape != (len(pv[0]), len(pv[2])) or x2.shape != (len(pv[1]), len(pv[3])):
        raise DimMismatch("encoding maps must be indexed by (private, common)")
    X2 = macs[0].alphabets[1]
    probs = np.einsum("a,b,c,d->abcd", *pv)
    index = x1[:, None, :, None] * X2 + x2[None, :, None, :]
    names = ("S1", "S2", "T1", "T2")
    rows, bounds, labels, sub_regions = [], [], [], {}
    for r, mac in enumerate(macs, start=1):
        table = mac.outputs.reshape((-1,) + mac.outputs.shape[-2:])
        ens = qmath.CqEnsemble(probs, table, index)
        priv = r - 1  # axis of V1 or V2
        local = ("V%d" % r, "V3", "V4")
        rr, bb, ll = _mac_bounds(ens, (priv, 2, 3), local, out=f"B{r}")
        sub_regions[f"mac_B{r}"] = RateRegion((f"S{r}", "T1", "T2"), np.array(rr), np.array(bb), tuple(ll))
        for row, v, lab in zip(rr, bb, ll):
            full = np.zeros(4)
            full[[priv, 2, 3]] = row
            rows.append(full)
            bounds.append(v)
            labels.append(lab)
    region = RateRegion(names, np.array(rows), np.array(bounds), tuple(labels),
                        {"channel": [m.label for m in macs], "aux": [p.tolist() for p in pv]})
    region.sub_regions = sub_regions
    return region


HK_PROJECTION = np.array([[1, 0, 1, 0], [0, 1, 0, 1]])


def hk_rate_pairs(region):
    """Achievable ``(S1 + T1, S2 + T2)`` polygon of an HK region."""
    return region.project(HK_PROJECTION)


# ---------------------------------------------------------------------------
# broadcast channel


def _bc_ensembles(bc, probs, fmap):
    if not isinstance(bc, BroadcastChannel):
        raise DimMismatch("expected a BroadcastChannel")
    fmap = np.asarray(fmap, dtype=int)
    if fmap.shape != probs.shape:
        raise DimMismatch(f"map shape {fmap.shape} vs distribution {probs.shape}")
    if fmap.min() < 0 or fmap.max() >= bc.outputs.shape[0]:
        raise DimMismatch("map sends auxiliaries outside the input alphabet")
    return tuple(qmath.CqEnsemble(probs, output_table(bc.marginal(r)), fmap) for r in (1, 2))


def marton_region(bc, joint, fmap):
    """Binning region for ``x = f(u1, u2)`` under ``p(u1, u2)``."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise DimMismatch("joint law must be a 2-d table p(u1, u2)")
    p = qmath.validate_distribution(p.ravel()).reshape(p.shape)
    e1, e2 = _bc_ensembles(bc, p, fmap)
    i1 = e1.mutual_information((0,))
    i2 = e2.mutual_information((1,))
    iu = e1.classical_mutual_information((0,), (1,))
    return RateRegion(
        ("R1", "R2"),
        np.array([[1, 0], [0, 1], [1, 1]]),
        np.array([i1, i2, i1 + i2 - iu]),
        ("I(U1;B1)", "I(U2;B2)", "I(U1;B1)+I(U2;B2)-I(U1;U2)"),
        {"channel": bc.label, "I(U1;U2)": iu},
    )


def mgp_joint(p_v, p_v2_given_v, p_v1_given_v2v):
    """``p(v, v1, v2) = p(v) p(v2|v) p(v1|v2, v)`` with every factor validated."""
    p_v = np.asarray(p_v, dtype=float)
    c2 = np.asarray(p_v2_given_v, dtype=float)
    c1 = np.asarray(p_v1_given_v2v, dtype=float)
    nv, nv2 = c2.shape if c2.ndim == 2 else (None, None)
    if p_v.ndim != 1 or c2.ndim != 2 or c1.ndim != 3 or nv != p_v.size or c1.shape[:2] != (nv2, nv):
        raise InvalidFactorization("factor shapes must be p(v), p(v2|v)[v, v2], p(v1|v2,v)[v2, v, v1]")
    for name, arr in (("p(v)", p_v[None]), ("p(v2|v)", c2), ("p(v1|v2,v)", c1.reshape(-1, c1.shape[-1]))):
        if np.any(arr < -qmath.TOL_PROB) or np.any(np.abs(arr.sum(axis=-1) - 1) > qmath.TOL_PROB):
            raise InvalidFactorization(f"{name} is not a (conditional) distribution")
    return np.einsum("a,ac,cab->abc", p_v, c2, c1)


def mgp_quantities(bc, joint, phi):
    """Entropic terms of the superposition plus binning regions."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 3 or np.any(p < -qmath.TOL_PROB) or abs(p.sum() - 1) > qmath.TOL_PROB:
        raise InvalidFactorization("joint law p(v, v1, v2) must be a 3-d distribution")
    p = np.clip(p, 0.0, None)
    e1, e2 = _bc_ensembles(bc, p, phi)
    return {
        "I(V;B1)": e1.mutual_information((0,)),
        "I(V;B2)": e2.mutual_information((0,)),
        "I(V,V1;B1)": e1.mutual_information((0, 1)),
        "I(V,V2;B2)": e2.mutual_information((0, 2)),
        "I(V1;B1|V)": e1.mutual_information((1,), (0,)),
        "I(V2;B2|V)": e2.mutual_information((2,), (0,)),
        "I(V1;V2|V)": e1.classical_mutual_information((1,), (2,), (0,)),
    }


def mgp_corner_points(q):
    """The two constructive rate pairs.

    With ``I(V;B1) <= I(V;B2)`` they are
    ``(I(V,V1;B1) - I(V1;V2|V) - I(V;B2), I(V,V2;B2))`` and
    ``(I(V,V1;B1), I(V2;B2|V) - I(V1;V2|V))``; otherwise the receivers swap
    roles.  A negative coordinate is traded against the other one along the
    sum-rate face.
    """
    c = q["I(V1;V2|V)"]
    if q["I(V;B1)"] <= q["I(V;B2)"]:
        pts = [
            (q["I(V,V1;B1)"] - c - q["I(V;B2)"], q["I(V,V2;B2)"]),
            (q["I(V,V1;B1)"], q["I(V2;B2|V)"] - c),
        ]
    else:
        pts = [
            (q["I(V,V1;B1)"], q["I(V,V2;B2)"] - c - q["I(V;B1)"]),
            (q["I(V1;B1|V)"] - c, q["I(V,V2;B2)"]),
        ]
    return [_fold_negative(p) for p in pts]


def _fold_negative(p):
    """Move a negative coordinate onto the other one, keeping the sum fixed (origin if the sum is negative)."""
    r1, r2 = p
    if r1 < 0:
        r1, r2 = 0.0, r1 + r2
    elif r2 < 0:
        r1, r2 = r1 + r2, 0.0
    return (max(r1, 0.0), max(r2, 0.0))


def mgp_region(bc, joint, phi, with_common=False, tol=TOL_REGION):
    """Superposition plus binning region, optionally with a common rate ``R0``.

    ``joint`` is ``p(v, v1, v2)`` or a factor triple accepted by
    :func:`mgp_joint`.  Both corner points are checked for membership and
    stored in the provenance.
    """
    if isinstance(joint, (tuple, list)) and len(joint) == 3:
        joint = mgp_joint(*joint)
    q = mgp_quantities(bc, joint, phi)
    s1 = q["I(V,V1;B1)"] + q["I(V2;B2|V)"] - q["I(V1;V2|V)"]
    s2 = q["I(V,V2;B2)"] + q["I(V1;B1|V)"] - q["I(V1;V2|V)"]
    labels = (
        "I(V,V1;B1)",
        "I(V,V2;B2)",
        "I(V,V1;B1)+I(V2;B2|V)-I(V1;V2|V)",
        "I(V,V2;B2)+I(V1;B1|V)-I(V1;V2|V)",
    )
    bounds = [q["I(V,V1;B1)"], q["I(V,V2;B2)"], s1, s2]
    if with_common:
        names = ("R0", "R1", "R2")
        A = np.array([[1, 0, 0], [1, 1, 0], [1, 0, 1], [1, 1, 1], [1, 1, 1]])
        bounds = [min(q["I(V;B1)"], q["I(V;B2)"])] + bounds
        labels = ("min{I(V;B1),I(V;B2)}",) + labels
    else:
        names = ("R1", "R2")
        A = np.array([[1, 0], [0, 1], [1, 1], [1, 1]])
    corners = mgp_corner_points(q)
    region = RateRegion(names, A, np.array(bounds), labels, {"channel": bc.label, "quantities": q,
                                                             "corners": [list(c) for c in corners]})
    for c in corners:
        pt = (0.0,) + c if with_common else c
        ok, s = point_in_region(region, pt, tol)
        if not ok:
            raise InvariantViolation(f"corner {c} lies outside the region (slack {s.min():.3e})")
    return region


__all__ = [
    "RateRegion",
    "mac_region",
    "hk_region",
    "hk_rate_pairs",
    "marton_region",
    "mgp_region",
    "mgp_joint",
    "mgp_corner_points",
    "point_in_region",
]
