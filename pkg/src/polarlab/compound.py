"""Universal polar codes for compound channels by chaining (alignment).

Positions of a chained code are *logical* bits, each carried by one or more
physical *carriers* ``(block, sender, index)`` (1-based index within a
block of length N).  Aligning an index that is good only for member 1 in
one composite with an index good only for member 2 in the sibling composite
merges them into one logical bit whose carriers all take the same value
(the extra CNOT of the construction, applied as a GF(2) copy at encode
time).  A logical bit is good for a member when any of its carriers is.

At every level the ``t``-th unaligned class-II position of the left
composite is paired with the ``t``-th class-III position of the right
composite.  The unpaired surplus is frozen; the left composite's class-III
and the right composite's class-II positions stay unaligned and move up to
the next level.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .channels import CompoundSet, CqMac
from .decoder import QuantumSCDecoder
from .errors import BudgetExceeded, InvariantViolation, RateInfeasible
from .multiuser import as_path, chain_rule_rates, mac_split_params
from .polar.shaping import resolve_threshold
from .polar.split import split_params
from .polar.transform import all_words


@dataclass(frozen=True, eq=False)
class GoodBadPartition:
    """Good/bad sets of two members and the four-way split (1-based indices)."""

    N: int
    threshold: float
    G1: tuple
    G2: tuple
    sqrt_fid: tuple = ()

    @property
    def B1(self):
        return tuple(i for i in range(1, self.N + 1) if i not in set(self.G1))

    @property
    def B2(self):
        return tuple(i for i in range(1, self.N + 1) if i not in set(self.G2))

    def _cap(self, a, b):
        return tuple(sorted(set(a) & set(b)))

    @property
    def A_I(self):
        return self._cap(self.G1, self.G2)

    @property
    def A_II(self):
        return self._cap(self.G1, self.B2)

    @property
    def A_III(self):
        return self._cap(self.B1, self.G2)

    @property
    def A_IV(self):
        return self._cap(self.B1, self.B2)

    def classes(self):
        return {"A_I": self.A_I, "A_II": self.A_II, "A_III": self.A_III, "A_IV": self.A_IV}


def good_set(sqrt_fid, threshold):
    return tuple(int(i) + 1 for i in np.flatnonzero(np.asarray(sqrt_fid) < threshold))


def partition(setW, N, threshold=None, beta=None, params=None):
    """Partition ``[1, N]`` by goodness (``sqrtF < threshold``) for two members."""
    members = setW.members if isinstance(setW, CompoundSet) else tuple(setW)
    if len(members) != 2:
        raise ValueError("partition takes exactly two members; use extend_k_members for more")
    t = resolve_threshold(N, threshold, beta)
    sfs = params or [split_params(w, N).sqrt_fid for w in members]
    return GoodBadPartition(N, t, good_set(sfs[0], t), good_set(sfs[1], t), tuple(np.asarray(s) for s in sfs))


# ---------------------------------------------------------------------------
# logical positions and composites


@dataclass(eq=False)
class LogicalPosition:
    carriers: list
    good: np.ndarray  # per member
    role: str = "frozen"

    def key(self):
        return min(self.carriers)

    def shifted(self, offset):
        return LogicalPosition([(b + offset, s, i) for b, s, i in self.carriers], self.good.copy(), self.role)


@dataclass(eq=False)
class _Composite:
    positions: list
    II: list = field(default_factory=list)
    III: list = field(default_factory=list)


def _merge(a, b):
    return LogicalPosition(sorted(a.carriers + b.carriers), a.good | b.good, "info")


def _run_levels(units, n_unit_blocks, levels, group, new, edges, sender=0, level_offset=0):
    """Chain ``2**len(levels)`` copies of a composite.

    ``units`` are the positions of one copy (one sender); ``group`` are the
    members the composite is already reliable for and ``new`` the member
    being aligned.  ``levels`` lists, per level, whether this sender is
    aligned at that level (inactive levels just concatenate).
    """
    n_copies = 1 << len(levels)
    comps = []
    for c in range(n_copies):
        pos = [p.shifted(c * n_unit_blocks) for p in units]
        comp = _Composite(pos)
        for p in pos:
            g = bool(np.all(p.good[group]))
            nw = bool(p.good[new])
            if g and nw:
                p.role = "info"
            elif g:
                comp.II.append(p)
            elif nw:
                comp.III.append(p)
            else:
                p.role = "frozen"
        comp.II.sort(key=LogicalPosition.key)
        comp.III.sort(key=LogicalPosition.key)
        comps.append(comp)
    residual_counts = []
    for lvl, active in enumerate(levels, start=1):
        nxt = []
        for j in range(0, len(comps), 2):
            L, R = comps[j], comps[j + 1]
            merged_pos = [p for p in L.positions + R.positions]
            if active:
                k = min(len(L.II), len(R.III))
                out = []
                for a, b in zip(L.II[:k], R.III[:k]):
                    m = _merge(a, b)
                    out.append(m)
                    edges.append(
                        {
                            "level": level_offset + lvl,
                            "sender": sender,
                            "src": list(a.key()),
                            "dst": list(b.key()),
                        }
                    )
                paired = {id(a) for a in L.II[:k]} | {id(b) for b in R.III[:k]}
                for p in L.II[k:] + R.III[k:]:
                    p.role = "surplus"
                merged_pos = [p for p in merged_pos if id(p) not in paired] + out
                II = sorted(R.II, key=LogicalPosition.key)
                III = sorted(L.III, key=LogicalPosition.key)
            else:
                II = sorted(L.II + R.II, key=LogicalPosition.key)
                III = sorted(L.III + R.III, key=LogicalPosition.key)
            nxt.append(_Composite(merged_pos, II, III))
        comps = nxt
        residual_counts.append(sum(len(c.II) + len(c.III) for c in comps))
    (top,) = comps
    for p in top.II + top.III:
        p.role = "residual"
    return top.positions, residual_counts


# ---------------------------------------------------------------------------
# schedules


@dataclass(eq=False)
class ChainingSchedule:
    """Result of chaining: logical positions, alignment edges and decode orders.

    ``block_order[member]`` is the SC order inside one block as a list of
    ``(sender, index)``; ``decode_order(member)`` is the total order over all
    carriers for that member.
    """

    N: int
    levels: int
    n_blocks: int
    n_members: int
    n_senders: int
    positions: list
    edges: list
    residual_counts: dict
    block_order: list
    partitions: dict = field(default_factory=dict)

    # -- accounting ---------------------------------------------------------

    def info_positions(self, sender=None):
        return [p for p in self.positions if p.role == "info" and (sender is None or p.carriers[0][1] == sender)]

    def count(self, role, sender=None):
        return sum(1 for p in self.positions if p.role == role and (sender is None or p.carriers[0][1] == sender))

    def rate(self, sender=None):
        """Information bits per block use (per sender when given)."""
        return len(self.info_positions(sender)) / (self.n_blocks * self.N)

    def incompatible_fraction(self, sender=0):
        return self.count("residual", sender) / (self.n_blocks * self.N)

    # -- decoding order -----------------------------------------------------

    def measured_carrier(self, pos, member):
        good = [c for c in pos.carriers if self._carrier_good(c, member)]
        if not good:
            raise InvariantViolation(f"logical position {pos.carriers} has no carrier good for member {member}")
        return min(good)

    def _carrier_good(self, carrier, member):
        return bool(self._good_lookup[(member,) + tuple(carrier)])

    def decode_order(self, member):
        """Topological order of every carrier for ``member`` (ties to lowest block, then SC step)."""
        step_of = {si: t for t, si in enumerate(self.block_order[member])}
        nodes = [(b, s, i) for b in range(self.n_blocks) for s, i in self.block_order[member]]
        succ = {n: [] for n in nodes}
        indeg = {n: 0 for n in nodes}
        for b in range(self.n_blocks):
            seq = [(b, s, i) for s, i in self.block_order[member]]
            for u, v in zip(seq, seq[1:]):
                succ[u].append(v)
                indeg[v] += 1
        for p in self.positions:
            if p.role == "info" and len(p.carriers) > 1:
                first = self.measured_carrier(p, member)
                for c in p.carriers:
                    if c != first:
                        succ[first].append(c)
                        indeg[c] += 1
        heap = [(n[0], step_of[(n[1], n[2])], n) for n in nodes if indeg[n] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            _, _, n = heapq.heappop(heap)
            order.append(n)
            for v in succ[n]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, (v[0], step_of[(v[1], v[2])], v))
        if len(order) != len(nodes):
            raise InvariantViolation(f"decode dependencies for member {member} contain a cycle")
        return order

    def check_decode_order(self, member, order=None):
        """No carrier is decoded before its block predecessor or its measured partner."""
        order = order or self.decode_order(member)
        at = {c: t for t, c in enumerate(order)}
        for b in range(self.n_blocks):
            seq = [at[(b, s, i)] for s, i in self.block_order[member]]
            if seq != sorted(seq):
                return False
        for p in self.positions:
            if p.role == "info" and len(p.carriers) > 1:
                first = self.measured_carrier(p, member)
                if any(at[c] < at[first] for c in p.carriers):
                    return False
        return True

    # -- encoding -----------------------------------------------------------

    def scatter(self, values, sender=0):
        """Block input words ``u`` (n_blocks x N) from one bit per logical position of ``sender``."""
        pos = [p for p in self.positions if p.carriers[0][1] == sender]
        values = np.asarray(values, dtype=np.uint8)
        if values.shape != (len(pos),):
            raise ValueError(f"expected {len(pos)} logical values, got {values.shape}")
        u = np.zeros((self.n_blocks, self.N), dtype=np.uint8)
        for p, v in zip(pos, values):
            for b, _, i in p.carriers:
                u[b, i - 1] = v
        return u

    # -- export -------------------------------------------------------------

    def to_dict(self):
        def carriers(roles):
            return [[list(c) for c in p.carriers] for p in self.positions if p.role in roles]

        return {
            "N": self.N,
            "levels": self.levels,
            "n_blocks": self.n_blocks,
            "n_members": self.n_members,
            "n_senders": self.n_senders,
            "edges": self.edges,
            "info": carriers(("info",)),
            "frozen_surplus": carriers(("surplus",)),
            "residual": carriers(("residual",)),
            "frozen": carriers(("frozen",)),
            "residual_counts": {str(k): v for k, v in self.residual_counts.items()},
            "rate": self.rate(),
            "decode_order": {str(m): [list(c) for c in self.decode_order(m)] for m in range(self.n_members)},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _base_positions(good_by_member, sender=0):
    """One block's positions for a sender; ``good_by_member`` is (members, N) boolean."""
    good = np.asarray(good_by_member, dtype=bool)
    return [LogicalPosition([(0, sender, i + 1)], good[:, i].copy()) for i in range(good.shape[1])]


def _lookup(total_blocks, n_members, good_tables):
    """Per-carrier goodness ``[member, block, sender, index]`` (index 1-based)."""
    n_senders, N = good_tables.shape[1], good_tables.shape[2]
    out = np.zeros((n_members, total_blocks, n_senders, N + 1), dtype=bool)
    out[:, :, :, 1:] = good_tables[:, None, :, :]
    return out


def build_chaining(part, m):
    """Chain ``2**m`` blocks of a two-member partition."""
    if m < 1:
        raise ValueError("need at least one level")
    good = np.zeros((2, part.N), dtype=bool)
    good[0, np.asarray(part.G1, dtype=int) - 1] = True
    good[1, np.asarray(part.G2, dtype=int) - 1] = True
    edges = []
    positions, res = _run_levels(_base_positions(good), 1, [True] * m, [0], 1, edges)
    sched = ChainingSchedule(
        part.N, m, 1 << m, 2, 1, positions, edges, {0: res},
        [[(0, i) for i in range(1, part.N + 1)]] * 2, {0: part},
    )
    sched._good_lookup = _lookup(1 << m, 2, good[:, None, :])
    return sched


def residual_fraction_formula(part, m):
    """``(|A_II| + |A_III|) / (2**m N)`` as an exact fraction ``(numerator, denominator)``."""
    return len(part.A_II) + len(part.A_III), (1 << m) * part.N


def compound_rate(part, schedule):
    """Rate of the chained code; checked against the smaller good-set fraction."""
    r = schedule.rate()
    bound = min(len(part.G1), len(part.G2)) / part.N
    if r > bound + 1e-12:
        raise InvariantViolation(f"chained rate {r} exceeds min good fraction {bound}")
    return r


def predicted_rate(part, m):
    """``(2**m |A_I| + (2**m - 1) min(|A_II|, |A_III|)) / (2**m N)``."""
    M = 1 << m
    return (M * len(part.A_I) + (M - 1) * min(len(part.A_II), len(part.A_III))) / (M * part.N)


def extend_k_members(setW, N, m, threshold=None, beta=None, params=None):
    """Align ``k`` members one after another, ``m`` levels per stage.

    Stage ``s`` takes the composite that is reliable for members
    ``0..s-1`` and chains ``2**m`` copies of it against member ``s``.
    """
    members = setW.members if isinstance(setW, CompoundSet) else tuple(setW)
    k = len(members)
    if k < 2:
        raise ValueError("need at least two members")
    t = resolve_threshold(N, threshold, beta)
    sfs = params or [split_params(w, N).sqrt_fid for w in members]
    good = np.array([np.asarray(s) < t for s in sfs])
    units = _base_positions(good)
    n_unit = 1
    edges = []
    residual = {}
    for stage in range(1, k):
        positions, res = _run_levels(units, n_unit, [True] * m, list(range(stage)), stage, edges,
                                     level_offset=(stage - 1) * m)
        residual[stage] = res
        n_unit <<= m
        units = positions
    sched = ChainingSchedule(N, m * (k - 1), n_unit, k, 1, units, edges, residual,
                             [[(0, i) for i in range(1, N + 1)]] * k)
    sched._good_lookup = _lookup(n_unit, k, good[:, None, :])
    return sched


# ---------------------------------------------------------------------------
# compound MAC


def compound_mac_schedule(setM, paths, N, m, threshold=None, beta=None, target_rates=None):
    """Per-sender alternating alignment for a two-member compound MAC.

    ``paths[l]`` is member ``l``'s chain-rule path.  Level ``j`` aligns
    sender ``(j - 1) mod k``, so ``m`` rounds give every sender ``m``
    halvings.  With ``target_rates`` the call raises
    :class:`RateInfeasible` unless every target is at most the smaller of
    the two members' chain-rule rates for that sender.
    """
    members = setM.members if isinstance(setM, CompoundSet) else tuple(setM)
    if len(members) != 2 or not all(isinstance(w, CqMac) for w in members):
        raise ValueError("compound MAC schedules take exactly two CqMac members")
    k = members[0].n_senders
    paths = [as_path(p, k) for p in paths]
    rate_pts = [chain_rule_rates(w, p, N) for w, p in zip(members, paths)]
    if target_rates is not None:
        for s in range(k):
            cap = min(r.rates[s] for r in rate_pts)
            if target_rates[s] > cap + 1e-12:
                raise RateInfeasible(f"sender {s}: target {target_rates[s]} exceeds min chain-rule rate {cap}")
    t = resolve_threshold(N, threshold, beta)
    sfs = [mac_split_params(w, p, N)[1] for w, p in zip(members, paths)]  # [member][sender] -> (N,)
    good = np.array([[np.asarray(sfs[l][s]) < t for s in range(k)] for l in range(2)])  # (2, k, N)
    parts = {s: GoodBadPartition(N, t, good_set(sfs[0][s], t), good_set(sfs[1][s], t), (sfs[0][s], sfs[1][s]))
             for s in range(k)}
    n_levels = m * k
    edges = []
    positions = []
    residual = {}
    for s in range(k):
        active = [((j - 1) % k) == s for j in range(1, n_levels + 1)]
        pos, res = _run_levels(_base_positions(good[:, s, :], sender=s), 1, active, [0], 1, edges, sender=s)
        positions += pos
        residual[s] = res
    edges.sort(key=lambda e: (e["level"], e["sender"], e["src"]))
    orders = [[(s, i) for s, i in p.steps()] for p in paths]
    sched = ChainingSchedule(N, n_levels, 1 << n_levels, 2, k, positions, edges, residual, orders, parts)
    sched._good_lookup = _lookup(1 << n_levels, 2, good)
    sched.member_rates = [r.rates for r in rate_pts]
    return sched


# ---------------------------------------------------------------------------
# exact decoding of a chained single-user code


def _measured_masks(schedule, member):
    """Per-block boolean masks of carriers that ``member`` actually measures."""
    masks = np.zeros((schedule.n_blocks, schedule.N), dtype=bool)
    for p in schedule.info_positions():
        b, _, i = schedule.measured_carrier(p, member)
        masks[b, i - 1] = True
    return masks


def compound_decode_exact(schedule, setW, active_member, chained_input=None):
    """Exact SC success probability of a chained code on the active member.

    Blocks are independent tensor factors and every carrier that is not
    measured (frozen, surplus, residual, or an aligned partner already
    decoded elsewhere) is known, so success factorises over blocks.  Without
    ``chained_input`` the result is averaged over uniform values of every
    logical position.  Also returns ``fidelity_bound = 2 sum sqrtF`` over
    the measured carriers.
    """
    members = setW.members if isinstance(setW, CompoundSet) else tuple(setW)
    w = members[active_member]
    N = schedule.N
    dec = QuantumSCDecoder(w, N)
    masks = _measured_masks(schedule, active_member)
    order = schedule.decode_order(active_member)
    if not schedule.check_decode_order(active_member, order):
        raise InvariantViolation("decode order violates an SC dependency")
    sf = np.array([dec.tree.step_bhattacharyya(k) for k in range(1, N + 1)])
    bound = float(2.0 * sum(sf[masks[b]].sum() for b in range(schedule.n_blocks)))
    n_logical = len(schedule.positions)
    words = all_words(N)
    tables = {}
    for b in range(schedule.n_blocks):
        key = masks[b].tobytes()
        if key not in tables:
            tables[key] = np.array([dec.genie_path(masks[b], u)[0] for u in words])
    block_tab = np.array([tables[masks[b].tobytes()] for b in range(schedule.n_blocks)])
    if chained_input is not None:
        u = np.asarray(chained_input, dtype=np.int64).reshape(schedule.n_blocks, N)
        idx = u @ (1 << np.arange(N - 1, -1, -1))
        p = float(np.prod(block_tab[np.arange(schedule.n_blocks), idx]))
    else:
        if n_logical > 20:
            raise BudgetExceeded(f"{n_logical} logical positions is too many to enumerate")
        # word index of block b as a linear map of the logical values
        weight = np.zeros((n_logical, schedule.n_blocks), dtype=np.int64)
        for j, pos in enumerate(schedule.positions):
            for b, _, i in pos.carriers:
                weight[j, b] += 1 << (N - i)
        idx = all_words(n_logical).astype(np.int64) @ weight
        p = float(np.mean(np.prod(block_tab[np.arange(schedule.n_blocks), idx], axis=1)))
    return {"p_success": p, "fidelity_bound": bound, "measured": masks}
