from fractions import Fraction

import numpy as np
import pytest

from polarlab import channels
from polarlab.compound import (
    GoodBadPartition,
    build_chaining,
    compound_decode_exact,
    compound_mac_schedule,
    compound_rate,
    extend_k_members,
    good_set,
    partition,
    predicted_rate,
    residual_fraction_formula,
)
from polarlab.decoder import block_error
from polarlab.errors import BudgetExceeded, RateInfeasible
from polarlab.polar.classical import bec_erasure_probabilities
from polarlab.polar.construct import PolarCode

USELESS = channels.CqChannel(np.array([np.eye(2) / 2] * 2), "useless")
PERFECT = channels.overlap_cq(0.0)


def hand_partition(N, G1, G2, t=0.5):
    return GoodBadPartition(N, t, tuple(G1), tuple(G2))


def hand_params(N, G1, G2):
    return [np.array([0.0 if i in G else 1.0 for i in range(1, N + 1)]) for G in (G1, G2)]


class TestPartition:
    def test_identical_members(self):
        p = partition([channels.bsc(0.1), channels.bsc(0.1)], 8, threshold=0.2)
        assert p.A_II == () and p.A_III == ()

    def test_perfect_versus_useless(self):
        p = partition([USELESS, PERFECT], 4, threshold=0.3)
        assert p.A_I == () and p.A_II == () and p.A_IV == ()
        assert p.A_III == p.G2 == (1, 2, 3, 4)

    def test_bec_pair_against_recursion(self):
        t = 0.1
        p = partition([channels.bec(0.3), channels.bec(0.5)], 8, threshold=t)
        for eps, G in ((0.3, p.G1), (0.5, p.G2)):
            e = bec_erasure_probabilities(eps, 8)
            assert G == tuple(int(i) + 1 for i in np.flatnonzero(e < t))
        assert set(p.A_I) | set(p.A_II) | set(p.A_III) | set(p.A_IV) == set(range(1, 9))

    def test_good_set_is_strict(self):
        assert good_set([0.1, 0.2, 0.3], 0.2) == (1,)

    def test_two_members_only(self):
        with pytest.raises(ValueError):
            partition([channels.bsc(0.1)] * 3, 4, threshold=0.1)


class TestChaining:
    def test_no_incompatible_indices(self):
        part = hand_partition(4, (2, 3, 4), (2, 3, 4))
        s = build_chaining(part, 2)
        assert s.edges == []
        assert s.rate() == pytest.approx(0.75)
        order = s.decode_order(0)
        assert order == [(b, 0, i) for b in range(4) for i in range(1, 5)]

    def test_four_by_four(self):
        part = hand_partition(8, (1, 2, 3, 4), (5, 6, 7, 8))
        s = build_chaining(part, 1)
        assert len(s.edges) == 4
        num, den = residual_fraction_formula(part, 1)
        assert Fraction(num, den) == Fraction(8, 16)
        assert s.incompatible_fraction() == pytest.approx(num / den)

    def test_three_by_five(self):
        part = hand_partition(8, (1, 2, 3), (4, 5, 6, 7, 8))
        s = build_chaining(part, 1)
        assert len(s.edges) == 3
        assert s.count("surplus") == 2

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_halving_law(self, m):
        part = partition([channels.bec(0.3), channels.bec(0.5)], 8, threshold=0.2)
        s = build_chaining(part, m)
        num, den = residual_fraction_formula(part, m)
        assert s.count("residual") * den == num * s.n_blocks * s.N

    def test_single_edge_example(self):
        part = hand_partition(4, (3, 4), (2, 4))
        s = build_chaining(part, 1)
        assert len(s.edges) == 1
        assert s.rate() == pytest.approx(predicted_rate(part, 1)) == pytest.approx(0.375)
        assert compound_rate(part, s) <= 0.5
        for member in (0, 1):
            assert s.check_decode_order(member)

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_rate_grows_toward_union(self, m):
        part = hand_partition(8, (1, 2, 5, 6), (3, 4, 5, 6))
        s = build_chaining(part, m)
        assert s.rate() == pytest.approx(predicted_rate(part, m))
        assert s.rate() <= len(set(part.A_I) | set(part.A_II)) / 8

    def test_every_info_position_good_for_both(self):
        s = build_chaining(hand_partition(8, (1, 2, 5, 6, 7), (3, 4, 5, 6, 8)), 3)
        for p in s.info_positions():
            assert p.good.all()

    def test_identical_rate(self):
        part = hand_partition(8, (4, 6, 7, 8), (4, 6, 7, 8))
        assert compound_rate(part, build_chaining(part, 2)) == pytest.approx(0.5)

    def test_scatter_copies_aligned_values(self):
        s = build_chaining(hand_partition(4, (3, 4), (2, 4)), 1)
        values = np.ones(len(s.positions), dtype=np.uint8)
        u = s.scatter(values)
        assert u.shape == (2, 4) and u.all()
        with pytest.raises(ValueError):
            s.scatter(values[:-1])

    def test_json_is_canonical(self):
        s = build_chaining(hand_partition(4, (3, 4), (2, 4)), 2)
        assert s.to_json() == build_chaining(hand_partition(4, (3, 4), (2, 4)), 2).to_json()
        assert '"edges"' in s.to_json()

    def test_levels_checked(self):
        with pytest.raises(ValueError):
            build_chaining(hand_partition(4, (), ()), 0)


class TestKMembers:
    def test_two_members_match_build_chaining(self):
        G1, G2 = (3, 4), (2, 4)
        a = extend_k_members([None, None], 4, 2, threshold=0.5, params=hand_params(4, G1, G2))
        b = build_chaining(hand_partition(4, G1, G2), 2)
        assert a.to_dict()["info"] == b.to_dict()["info"]
        assert a.edges == b.edges

    def test_repeated_member_adds_no_edges(self):
        params = hand_params(4, (3, 4), (2, 4))
        s = extend_k_members([None] * 3, 4, 1, threshold=0.5, params=params + [params[1]])
        assert all(e["level"] <= 1 for e in s.edges)

    def test_three_becs_intersection(self):
        ws = [channels.bec(e) for e in (0.2, 0.35, 0.5)]
        t = 0.2
        s = extend_k_members(ws, 8, 1, threshold=t)
        common = set(range(1, 9))
        for e in (0.2, 0.35, 0.5):
            common &= {int(i) + 1 for i in np.flatnonzero(bec_erasure_probabilities(e, 8) < t)}
        assert s.edges == []
        assert len(s.info_positions()) == len(common) * s.n_blocks


class TestCompoundMac:
    def test_identical_members(self):
        mac = channels.adder_mac()
        s = compound_mac_schedule([mac, mac], ["0110", "0110"], 2, 1, threshold=0.2)
        assert s.edges == []

    def test_product_members_differing_in_first_sender(self):
        a = channels.product_mac(channels.bec(0.3), channels.bsc(0.1))
        b = channels.product_mac(channels.bec(0.5), channels.bsc(0.1))
        s = compound_mac_schedule([a, b], ["0101", "0101"], 2, 1, threshold=0.3)
        assert s.partitions[1].A_II == () and s.partitions[1].A_III == ()
        assert not any(e["sender"] == 1 for e in s.edges)

    def test_corner_paths_per_sender_halving(self):
        mac = channels.adder_mac()
        s = compound_mac_schedule([mac, mac], ["0011", "1100"], 2, 1, threshold=0.5)
        assert s.n_blocks == 4
        for sender, part in s.partitions.items():
            num = len(part.A_II) + len(part.A_III)
            # one active level per sender halves the per-block fraction num / N
            assert s.incompatible_fraction(sender) == pytest.approx(num / (2 * s.N))
            assert s.check_decode_order(0) and s.check_decode_order(1)

    def test_edges_on_both_senders(self):
        mac = channels.adder_mac()
        s = compound_mac_schedule([mac, mac], ["00011110", "00111001"], 4, 1, threshold=0.05)
        assert {e["sender"] for e in s.edges} == {0, 1}
        assert {(e["sender"], e["level"]) for e in s.edges} == {(0, 1), (1, 2)}
        for sender in (0, 1):
            assert s.incompatible_fraction(sender) == pytest.approx(0.25)
        assert s.check_decode_order(0) and s.check_decode_order(1)

    def test_rate_infeasible(self):
        mac = channels.adder_mac()
        with pytest.raises(RateInfeasible):
            compound_mac_schedule([mac, mac], ["0011", "1100"], 2, 1, threshold=0.2, target_rates=(0.9, 0.9))

    def test_needs_macs(self):
        with pytest.raises(ValueError):
            compound_mac_schedule([channels.bsc(0.1)] * 2, ["01", "01"], 1, 1)


class TestCompoundDecode:
    def test_perfect_members(self):
        part = hand_partition(4, (3, 4), (2, 4))
        s = build_chaining(part, 1)
        for member in (0, 1):
            r = compound_decode_exact(s, [PERFECT, PERFECT], member)
            assert r["p_success"] == pytest.approx(1.0, abs=1e-12)

    def test_no_edges_reduces_to_block_error(self):
        ws = [channels.bsc(0.05), channels.bec(0.3)]
        part = partition(ws, 4, threshold=0.3)
        s = build_chaining(part, 1)
        assert s.edges == []
        for member, w in enumerate(ws):
            code = PolarCode(4, part.A_I, None)
            single = 1 - block_error(code, w.to_cq()).P_e_exact
            r = compound_decode_exact(s, ws, member)
            assert r["p_success"] == pytest.approx(single**2, abs=1e-12)

    def test_chained_success_above_baseline(self):
        ws = [channels.bsc(0.05), channels.bec(0.3)]
        s = build_chaining(hand_partition(4, (3, 4), (2, 4)), 1)
        for member in (0, 1):
            r = compound_decode_exact(s, ws, member)
            assert r["p_success"] >= 1 - r["fidelity_bound"] - 1e-12
            assert r["measured"].sum() == len(s.info_positions())

    def test_fixed_input(self):
        ws = [channels.bsc(0.05), channels.bec(0.3)]
        s = build_chaining(hand_partition(4, (3, 4), (2, 4)), 1)
        u = s.scatter(np.zeros(len(s.positions), dtype=np.uint8))
        r = compound_decode_exact(s, ws, 0, chained_input=u)
        assert 0.0 < r["p_success"] <= 1.0

    def test_enumeration_limit(self):
        s = build_chaining(hand_partition(8, (1, 2), (3, 4)), 2)
        with pytest.raises(BudgetExceeded):
            compound_decode_exact(s, [channels.bsc(0.1), channels.bsc(0.1)], 0)
