from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarlab import channels, qmath
from polarlab.errors import BadLength, BudgetExceeded, InvalidDistribution, LengthMismatch
from polarlab.polar import classical
from polarlab.polar.construct import PolarCode, check_coding_rule, coset_encode, construct, construction_csv, select_info_set
from polarlab.polar.shaping import broadcast_sets, resolve_threshold, shaping_info_set, shaping_sets
from polarlab.polar.split import conservation_check, split_channel, split_params
from polarlab.polar.transform import all_words, bit_reversal, encode, generator_matrix, log2_length

from ._helpers import h2, random_density, seeds


def explicit_generator(N):
    """``B_N F^{(x)n}`` built from Kronecker powers and a hand-made bit-reversal permutation."""
    n = int(np.log2(N))
    F = np.array([[1, 0], [1, 1]])
    G = np.array([[1]])
    for _ in range(n):
        G = np.kron(G, F)
    perm = [int(format(i, f"0{n}b")[::-1], 2) if n else 0 for i in range(N)]
    return G[perm] % 2


def brute_split(W, N):
    """``I`` and ``Z`` of every split channel by enumerating ``(u, y)`` of a classical channel."""
    W = np.asarray(W, dtype=float)
    G = explicit_generator(N)
    n_out = W.shape[1]
    words = list(product(range(2), repeat=N))
    ys = list(product(range(n_out), repeat=N))
    P = np.zeros((2**N, len(ys)))
    for a, u in enumerate(words):
        x = np.array(u) @ G % 2
        for b, y in enumerate(ys):
            P[a, b] = np.prod([W[x[k], y[k]] for k in range(N)]) / 2**N
    info, z = np.zeros(N), np.zeros(N)
    for i in range(N):
        # marginalise over u_{i+2..N}; group by (u^{i-1}, u_i, y)
        Q = P.reshape(2**i, 2, 2 ** (N - i - 1), -1).sum(axis=2)
        z[i] = 2 * np.sqrt(Q[:, 0, :] * Q[:, 1, :]).sum()
        joint = Q.transpose(0, 2, 1).reshape(-1, 2)
        marg = joint.sum(axis=1)
        live = marg > 0
        cond = joint[live] / marg[live, None]
        h = -np.sum(marg[live, None] * np.where(cond > 0, cond * np.log2(np.where(cond > 0, cond, 1)), 0))
        info[i] = 1 - h
    return info, z


class TestTransform:
    def test_n2(self):
        for u1, u2 in product(range(2), repeat=2):
            np.testing.assert_array_equal(encode(np.array([u1, u2])), [u1 ^ u2, u2])

    def test_zero_word(self):
        assert not encode(np.zeros(16, dtype=np.uint8)).any()

    @pytest.mark.parametrize("N", [1, 2, 4, 8, 16])
    def test_generator_matches_explicit(self, N):
        np.testing.assert_array_equal(generator_matrix(N), explicit_generator(N))

    @given(st.lists(st.integers(0, 1), min_size=4, max_size=4))
    def test_n4_random(self, u):
        np.testing.assert_array_equal(encode(np.array(u)), np.array(u) @ explicit_generator(4) % 2)

    def test_involution(self):
        words = all_words(8)
        np.testing.assert_array_equal(encode(encode(words)), words)

    def test_bit_reversal(self):
        np.testing.assert_array_equal(bit_reversal(3), [0, 4, 2, 6, 1, 5, 3, 7])

    def test_bad_length(self):
        with pytest.raises(BadLength):
            log2_length(6)
        with pytest.raises(BadLength):
            encode(np.zeros(3))

    def test_enumeration_limit(self):
        with pytest.raises(BudgetExceeded):
            all_words(64)


class TestCosetEncode:
    def test_full_information_set(self):
        code = PolarCode(8, tuple(range(1, 9)), None)
        u = np.array([1, 0, 1, 1, 0, 0, 1, 0])
        np.testing.assert_array_equal(coset_encode(code, u), encode(u))

    def test_k_zero(self):
        fv = np.array([1, 0, 1, 0])
        code = PolarCode(4, (), fv)
        np.testing.assert_array_equal(coset_encode(code, np.zeros(0, dtype=np.uint8)), fv @ explicit_generator(4) % 2)

    def test_n4_example(self):
        code = PolarCode(4, (2, 4), np.zeros(4))
        G = explicit_generator(4)
        expected = (1 * G[1] + 1 * G[3]) % 2
        np.testing.assert_array_equal(coset_encode(code, [1, 1]), expected)
        np.testing.assert_array_equal(expected, [0, 1, 0, 1])

    def test_length_checks(self):
        code = PolarCode(4, (2, 4), None)
        with pytest.raises(LengthMismatch):
            code.scatter([1, 1, 1])
        with pytest.raises(LengthMismatch):
            PolarCode(4, (1,), np.zeros(3))
        with pytest.raises(ValueError):
            PolarCode(4, (0, 5), None)


class TestSplitChannel:
    def test_n1_is_channel(self):
        w = channels.overlap_cq(0.4)
        sc = split_channel(w, 1, 1)
        np.testing.assert_allclose(sc.block_state(0), w.outputs[0], atol=1e-12)
        assert sc.holevo() == pytest.approx(w.holevo(), abs=1e-12)

    def test_n2_second_index(self, rng):
        rho = [random_density(rng), random_density(rng)]
        sc = split_channel(channels.CqChannel(np.array(rho)), 2, 2)
        for u1, u2 in product(range(2), repeat=2):
            np.testing.assert_allclose(sc.states[u2, u1], np.kron(rho[u1 ^ u2], rho[u2]), atol=1e-12)

    @pytest.mark.parametrize("eps", [0.2, 0.5])
    def test_bec_n2(self, eps):
        p = split_params(channels.bec(eps).to_cq(), 2, method="enumerate")
        np.testing.assert_allclose(p.info, [(1 - eps) ** 2, 1 - eps**2], atol=1e-12)

    def test_bsc_n4_exhaustive(self):
        info, z = brute_split(channels.bsc(0.1).transition, 4)
        for method in ("classical", "enumerate"):
            p = split_params(channels.bsc(0.1).to_cq(), 4, method=method)
            np.testing.assert_allclose(p.info, info, atol=1e-12)
            np.testing.assert_allclose(p.sqrt_fid, z, atol=1e-12)

    def test_bsc_n4_frozen(self):
        # [DERIVED] exhaustive enumeration oracle, frozen
        z = split_params(channels.bsc(0.1), 4).sqrt_fid
        np.testing.assert_allclose(
            z, [0.9122652245920593, 0.5904000000000003, 0.5338080502793237, 0.1296], atol=1e-12
        )

    def test_perfect(self):
        p = split_params(channels.overlap_cq(0.0), 4, method="enumerate")
        np.testing.assert_allclose(p.info, 1.0, atol=1e-12)
        np.testing.assert_allclose(p.sqrt_fid, 0.0, atol=1e-12)

    def test_useless(self):
        w = channels.CqChannel(np.array([np.eye(2) / 2] * 2))
        p = split_params(w, 4, method="enumerate")
        np.testing.assert_allclose(p.info, 0.0, atol=1e-12)
        np.testing.assert_allclose(p.sqrt_fid, 1.0, atol=1e-12)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            split_params(channels.overlap_cq(0.5), 32)

    def test_methods_agree_on_diagonal(self, rng):
        W = rng.dirichlet(np.ones(3), size=2)
        w = channels.ClassicalDMC(W).to_cq()
        a = split_params(w, 8, method="classical")
        b = split_params(w, 8, method="enumerate")
        np.testing.assert_allclose(a.info, b.info, atol=1e-10)
        np.testing.assert_allclose(a.sqrt_fid, b.sqrt_fid, atol=1e-10)

    @given(seeds)
    def test_n2_fidelity_recursion(self, seed):
        w = channels.CqChannel(np.array([random_density(np.random.default_rng(seed)) for _ in range(2)]))
        sf = w.sqrt_fidelity()
        p = split_params(w, 2, method="enumerate")
        assert p.sqrt_fid[1] == pytest.approx(sf**2, abs=1e-8)
        assert p.sqrt_fid[0] <= 2 * sf + 1e-8


class TestBecRecursion:
    @pytest.mark.parametrize("N", [2, 4, 8, 16])
    def test_classical_equals_recursion(self, N):
        e = classical.bec_erasure_probabilities(0.3, N)
        p = split_params(channels.bec(0.3), N)
        np.testing.assert_allclose(p.info, 1 - e, atol=1e-12)
        np.testing.assert_allclose(p.sqrt_fid, e, atol=1e-12)

    def test_n2_values(self):
        np.testing.assert_allclose(classical.bec_erasure_probabilities(0.5, 2), [0.75, 0.25])


class TestConservation:
    def test_n1(self):
        w = channels.amplitude_damped_cq(0.3)
        c = conservation_check(w, 1)
        assert c["sum_I"] == pytest.approx(w.holevo(), abs=1e-12)

    def test_bec_n2(self):
        c = conservation_check(channels.bec(0.4), 2)
        assert c["sum_I"] == pytest.approx(2 * 0.6, abs=1e-12)
        assert c["N_times_IW"] == pytest.approx(2 * 0.6, abs=1e-12)

    def test_pure_n4(self):
        c = conservation_check(channels.overlap_cq(0.5), 4)
        assert c["sum_I"] == pytest.approx(c["N_times_IW"], abs=1e-6)


class TestConstruct:
    def test_k_equals_n(self):
        assert construct(channels.bsc(0.1), 8, 8).info_set == tuple(range(1, 9))

    def test_k_zero(self):
        assert construct(channels.bsc(0.1), 8, 0).info_set == ()

    def test_bec_n8_k4(self):
        code = construct(channels.bec(0.5), 8, 4)
        e = classical.bec_erasure_probabilities(0.5, 8)
        assert code.info_set == tuple(sorted(int(i) + 1 for i in np.argsort(e, kind="stable")[:4]))
        assert code.info_set == (4, 6, 7, 8)

    def test_tie_break_lower_index(self):
        assert select_info_set([0.5, 0.1, 0.5, 0.5], 2) == (1, 2)

    def test_random_frozen_is_seeded(self):
        a = construct(channels.bsc(0.1), 16, 8, frozen="random", seed=3)
        b = construct(channels.bsc(0.1), 16, 8, frozen="random", seed=3)
        np.testing.assert_array_equal(a.frozen_values, b.frozen_values)

    @given(st.integers(0, 16), st.floats(0.01, 0.49))
    def test_coding_rule(self, K, p):
        ok, worst_in, best_out = check_coding_rule(construct(channels.bsc(p), 16, K))
        assert ok and worst_in <= best_out

    def test_csv(self):
        text = construction_csv(construct(channels.bec(0.5), 4, 2))
        lines = text.strip().splitlines()
        assert lines[0] == "index,I,sqrtF,in_A"
        assert len(lines) == 5


class TestShaping:
    def test_uniform_source(self):
        s = shaping_sets(0.5, 8, threshold=0.1)
        assert s["F"] == tuple(range(1, 9)) and s["F^c"] == ()

    def test_deterministic_source(self):
        s = shaping_sets(0.0, 8, threshold=0.1)
        assert s["F"] == () and s["F^c"] == tuple(range(1, 9))

    def test_p011_size(self):
        s = shaping_sets(0.11, 8, threshold=0.2)
        assert abs(len(s["F"]) / 8 - h2(0.11)) <= 0.2

    def test_z_against_enumeration(self):
        # Z(U_i | U^{i-1}) of U = X G with X iid Bern(0.11), by direct summation
        N, p = 4, 0.11
        G = explicit_generator(N)
        pu = np.zeros(2**N)
        for x in product(range(2), repeat=N):
            u = np.array(x) @ G % 2  # G is an involution
            pu[int("".join(map(str, u)), 2)] += p ** sum(x) * (1 - p) ** (N - sum(x))
        z = [2 * np.sqrt(pu.reshape(2**i, 2, -1).sum(axis=2).prod(axis=1)).sum() for i in range(N)]
        np.testing.assert_allclose(shaping_sets(p, N).z["Z(U_i|U^i-1)"], z, atol=1e-12)

    def test_entropy_conservation(self):
        s = shaping_sets(0.11, 8)
        assert s.z["H(U_i|U^i-1)"].sum() == pytest.approx(8 * h2(0.11), abs=1e-10)

    def test_bad_probability(self):
        with pytest.raises(InvalidDistribution):
            shaping_sets(1.5, 4)

    def test_threshold_resolution(self):
        assert resolve_threshold(16, beta=0.5) == pytest.approx(2**-4)
        assert resolve_threshold(16, threshold=0.3) == 0.3
        assert resolve_threshold(16) == 0.01

    def test_info_set_perfect(self):
        s = shaping_info_set(channels.overlap_cq(0.0), 0.11, 4, threshold=0.2)
        assert s["I"] == s["F"]

    def test_info_set_useless(self):
        s = shaping_info_set(channels.CqChannel(np.array([np.eye(2) / 2] * 2)), 0.11, 4, threshold=0.2)
        assert s["I"] == ()

    def test_uniform_input_reduces_to_symmetric(self):
        t = 0.2
        s = shaping_info_set(channels.bsc(0.1), 0.5, 8, threshold=t)
        sf = split_params(channels.bsc(0.1), 8).sqrt_fid
        assert s["I"] == tuple(int(i) + 1 for i in np.flatnonzero(sf <= t))


class TestBroadcastSets:
    @staticmethod
    def _bc():
        a = [np.diag([0.9, 0.1]), np.diag([0.1, 0.9])]
        b = [qmath.ket([1, 0]), qmath.ket([0.6, 0.8])]
        return channels.BroadcastChannel(np.array([np.kron(a[x], b[x]) for x in range(2)]), (2, 2))

    def test_constant_v(self):
        joint = np.zeros((2, 2, 2))
        joint[0] = 0.25
        s = broadcast_sets(self._bc(), joint, lambda v, v1, v2: v1, 2, threshold=0.2)
        assert s["H_V"] == () and s["I_sup^(2)"] == () and s["I_v^(1)"] == ()

    def test_perfect_marginals(self):
        perfect = channels.BroadcastChannel(np.array([np.kron(qmath.ket([1, 0]), qmath.ket([1, 0])), np.kron(qmath.ket([0, 1]), qmath.ket([0, 1]))]), (2, 2))
        joint = np.full((2, 2, 2), 1 / 8)
        s = broadcast_sets(perfect, joint, lambda v, v1, v2: v ^ v1, 2, threshold=0.1)
        assert s["F^(1)"] == ()

    def test_v_given_b1_against_ensemble(self):
        # Z(U0_i | U0^{i-1}, B1^N) by a direct cq ensemble over (u0, B1^N)
        bc, N = self._bc(), 2
        joint = np.full((2, 2, 2), 1 / 8)
        joint[1] *= 0.5
        joint[0] *= 1.5
        phi = lambda v, v1, v2: v ^ v1  # noqa: E731
        s = broadcast_sets(bc, joint, phi, N, threshold=0.2)
        rho1 = bc.marginal(1).outputs
        pv = joint.sum(axis=(1, 2))
        sigma = [sum(joint[v, a, b] / pv[v] * rho1[phi(v, a, b)] for a in range(2) for b in range(2)) for v in range(2)]
        G = explicit_generator(N)
        probs = np.zeros((2,) * N)
        states = []
        for k, u in enumerate(product(range(2), repeat=N)):
            v = np.array(u) @ G % 2
            probs[u] = np.prod(pv[v])
            states.append(qmath.kron_all([sigma[x] for x in v]))
        ens = qmath.CqEnsemble(probs, np.array(states))
        z = [ens.bhattacharyya(i, tuple(range(i))) for i in range(N)]
        np.testing.assert_allclose(s.z["Z(V|B1)"], z, atol=1e-10)
        np.testing.assert_allclose(s.z["Z(V)"], [ens.bhattacharyya(i, tuple(range(i)), quantum=False) for i in range(N)], atol=1e-12)
