"""Acceptance suite: one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python -m tests.test_acceptance``.
"""

import contextlib
import filecmp
import io
import tempfile
import time
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from polarlab import channels
from polarlab.cli import main
from polarlab.compound import build_chaining, partition, residual_fraction_formula
from polarlab.decoder import block_error, classical_sc_success
from polarlab.multiuser import (
    are_neighbors,
    chain_rule_rates,
    mac_corner_points,
    nu_class_paths,
    path_distance,
    scaling_rate_invariance,
)
from polarlab.polar.construct import check_coding_rule, construct
from polarlab.polar.split import as_cq, split_params
from polarlab.qpolar import degraded_combination_table, degraded_pair
from polarlab.regions import hk_region, mac_region, mgp_corner_points, mgp_joint, mgp_quantities, mgp_region, point_in_region

from ._helpers import random_cq, random_density
from .test_multiuser import noisy_mac, qubit_mac
from .test_regions import phi_v_xor_v1, qubit_bc

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PATHS = {
    2: ["0011", "1100", "0101", "0110", "1001"],
    4: ["00001111", "11110000", "00110011", "01010101", "00111100"],
}

SINGLE = {
    "BEC(0.5)": channels.bec(0.5),
    "BSC(0.1)": channels.bsc(0.1),
    "overlap 0.5": channels.overlap_cq(0.5),
    "amplitude-damped 0.3": channels.amplitude_damped_cq(0.3),
}


@lru_cache(maxsize=None)
def single_params(name, N):
    return split_params(SINGLE[name], N)


def bec_recursion(eps, N):
    z = [eps]
    while len(z) < N:
        z = [v for e in z for v in (2 * e - e * e, e * e)]
    return np.array(z)


def c01_conservation():
    worst = 0.0
    for name, w in SINGLE.items():
        for N in (2, 4, 8):
            worst = max(worst, abs(single_params(name, N).info.sum() - N * as_cq(w).holevo()))
    return worst <= 1e-6, f"max |sum I - N I(W)| = {worst:.3g}"


def c02_fidelity_recursion():
    rng = np.random.default_rng(2)
    plus_err, minus_slack = 0.0, np.inf
    for _ in range(50):
        w = random_cq(rng)
        sf = split_params(w, 2, method="enumerate").sqrt_fid
        f = w.sqrt_fidelity()
        plus_err = max(plus_err, abs(sf[1] - f**2))
        minus_slack = min(minus_slack, 2 * f - sf[0])
    return plus_err <= 1e-8 and minus_slack >= -1e-8, f"plus err {plus_err:.3g}, min minus slack {minus_slack:.3g}"


def c03_bec_exactness():
    worst = 0.0
    for eps in (0.1, 0.3, 0.5, 0.8):
        for N in (2, 4, 8, 16):
            worst = max(worst, np.abs(split_params(channels.bec(eps), N).sqrt_fid - bec_recursion(eps, N)).max())
        for N in (2, 4, 8):
            p = split_params(channels.bec(eps), N, method="enumerate")
            worst = max(worst, np.abs(p.sqrt_fid - bec_recursion(eps, N)).max())
    return worst <= 1e-12, f"max deviation {worst:.3g}"


def c04_coding_rule():
    n = 0
    for name, w in SINGLE.items():
        for N in (4, 8):
            for K in range(N + 1):
                ok, _, _ = check_coding_rule(construct(w, N, K, params=single_params(name, N)))
                if not ok:
                    return False, f"violated for {name} N={N} K={K}"
                n += 1
    return True, f"{n} instances"


def c05_error_bounds():
    parts, ok = [], True
    for w in (channels.bsc(0.1).to_cq(), channels.overlap_cq(0.5)):
        rep = block_error(construct(w, 4, 2), w)
        ok &= rep.P_e_exact <= rep.gao_bound and rep.P_e_exact <= rep.fidelity_bound
        parts.append(f"{w.label}: P_e {rep.P_e_exact:.4g}, gao margin {rep.gao_bound - rep.P_e_exact:.4g}, "
                     f"fidelity margin {rep.fidelity_bound - rep.P_e_exact:.4g}")
    return ok, "; ".join(parts)


def c06_classical_equivalence():
    worst = 0.0
    for w in (channels.bsc(0.1), channels.bec(0.3)):
        for K in (2, 4, 6):
            code = construct(w, 8, K)
            worst = max(worst, abs((1 - block_error(code, w.to_cq()).P_e_exact) - classical_sc_success(code, w)))
    return worst <= 1e-9, f"max |P_q - P_c| = {worst:.3g}"


def c07_chain_rule():
    worst = 0.0
    cases = [(channels.adder_mac(), (2, 4)), (noisy_mac(), (2, 4)), (qubit_mac(), (2,))]
    for mac, Ns in cases:
        sum_rate = mac.ensemble().mutual_information((0, 1))
        (a, b), (c, d) = mac_corner_points(mac)
        for N in Ns:
            for path in PATHS[N]:
                r = chain_rule_rates(mac, path, N)
                worst = max(worst, abs(r.step_info.sum() - N * sum_rate))
            lo, hi = "0" * N + "1" * N, "1" * N + "0" * N
            worst = max(worst, np.abs(np.subtract(chain_rule_rates(mac, lo, N).rates, (a, b))).max())
            worst = max(worst, np.abs(np.subtract(chain_rule_rates(mac, hi, N).rates, (c, d))).max())
    return worst <= 1e-6, f"max deviation {worst:.3g}"


def c08_neighbor_distance():
    worst, pairs = -np.inf, 0
    paths = nu_class_paths(4)
    for mac in (channels.adder_mac(), noisy_mac()):
        for p, q in combinations(paths, 2):
            if are_neighbors(p, q):
                worst = max(worst, path_distance(p, q, mac, 4))
                pairs += 1
    return worst <= 0.25 + 1e-9, f"{pairs} neighbor pairs, max d = {worst:.4g} (limit 0.25)"


def c09_scaling():
    worst = 0.0
    for path in ("0011", "0101", "1001"):
        r = scaling_rate_invariance(noisy_mac(), path, 2)
        worst = max(worst, np.abs(np.subtract(r["rates_b"], r["rates_2b"])).max())
    return worst <= 1e-6, f"max deviation {worst:.3g}"


def c10_halving():
    part = partition([channels.bec(0.3), channels.bec(0.5)], 8, threshold=0.2)
    parts, ok = [], True
    for m in (1, 2, 3):
        s = build_chaining(part, m)
        num, den = residual_fraction_formula(part, m)
        ok &= s.count("residual") * den == num * s.n_blocks * s.N
        parts.append(f"m={m}: {num}/{den}")
    return ok, ", ".join(parts)


def c11_degraded_subsets():
    pairs = [
        (channels.amplitude_damping(0.1), channels.dephasing(0.2)),
        (channels.amplitude_damping(0.3), channels.depolarizing(0.1)),
        (channels.dephasing(0.1), channels.amplitude_damping(0.2)),
        (channels.depolarizing(0.05), channels.dephasing(0.3)),
        (channels.identity_channel(), channels.amplitude_damping(0.4)),
        (channels.bit_flip(0.1), channels.dephasing(0.1)),
        (channels.amplitude_damping(0.2), channels.bit_flip(0.05)),
        (channels.dephasing(0.3), channels.depolarizing(0.2)),
        (channels.depolarizing(0.1), channels.amplitude_damping(0.1)),
        (channels.bit_flip(0.2), channels.identity_channel()),
    ]
    anomalies = 0
    for n2, d in pairs:
        p1, p2 = degraded_pair(n2, d)
        sf1 = split_params(p1.W_A, 8).sqrt_fid
        sf2 = split_params(p2.W_A, 8).sqrt_fid
        for t in (0.05, 0.1, 0.2):
            anomalies += int(np.sum((sf1 < t) & ~(sf2 < t)))
            anomalies += degraded_combination_table(p1, p2, 4, threshold=t).n_anomalies
    return anomalies == 0, f"{len(pairs)} pairs, {anomalies} anomalies"


def c12_regions():
    slack_min = np.inf
    for mac in (channels.adder_mac(), noisy_mac(), qubit_mac()):
        region = mac_region(mac)
        for path in PATHS[2]:
            slack_min = min(slack_min, region.slack(chain_rule_rates(mac, path, 2).rates).min())
    rng = np.random.default_rng(4)
    macs = tuple(channels.CqMac(np.array([[random_density(rng) for _ in range(2)] for _ in range(2)])) for _ in range(2))
    ident = np.array([[0, 1]])
    hk = hk_region(macs, [[1.0], [1.0], [0.5, 0.5], [0.5, 0.5]], ident, ident)
    hk_err = 0.0
    for r, mac in enumerate(macs, start=1):
        sub, ref = hk.sub_regions[f"mac_B{r}"], mac_region(mac)
        hk_err = max(hk_err,
                     abs(sub.bound(f"I(V3;B{r}|V{r}V4)") - ref.bound("I(X;B|Y)")),
                     abs(sub.bound(f"I(V4;B{r}|V{r}V3)") - ref.bound("I(Y;B|X)")),
                     abs(sub.bound(f"I(V3V4;B{r}|V{r})") - ref.bound("I(XY;B)")))
    bc = qubit_bc(5)
    joint = mgp_joint([0.5, 0.5], [[0.6, 0.4], [0.4, 0.6]], np.full((2, 2, 2), 0.5))
    region = mgp_region(bc, joint, phi_v_xor_v1())
    mgp_slack = min(point_in_region(region, c)[1].min() for c in mgp_corner_points(mgp_quantities(bc, joint, phi_v_xor_v1())))
    ok = slack_min >= -1e-6 and hk_err <= 1e-9 and mgp_slack >= -1e-6
    return ok, f"MAC min slack {slack_min:.3g}, HK err {hk_err:.3g}, MGP corner min slack {mgp_slack:.3g}"


def c13_reproducibility():
    names = sorted(p.name for p in CONFIGS.glob("*.json"))
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        for name in names:
            for d in (a, b):
                with contextlib.redirect_stdout(io.StringIO()):
                    code = main(["run", "--config", str(CONFIGS / name), "--out", str(d)])
                if code != 0:
                    return False, f"{name} failed"
        files = sorted(p.name for p in a.iterdir())
        _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    return not mismatch and not errors, f"{len(files)} outputs from {len(names)} configs, {len(mismatch)} differ"


CRITERIA = [
    (1, "capacity conservation", c01_conservation),
    (2, "fidelity recursion at N=2", c02_fidelity_recursion),
    (3, "BEC exactness", c03_bec_exactness),
    (4, "polar coding rule", c04_coding_rule),
    (5, "error-bound chain", c05_error_bounds),
    (6, "classical equivalence", c06_classical_equivalence),
    (7, "MAC chain rule", c07_chain_rule),
    (8, "neighbor distance", c08_neighbor_distance),
    (9, "path-scaling invariance", c09_scaling),
    (10, "compound halving law", c10_halving),
    (11, "degraded subset property", c11_degraded_subsets),
    (12, "region consistency", c12_regions),
    (13, "reproducibility", c13_reproducibility),
]


def report(number, name, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {name}: {detail} ({time.perf_counter() - t0:.1f}s)"
    return ok, line


@pytest.mark.parametrize("number, name, fn", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(number, name, fn, capsys):
    ok, line = report(number, name, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [report(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
