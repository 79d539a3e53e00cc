"""Experiment runner.

Usage::

    polarlab run --config exp.json [--out DIR] [--threads N] [--seed S]
    polarlab plot --series staircase --input polarize.csv [--out DIR]

``run`` may be omitted.  A config is a JSON object with a ``kind`` among
:data:`KINDS`; channels are inline channel documents (see
:mod:`polarlab.chanspec`) or paths relative to the config file.  Every
output starts with ``#`` header lines (CSV) or a ``meta`` block (JSON) that
echo the tool version and the effective config.

Exit codes: 0 success, 2 bad config or missing input, 3 budget exceeded,
4 invalid channel or violated invariant.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chanspec import load_channel_spec
from .errors import (
    BadLength,
    BudgetExceeded,
    ConfigError,
    DimMismatch,
    InvalidDistribution,
    InvalidFactorization,
    InvariantViolation,
    LengthMismatch,
    MissingInput,
    NonHermitianInput,
    NegativeEigenvalue,
    NonMonotonePath,
    ParseError,
    PolarLabError,
    RateInfeasible,
)

log = logging.getLogger("polarlab")

KINDS = ("polarize", "construct", "decode", "compound", "mac_rates", "regions", "qpolar", "shaping")
REQUIRED = {
    "polarize": ("channel", "N"),
    "construct": ("channel", "N", "K"),
    "decode": ("channel", "N", "K"),
    "compound": ("channels", "N", "levels"),
    "mac_rates": ("channel", "N"),
    "regions": ("region",),
    "qpolar": ("channel", "N"),
    "shaping": ("p", "N"),
}
CAPACITY_GRID = 64

EXIT_CONFIG, EXIT_BUDGET, EXIT_INVALID = 2, 3, 4


# ---------------------------------------------------------------------------
# config handling


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"config file {path} not found")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg.setdefault("_base", str(path.parent))
    return cfg


def validate_config(cfg):
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    missing = [k for k in REQUIRED[kind] if k not in cfg]
    if missing:
        raise ConfigError(f"kind {kind!r} needs {', '.join(missing)}")
    for n in np.atleast_1d(cfg.get("N", [])):
        n = int(n)
        if n < 1 or n & (n - 1):
            raise ConfigError(f"N={n} is not a power of two")
    return kind


def _channel(cfg, ref):
    if isinstance(ref, dict):
        return load_channel_spec(ref)
    path = Path(cfg.get("_base", ".")) / str(ref)
    if not path.is_file():
        raise MissingInput(f"channel file {path} not found")
    return load_channel_spec(path)


def _public(cfg):
    return {k: v for k, v in sorted(cfg.items()) if not k.startswith("_")}


def _header(cfg, extra=None):
    lines = [f"# polarlab {__version__}", f"# kind: {cfg['kind']}",
             "# config: " + json.dumps(_public(cfg), sort_keys=True, separators=(",", ":"))]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return json.dumps(v, sort_keys=True, default=_jsonable) if not isinstance(v, str) else v


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(type(obj).__name__)


def _json_doc(cfg, result):
    doc = {"meta": {"tool": "polarlab", "version": __version__, "config": _public(cfg)}, "result": result}
    return json.dumps(doc, sort_keys=True, indent=1, default=_jsonable) + "\n"


# ---------------------------------------------------------------------------
# experiments


def _threshold(cfg):
    return cfg.get("threshold"), cfg.get("beta")


def run_polarize(cfg):
    from .polar.split import as_cq, split_params

    w = _channel(cfg, cfg["channel"])
    N = int(cfg["N"])
    params = split_params(w, N, method=cfg.get("method", "auto"))
    cq = as_cq(w)
    extra = {"sum_I": float(np.sum(params.info)), "N_times_IW": N * cq.holevo(), "method": params.method}
    if cfg.get("capacity_scan"):
        grid = np.arange(CAPACITY_GRID + 1) / CAPACITY_GRID
        vals = [cq.holevo(np.array([1 - q, q])) for q in grid]
        k = int(np.argmax(vals))
        extra["capacity_grid"] = float(vals[k])
        extra["capacity_prior_1"] = float(grid[k])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["index", "I", "sqrtF"])
    for i, a, b in params.rows():
        wr.writerow([i, f"{a:.17g}", f"{b:.17g}"])
    return _header(cfg, extra) + buf.getvalue(), "csv"


def run_construct(cfg):
    from .polar.construct import check_coding_rule, construct, construction_csv

    w = _channel(cfg, cfg["channel"])
    code = construct(w, int(cfg["N"]), int(cfg["K"]), frozen=cfg.get("frozen", "zeros"), seed=cfg.get("seed"),
                     method=cfg.get("method", "auto"))
    ok, worst_in, best_out = check_coding_rule(code)
    if not ok:
        raise InvariantViolation(f"coding rule violated: {worst_in} > {best_out}")
    extra = {"info_set": list(code.info_set), "frozen_values": code.frozen_values.tolist(), "rate": code.rate}
    return _header(cfg, extra) + construction_csv(code), "csv"


def run_decode(cfg):
    from .channels import ClassicalDMC
    from .decoder import block_error, mc_block_error, result_rows_csv
    from .polar.construct import construct

    w = _channel(cfg, cfg["channel"])
    trials = int(cfg.get("trials", 0))
    seed = int(cfg.get("seed", 0))
    Ns = [int(n) for n in np.atleast_1d(cfg["N"])]
    Ks = [int(k) for k in np.atleast_1d(cfg["K"])]
    if len(Ks) == 1:
        Ks = Ks * len(Ns)
    if len(Ks) != len(Ns):
        raise ConfigError("K must be a single value or one per N")
    cid = cfg.get("channel_id", getattr(w, "label", ""))
    if trials == 0:
        rows = []
        for N, K in zip(Ns, Ks):
            code = construct(w, N, K)
            rep = block_error(code, w)
            rows.append({"N": N, "K": K, "channel_id": cid, "P_e_exact": rep.P_e_exact, "sen_bound": rep.sen_bound,
                         "gao_bound": rep.gao_bound, "fidelity_bound": rep.fidelity_bound, "seed": seed, "trials": 0})
        return _header(cfg) + result_rows_csv(rows), "csv"
    if not isinstance(w, ClassicalDMC):
        raise ConfigError("Monte Carlo decoding needs a classical channel")
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["N", "K", "channel_id", "P_e_hat", "ci_low", "ci_high", "fidelity_bound", "errors", "trials", "seed"])
    for N, K in zip(Ns, Ks):
        code = construct(w, N, K)
        mc = mc_block_error(code, w, trials, seed)
        fb = 2.0 * float(np.sum(np.asarray(code.record["sqrt_fid"])[code.info_mask]))
        wr.writerow([N, K, cid, f"{mc.P_e_hat:.17g}", f"{mc.ci95[0]:.17g}", f"{mc.ci95[1]:.17g}", f"{fb:.17g}",
                     mc.errors, mc.trials, mc.seed])
    return _header(cfg) + buf.getvalue(), "csv"


def run_compound(cfg):
    from .channels import CompoundSet, CqMac
    from .compound import (build_chaining, compound_decode_exact, compound_mac_schedule, extend_k_members,
                           partition, predicted_rate, residual_fraction_formula)

    members = CompoundSet(tuple(_channel(cfg, c) for c in cfg["channels"]))
    N, m = int(cfg["N"]), int(cfg["levels"])
    t, beta = _threshold(cfg)
    if isinstance(members[0], CqMac):
        paths = cfg.get("paths")
        if not paths or len(paths) != 2:
            raise ConfigError("a compound MAC needs one path per member")
        sched = compound_mac_schedule(members, paths, N, m, t, beta, cfg.get("target_rates"))
        result = {"schedule": sched.to_dict(), "rates": [sched.rate(s) for s in range(sched.n_senders)],
                  "member_rates": sched.member_rates,
                  "partitions": {str(s): p.classes() for s, p in sched.partitions.items()}}
        return _json_doc(cfg, result), "json"
    if len(members) == 2:
        part = partition(members, N, t, beta)
        sched = build_chaining(part, m)
        num, den = residual_fraction_formula(part, m)
        result = {"partition": part.classes(), "threshold": part.threshold, "schedule": sched.to_dict(),
                  "rate": sched.rate(), "predicted_rate": predicted_rate(part, m),
                  "incompatible_fraction": sched.incompatible_fraction(), "formula_fraction": [num, den]}
    else:
        sched = extend_k_members(members, N, m, t, beta)
        result = {"schedule": sched.to_dict(), "rate": sched.rate()}
    if cfg.get("decode"):
        result["p_success"] = []
        for l in range(len(members)):
            r = compound_decode_exact(sched, members, l)
            result["p_success"].append({"member": l, "p_success": r["p_success"], "fidelity_bound": r["fidelity_bound"]})
    return _json_doc(cfg, result), "json"


def _paths(cfg, N):
    from .multiuser import kuser_paths, nu_class_paths

    spec = cfg.get("paths", "nu")
    if spec == "nu":
        return nu_class_paths(N)
    if spec == "all":
        return list(kuser_paths(2, N))
    if not isinstance(spec, list):
        raise ConfigError("paths must be 'nu', 'all' or a list of path strings")
    return spec


def run_mac_rates(cfg):
    from .multiuser import chain_rule_rates, mac_corner_points, rate_table_csv

    mac = _channel(cfg, cfg["channel"])
    N = int(cfg["N"])
    points = [chain_rule_rates(mac, p, N) for p in _paths(cfg, N)]
    corners = mac_corner_points(mac)
    return _header(cfg, {"corners": [list(c) for c in corners]}) + rate_table_csv(points), "csv"


def run_regions(cfg):
    from . import regions as rg

    kind = cfg["region"]
    if kind == "mac":
        region = rg.mac_region(_channel(cfg, cfg["channel"]), cfg.get("priors"))
    elif kind == "hk":
        macs = tuple(_channel(cfg, c) for c in cfg["receivers"])
        region = rg.hk_region(macs, cfg["aux"], cfg["x1_map"], cfg["x2_map"])
        region.provenance["rate_pairs"] = rg.hk_rate_pairs(region).tolist()
    elif kind == "marton":
        region = rg.marton_region(_channel(cfg, cfg["channel"]), cfg["joint"], cfg["map"])
    elif kind == "mgp":
        region = rg.mgp_region(_channel(cfg, cfg["channel"]), np.asarray(cfg["joint"]), cfg["map"],
                               with_common=bool(cfg.get("with_common", False)))
    else:
        raise ConfigError(f"unknown region {kind!r}; expected mac, hk, marton or mgp")
    return _json_doc(cfg, region.to_dict()), "json"


def run_qpolar(cfg):
    from .qpolar import (classify_indices, coherent_information, degraded_combination_table, degraded_pair,
                         induce_amplitude_phase, net_rate)

    n = _channel(cfg, cfg["channel"])
    N = int(cfg["N"])
    t, beta = _threshold(cfg)
    if "degrade" in cfg:
        p1, p2 = degraded_pair(n, _channel(cfg, cfg["degrade"]))
        table = degraded_combination_table(p1, p2, N, t, beta)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index", "A1P1A2P2", "coding", "anomaly"])
        for row in table.rows():
            wr.writerow([row[0], row[1], row[2], int(row[3])])
        extra = {"anomalies": table.n_anomalies, "net_rate_member1": table.net_rate()}
        return _header(cfg, extra) + buf.getvalue(), "csv"
    pair = induce_amplitude_phase(n)
    cls = classify_indices(pair, N, t, beta)
    extra = {"I(W_A)": pair.holevo_A, "I(W_P)": pair.holevo_P, "net_rate": net_rate(cls),
             "coherent_information": coherent_information(n), "threshold": cls.threshold}
    return _header(cfg, extra) + cls.to_csv(), "csv"


def run_shaping(cfg):
    from .polar.shaping import shaping_info_set, shaping_sets

    p, N = float(cfg["p"]), int(cfg["N"])
    t, beta = _threshold(cfg)
    sets = shaping_info_set(_channel(cfg, cfg["channel"]), p, N, t, beta) if "channel" in cfg else shaping_sets(p, N, t, beta)
    names = sorted(sets.sets)
    keys = sorted(k for k in sets.z if np.ndim(sets.z[k]) == 1)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["index"] + keys + [f"in_{n}" for n in names])
    for i in range(N):
        wr.writerow([i + 1] + [f"{sets.z[k][i]:.17g}" for k in keys] + [int((i + 1) in sets[n]) for n in names])
    extra = {"threshold": sets.threshold, "sizes": sets.sizes()}
    extra.update({k: float(v) for k, v in sets.z.items() if np.ndim(v) == 0})
    return _header(cfg, extra) + buf.getvalue(), "csv"


RUNNERS = {
    "polarize": run_polarize,
    "construct": run_construct,
    "decode": run_decode,
    "compound": run_compound,
    "mac_rates": run_mac_rates,
    "regions": run_regions,
    "qpolar": run_qpolar,
    "shaping": run_shaping,
}


def run(cfg, out_dir=".", seed=None):
    """Run one experiment and write its output; returns the output path."""
    kind = validate_config(cfg)
    if seed is not None:
        cfg = dict(cfg, seed=int(seed))
    text, ext = RUNNERS[kind](cfg)
    out = Path(out_dir) / cfg.get("output", f"{kind}.{ext}")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    return out


# ---------------------------------------------------------------------------
# plot data


def read_csv(path):
    """Rows of a ``#``-annotated CSV as dicts, plus the header lines."""
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"{path} not found")
    lines = path.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(body) < 2:
        raise MissingInput(f"{path} holds no data rows")
    return list(csv.DictReader(body)), meta


def plot_data(series, input_path):
    """CSV text of a plot-ready series.

    ``staircase``: per-index ``I`` sorted ascending against its rank.
    ``bounds``: exact ``P_e`` and the three bounds against ``N``.
    """
    rows, meta = read_csv(input_path)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    head = [f"# polarlab {__version__}", f"# series: {series}", f"# source: {Path(input_path).name}"]
    head += [f"# source{ln[1:]}" for ln in meta if ln.startswith("# config")]
    if series == "staircase":
        if "I" not in rows[0]:
            raise ConfigError("staircase needs a column 'I'")
        vals = sorted(float(r["I"]) for r in rows)
        wr.writerow(["rank", "I"])
        for k, v in enumerate(vals, start=1):
            wr.writerow([k, f"{v:.17g}"])
    elif series == "bounds":
        cols = ("P_e_exact", "gao_bound", "fidelity_bound", "sen_bound")
        if any(c not in rows[0] for c in cols + ("N",)):
            raise ConfigError("bounds needs N, P_e_exact and the three bound columns")
        wr.writerow(("N",) + cols)
        for r in sorted(rows, key=lambda r: int(r["N"])):
            wr.writerow([r["N"]] + [f"{float(r[c]):.17g}" for c in cols])
    else:
        raise ConfigError(f"unknown series {series!r}; expected staircase or bounds")
    return "\n".join(head) + "\n" + buf.getvalue()


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="polarlab", description="Polar coding experiments over classical and cq channels")
    parser.add_argument("--version", action="version", version=f"polarlab {__version__}")
    sub = parser.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="experiment config (JSON)")
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--threads", type=int, default=1, help="worker threads (1 = reference mode)")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("plot", help="derive a plot-ready series from a previous output")
    p.add_argument("--series", required=True, choices=("staircase", "bounds"))
    p.add_argument("--input", required=True, help="CSV written by 'run'")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--output", default=None, help="file name (default <series>.csv)")
    return parser


EXIT_CODES = (
    ((ConfigError, ParseError, MissingInput, NonMonotonePath, RateInfeasible), EXIT_CONFIG),
    ((BudgetExceeded,), EXIT_BUDGET),
    ((InvariantViolation, DimMismatch, InvalidDistribution, InvalidFactorization, NonHermitianInput,
      NegativeEigenvalue, BadLength, LengthMismatch), EXIT_INVALID),
)


def exit_code(exc):
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    return 1


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "--version"):
        argv = ["run"] + argv
    args = build_parser().parse_args(argv)
    if args.command is None:
        build_parser().print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            if args.threads > 1:
                log.info("running single-threaded; --threads %d is accepted for compatibility", args.threads)
            out = run(load_config(args.config), args.out, args.seed)
        else:
            out = Path(args.out) / (args.output or f"{args.series}.csv")
            text = plot_data(args.series, args.input)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text)
    except (PolarLabError, MemoryError, FileNotFoundError) as exc:
        print(f"polarlab: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
