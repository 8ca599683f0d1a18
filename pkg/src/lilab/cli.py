"""Command-line entry point: selftest, verification batteries, experiments.

Exit codes: 0 = every assertion matched (including expected failures),
1 = an assertion mismatched, 2 = usage or config error.  Outputs under
``--out`` are byte-deterministic for identical (command, config, seeds);
the manifest carries the resolved config hash and a timestamp.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .serialize import ConfigError, canonical_json, config_hash

_CSV_SCHEMA = "lilab-csv/1"


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _parse_dims(text):
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return (int(lo), int(hi))
        v = int(text)
        return (v, v)
    except ValueError as exc:
        raise ConfigError(f"bad dims spec {text!r} (want e.g. 2..6)") from exc


def _write_outputs(out_dir, command, config, seeds, csv_lines, summary):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    csv_path.write_text("\n".join(csv_lines) + "\n")
    summary_path = out / "summary.json"
    summary_path.write_text(canonical_json(summary) + "\n")
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "csv_schema": _CSV_SCHEMA,
        "seeds": seeds,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": [csv_path.name, summary_path.name],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- selftest --------------------------------------------------------------------

_FIXTURE = {
    "algebra": {"blocks": [{"dim": 2, "weight": 0.5}, {"dim": 1, "weight": 0.5}]},
    "operator": {
        "blocks": [
            [[3.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0]],
            [[2.0, 0.0]],
        ]
    },
    "expected": {"trace": 2.0, "l2_norm_sq": 5.0},
}


def _selftest_checks(seed, fixture):
    from .blocks import (
        Interval,
        atom_algebra,
        herm_spectrum,
        hilbert_inner,
        lp_norm,
        matrix_algebra,
        operator_norm,
        random_hermitian,
        random_operator,
        s_number,
        spectral_indicator,
        trace,
        trace_real,
        l2_norm,
    )
    from .expectation import cond_expect, tensor_filtration, verify_tower
    from .serialize import algebra_from_dict, operator_from_dict
    from .tensor import atom_factor, matrix_factor

    rng = np.random.default_rng(seed)
    checks = []

    def record(check_id, ok, detail=""):
        checks.append({"id": check_id, "pass": bool(ok), "detail": str(detail)})

    algebras = [
        matrix_algebra(3),
        atom_algebra([0.2, 0.3, 0.5]),
        algebra_from_dict({"blocks": [{"dim": 2, "weight": 0.25}, {"dim": 3, "weight": 0.75}]}),
    ]
    worst = 0.0
    for alg in algebras:
        for _ in range(100):
            x = random_operator(alg, rng)
            y = random_operator(alg, rng)
            err = abs(trace(x @ y) - trace(y @ x))
            worst = max(worst, err / max(operator_norm(x) * operator_norm(y), 1e-300))
    record("trace-cyclic", worst <= 1e-12, f"worst={worst:.3e}")

    mono_ok = True
    for alg in algebras:
        x = random_operator(alg, rng)
        ps = [1.0, 1.5, 2.0, 3.0, 6.0, np.inf]
        norms = [lp_norm(x, p) for p in ps]
        mono_ok &= all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))
    record("lp-monotone", mono_ok)

    quant_ok = True
    for alg in algebras:
        x = random_hermitian(alg, rng)
        spec = herm_spectrum(x)
        vals, wts = spec.weighted()
        for p in (1.0, 2.0, 4.0):
            step_integral = float(np.sum(wts * np.abs(vals) ** p))
            quant_ok &= abs(step_integral - lp_norm(x, p) ** p) <= 1e-10 * max(
                1.0, step_integral
            )
    record("snumber-integral", quant_ok)

    fc_ok = True
    for alg in algebras:
        x = random_hermitian(alg, rng)
        spec = herm_spectrum(x)
        fg = spec.apply(lambda v: np.sin(v) * np.exp(0.1 * v))
        f_times_g = spec.apply(np.sin) @ spec.apply(lambda v: np.exp(0.1 * v))
        fc_ok &= operator_norm(fg - f_times_g) <= 1e-9 * max(1.0, operator_norm(fg))
        fc_ok &= operator_norm(spec.apply(lambda v: v) - x) <= 1e-10 * max(
            1.0, operator_norm(x)
        )
    record("functional-calculus", fc_ok)

    proj_ok = True
    for alg in algebras:
        x = random_hermitian(alg, rng)
        e = spectral_indicator(x, Interval.above(0.0))
        proj_ok &= operator_norm(e @ e - e) <= 1e-10
        proj_ok &= operator_norm(e - e.H) <= 1e-10
        proj_ok &= operator_norm(x @ e - e @ x) <= 1e-10 * max(1.0, operator_norm(x))
    record("spectral-indicator", proj_ok)

    _, filt = tensor_filtration([matrix_factor(2), atom_factor([0.3, 0.7]), matrix_factor(2)])
    tower = verify_tower(filt, n_samples=10, seed=seed)
    record("tower-property", tower.passed, f"max_rel_error={tower.max_rel_error:.3e}")

    alg = filt.algebra
    ce_ok = True
    for _ in range(50):
        x = random_operator(alg, rng)
        ex = cond_expect(filt.levels[1], x)
        ce_ok &= abs(trace(ex) - trace(x)) <= 1e-12 * max(1.0, operator_norm(x))
        ce_ok &= lp_norm(ex, np.inf) <= lp_norm(x, np.inf) * (1 + 1e-9)
        h = random_operator(alg, rng)
        pos = h.H @ h
        vals, _ = herm_spectrum(cond_expect(filt.levels[1], pos)).weighted()
        ce_ok &= vals.min() >= -1e-10 * max(1.0, operator_norm(pos))
    record("conditional-expectation", ce_ok)

    try:
        f_alg = algebra_from_dict(fixture["algebra"])
        f_op = operator_from_dict(f_alg, fixture["operator"])
        t = trace_real(f_op)
        n2 = l2_norm(f_op) ** 2
        ok = abs(t - fixture["expected"]["trace"]) <= 1e-12 and abs(
            n2 - fixture["expected"]["l2_norm_sq"]
        ) <= 1e-10
        record("fixture-golden", ok, f"trace={t!r} l2sq={n2!r}")
    except (ConfigError, KeyError, ValueError) as exc:
        record("fixture-golden", False, f"fixture rejected: {exc}")
    return checks


def cmd_selftest(args) -> int:
    fixture = _FIXTURE
    if args.fixture:
        with open(args.fixture) as fh:
            fixture = json.load(fh)
    checks = _selftest_checks(args.seed, fixture)
    ok = all(c["pass"] for c in checks)
    if args.json:
        print(json.dumps({"pass": ok, "checks": checks}, indent=2))
    else:
        for c in checks:
            print(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['id']} {c['detail']}".rstrip())
        print(f"selftest: {'ok' if ok else 'FAILED'}")
    return 0 if ok else 1


# -- verify ------------------------------------------------------------------------


def cmd_verify(args) -> int:
    from . import inequalities as ineq

    cfg = _load_config(args.config)
    family = args.family
    cfg["family"] = family
    if args.count is not None:
        cfg["count"] = args.count
    if args.dims is not None:
        cfg["dims"] = list(_parse_dims(args.dims))
    if args.seed is not None:
        cfg["seed"] = args.seed[0] if len(args.seed) == 1 else list(args.seed)
    if args.mode is not None:
        cfg["mode"] = args.mode
    seed = cfg.get("seed", 7)
    if isinstance(seed, list):
        seed = seed[0]
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    count = cfg.get("count")
    dims = tuple(cfg.get("dims", (2, 6)))

    if family == "gt":
        result = ineq.gt_battery(dims=dims, count=count or 500, seed=seed)
    elif family == "igt":
        result = ineq.igt_battery(dims=tuple(cfg.get("dims", (2, 5))), count=count or 100, seed=seed)
    elif family == "expineq":
        mode = cfg.get("mode", "corrected")
        if mode not in ("corrected", "as-stated"):
            raise ConfigError(f"bad mode {mode!r}")
        part1 = ineq.bennett_battery(seed=seed)
        part2 = ineq.bernstein_battery(mode=mode, seed=seed)
        result = ineq.BatteryResult(
            "expineq",
            part1.reports + part2.reports,
            {"part1": part1.summary, "part2": part2.summary, "mode": mode},
            part1.passed and part2.passed,
        )
    elif family == "scalars":
        result = ineq.scalar_battery()
    elif family == "chebyshev":
        result = ineq.chebyshev_battery(count=count or 50, seed=seed)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown family {family!r}")

    csv_lines = ["id,instance,lhs,rhs,slack,pass,status"]
    for r in result.reports:
        row = r.row()
        csv_lines.append(
            ",".join(
                [
                    row["id"],
                    str(row["instance"]).replace(",", ";"),
                    repr(row["lhs"]),
                    repr(row["rhs"]),
                    repr(row["slack"]),
                    str(row["pass"]),
                    row["status"],
                ]
            )
        )
    summary = {
        "family": family,
        "passed": result.passed,
        "summary": result.summary,
        "n_reports": len(result.reports),
    }
    if args.out:
        _write_outputs(args.out, f"verify {family}", cfg, [seed], csv_lines, summary)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(f"verify {family}: {'ok' if result.passed else 'MISMATCH'} ({len(result.reports)} checks)")
    return 0 if result.passed else 1


# -- lil ------------------------------------------------------------------------------


_LIL_KEYS = {
    "regime", "steps", "atoms", "dim", "factor_dim", "law", "law_p", "law_M",
    "checkpoints", "trace_budget", "delta_prime", "envelope_e", "seeds",
    "window_start", "chunk", "scale", "values", "weights",
}


def cmd_lil(args) -> int:
    from .lil import iid_pipeline, lil_run

    cfg = _load_config(args.config)
    for key in cfg:
        if key not in _LIL_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    cfg["regime"] = args.regime
    for name in ("steps", "atoms", "dim", "factor_dim"):
        v = getattr(args, name)
        if v is not None:
            cfg[name] = v
    if args.law is not None:
        cfg["law"] = args.law
    if args.trace_budget is not None:
        cfg["trace_budget"] = args.trace_budget
    if args.delta_prime is not None:
        cfg["delta_prime"] = args.delta_prime
    if args.envelope_e is not None:
        cfg["envelope_e"] = args.envelope_e
    if args.checkpoints is not None:
        try:
            cfg["checkpoints"] = [int(c) for c in args.checkpoints.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad checkpoints: {args.checkpoints!r}") from exc
    if args.seed is not None:
        cfg["seeds"] = list(args.seed)
    seeds = [int(s) for s in cfg.get("seeds", [0])]
    cfg["seeds"] = seeds

    if args.regime == "hw":
        report = iid_pipeline(cfg)
    else:
        report = lil_run(cfg)
    summary = {
        "regime": report.regime,
        "passed": report.passed,
        "invariants": report.invariants,
        "summary": report.summary,
        "csv_schema": _CSV_SCHEMA,
    }
    if args.out:
        _write_outputs(args.out, f"lil {args.regime}", cfg, seeds, report.csv_lines(), summary)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    else:
        print(f"lil {args.regime}: {'ok' if report.passed else 'MISMATCH'} ({len(report.rows)} rows)")
    return 0 if report.passed else 1


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lilab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"lilab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    st = sub.add_parser("selftest", help="run the core invariant suites")
    st.add_argument("--json", action="store_true")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--fixture", help="path to a fixture JSON (golden test)")
    st.set_defaults(func=cmd_selftest)

    vf = sub.add_parser("verify", help="run an inequality battery")
    vf.add_argument("family", choices=["gt", "igt", "expineq", "scalars", "chebyshev"])
    vf.add_argument("--config")
    vf.add_argument("--count", type=int)
    vf.add_argument("--dims", help="dimension range, e.g. 2..6")
    vf.add_argument("--seed", type=int, nargs="+")
    vf.add_argument("--mode", choices=["corrected", "as-stated"])
    vf.add_argument("--out")
    vf.add_argument("--json", action="store_true")
    vf.set_defaults(func=cmd_verify)

    ll = sub.add_parser("lil", help="run an iterated-logarithm experiment")
    ll.add_argument("regime", choices=["classical", "tensor", "gue", "hw"])
    ll.add_argument("--config")
    ll.add_argument("--steps", type=int)
    ll.add_argument("--atoms", type=int)
    ll.add_argument("--dim", type=int)
    ll.add_argument("--factor-dim", dest="factor_dim", type=int)
    ll.add_argument("--law")
    ll.add_argument("--trace-budget", dest="trace_budget", type=float)
    ll.add_argument("--delta-prime", dest="delta_prime", type=float)
    ll.add_argument("--envelope-e", dest="envelope_e", type=float)
    ll.add_argument("--checkpoints", help="comma-separated checkpoint steps")
    ll.add_argument("--seed", type=int, nargs="+")
    ll.add_argument("--out")
    ll.add_argument("--json", action="store_true")
    ll.set_defaults(func=cmd_lil)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
