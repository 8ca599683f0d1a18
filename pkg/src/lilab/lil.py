"""Iterated-logarithm experiments: scales, block schemes, and ratio tracking.

The headline bound is asymptotic, so the experiments report finite-horizon
surrogates: at each checkpoint n the operator-norm ratio ||x_n|| / (s_n u_n),
the s-number ratio mu_eps(x_n) / (s_n u_n) at a trace budget, and a witness
ratio ||x_n e_n|| / (s_n u_n) for a running meet e_n of per-checkpoint
spectral windows.  The three are ordered (witness <= s-number <= norm) and
every witness carries its union-bound trace certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    Interval,
    Operator,
    central_operator,
    herm_spectrum,
    is_selfadjoint,
    l2_norm,
    log_trace_exp,
    operator_norm,
    projection_meet,
    s_number,
    spectral_indicator,
    trace_real,
)
from .martingale import (
    Martingale,
    TwoPointLaw,
    bracket,
    gen_gue_increment,
    gen_iid_tower,
    gen_tensor_hermitian,
    iterated_log,
    rademacher_signs,
    three_band_split,
)

__all__ = [
    "SlackParameters",
    "BlockScheme",
    "ExperimentReport",
    "choose_slack",
    "dominating_sequence",
    "block_scheme",
    "lil_run",
    "iid_pipeline",
    "middle_band_mass",
    "middle_band_scan",
    "kronecker_diagnostic",
    "kronecker_walk_diagnostic",
    "borel_cantelli_budget",
    "tensor_block_analysis",
]


# -- parameter selection -------------------------------------------------------


@dataclass(frozen=True)
class SlackParameters:
    """Deterministic slack constants for a target level sqrt(2) (1 + delta')."""

    delta_prime: float
    delta: float
    eps: float
    eps_prime: float
    eta: float

    def validate(self):
        if not (0.0 < self.eps < 1.0):
            raise ValueError(f"eps out of (0,1): {self.eps}")
        if not (1.0 < self.eta < 2.0):
            raise ValueError(f"eta out of (1,2): {self.eta}")
        if not (1.0 + self.delta_prime > self.eta * (1.0 + self.delta) / (1.0 - self.eps_prime)):
            raise ValueError("block-versus-level inequality fails")
        if not ((1.0 + self.delta) ** 2 / (1.0 + self.eps) > 1.0):
            raise ValueError("summability exponent is not > 1")

    @property
    def exponent(self) -> float:
        return (1.0 + self.delta) ** 2 / (1.0 + self.eps)

    @property
    def level(self) -> float:
        return math.sqrt(2.0) * (1.0 + self.delta_prime)


def choose_slack(delta_prime: float) -> SlackParameters:
    """Feasible (delta, eps, eps', eta) for any delta' > 0, chosen deterministically."""
    if delta_prime <= 0:
        raise ValueError("delta_prime must be > 0")
    delta = delta_prime / 3.0
    eps = min(1.0, ((1.0 + delta) ** 2 - 1.0) / 2.0)
    while eps >= 1.0:
        eps /= 2.0
    eps_prime = min(delta_prime, 1.0) / 10.0
    eta_cap = (1.0 + delta_prime) * (1.0 - eps_prime) / (1.0 + delta)
    eta = min(1.0 + delta_prime / 10.0, eta_cap * (1.0 - 1e-9), 2.0 - 1e-6)
    pack = SlackParameters(delta_prime, delta, eps, eps_prime, eta)
    pack.validate()
    return pack


def dominating_sequence(alpha, beta) -> np.ndarray:
    """Dominating nonincreasing sequence whose product with beta is monotone.

    With abar_n the tail supremum of alpha over the available horizon and
    gamma_{n+1} = beta_{n+1}/beta_n, the recursion is

        a'_1 = abar_1,   a'_{n+1} = max(abar_{n+1}, a'_n / gamma_{n+1}).

    The output dominates alpha, is nonincreasing, and its product with beta
    is nondecreasing (up to float rounding in the product).
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if alpha.shape != beta.shape or alpha.ndim != 1 or alpha.size == 0:
        raise ValueError("alpha and beta must be equal-length 1-d sequences")
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ValueError("alpha and beta must be positive")
    if np.any(np.diff(beta) < 0):
        raise ValueError("beta must be nondecreasing")
    abar = np.maximum.accumulate(alpha[::-1])[::-1]
    out = np.empty_like(abar)
    out[0] = abar[0]
    for n in range(1, alpha.size):
        out[n] = max(abar[n], out[n - 1] * beta[n - 1] / beta[n])
    return out


def decay_ratio(alpha) -> float:
    """Tail-sup end/start ratio; ~1 flags a sequence that does not decay."""
    alpha = np.asarray(alpha, dtype=float)
    abar = np.maximum.accumulate(alpha[::-1])[::-1]
    return float(abar[-1] / abar[0]) if abar[0] > 0 else 1.0


# -- block scheme ---------------------------------------------------------------


@dataclass
class BlockScheme:
    """Geometric blocks k_n = inf{ j : s^2_{j+1} >= eta^(2n) }, k_0 = 0."""

    eta: float
    k: np.ndarray            # k_0 .. k_H (indices into the 1-based s^2 sequence)
    s2: np.ndarray           # the tracked s^2 sequence (s2[j-1] = s^2_j)
    ratios: np.ndarray       # decay ratios per block (nan where undefined)
    stable_from: int | None  # first n with all later ratios above the threshold

    @property
    def horizon(self) -> int:
        return len(self.k) - 1

    def block_members(self, n: int) -> range:
        """Indices m with k_n < m <= k_{n+1} (1-based m)."""
        return range(int(self.k[n]) + 1, int(self.k[n + 1]) + 1)


def block_scheme(s2, eta: float, eps_prime: float | None = None, u=None) -> BlockScheme:
    """Block boundaries from a nondecreasing bracket sequence.

    ``s2[j-1]`` holds s^2_j.  Each boundary satisfies s^2_{k_n + 1} >= eta^(2n)
    and s^2_{k_n} < eta^(2n).  When ``eps_prime`` and the scale sequence ``u``
    are supplied, the report records the first n from which
    (s^2_{k_n+1} u^2_{k_n+1}) / (s^2_{k_{n+1}} u^2_{k_{n+1}}) >= (1-eps')^2 / eta^2
    holds onward.
    """
    s2 = np.asarray(s2, dtype=float)
    if np.any(np.diff(s2) < -1e-12 * max(1.0, float(np.abs(s2).max()))):
        raise ValueError("s^2 must be nondecreasing")
    if not (1.0 < eta < 2.0):
        raise ValueError("eta must be in (1, 2)")
    if s2[-1] < eta**2:
        raise ValueError("s^2 never reaches eta^2 within the horizon")
    ks = [0]
    n = 1
    while True:
        # thresholds snap by 1e-12 relative so exact ties cut deterministically
        thr = eta ** (2 * n) * (1.0 - 1e-12)
        if thr > s2[-1]:
            break
        ks.append(int(np.searchsorted(s2, thr, side="left")))
        n += 1
    k = np.array(ks, dtype=int)
    for n in range(1, len(k)):
        thr = eta ** (2 * n) * (1.0 - 1e-12)
        if s2[k[n]] < thr or (k[n] >= 1 and s2[k[n] - 1] >= thr):
            raise AssertionError("block boundary violates its defining inequalities")
    ratios = np.full(max(len(k) - 1, 0), np.nan)
    stable_from = None
    if u is not None and eps_prime is not None:
        u = np.asarray(u, dtype=float)
        thr = (1.0 - eps_prime) ** 2 / eta**2
        for n in range(len(k) - 1):
            k1 = k[n + 1]
            if k1 >= 1:
                ratios[n] = (s2[k[n]] * u[k[n]] ** 2) / (s2[k1 - 1] * u[k1 - 1] ** 2)
        ok = ~(ratios < thr)  # nan counts as ok (empty block)
        for n in range(len(ok)):
            if ok[n:].all():
                stable_from = n
                break
    return BlockScheme(eta, k, s2, ratios, stable_from)


# -- reports ---------------------------------------------------------------------


@dataclass
class ExperimentReport:
    regime: str
    config: dict
    seeds: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    invariants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.invariants.values())

    def csv_lines(self) -> list:
        if not self.rows:
            return [""]
        header = list(self.rows[0].keys())
        lines = [",".join(header)]
        for row in self.rows:
            lines.append(",".join(_csv_cell(row.get(h)) for h in header))
        return lines


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _safe_ratio(num: float, den: float) -> float:
    return 0.0 if num == 0.0 else num / den


class _WitnessTracker:
    """Running meet of per-checkpoint trace-budget spectral windows.

    Each window keeps its own full budget, so the certificate is the union
    bound (sum of per-window deficits); the actual meet deficit is recorded
    beside it and is always below the certificate.
    """

    def __init__(self, budget: float):
        self.budget = budget
        self.e = None
        self.certificate = 0.0

    def update(self, x: Operator):
        one = x.algebra.identity()
        mu = s_number(x, self.budget)
        q = spectral_indicator(x, Interval.within(mu))
        self.certificate += trace_real(one - q, tol=1e-8)
        self.e = q if self.e is None else projection_meet([self.e, q])
        deficit = trace_real(one - self.e, tol=1e-8)
        wit_norm = operator_norm(x @ self.e)
        return mu, wit_norm, deficit, self.certificate


def _default_checkpoints(steps: int, count: int = 24, start: int = 1) -> list:
    pts = np.unique(np.geomspace(max(start, 1), steps, count).astype(int))
    return [int(p) for p in pts]


# -- experiment regimes -----------------------------------------------------------


def _classical_run(cfg: dict, seed: int):
    atoms = int(cfg.get("atoms", 2048))
    steps = int(cfg.get("steps", 200000))
    budget = float(cfg.get("trace_budget", 0.05))
    window_start = int(cfg.get("window_start", 1000))
    checkpoints = cfg.get("checkpoints") or _default_checkpoints(steps, start=10)
    checkpoints = sorted(int(c) for c in checkpoints)
    chunk = int(cfg.get("chunk", 4096))
    rng = np.random.default_rng(seed)

    S = np.zeros(atoms)
    best = np.zeros(atoms)
    mask = np.ones(atoms, dtype=bool)
    certificate = 0.0
    rows = []
    cp_iter = iter(checkpoints)
    next_cp = next(cp_iter, None)
    k_idx = int(math.floor(budget * atoms + 1e-12))
    k_idx = min(k_idx, atoms - 1)
    done = 0
    while done < steps:
        c = min(chunk, steps - done)
        signs = rademacher_signs(c, atoms, rng)
        cs = np.cumsum(signs, axis=0) + S
        S = cs[-1]
        ns = np.arange(done + 1, done + c + 1, dtype=float)
        scale = np.sqrt(ns * iterated_log(ns))
        lo = max(0, window_start - done - 1)
        if lo < c:
            ratios = np.abs(cs[lo:]) / scale[lo:, None]
            best = np.maximum(best, ratios.max(axis=0))
        while next_cp is not None and done < next_cp <= done + c:
            n = next_cp
            row_s = cs[n - done - 1]
            abs_s = np.abs(row_s)
            denom = math.sqrt(n) * math.sqrt(iterated_log(float(n)))
            mu = np.partition(abs_s, atoms - 1 - k_idx)[atoms - 1 - k_idx]
            q = abs_s <= mu * (1.0 + 1e-12)
            certificate += 1.0 - q.mean()
            mask &= q
            wit_norm = abs_s[mask].max() if mask.any() else 0.0
            rows.append(
                {
                    "seed": seed,
                    "n": n,
                    "s2": float(n),
                    "u": math.sqrt(iterated_log(float(n))),
                    "ratio_opnorm": _safe_ratio(float(abs_s.max()), denom),
                    "ratio_mu": _safe_ratio(float(mu), denom),
                    "ratio_witness": _safe_ratio(float(wit_norm), denom),
                    "witness_deficit": float(1.0 - mask.mean()),
                    "witness_certificate": float(certificate),
                }
            )
            next_cp = next(cp_iter, None)
        done += c

    terminal = np.abs(S) / (math.sqrt(steps) * math.sqrt(iterated_log(float(steps))))
    summary = {
        "max_ratio_median": float(np.median(best)),
        "max_ratio_p99": float(np.quantile(best, 0.99)),
        "max_ratio_max": float(best.max()),
        "terminal_ratio_median": float(np.median(terminal)),
        "terminal_ratio_p99": float(np.quantile(terminal, 0.99)),
        "terminal_ratio_max": float(terminal.max()),
    }
    return rows, summary


def _gue_run(cfg: dict, seed: int):
    dim = int(cfg.get("dim", 100))
    steps = int(cfg.get("steps", 1000))
    budget = float(cfg.get("trace_budget", 0.05))
    checkpoints = cfg.get("checkpoints") or _default_checkpoints(steps, count=12, start=10)
    checkpoints = sorted(int(c) for c in checkpoints)
    rng = np.random.default_rng(seed)
    from .blocks import matrix_algebra, trace

    alg = matrix_algebra(dim)
    x = alg.zero()
    s2 = 0.0
    tracker = _WitnessTracker(budget)
    rows = []
    cp = set(checkpoints)
    for n in range(1, steps + 1):
        h = gen_gue_increment(dim, rng)
        x = x + h
        s2 += trace_real(h @ h)
        if n in cp:
            u = math.sqrt(iterated_log(s2))
            denom = math.sqrt(s2) * u
            mu, wit_norm, deficit, cert = tracker.update(x)
            rows.append(
                {
                    "seed": seed,
                    "n": n,
                    "s2": s2,
                    "u": u,
                    "ratio_opnorm": _safe_ratio(operator_norm(x), denom),
                    "ratio_mu": _safe_ratio(mu, denom),
                    "ratio_witness": _safe_ratio(wit_norm, denom),
                    "witness_deficit": deficit,
                    "witness_certificate": cert,
                }
            )
    summary = {"free_scale_reference": {str(r["n"]): 2.0 / r["u"] for r in rows}}
    return rows, summary


def _tensor_martingale(cfg: dict, seed: int) -> Martingale:
    law = cfg.get("law", "rademacher")
    steps = int(cfg.get("steps", 12))
    if law == "rademacher":
        return gen_iid_tower([1.0, -1.0], [0.5, 0.5], steps)
    if law == "skewed":
        tp = TwoPointLaw(float(cfg.get("law_p", 0.05)), float(cfg.get("law_M", 1.0)))
        return tp.tower(steps)
    if law in ("twopoint-hermitian", "bounded"):
        return gen_tensor_hermitian(
            steps,
            int(cfg.get("factor_dim", 2)),
            seed=seed,
            law="twopoint" if law == "twopoint-hermitian" else "bounded",
            scale=float(cfg.get("scale", 1.0)),
            envelope=cfg.get("envelope_e"),
        )
    if law == "zero":
        mart = gen_iid_tower([0.0, 0.0], [0.5, 0.5], steps)
        return mart
    raise ValueError(f"unknown tensor law {law!r}")


def _tensor_run(cfg: dict, seed: int):
    budget = float(cfg.get("trace_budget", 0.05))
    mart = _tensor_martingale(cfg, seed)
    track = bracket(mart)
    tracker = _WitnessTracker(budget)
    rows = []
    checkpoints = cfg.get("checkpoints") or list(range(1, mart.steps + 1))
    for n in sorted(int(c) for c in checkpoints):
        x = mart.value(n)
        s2 = float(track.s2[n - 1])
        u = float(track.u[n - 1])
        denom = math.sqrt(s2) * u if s2 > 0 else 1.0
        mu, wit_norm, deficit, cert = tracker.update(x)
        rows.append(
            {
                "seed": seed,
                "n": n,
                "s2": s2,
                "u": u,
                "ratio_opnorm": _safe_ratio(operator_norm(x), denom),
                "ratio_mu": _safe_ratio(mu, denom),
                "ratio_witness": _safe_ratio(wit_norm, denom),
                "witness_deficit": deficit,
                "witness_certificate": cert,
            }
        )
    summary = {}
    dp = cfg.get("delta_prime")
    if dp is not None and float(track.s2[-1]) > choose_slack(float(dp)).eta ** 2:
        summary["block_analysis"] = tensor_block_analysis(mart, track, float(dp))
    return rows, summary


def lil_run(config: dict) -> ExperimentReport:
    """Run one iterated-logarithm experiment; deterministic per (config, seeds)."""
    cfg = dict(config)
    regime = cfg.get("regime", "classical")
    seeds = [int(s) for s in cfg.get("seeds", [0])]
    runners = {"classical": _classical_run, "gue": _gue_run, "tensor": _tensor_run}
    if regime not in runners:
        raise ValueError(f"unknown regime {regime!r}")
    report = ExperimentReport(regime, cfg, seeds)
    per_seed = {}
    for seed in seeds:
        rows, summary = runners[regime](cfg, seed)
        report.rows.extend(rows)
        per_seed[str(seed)] = summary
    report.summary["per_seed"] = per_seed
    tol = 1e-9
    report.invariants["witness_le_mu"] = all(
        r["ratio_witness"] <= r["ratio_mu"] + tol for r in report.rows
    )
    report.invariants["mu_le_opnorm"] = all(
        r["ratio_mu"] <= r["ratio_opnorm"] + tol for r in report.rows
    )
    report.invariants["certificates_hold"] = all(
        r["witness_deficit"] <= r["witness_certificate"] + 1e-12 for r in report.rows
    )
    by_seed = {}
    for r in report.rows:
        by_seed.setdefault(r["seed"], []).append(r["s2"])
    report.invariants["s2_nondecreasing"] = all(
        all(a <= b + 1e-12 for a, b in zip(v, v[1:])) for v in by_seed.values()
    )
    return report


# -- independent-variable pipeline -------------------------------------------------


def iid_pipeline(config: dict) -> ExperimentReport:
    """Three-band split diagnostics for an i.i.d. self-adjoint tower.

    Per step k the difference is cut at e sqrt(k)/(2 u_k) and sqrt(k) with
    u_k = L(k)^(1/2); the report tracks envelope compliance of the low band,
    the middle-band L2 series sum ||z_k - tau(z_k)||_2^2 / (k u_k^2), the
    high-band trace budget against the law's second moment, and the combined
    ratio series.
    """
    cfg = dict(config)
    steps = int(cfg.get("steps", 12))
    e_param = float(cfg.get("envelope_e", 0.5))
    if e_param <= 0:
        raise ValueError("envelope_e must be > 0")
    law = cfg.get("law", "skewed")
    if law == "skewed":
        tp = TwoPointLaw(float(cfg.get("law_p", 0.05)), float(cfg.get("law_M", 3.0)))
        if tp.variance > 1.0 + 1e-12:
            raise ValueError("law must satisfy ||y||_2 <= 1")
        mart = tp.tower(steps)
        second_moment = tp.variance
    elif law == "bounded":
        values = np.asarray(cfg.get("values", [1.0, -1.0]), dtype=float)
        weights = np.asarray(cfg.get("weights", [0.5, 0.5]), dtype=float)
        second_moment = float(np.dot(weights, (values - np.dot(weights, values)) ** 2))
        if second_moment > 1.0 + 1e-12:
            raise ValueError("law must satisfy ||y||_2 <= 1")
        mart = gen_iid_tower(values, weights, steps)
    else:
        raise ValueError(f"unknown iid law {law!r}")

    one = mart.algebra.identity()
    rows = []
    x_low = mart.algebra.zero()
    x_mid = mart.algebra.zero()
    x_high = mart.algebra.zero()
    l2_series = 0.0
    w_budget = 0.0
    resum_worst = 0.0
    cross_worst = 0.0
    envelope_ok = True
    for k in range(1, steps + 1):
        y = mart.diffs[k - 1]
        u_k = math.sqrt(iterated_log(float(k)))
        low, mid, high = three_band_split(y, k, e_param)
        resum_worst = max(resum_worst, operator_norm(low + mid + high - y))
        spec = herm_spectrum(y)
        c1 = e_param * math.sqrt(k) / (2.0 * u_k)
        c2 = math.sqrt(k)
        bands = (Interval.closed(0.0, c1), Interval.half_open(c1, c2), Interval.above(c2))
        raws = [spec.apply(lambda v, b=band: v * b.contains(np.abs(v))) for band in bands]
        for i in range(3):
            for j in range(i + 1, 3):
                cross_worst = max(cross_worst, operator_norm(raws[i] @ raws[j]))
        envelope_ok &= operator_norm(low) <= e_param * math.sqrt(k) / u_k * (1.0 + 1e-9)
        l2_series += l2_norm(mid) ** 2 / (k * u_k**2)
        w_budget += trace_real(spectral_indicator(y, Interval.above(c2), of_modulus=True))
        x_low = x_low + low
        x_mid = x_mid + mid
        x_high = x_high + high
        denom = math.sqrt(k) * u_k
        rows.append(
            {
                "seed": 0,
                "n": k,
                "s2": float(k),
                "u": u_k,
                "ratio_low": _safe_ratio(operator_norm(x_low), denom),
                "ratio_mid": _safe_ratio(operator_norm(x_mid), denom),
                "ratio_high": _safe_ratio(operator_norm(x_high), denom),
                "ratio_total": _safe_ratio(operator_norm(x_low + x_mid + x_high), denom),
                "l2_series": l2_series,
                "w_budget": w_budget,
            }
        )
    report = ExperimentReport("hw", cfg, [0], rows)
    report.summary = {
        "l2_series_final": l2_series,
        "w_budget_final": w_budget,
        "second_moment": second_moment,
        "resum_worst": resum_worst,
        "cross_worst": cross_worst,
    }
    report.invariants["parts_resum"] = resum_worst <= 1e-10
    report.invariants["supports_disjoint"] = cross_worst <= 1e-12
    report.invariants["low_band_envelope"] = bool(envelope_ok)
    report.invariants["w_budget_within_second_moment"] = w_budget <= second_moment + 1e-12
    l2_vals = [r["l2_series"] for r in rows]
    report.invariants["l2_series_monotone"] = all(
        a <= b + 1e-15 for a, b in zip(l2_vals, l2_vals[1:])
    )
    return report


# -- middle-band mass (boundedness of the splitting weight) -------------------------


def middle_band_mass(e: float, t: float, n_cap: int = 10**8) -> float:
    """G(t) = sum of 1/(n u_n^2) over n with sqrt(n) >= t > e sqrt(n)/u_n."""
    if e <= 0 or t <= 0:
        raise ValueError("e and t must be > 0")
    lo = max(1, int(math.ceil(t * t - 1e-12)))
    hi = max(lo + 1, int(t * t / (e * e)) + 2)
    while iterated_log(float(hi)) * t * t > e * e * hi:
        hi *= 2
        if hi > n_cap:
            raise OverflowError("summation window exceeds the cap")
    total = 0.0
    chunk = 1 << 20
    for start in range(lo, hi + 1, chunk):
        ns = np.arange(start, min(start + chunk, hi + 1), dtype=float)
        u2 = iterated_log(ns)
        mask = (np.sqrt(ns) >= t) & (u2 * t * t > e * e * ns)
        total += float(np.sum(1.0 / (ns[mask] * u2[mask])))
    return total


def middle_band_scan(e: float, t_grid, n_cap: int = 10**8) -> dict:
    values = np.array([middle_band_mass(e, float(t), n_cap) for t in t_grid])
    t_grid = np.asarray(t_grid, dtype=float)
    third = max(1, len(values) // 3)
    head_max = float(values[:-third].max()) if len(values) > third else float(values.max())
    tail_max = float(values[-third:].max())
    return {
        "t": t_grid.tolist(),
        "g": values.tolist(),
        "max": float(values.max()),
        "tail_head_ratio": tail_max / max(head_max, 1e-300),
        "no_growth_trend": tail_max <= head_max * 1.05 + 1e-12,
    }


# -- Kronecker and Borel-Cantelli diagnostics ---------------------------------------


def kronecker_diagnostic(xs, alphas, budget: float = 0.05, tail_fraction: float = 0.5) -> dict:
    """Finite-horizon shadow of the Kronecker lemma for a.u. convergence.

    Builds the weighted partial sums S_n = sum x_k / alpha_k and the averaged
    sums T_n = (1/alpha_n) sum x_k, finds one witness projection from the tail
    spectral windows of S_n - S_N, and reports whether compressed Cauchy decay
    of S transfers to decay of T.
    """
    xs = list(xs)
    alphas = np.asarray(alphas, dtype=float)
    if len(xs) != alphas.size:
        raise ValueError("need one coefficient per term")
    if np.any(alphas <= 0) or np.any(np.diff(alphas) < 0):
        raise ValueError("alphas must be positive and nondecreasing")
    alg = xs[0].algebra
    one = alg.identity()
    S = alg.zero()
    T_raw = alg.zero()
    S_list = []
    T_list = []
    for x, a in zip(xs, alphas):
        S = S + x / a
        T_raw = T_raw + x
        S_list.append(S)
        T_list.append(T_raw)
    N = len(xs)
    tail_start = int(N * tail_fraction)
    diffs = [S_list[m] - S_list[-1] for m in range(N)]
    per_budget = budget / max(N - tail_start, 1)
    windows = []
    for m in range(tail_start, N):
        d = diffs[m]
        mu = s_number(d, per_budget) if operator_norm(d) > 0 else 0.0
        windows.append(spectral_indicator(d, Interval.within(max(mu, 1e-300))))
    e = projection_meet(windows) if windows else one
    deficit = trace_real(one - e, tol=1e-8)
    cauchy = [operator_norm(diffs[m] @ e) for m in range(tail_start, N)]
    decay = [operator_norm((T_list[m] / alphas[m]) @ e) for m in range(N)]
    head = max(decay[: max(N // 3, 1)])
    return {
        "witness_deficit": deficit,
        "budget": budget,
        "cauchy_tail_sup": max(cauchy) if cauchy else 0.0,
        "decay_series": decay,
        "final_over_head": (decay[-1] / head) if head > 0 else 0.0,
    }


def kronecker_walk_diagnostic(
    steps: int, atoms: int, seed: int = 0, budget: float = 0.05, n_checkpoints: int = 16
) -> dict:
    """Vectorized Kronecker diagnostic for the diagonal Rademacher walk with
    alpha_n = sqrt(n) u_n."""
    rng = np.random.default_rng(seed)
    alphas = np.sqrt(np.arange(1, steps + 1) * iterated_log(np.arange(1.0, steps + 1.0)))
    checkpoints = _default_checkpoints(steps, count=n_checkpoints, start=8)
    S = np.zeros(atoms)
    C = np.zeros(atoms)
    snaps_S = {}
    snaps_T = {}
    done = 0
    chunk = 4096
    while done < steps:
        c = min(chunk, steps - done)
        signs = rademacher_signs(c, atoms, rng)
        w = signs / alphas[done : done + c, None]
        cs_w = np.cumsum(w, axis=0) + S
        cs = np.cumsum(signs, axis=0) + C
        for cp in checkpoints:
            if done < cp <= done + c:
                snaps_S[cp] = cs_w[cp - done - 1].copy()
                snaps_T[cp] = cs[cp - done - 1] / alphas[cp - 1]
        S = cs_w[-1]
        C = cs[-1]
        done += c
    S_final = S
    tail = [cp for cp in checkpoints if cp >= steps // 2]
    per_budget = budget / max(len(tail), 1)
    k_idx = min(int(math.floor(per_budget * atoms + 1e-12)), atoms - 1)
    mask = np.ones(atoms, dtype=bool)
    for cp in tail:
        d = np.abs(snaps_S[cp] - S_final)
        mu = np.partition(d, atoms - 1 - k_idx)[atoms - 1 - k_idx]
        mask &= d <= mu * (1.0 + 1e-12)
    deficit = 1.0 - mask.mean()
    cauchy = [float(np.abs(snaps_S[cp] - S_final)[mask].max()) for cp in tail]
    decay = [float(np.abs(snaps_T[cp])[mask].max()) for cp in checkpoints]
    head = max(decay[: max(len(decay) // 3, 1)])
    return {
        "witness_deficit": float(deficit),
        "budget": budget,
        "cauchy_tail_sup": max(cauchy) if cauchy else 0.0,
        "checkpoints": checkpoints,
        "decay_series": decay,
        "final_over_head": (decay[-1] / head) if head > 0 else 0.0,
    }


def borel_cantelli_budget(deficits, s2_at_next_boundary, pack: SlackParameters, n_start: int = 1) -> dict:
    """Blockwise tail budget against the theoretical decay envelope.

    ``deficits[i]`` is the certified witness deficit of block n = n_start + i
    and ``s2_at_next_boundary[i]`` the bracket value s^2_{k_{n+1}}.  The tight
    envelope is 8 (ln s^2_{k_{n+1}})^(-exponent); the coarse envelope replaces
    ln s^2 by (2 ln eta) n.  The exponent is > 1 for every valid parameter
    pack, so the coarse envelope series converges.
    """
    deficits = np.asarray(deficits, dtype=float)
    s2b = np.asarray(s2_at_next_boundary, dtype=float)
    if deficits.shape != s2b.shape:
        raise ValueError("need one boundary bracket value per block deficit")
    expo = pack.exponent
    ns = np.arange(n_start, n_start + deficits.size, dtype=float)
    with np.errstate(divide="ignore"):
        tight = np.where(s2b > 1.0, 8.0 * np.log(s2b) ** (-expo), np.inf)
    coarse = 8.0 * ((2.0 * math.log(pack.eta)) * ns) ** (-expo)
    valid = np.isfinite(tight)
    return {
        "exponent": expo,
        "exponent_gt_one": expo > 1.0,
        "tight_envelope": tight.tolist(),
        "coarse_envelope": coarse.tolist(),
        "deficit_partial_sums": np.cumsum(deficits).tolist(),
        "envelope_partial_sums": np.cumsum(np.where(valid, tight, 0.0)).tolist(),
        "under_envelope": bool(np.all(deficits[valid] <= tight[valid] + 1e-12)),
        "n_valid_blocks": int(valid.sum()),
    }


def tensor_block_analysis(mart: Martingale, track, delta_prime: float) -> dict:
    """Per-block witness deficits, exponential-chain bounds, and envelopes.

    For each block the witness is the meet of the spectral windows
    1_[-t_m, t_m](x_m) at t_m = sqrt(2) (1+delta') s_m u_m over the block
    members; the chain bound 4 e^-p (tau(e^{lam y}) + tau(e^{-lam y})) with
    the canonical lam and p = lam sqrt(2) (1+delta) sits under the tight
    envelope whenever the dominating-sequence hypothesis holds at the block
    end.
    """
    pack = choose_slack(delta_prime)
    scheme = block_scheme(track.s2, pack.eta, eps_prime=pack.eps_prime, u=track.u)
    s2, u = track.s2, track.u
    norms = np.array([operator_norm(d) for d in mart.diffs])
    alphas = norms * u / np.sqrt(s2)
    alpha_dom = dominating_sequence(alphas, np.sqrt(s2) / u)
    level = pack.level
    one = mart.algebra.identity()
    blocks = []
    for n in range(scheme.horizon):
        members = list(scheme.block_members(n))
        if not members:
            continue
        windows = []
        for m in members:
            t_m = level * math.sqrt(s2[m - 1]) * u[m - 1]
            windows.append(spectral_indicator(mart.value(m), Interval.within(t_m)))
        e = projection_meet(windows)
        deficit = trace_real(one - e, tol=1e-8)
        k1 = int(scheme.k[n + 1])
        su = math.sqrt(s2[k1 - 1]) * u[k1 - 1]
        lam = math.sqrt(2.0) * (1.0 + pack.delta) * u[k1 - 1] ** 2 / (1.0 + pack.eps)
        p_exp = lam * math.sqrt(2.0) * (1.0 + pack.delta)
        y = mart.value(k1) / su
        chain = 4.0 * math.exp(-p_exp) * (
            math.exp(log_trace_exp(y, lam)) + math.exp(log_trace_exp(y, -lam))
        )
        hyp_ok = alpha_dom[k1 - 1] <= 3.0 * pack.eps / (math.sqrt(2.0) * (1.0 + pack.delta))
        ln_s2 = math.log(s2[k1 - 1]) if s2[k1 - 1] > 1.0 else None
        envelope = 8.0 * ln_s2 ** (-pack.exponent) if ln_s2 else None
        blocks.append(
            {
                "n": n,
                "members": members,
                "deficit": deficit,
                "chain_bound": chain,
                "envelope": envelope,
                "hypothesis_ok": bool(hyp_ok),
                "s2_boundary": float(s2[k1 - 1]),
            }
        )
    return {
        "pack": {
            "delta_prime": pack.delta_prime,
            "delta": pack.delta,
            "eps": pack.eps,
            "eps_prime": pack.eps_prime,
            "eta": pack.eta,
            "exponent": pack.exponent,
        },
        "stable_from": scheme.stable_from,
        "boundaries": scheme.k.tolist(),
        "blocks": blocks,
    }
