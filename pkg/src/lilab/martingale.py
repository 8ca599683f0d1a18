"""Martingales on tracial algebras: brackets, dilation, truncation, generators.

A martingale is stored through its difference sequence d_1..d_N against a
filtration; x_0 = 0 throughout.  The bracket track records

    s_n^2 = || sum_{k<=n} E_{k-1}(d_k* d_k) ||      (self-adjoint case)
    t_n^2 = max of the two one-sided bracket norms   (general case)

together with the iterated-logarithm scales u_n = L(s_n^2)^(1/2) and
v_n = L(t_n^2)^(1/2), where L(x) = max(1, ln ln x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    Interval,
    Operator,
    TracialAlgebra,
    atom_algebra,
    central_operator,
    herm_spectrum,
    is_selfadjoint,
    matrix_algebra,
    operator_norm,
    trace,
    trace_real,
)
from .expectation import Filtration, MarginalSubalgebra, Subalgebra, partition_subalgebra, scalar_subalgebra, tensor_filtration
from .tensor import DEFAULT_DIM_CAP, Factor, atom_factor, matrix_factor

__all__ = [
    "Martingale",
    "ScaleTrack",
    "MartingaleCheck",
    "TwoPointLaw",
    "iterated_log",
    "bracket",
    "dilate",
    "dilate_operator",
    "truncate_center",
    "three_band_split",
    "rademacher_signs",
    "gen_dyadic_rademacher",
    "gen_tensor_hermitian",
    "gen_tensor_nonselfadjoint",
    "gen_iid_tower",
    "gen_skewed_twopoint",
    "gen_gue_increment",
    "gen_gue_sum",
]

ENSEMBLE_CAP = 2**22  # steps * atoms cap for materialized ensemble martingales


def iterated_log(x):
    """L(x) = max(1, ln ln x) for x > 1, extended by L(x) = 1 for 0 <= x <= 1."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("iterated_log requires x >= 0")
    out = np.ones_like(arr)
    m = arr > 1.0
    if np.any(m):
        out[m] = np.maximum(1.0, np.log(np.log(arr[m])))
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


@dataclass
class Martingale:
    """Adapted sequence via its differences; x_0 = 0.

    ``filtration`` may be None for ensemble-style generators whose
    differences have scalar brackets (then E_{k-1}(d_k* d_k) = tau(d_k* d_k) 1
    holds for any tower and the bracket never touches the filtration).
    """

    filtration: Filtration | None
    diffs: list
    selfadjoint: bool = True
    label: str = ""
    _values: list = field(default=None, repr=False)

    @property
    def algebra(self) -> TracialAlgebra:
        return self.diffs[0].algebra

    @property
    def steps(self) -> int:
        return len(self.diffs)

    @property
    def values(self):
        """x_0 = 0, x_1, ..., x_N (cached)."""
        if self._values is None:
            xs = [self.algebra.zero()]
            for d in self.diffs:
                xs.append(xs[-1] + d)
            self._values = xs
        return self._values

    def value(self, n: int) -> Operator:
        return self.values[n]

    def check(self, rtol: float = 1e-9) -> "MartingaleCheck":
        """Verify adaptedness and the martingale property against the filtration."""
        if self.filtration is None:
            raise ValueError("martingale has no explicit filtration to check against")
        worst_adapted = 0.0
        worst_mart = 0.0
        xs = self.values
        for k in range(1, self.steps + 1):
            scale = max(1.0, operator_norm(xs[k]))
            worst_adapted = max(
                worst_adapted,
                operator_norm(self.filtration.expect(k, xs[k]) - xs[k]) / scale,
            )
            worst_mart = max(
                worst_mart,
                operator_norm(self.filtration.expect(k - 1, xs[k]) - xs[k - 1]) / scale,
            )
        if self.selfadjoint:
            for d in self.diffs:
                if not is_selfadjoint(d):
                    raise ValueError("difference is not self-adjoint but martingale is flagged so")
        return MartingaleCheck(worst_adapted, worst_mart, max(worst_adapted, worst_mart) <= rtol)


@dataclass
class MartingaleCheck:
    adapted_error: float
    martingale_error: float
    passed: bool


@dataclass
class ScaleTrack:
    """Per-step bracket norms and iterated-logarithm scales."""

    s2: np.ndarray
    t2: np.ndarray
    u: np.ndarray
    v: np.ndarray
    col2: np.ndarray
    row2: np.ndarray
    col_op: Operator | None = None  # final sum_k E_{k-1}(d_k* d_k), if kept
    row_op: Operator | None = None


def _is_scalar_multiple(x: Operator, tol: float = 1e-12):
    """If x = c * 1 within tol * max(1, |c|), return c, else None."""
    c = trace(x)
    resid = operator_norm(x - c * x.algebra.identity())
    if resid <= tol * max(1.0, abs(c)):
        return c
    return None


def bracket(m: Martingale, keep_operators: bool = False) -> ScaleTrack:
    """Accumulate both one-sided brackets and their norms step by step."""
    n = m.steps
    col2 = np.zeros(n)
    row2 = np.zeros(n)
    alg = m.algebra
    col = alg.zero()
    row = alg.zero()
    for k, d in enumerate(m.diffs, start=1):
        dd_col = d.H @ d
        dd_row = d @ d.H
        if m.filtration is not None:
            sub = m.filtration.levels[k - 1]
            e_col = sub.expect(dd_col)
            e_row = sub.expect(dd_row)
        else:
            c_col = _is_scalar_multiple(dd_col)
            c_row = _is_scalar_multiple(dd_row)
            if c_col is None or c_row is None:
                raise ValueError(
                    "bracket needs a filtration unless every d_k* d_k and d_k d_k* is scalar"
                )
            e_col = central_operator(alg, np.full(len(alg.blocks), c_col))
            e_row = central_operator(alg, np.full(len(alg.blocks), c_row))
        col = col + e_col
        row = row + e_row
        col2[k - 1] = operator_norm(col)
        row2[k - 1] = operator_norm(row)
    s2 = col2.copy()
    t2 = np.maximum(col2, row2)
    track = ScaleTrack(
        s2=s2,
        t2=t2,
        u=np.sqrt(iterated_log(s2)),
        v=np.sqrt(iterated_log(t2)),
        col2=col2,
        row2=row2,
    )
    if keep_operators:
        track.col_op = col
        track.row_op = row
    return track


# -- dilation ---------------------------------------------------------------

_E01 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
_E10 = _E01.T.copy()


def dilate_operator(x: Operator) -> Operator:
    """Self-adjoint 2x2 off-diagonal dilation [[0, x], [x*, 0]] (blockwise)."""
    alg2 = TracialAlgebra([(2 * d, w) for d, w in x.algebra.blocks])
    data = [np.kron(d, _E01) + np.kron(np.conj(np.swapaxes(d, -1, -2)), _E10) for d in x.data]
    return Operator(alg2, data, check=False)


def _dilate_subalgebra(sub, alg2: TracialAlgebra):
    if isinstance(sub, MarginalSubalgebra):
        raise TypeError("marginal levels are dilated through their tensor space")
    rows = []
    units = [np.sqrt(2.0) * e for e in (
        np.array([[1, 0], [0, 0]], dtype=np.complex128),
        _E01,
        _E10,
        np.array([[0, 0], [0, 1]], dtype=np.complex128),
    )]
    for op in sub.basis_operators():
        for u in units:
            lifted = Operator(alg2, [np.kron(d, u) for d in op.data], check=False)
            rows.append(alg2.wvec(lifted))
    from .expectation import _orthonormal_rows

    return Subalgebra(alg2, _orthonormal_rows(np.array(rows)), label=f"{sub.label}x2")


def dilate(m: Martingale) -> Martingale:
    """Dilate to a self-adjoint martingale on the doubled algebra.

    Difference norms are preserved and the dilated bracket equals
    diag(d d*, d* d), so the dilated s-track coincides with the original
    two-sided t-track.
    """
    filt2 = None
    if m.filtration is not None:
        if m.filtration.space is not None:
            space2 = m.filtration.space.extended(matrix_factor(2))
            extra = len(space2.factors) - 1
            levels = [
                MarginalSubalgebra(space2, set(lvl.kept) | {extra}, label=f"{lvl.label}x2")
                for lvl in m.filtration.levels
            ]
            filt2 = Filtration(space2.algebra, levels, space=space2, validate=False)
            alg2 = space2.algebra
            diffs = [space2_embed_dilated(space2, d) for d in m.diffs]
        else:
            alg2 = TracialAlgebra([(2 * d, w) for d, w in m.algebra.blocks])
            levels = [_dilate_subalgebra(lvl, alg2) for lvl in m.filtration.levels]
            filt2 = Filtration(alg2, levels, validate=False)
            diffs = [dilate_operator(d) for d in m.diffs]
    else:
        diffs = [dilate_operator(d) for d in m.diffs]
    return Martingale(filt2, diffs, selfadjoint=True, label=f"dilated({m.label})")


def space2_embed_dilated(space2, d: Operator) -> Operator:
    """Rebuild [[0, d], [d*, 0]] as data on the extended tensor space."""
    raw = np.kron(d.data[0], _E01) + np.kron(np.conj(np.swapaxes(d.data[0], -1, -2)), _E10)
    return Operator(space2.algebra, [raw], check=False)


# -- truncation and splitting ------------------------------------------------


def truncate_center(d: Operator, cutoff: float, sub) -> tuple:
    """Split d into a centered small part and a centered large part.

    small = d' - E(d'), large = d'' - E(d'') with d' = d 1_[0, cutoff](|d|);
    the parts sum back to d because E(d) = 0, and ||small|| <= 2 cutoff.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    spec = herm_spectrum(d)
    inside = Interval.closed(0.0, cutoff)
    small_raw = spec.apply(lambda v: v * inside.contains(np.abs(v)))
    large_raw = d - small_raw
    small = small_raw - sub.expect(small_raw)
    large = large_raw - sub.expect(large_raw)
    return small, large


def three_band_split(y: Operator, k: int, e: float) -> tuple:
    """Center the three magnitude bands of y at cuts e sqrt(k)/(2 u_k), sqrt(k).

    Returns (low, mid, high), each of the form part - tau(part) 1; their sum
    is y whenever tau(y) = 0.
    """
    if e <= 0:
        raise ValueError("e must be > 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    t0 = trace(y)
    if abs(t0) > 1e-10:
        raise ValueError(f"y must be centered (tau(y) = {t0!r})")
    u_k = math.sqrt(iterated_log(float(k)))
    c1 = e * math.sqrt(k) / (2.0 * u_k)
    c2 = math.sqrt(k)
    spec = herm_spectrum(y)
    bands = (Interval.closed(0.0, c1), Interval.half_open(c1, c2), Interval.above(c2))
    one = y.algebra.identity()
    parts = []
    for band in bands:
        raw = spec.apply(lambda v, b=band: v * b.contains(np.abs(v)))
        parts.append(raw - trace(raw) * one)
    return tuple(parts)


# -- generators ---------------------------------------------------------------


def rademacher_signs(steps: int, atoms: int, rng: np.random.Generator) -> np.ndarray:
    """(steps, atoms) array of independent +-1 signs."""
    return rng.integers(0, 2, size=(steps, atoms)).astype(np.float64) * 2.0 - 1.0


def gen_dyadic_rademacher(steps: int, atoms: int, seed: int = 0, dyadic: bool = False) -> Martingale:
    """Rademacher walk on a commutative atom algebra.

    With ``dyadic`` (requires atoms == 2**steps) every sign path is an atom and
    the exact refining-partition filtration is attached, so conditional
    expectations are available.  Otherwise each atom carries an independent
    sampled path; the differences square to the identity exactly, so bracket
    quantities need no filtration.
    """
    if steps < 1 or atoms < 1:
        raise ValueError("steps and atoms must be >= 1")
    if dyadic:
        if atoms != 2**steps:
            raise ValueError("dyadic mode needs atoms == 2**steps")
        alg = atom_algebra(np.full(atoms, 1.0 / atoms))
        diffs = []
        idx = np.arange(atoms)
        levels = [scalar_subalgebra(alg)]
        for k in range(1, steps + 1):
            bits = (idx >> (steps - k)) & 1
            diffs.append(central_operator(alg, 1.0 - 2.0 * bits))
            cells = [list(np.nonzero((idx >> (steps - k)) == c)[0]) for c in range(2**k)]
            levels.append(partition_subalgebra(alg, cells))
        filt = Filtration(alg, levels, validate=False)
        return Martingale(filt, diffs, selfadjoint=True, label="dyadic-rademacher")
    if steps * atoms > ENSEMBLE_CAP:
        raise ValueError(f"steps*atoms exceeds the ensemble cap {ENSEMBLE_CAP}")
    rng = np.random.default_rng(seed)
    signs = rademacher_signs(steps, atoms, rng)
    alg = atom_algebra(np.full(atoms, 1.0 / atoms))
    diffs = [central_operator(alg, signs[k]) for k in range(steps)]
    return Martingale(None, diffs, selfadjoint=True, label="ensemble-rademacher")


def _twopoint_site(dim: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Traceless Hermitian with spectrum +-scale (odd dims get one 0)."""
    half = dim // 2
    vals = np.concatenate([np.full(half, scale), np.full(half, -scale), np.zeros(dim % 2)])
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return q @ np.diag(vals.astype(np.complex128)) @ q.conj().T


def _bounded_site(dim: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2.0
    h -= np.trace(h) / dim * np.eye(dim)
    nrm = np.abs(np.linalg.eigvalsh(h)).max()
    return h * (scale / nrm) if nrm > 0 else h


def gen_tensor_hermitian(
    steps: int,
    factor_dim: int = 2,
    seed: int = 0,
    law: str = "twopoint",
    scale: float = 1.0,
    envelope: float | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> Martingale:
    """One independent traceless Hermitian site per tensor factor.

    With ``envelope`` = e the k-th site norm is clipped to e sqrt(k)/u_k and
    re-centered (then rescaled if centering overshoots), so the growth
    hypothesis of the independent-variable bound holds by construction.
    """
    rng = np.random.default_rng(seed)
    factors = [matrix_factor(factor_dim) for _ in range(steps)]
    algebra, filt = tensor_filtration(factors, dim_cap=dim_cap)
    space = filt.space
    diffs = []
    for k in range(1, steps + 1):
        target = scale
        if envelope is not None:
            target = min(scale, envelope * math.sqrt(k) / math.sqrt(iterated_log(float(k))))
        if law == "twopoint":
            h = _twopoint_site(factor_dim, target, rng)
        elif law == "bounded":
            h = _bounded_site(factor_dim, target, rng)
            if envelope is not None:
                cap = envelope * math.sqrt(k) / math.sqrt(iterated_log(float(k)))
                vals, vecs = np.linalg.eigh(h)
                vals = np.clip(vals, -cap, cap)
                h = vecs @ np.diag(vals) @ vecs.conj().T
                h -= np.trace(h) / factor_dim * np.eye(factor_dim)
                nrm = np.abs(np.linalg.eigvalsh(h)).max()
                if nrm > cap:
                    h *= cap / nrm
        else:
            raise ValueError(f"unknown law {law!r}")
        diffs.append(space.embed(k - 1, h))
    return Martingale(filt, diffs, selfadjoint=True, label=f"tensor-{law}")


def gen_tensor_nonselfadjoint(
    steps: int, factor_dim: int = 2, seed: int = 0, dim_cap: int = DEFAULT_DIM_CAP
) -> Martingale:
    """Independent traceless (non-Hermitian) sites; a genuine martingale."""
    rng = np.random.default_rng(seed)
    factors = [matrix_factor(factor_dim) for _ in range(steps)]
    algebra, filt = tensor_filtration(factors, dim_cap=dim_cap)
    space = filt.space
    diffs = []
    for k in range(steps):
        g = rng.standard_normal((factor_dim, factor_dim)) + 1j * rng.standard_normal(
            (factor_dim, factor_dim)
        )
        g -= np.trace(g) / factor_dim * np.eye(factor_dim)
        diffs.append(space.embed(k, g))
    return Martingale(filt, diffs, selfadjoint=False, label="tensor-nonselfadjoint")


def gen_iid_tower(values, weights, steps: int, dim_cap: int = DEFAULT_DIM_CAP) -> Martingale:
    """I.i.d. commutative tower: one weighted-atom factor per step.

    The site law is centered exactly; the resulting differences are mean zero
    against every tower level.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mean = float(np.dot(weights, values))
    values = values - mean
    factors = [atom_factor(weights) for _ in range(steps)]
    algebra, filt = tensor_filtration(factors, dim_cap=dim_cap)
    space = filt.space
    diffs = [space.embed(k, values) for k in range(steps)]
    return Martingale(filt, diffs, selfadjoint=True, label="iid-tower")


@dataclass(frozen=True)
class TwoPointLaw:
    """Mean-zero two-point law: value ``height`` with weight p, else the
    compensating negative value -height p/(1-p)."""

    p: float
    height: float

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError("p must be in (0, 1)")
        if self.height <= 0:
            raise ValueError("height must be > 0")

    @property
    def values(self) -> tuple:
        return (self.height, -self.height * self.p / (1.0 - self.p))

    @property
    def weights(self) -> tuple:
        return (self.p, 1.0 - self.p)

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        return self.height**2 * self.p / (1.0 - self.p)

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.values)

    def moment(self, r: int) -> float:
        return float(sum(w * v**r for v, w in zip(self.values, self.weights)))

    def exp_moment(self, lam: float) -> float:
        return float(sum(w * math.exp(lam * v) for v, w in zip(self.values, self.weights)))

    def algebra(self) -> TracialAlgebra:
        return atom_algebra(self.weights)

    def operator(self) -> Operator:
        return central_operator(self.algebra(), self.values)

    def tower(self, steps: int, dim_cap: int = DEFAULT_DIM_CAP) -> Martingale:
        return gen_iid_tower(self.values, self.weights, steps, dim_cap=dim_cap)


def gen_skewed_twopoint(p: float, height: float) -> TwoPointLaw:
    """Skewed mean-zero two-point distribution with sup-norm ``height`` (p <= 1/2)."""
    return TwoPointLaw(p, height)


def gen_gue_increment(dim: int, rng: np.random.Generator) -> Operator:
    """One GUE matrix with entry variance 1/dim (spectral edge near 2)."""
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    h = (a + a.conj().T) / 2.0 * math.sqrt(2.0 / dim)
    alg = matrix_algebra(dim)
    return Operator(alg, [h[None, :, :]], check=False)


def gen_gue_sum(dim: int, steps: int, seed: int = 0) -> list:
    """Partial sums x_0 = 0, x_1, ..., x_N of i.i.d. GUE increments.

    This models the free-regime contrast only; the increments are not an
    independent family in the tensor-product sense used elsewhere.
    """
    if dim > 512:
        raise ValueError("dim capped at 512")
    if steps > 10**5:
        raise ValueError("steps capped at 1e5")
    rng = np.random.default_rng(seed)
    alg = matrix_algebra(dim)
    xs = [alg.zero()]
    for _ in range(steps):
        xs.append(xs[-1] + gen_gue_increment(dim, rng))
    return xs
