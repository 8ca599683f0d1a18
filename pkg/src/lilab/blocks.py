"""Finite-dimensional tracial *-algebras as weighted block-diagonal matrices.

An algebra is a finite direct sum of full matrix blocks ``M_{d}`` carrying
positive weights that sum to one; the state

    tau(x) = sum_b  weight_b * tr(x_b) / dim_b

is then a faithful normalized trace.  Elements ("operators") hold one complex
matrix per block.  Blocks of equal dimension are stored stacked in a single
3-d array so that arithmetic and spectral operations vectorize across blocks;
this makes large commutative algebras (thousands of one-dimensional blocks)
as cheap as a single dense matrix.

All values are immutable after construction and every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TracialAlgebra",
    "Operator",
    "Spectrum",
    "Interval",
    "scalar_algebra",
    "matrix_algebra",
    "atom_algebra",
    "trace",
    "trace_real",
    "hilbert_inner",
    "lp_norm",
    "operator_norm",
    "l2_norm",
    "herm_spectrum",
    "apply_function",
    "herm_fn",
    "trace_exp",
    "log_trace_exp",
    "spectral_indicator",
    "s_number",
    "projection_meet",
    "is_selfadjoint",
    "is_projection",
    "central_operator",
    "random_operator",
    "random_hermitian",
    "random_projection",
]

# Tolerances pinned once for the whole package.
WEIGHT_TOL = 1e-9          # |sum of weights - 1|
HERM_RTOL = 1e-10          # ||x - x*|| <= HERM_RTOL * max(1, ||x||)
SNAP_TOL = 1e-12           # eigenvalues this close to a spectral cut snap onto it
MEET_RTOL = 1e-9           # kernel rank tolerance for projection meets
PROJ_TOL = 1e-8            # "is a projection" tolerance


def _as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=np.complex128)


@dataclass(frozen=True)
class BlockGroup:
    """All blocks of one common dimension, with one weight per block."""

    dim: int
    weights: np.ndarray  # shape (m,), positive

    @property
    def count(self) -> int:
        return self.weights.shape[0]


class TracialAlgebra:
    """Block-diagonal *-algebra with a faithful normalized trace.

    Parameters
    ----------
    blocks : iterable of (dim, weight)
        Block dimensions and their trace weights, in a fixed order.  Weights
        must be positive and sum to one (so tau(1) = 1).
    """

    def __init__(self, blocks):
        blocks = [(int(d), float(w)) for d, w in blocks]
        if not blocks:
            raise ValueError("algebra needs at least one block")
        for d, w in blocks:
            if d < 1:
                raise ValueError(f"block dimension must be >= 1, got {d}")
            if w <= 0.0:
                raise ValueError(f"block weight must be > 0, got {w}")
        total = math.fsum(w for _, w in blocks)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"block weights must sum to 1, got {total!r}")
        self.blocks = tuple(blocks)
        # Stable partition of block slots into groups of equal dimension.
        order: list[int] = []
        by_dim: dict[int, list[int]] = {}
        for i, (d, _) in enumerate(blocks):
            if d not in by_dim:
                by_dim[d] = []
                order.append(d)
            by_dim[d].append(i)
        groups = []
        slot = [None] * len(blocks)
        for g, d in enumerate(order):
            idx = by_dim[d]
            w = np.array([blocks[i][1] for i in idx], dtype=float)
            w.setflags(write=False)
            groups.append(BlockGroup(d, w))
            for j, i in enumerate(idx):
                slot[i] = (g, j)
        self.groups = tuple(groups)
        self._slots = tuple(slot)  # original block index -> (group, position)
        self._wvec_scale = tuple(
            np.repeat(np.sqrt(g.weights / g.dim), g.dim * g.dim) for g in groups
        )

    @property
    def total_dim(self) -> int:
        return sum(g.dim * g.count for g in self.groups)

    @property
    def linear_dim(self) -> int:
        return sum(g.dim * g.dim * g.count for g in self.groups)

    def zero(self) -> "Operator":
        return Operator(
            self,
            [np.zeros((g.count, g.dim, g.dim), dtype=np.complex128) for g in self.groups],
            check=False,
        )

    def identity(self) -> "Operator":
        data = []
        for g in self.groups:
            eye = np.broadcast_to(np.eye(g.dim, dtype=np.complex128), (g.count, g.dim, g.dim))
            data.append(eye.copy())
        return Operator(self, data, check=False)

    def from_blocks(self, mats) -> "Operator":
        """Build an operator from one matrix per block, in original block order."""
        mats = list(mats)
        if len(mats) != len(self.blocks):
            raise ValueError(f"expected {len(self.blocks)} blocks, got {len(mats)}")
        data = [
            np.zeros((g.count, g.dim, g.dim), dtype=np.complex128) for g in self.groups
        ]
        for i, m in enumerate(mats):
            g, j = self._slots[i]
            m = np.atleast_2d(_as_complex(m))
            if m.shape != (self.groups[g].dim,) * 2:
                raise ValueError(
                    f"block {i} has shape {m.shape}, expected {(self.groups[g].dim,) * 2}"
                )
            data[g][j] = m
        return Operator(self, data, check=False)

    def block_of(self, x: "Operator", i: int) -> np.ndarray:
        g, j = self._slots[i]
        return x.data[g][j]

    def wvec(self, x: "Operator") -> np.ndarray:
        """Flatten an operator so the Euclidean inner product equals tau(x* y)."""
        parts = [
            (d.reshape(d.shape[0], -1) * s.reshape(d.shape[0], -1)).ravel()
            for d, s in zip(x.data, self._wvec_scale)
        ]
        return np.concatenate(parts)

    def unwvec(self, v: np.ndarray) -> "Operator":
        data = []
        pos = 0
        for g, s in zip(self.groups, self._wvec_scale):
            n = g.count * g.dim * g.dim
            chunk = v[pos : pos + n] / s.ravel()
            data.append(chunk.reshape(g.count, g.dim, g.dim))
            pos += n
        return Operator(self, data, check=False)

    def __eq__(self, other):
        return isinstance(other, TracialAlgebra) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"TracialAlgebra({len(self.blocks)} blocks, total_dim={self.total_dim})"


def scalar_algebra() -> TracialAlgebra:
    return TracialAlgebra([(1, 1.0)])


def matrix_algebra(dim: int) -> TracialAlgebra:
    """Full matrix algebra M_dim with the normalized trace."""
    return TracialAlgebra([(dim, 1.0)])


def atom_algebra(weights) -> TracialAlgebra:
    """Commutative algebra of atoms with the given probability weights."""
    return TracialAlgebra([(1, float(w)) for w in weights])


class Operator:
    """Element of a :class:`TracialAlgebra`: one complex matrix per block."""

    __slots__ = ("algebra", "data")

    def __init__(self, algebra: TracialAlgebra, data, check: bool = True, copy: bool = False):
        if check:
            data = [_as_complex(d) for d in data]
            if len(data) != len(algebra.groups):
                raise ValueError("wrong number of block groups")
            for d, g in zip(data, algebra.groups):
                if d.shape != (g.count, g.dim, g.dim):
                    raise ValueError(
                        f"group data shape {d.shape} does not match {(g.count, g.dim, g.dim)}"
                    )
        if copy:
            data = [np.array(d) for d in data]
        self.algebra = algebra
        self.data = tuple(np.ascontiguousarray(d, dtype=np.complex128) for d in data)
        for d in self.data:
            d.setflags(write=False)

    # -- arithmetic -------------------------------------------------------
    def _same(self, other: "Operator"):
        if self.algebra != other.algebra:
            raise ValueError("operators live in different algebras")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._same(other)
            return Operator(self.algebra, [a + b for a, b in zip(self.data, other.data)], check=False)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._same(other)
            return Operator(self.algebra, [a - b for a, b in zip(self.data, other.data)], check=False)
        return NotImplemented

    def __neg__(self):
        return Operator(self.algebra, [-a for a in self.data], check=False)

    def __mul__(self, c):
        if isinstance(c, (int, float, complex, np.number)):
            return Operator(self.algebra, [a * c for a in self.data], check=False)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._same(other)
            return Operator(self.algebra, [a @ b for a, b in zip(self.data, other.data)], check=False)
        return NotImplemented

    @property
    def H(self) -> "Operator":
        """Adjoint (conjugate transpose blockwise)."""
        return Operator(
            self.algebra,
            [np.conj(np.swapaxes(a, -1, -2)) for a in self.data],
            check=False,
        )

    def __repr__(self):
        return f"Operator(total_dim={self.algebra.total_dim}, norm={operator_norm(self):.4g})"


# -- trace, inner product, norms ------------------------------------------


def trace(x: Operator) -> complex:
    """tau(x): the weighted normalized trace."""
    val = 0.0 + 0.0j
    for g, d in zip(x.algebra.groups, x.data):
        val += complex(np.einsum("b,bii->", g.weights / g.dim, d))
    return val


def trace_real(x: Operator, tol: float = 1e-10) -> float:
    """tau(x) for (essentially) self-adjoint x; errors on a real imaginary part."""
    t = trace(x)
    if abs(t.imag) > tol * max(1.0, abs(t.real)):
        raise ValueError(f"trace has non-negligible imaginary part {t.imag!r}")
    return float(t.real)


def hilbert_inner(x: Operator, y: Operator) -> complex:
    """L2(tau) inner product tau(x* y); sesquilinear, conjugate in x."""
    x._same(y)
    val = 0.0 + 0.0j
    for g, a, b in zip(x.algebra.groups, x.data, y.data):
        val += complex(np.einsum("b,bij,bij->", g.weights / g.dim, np.conj(a), b))
    return val


def _singular_values(x: Operator):
    """Per group: singular values, shape (count, dim), descending."""
    return [np.linalg.svd(d, compute_uv=False) for d in x.data]


def operator_norm(x: Operator) -> float:
    out = 0.0
    for sv in _singular_values(x):
        if sv.size:
            out = max(out, float(sv.max()))
    return out


def lp_norm(x: Operator, p) -> float:
    """||x||_p = tau(|x|^p)^(1/p); p = inf gives the operator norm."""
    if p == np.inf or p == math.inf:
        return operator_norm(x)
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    total = 0.0
    for g, sv in zip(x.algebra.groups, _singular_values(x)):
        w = (g.weights / g.dim)[:, None]
        total += float(np.sum(w * sv**p))
    return total ** (1.0 / p)


def l2_norm(x: Operator) -> float:
    return lp_norm(x, 2.0)


def is_selfadjoint(x: Operator, rtol: float = HERM_RTOL) -> bool:
    return operator_norm(x - x.H) <= rtol * max(1.0, operator_norm(x))


def is_projection(x: Operator, tol: float = PROJ_TOL) -> bool:
    if not is_selfadjoint(x, rtol=tol):
        return False
    return operator_norm(x @ x - x) <= tol * max(1.0, operator_norm(x))


# -- spectral calculus ------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a self-adjoint operator.

    ``eigvals[g]`` has shape (count, dim) sorted descending per block;
    ``eigvecs[g]`` holds the matching orthonormal eigenvectors as columns.
    """

    algebra: TracialAlgebra
    eigvals: tuple
    eigvecs: tuple

    def apply(self, f) -> Operator:
        """Functional calculus: sum_j f(lambda_j) P_j, blockwise."""
        data = []
        for vals, vecs in zip(self.eigvals, self.eigvecs):
            fv = np.asarray(f(vals), dtype=np.complex128)
            if fv.shape != vals.shape:
                fv = np.broadcast_to(fv, vals.shape)
            if not np.all(np.isfinite(fv)):
                raise ValueError("function undefined (non-finite) at an eigenvalue")
            data.append(np.einsum("bij,bj,bkj->bik", vecs, fv, np.conj(vecs)))
        return Operator(self.algebra, data, check=False)

    def reconstruct(self) -> Operator:
        return self.apply(lambda v: v)

    def weighted(self, merged: bool = False, merge_tol: float = 1e-12):
        """All eigenvalues with their trace weights (weight_b / dim_b each).

        Returns (values, weights); with ``merged`` nearly-equal eigenvalues are
        combined and their weights added.  Weights always sum to one.
        """
        vals = []
        wts = []
        for g, ev in zip(self.algebra.groups, self.eigvals):
            w = np.repeat(g.weights / g.dim, g.dim)
            vals.append(ev.ravel())
            wts.append(w)
        vals = np.concatenate(vals)
        wts = np.concatenate(wts)
        order = np.argsort(-vals, kind="stable")
        vals, wts = vals[order], wts[order]
        if not merged:
            return vals, wts
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        mv, mw = [], []
        for v, w in zip(vals, wts):
            if mv and abs(mv[-1] - v) <= merge_tol * scale:
                mw[-1] += w
            else:
                mv.append(float(v))
                mw.append(float(w))
        return np.array(mv), np.array(mw)


def herm_spectrum(x: Operator, rtol: float = HERM_RTOL) -> Spectrum:
    """Eigendecomposition; requires x self-adjoint within tolerance."""
    nrm = operator_norm(x)
    if operator_norm(x - x.H) > rtol * max(1.0, nrm):
        raise ValueError("operator is not self-adjoint within tolerance")
    vals_g, vecs_g = [], []
    for d in x.data:
        h = (d + np.conj(np.swapaxes(d, -1, -2))) / 2.0
        vals, vecs = np.linalg.eigh(h)
        vals_g.append(vals[..., ::-1].copy())
        vecs_g.append(vecs[..., ::-1].copy())
    return Spectrum(x.algebra, tuple(vals_g), tuple(vecs_g))


def apply_function(spectrum: Spectrum, f) -> Operator:
    return spectrum.apply(f)


def herm_fn(x: Operator, f) -> Operator:
    return herm_spectrum(x).apply(f)


def trace_exp(x: Operator, scale: float = 1.0) -> float:
    """tau(exp(scale * x)) for self-adjoint x, via eigenvalues only."""
    vals, wts = herm_spectrum(x).weighted()
    return float(np.sum(wts * np.exp(scale * vals)))


def log_trace_exp(x: Operator, scale: float = 1.0) -> float:
    """log tau(exp(scale * x)), overflow-safe (log-sum-exp)."""
    vals, wts = herm_spectrum(x).weighted()
    a = scale * vals
    m = float(a.max())
    return m + math.log(float(np.sum(wts * np.exp(a - m))))


@dataclass(frozen=True)
class Interval:
    """Real interval with explicit endpoint conventions.

    Eigenvalues within ``SNAP_TOL`` of a finite endpoint are snapped onto it
    before the open/closed test, so ties cut deterministically.
    """

    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = True

    @staticmethod
    def closed(lo, hi) -> "Interval":
        return Interval(float(lo), float(hi), True, True)

    @staticmethod
    def above(c) -> "Interval":
        """(c, inf), open at c."""
        return Interval(float(c), math.inf, False, True)

    @staticmethod
    def within(t) -> "Interval":
        """[-t, t]."""
        return Interval(-float(t), float(t), True, True)

    @staticmethod
    def half_open(lo, hi) -> "Interval":
        """(lo, hi]."""
        return Interval(float(lo), float(hi), False, True)

    def contains(self, vals: np.ndarray, snap: float = SNAP_TOL) -> np.ndarray:
        v = np.asarray(vals, dtype=float).copy()
        if math.isfinite(self.lo):
            v[np.abs(v - self.lo) <= snap] = self.lo
        if math.isfinite(self.hi):
            v[np.abs(v - self.hi) <= snap] = self.hi
        lo_ok = (v >= self.lo) if self.closed_lo else (v > self.lo)
        hi_ok = (v <= self.hi) if self.closed_hi else (v < self.hi)
        return lo_ok & hi_ok

    def __repr__(self):
        left = "[" if self.closed_lo else "("
        right = "]" if self.closed_hi else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


def spectral_indicator(x: Operator, interval: Interval, of_modulus: bool = False) -> Operator:
    """Spectral projection 1_interval(x), or 1_interval(|x|) with ``of_modulus``.

    For self-adjoint x the result commutes with x.
    """
    if of_modulus:
        data = []
        for d in x.data:
            _, s, vh = np.linalg.svd(d)
            v = np.conj(np.swapaxes(vh, -1, -2))
            mask = interval.contains(s).astype(np.complex128)
            data.append(np.einsum("bij,bj,bkj->bik", v, mask, np.conj(v)))
        return Operator(x.algebra, data, check=False)
    spec = herm_spectrum(x)
    return spec.apply(lambda v: interval.contains(v).astype(np.complex128))


def s_number(x: Operator, t: float) -> float:
    """Generalized s-number: the trace-quantile of |x|.

    mu_t(x) = inf { s >= 0 : tau(1_(s,inf)(|x|)) <= t }, computed from the
    weighted decreasing rearrangement of the singular values.
    """
    t = float(t)
    if not (0.0 < t < 1.0):
        raise ValueError(f"t must be in (0, 1), got {t}")
    vals = []
    wts = []
    for g, sv in zip(x.algebra.groups, _singular_values(x)):
        vals.append(sv.ravel())
        wts.append(np.repeat(g.weights / g.dim, g.dim))
    vals = np.concatenate(vals)
    wts = np.concatenate(wts)
    order = np.argsort(-vals, kind="stable")
    vals, wts = vals[order], wts[order]
    cum = np.cumsum(wts)
    idx = int(np.searchsorted(cum, t, side="right"))
    idx = min(idx, vals.size - 1)
    return float(vals[idx])


def projection_meet(ps) -> Operator:
    """Orthogonal projection onto the intersection of the ranges.

    Computed as the numerical kernel of S = sum_i (1 - p_i); eigenvalues of S
    below ``MEET_RTOL * max(1, ||S||)`` per block count as zero.
    """
    ps = list(ps)
    if not ps:
        raise ValueError("need at least one projection")
    alg = ps[0].algebra
    for p in ps:
        if p.algebra != alg:
            raise ValueError("projections live in different algebras")
        if not is_projection(p):
            raise ValueError("input is not a projection within tolerance")
    one = alg.identity()
    s = alg.zero()
    for p in ps:
        s = s + (one - p)
    data = []
    for d in s.data:
        h = (d + np.conj(np.swapaxes(d, -1, -2))) / 2.0
        vals, vecs = np.linalg.eigh(h)
        thr = MEET_RTOL * np.maximum(1.0, vals[..., -1])[..., None]
        mask = (vals <= thr).astype(np.complex128)
        data.append(np.einsum("bij,bj,bkj->bik", vecs, mask, np.conj(vecs)))
    return Operator(alg, data, check=False)


# -- constructors and sampling ---------------------------------------------


def central_operator(algebra: TracialAlgebra, values) -> Operator:
    """Operator equal to values[b] * identity on block b (original block order)."""
    values = np.asarray(values, dtype=np.complex128)
    if values.shape != (len(algebra.blocks),):
        raise ValueError(f"need one value per block ({len(algebra.blocks)}), got {values.shape}")
    data = [np.zeros((g.count, g.dim, g.dim), dtype=np.complex128) for g in algebra.groups]
    for i, v in enumerate(values):
        g, j = algebra._slots[i]
        data[g][j] = v * np.eye(algebra.groups[g].dim)
    return Operator(algebra, data, check=False)


def random_operator(algebra: TracialAlgebra, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    data = []
    for g in algebra.groups:
        shape = (g.count, g.dim, g.dim)
        a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        data.append(scale * a / math.sqrt(2.0))
    return Operator(algebra, data, check=False)


def random_hermitian(
    algebra: TracialAlgebra,
    rng: np.random.Generator,
    scale: float = 1.0,
    traceless: bool = False,
    unit_norm: bool = False,
) -> Operator:
    x = random_operator(algebra, rng, scale=scale)
    h = (x + x.H) * 0.5
    if traceless:
        h = h - trace(h) * algebra.identity()
    if unit_norm:
        nrm = operator_norm(h)
        if nrm > 0:
            h = h / nrm
    return h


def random_projection(algebra: TracialAlgebra, rng: np.random.Generator) -> Operator:
    """Spectral projection of a random Hermitian onto its positive part."""
    h = random_hermitian(algebra, rng)
    return spectral_indicator(h, Interval.above(0.0))
