"""Trace-preserving conditional expectations onto unital *-subalgebras.

A subalgebra is stored through an orthonormal basis of the underlying
L2(tau) subspace; the unique trace-preserving conditional expectation is the
orthogonal projection onto that subspace.  Tensor-marginal subalgebras keep
their structure instead and use the weighted partial trace as a fast path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    Interval,
    Operator,
    TracialAlgebra,
    hilbert_inner,
    is_projection,
    operator_norm,
    random_operator,
    spectral_indicator,
    trace_real,
)
from .tensor import DEFAULT_DIM_CAP, Factor, TensorSpace

__all__ = [
    "Subalgebra",
    "MarginalSubalgebra",
    "Filtration",
    "ClosureError",
    "cond_expect",
    "span_subalgebra",
    "partition_subalgebra",
    "scalar_subalgebra",
    "tensor_filtration",
    "verify_tower",
    "compress_projection",
    "TowerReport",
    "CompressionReport",
]

SPAN_RANK_TOL = 1e-9


class ClosureError(RuntimeError):
    """Multiplicative closure did not stabilize within the iteration cap."""


def _orthonormal_rows(rows: np.ndarray, rank_tol: float = SPAN_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (as rows) of the row span, with a rank cutoff."""
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("need a non-empty 2-d row stack")
    _, s, vh = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("zero row span")
    keep = s > rank_tol * s[0]
    return vh[keep]


class Subalgebra:
    """Unital *-subalgebra carried by an orthonormal L2(tau) basis."""

    def __init__(self, algebra: TracialAlgebra, basis_matrix: np.ndarray, label: str = ""):
        self.algebra = algebra
        self.basis_matrix = np.ascontiguousarray(basis_matrix, dtype=np.complex128)
        self.basis_matrix.setflags(write=False)
        self.label = label

    @property
    def dim(self) -> int:
        return self.basis_matrix.shape[0]

    def expect(self, x: Operator) -> Operator:
        v = self.algebra.wvec(x)
        coeffs = np.conj(self.basis_matrix) @ v
        return self.algebra.unwvec(self.basis_matrix.T @ coeffs)

    def contains(self, x: Operator, tol: float = 1e-9) -> bool:
        return operator_norm(self.expect(x) - x) <= tol * max(1.0, operator_norm(x))

    def basis_operators(self):
        return [self.algebra.unwvec(row) for row in self.basis_matrix]

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        return f"Subalgebra(dim={self.dim}{tag})"


class MarginalSubalgebra:
    """Tensor-marginal subalgebra: the factors in ``kept``, tensored with 1."""

    def __init__(self, space: TensorSpace, kept, label: str = ""):
        self.space = space
        self.kept = frozenset(int(i) for i in kept)
        if any(i < 0 or i >= len(space.factors) for i in self.kept):
            raise ValueError("kept factor index out of range")
        self.algebra = space.algebra
        self.label = label

    @property
    def dim(self) -> int:
        out = 1
        for i in sorted(self.kept):
            f = self.space.factors[i]
            out *= f.dim if f.is_atoms else f.dim * f.dim
        return out

    def expect(self, x: Operator) -> Operator:
        return self.space.expect(x, self.kept)

    def contains(self, x: Operator, tol: float = 1e-9) -> bool:
        return operator_norm(self.expect(x) - x) <= tol * max(1.0, operator_norm(x))

    def to_span(self) -> Subalgebra:
        """Explicit orthonormal basis; for cross-checks on small spaces."""
        site_bases = []
        for i in sorted(self.kept):
            f = self.space.factors[i]
            if f.is_atoms:
                sites = []
                for a in range(f.dim):
                    v = np.zeros(f.dim)
                    v[a] = 1.0 / np.sqrt(f.weights[a])
                    sites.append(("a", v))
            else:
                sites = []
                for r in range(f.dim):
                    for c in range(f.dim):
                        m = np.zeros((f.dim, f.dim), dtype=np.complex128)
                        m[r, c] = np.sqrt(f.dim)
                        sites.append(("m", m))
            site_bases.append((i, sites))
        rows = []
        one = self.algebra.identity()
        if not site_bases:
            rows.append(self.algebra.wvec(one))
        else:
            for combo in itertools.product(*[s for _, s in site_bases]):
                op = one
                for (i, _), (_, site) in zip(site_bases, combo):
                    op = op @ self.space.embed(i, site)
                rows.append(self.algebra.wvec(op))
        return Subalgebra(self.algebra, _orthonormal_rows(np.array(rows)), label=self.label)

    def __repr__(self):
        return f"MarginalSubalgebra(kept={sorted(self.kept)}, dim={self.dim})"


def cond_expect(sub, x: Operator) -> Operator:
    """E(x): the unique trace-preserving conditional expectation onto ``sub``."""
    return sub.expect(x)


def scalar_subalgebra(algebra: TracialAlgebra) -> Subalgebra:
    one = algebra.identity()
    row = algebra.wvec(one)
    return Subalgebra(algebra, row[None, :] / np.linalg.norm(row), label="scalars")


def span_subalgebra(algebra: TracialAlgebra, generators, max_rounds: int = 64) -> Subalgebra:
    """Smallest unital *- and multiplication-closed span of the generators.

    Iterates: adjoin adjoints and pairwise products, re-orthonormalize, stop
    once the dimension stabilizes.  In finite dimensions this is the
    generated von Neumann algebra.
    """
    ops = [algebra.identity()]
    for g in generators:
        if g.algebra != algebra:
            raise ValueError("generator lives in a different algebra")
        ops.append(g)
        ops.append(g.H)
    basis = _orthonormal_rows(np.array([algebra.wvec(o) for o in ops]))
    for _ in range(max_rounds):
        cur = [algebra.unwvec(row) for row in basis]
        rows = [algebra.wvec(o) for o in cur]
        rows += [algebra.wvec(o.H) for o in cur]
        for a in cur:
            for b in cur:
                rows.append(algebra.wvec(a @ b))
        new_basis = _orthonormal_rows(np.array(rows))
        if new_basis.shape[0] == basis.shape[0]:
            return Subalgebra(algebra, new_basis, label="span")
        basis = new_basis
    raise ClosureError(f"closure did not stabilize in {max_rounds} rounds")


def partition_subalgebra(algebra: TracialAlgebra, cells) -> Subalgebra:
    """Functions constant on each cell of a partition of the block indices."""
    seen: set[int] = set()
    rows = []
    n = len(algebra.blocks)
    for cell in cells:
        cell = sorted(int(i) for i in cell)
        if not cell or any(i in seen or not (0 <= i < n) for i in cell):
            raise ValueError("cells must form a partition of the block indices")
        seen.update(cell)
        values = np.zeros(n)
        for i in cell:
            values[i] = 1.0
        from .blocks import central_operator

        ind = central_operator(algebra, values)
        w = np.sqrt(sum(algebra.blocks[i][1] for i in cell))
        rows.append(algebra.wvec(ind) / w)
    if seen != set(range(n)):
        raise ValueError("cells must cover every block")
    return Subalgebra(algebra, np.array(rows), label="partition")


class Filtration:
    """Increasing tower M_0 <= M_1 <= ... with M_0 = scalars."""

    def __init__(self, algebra: TracialAlgebra, levels, space: TensorSpace | None = None,
                 validate: bool = True):
        self.algebra = algebra
        self.levels = list(levels)
        self.space = space
        if validate:
            self._validate()

    def _validate(self):
        if not self.levels:
            raise ValueError("filtration needs at least one level")
        if self.levels[0].dim != 1:
            raise ValueError("M_0 must be the scalars")
        for k in range(len(self.levels) - 1):
            a, b = self.levels[k], self.levels[k + 1]
            if isinstance(a, MarginalSubalgebra) and isinstance(b, MarginalSubalgebra):
                if not a.kept <= b.kept:
                    raise ValueError(f"levels {k} and {k + 1} are not nested")
            else:
                if a.dim > b.dim:
                    raise ValueError(f"levels {k} and {k + 1} are not nested (dims)")

    def __len__(self):
        return len(self.levels)

    def expect(self, k: int, x: Operator) -> Operator:
        return self.levels[k].expect(x)

    def __repr__(self):
        return f"Filtration(levels={len(self.levels)})"


def tensor_filtration(factors, dim_cap: int = DEFAULT_DIM_CAP):
    """Product algebra of the factors with the tower M_k = first k factors.

    Consecutive factors are independent for the product trace:
    tau(x y) = tau(x) tau(y) for x in M_k, y in the (k+1)-th factor's copy.
    """
    factors = [f if isinstance(f, Factor) else Factor(*f) for f in factors]
    space = TensorSpace(factors, dim_cap=dim_cap)
    levels = [MarginalSubalgebra(space, range(k), label=f"M_{k}") for k in range(len(factors) + 1)]
    filt = Filtration(space.algebra, levels, space=space)
    return space.algebra, filt


@dataclass
class TowerReport:
    max_rel_error: float
    n_samples: int
    passed: bool
    worst_pair: tuple = ()
    failures: list = field(default_factory=list)


def verify_tower(filt: Filtration, n_samples: int = 20, seed: int = 0,
                 rtol: float = 1e-9) -> TowerReport:
    """Check E_m o E_n = E_min(m,n) on random operators, all level pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_pair = ()
    failures = []
    L = len(filt.levels)
    for s in range(n_samples):
        x = random_operator(filt.algebra, rng)
        nrm = max(1.0, operator_norm(x))
        ex = [filt.expect(k, x) for k in range(L)]
        for m in range(L):
            for n in range(L):
                err = operator_norm(filt.expect(m, ex[n]) - ex[min(m, n)]) / nrm
                if err > worst:
                    worst, worst_pair = err, (m, n, s)
                if err > rtol:
                    failures.append((m, n, s, err))
    return TowerReport(worst, n_samples, worst <= rtol, worst_pair, failures)


@dataclass
class CompressionReport:
    eta: float
    deficit_p: float
    deficit_q: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.deficit_q <= self.bound + 1e-12


def compress_projection(sub, p: Operator, eta: float):
    """Push a projection of the ambient algebra into the subalgebra.

    q = 1_[1-eta, 1](E(p)) lies in ``sub`` and satisfies
    tau(1 - q) <= tau(1 - p) / eta; moreover E(p) >= (1-eta) q, so
    (1-eta) ||x q||^2 <= ||x p||^2 for every x in the subalgebra.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if not is_projection(p):
        raise ValueError("p is not a projection within tolerance")
    p_prime = sub.expect(p)
    q = spectral_indicator(p_prime, Interval.closed(1.0 - eta, 1.0))
    one = p.algebra.identity()
    deficit_p = trace_real(one - p)
    deficit_q = trace_real(one - q)
    report = CompressionReport(eta, deficit_p, deficit_q, deficit_p / eta)
    return q, report
