"""Tensor products of small tracial factors, with marginal expectations.

A :class:`TensorSpace` is an ordered product of factors, each either a full
matrix factor M_d with its normalized trace or a commutative "atom" factor
(a weighted finite probability space).  The product algebra is realized as a
:class:`~lilab.blocks.TracialAlgebra` whose blocks enumerate the atom indices
(row-major, first atom factor slowest) and whose block dimension is the
product of the matrix factor dimensions (Kronecker order = factor order).

The trace-preserving conditional expectation onto "the factors in ``keep``"
is the weighted partial trace over the remaining factors, re-tensored with
identities; this is the fast path behind tensor filtrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .blocks import Operator, TracialAlgebra

__all__ = ["Factor", "TensorSpace", "matrix_factor", "atom_factor", "DEFAULT_DIM_CAP"]

DEFAULT_DIM_CAP = 4096


@dataclass(frozen=True)
class Factor:
    """One tensor leg: a matrix factor (weights None) or weighted atoms."""

    dim: int
    weights: tuple | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("factor dimension must be >= 1")
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if len(w) != self.dim:
                raise ValueError("need one weight per atom")
            if any(v <= 0 for v in w):
                raise ValueError("atom weights must be positive")
            if abs(math.fsum(w) - 1.0) > 1e-9:
                raise ValueError("atom weights must sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def is_atoms(self) -> bool:
        return self.weights is not None


def matrix_factor(dim: int) -> Factor:
    return Factor(int(dim), None)


def atom_factor(weights) -> Factor:
    weights = tuple(float(w) for w in weights)
    return Factor(len(weights), weights)


class TensorSpace:
    def __init__(self, factors, dim_cap: int = DEFAULT_DIM_CAP):
        self.factors = tuple(factors)
        if not self.factors:
            raise ValueError("need at least one factor")
        self._atom_pos = [i for i, f in enumerate(self.factors) if f.is_atoms]
        self._mat_pos = [i for i, f in enumerate(self.factors) if not f.is_atoms]
        self.n_blocks = int(np.prod([self.factors[i].dim for i in self._atom_pos], dtype=object)) if self._atom_pos else 1
        self.block_dim = int(np.prod([self.factors[i].dim for i in self._mat_pos], dtype=object)) if self._mat_pos else 1
        total = self.n_blocks * self.block_dim
        if total > dim_cap:
            raise ValueError(f"total dimension {total} exceeds cap {dim_cap}")
        if self._atom_pos:
            weights = reduce(np.kron, [np.asarray(self.factors[i].weights) for i in self._atom_pos])
        else:
            weights = np.array([1.0])
        self.algebra = TracialAlgebra([(self.block_dim, float(w)) for w in weights])
        self.block_weights = weights

    def __len__(self):
        return len(self.factors)

    def _atom_split(self, k: int):
        """(before, own, after) atom-index sizes around atom factor k."""
        r = self._atom_pos.index(k)
        dims = [self.factors[i].dim for i in self._atom_pos]
        before = int(np.prod(dims[:r], dtype=object)) if r else 1
        after = int(np.prod(dims[r + 1 :], dtype=object)) if r + 1 < len(dims) else 1
        return before, dims[r], after

    def _mat_split(self, k: int):
        """(left, own, right) Kronecker sizes around matrix factor k."""
        r = self._mat_pos.index(k)
        dims = [self.factors[i].dim for i in self._mat_pos]
        left = int(np.prod(dims[:r], dtype=object)) if r else 1
        right = int(np.prod(dims[r + 1 :], dtype=object)) if r + 1 < len(dims) else 1
        return left, dims[r], right

    # -- embeddings ---------------------------------------------------------

    def embed(self, k: int, site) -> Operator:
        """1 (x) ... (x) site (x) ... (x) 1 with ``site`` at factor k.

        For a matrix factor ``site`` is a dim x dim matrix; for an atom factor
        it is a vector of dim diagonal values.
        """
        f = self.factors[k]
        m, D = self.n_blocks, self.block_dim
        if f.is_atoms:
            v = np.asarray(site, dtype=np.complex128)
            if v.shape != (f.dim,):
                raise ValueError(f"atom site needs shape ({f.dim},), got {v.shape}")
            before, own, after = self._atom_split(k)
            vals = np.tile(np.repeat(v, after), before)
            data = vals[:, None, None] * np.eye(D, dtype=np.complex128)
        else:
            mat = np.asarray(site, dtype=np.complex128)
            if mat.shape != (f.dim, f.dim):
                raise ValueError(f"matrix site needs shape ({f.dim},{f.dim}), got {mat.shape}")
            left, own, right = self._mat_split(k)
            full = np.kron(np.kron(np.eye(left), mat), np.eye(right))
            data = np.broadcast_to(full, (m, D, D)).copy()
        return Operator(self.algebra, [data], check=False)

    def site_trace(self, k: int, site) -> complex:
        f = self.factors[k]
        if f.is_atoms:
            return complex(np.dot(np.asarray(f.weights), np.asarray(site, dtype=np.complex128)))
        return complex(np.trace(np.asarray(site, dtype=np.complex128)) / f.dim)

    # -- conditional expectation (weighted partial trace) -------------------

    def expect(self, x: Operator, keep) -> Operator:
        """Trace-preserving conditional expectation onto the kept factors."""
        if x.algebra != self.algebra:
            raise ValueError("operator does not live on this tensor space")
        keep = frozenset(keep)
        data = x.data[0]
        for i in range(len(self.factors)):
            if i not in keep:
                data = self._reduce_factor(data, i)
        return Operator(self.algebra, [data], check=False)

    def _reduce_factor(self, data: np.ndarray, k: int) -> np.ndarray:
        f = self.factors[k]
        m, D = self.n_blocks, self.block_dim
        if f.is_atoms:
            before, own, after = self._atom_split(k)
            view = data.reshape(before, own, after, D, D)
            red = np.einsum("a,baqij->bqij", np.asarray(f.weights), view)
            out = np.broadcast_to(red[:, None], (before, own, after, D, D))
            return np.ascontiguousarray(out).reshape(m, D, D)
        left, own, right = self._mat_split(k)
        view = data.reshape(m, left, own, right, left, own, right)
        red = np.einsum("mpaqras->mpqrs", view) / own
        out = np.einsum("mpqrs,ab->mpaqrbs", red, np.eye(own, dtype=np.complex128))
        return out.reshape(m, D, D)

    def extended(self, factor: Factor, dim_cap: int | None = None) -> "TensorSpace":
        """New space with one extra factor appended (used by dilations)."""
        new_total = self.n_blocks * self.block_dim * factor.dim
        cap = dim_cap if dim_cap is not None else max(DEFAULT_DIM_CAP, new_total)
        return TensorSpace(self.factors + (factor,), dim_cap=cap)

    def __repr__(self):
        kinds = "".join("a" if f.is_atoms else "m" for f in self.factors)
        return f"TensorSpace({len(self.factors)} factors [{kinds}], total_dim={self.n_blocks * self.block_dim})"
