"""JSON schemas for algebras, operators, filtrations, and run configs.

Operators serialize blockwise as row-major [re, im] pairs; tensor
filtrations serialize by their factor list, generic ones by generator
operators.  ``canonical_json`` is the hashing form used by run manifests.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .blocks import Operator, TracialAlgebra
from .expectation import Filtration, span_subalgebra, scalar_subalgebra, tensor_filtration
from .tensor import Factor, atom_factor, matrix_factor

__all__ = [
    "ConfigError",
    "algebra_to_dict",
    "algebra_from_dict",
    "operator_to_dict",
    "operator_from_dict",
    "filtration_to_dict",
    "filtration_from_dict",
    "canonical_json",
    "config_hash",
]


class ConfigError(ValueError):
    """A config file violates its schema (CLI exit code 2)."""


def algebra_to_dict(algebra: TracialAlgebra) -> dict:
    return {"blocks": [{"dim": d, "weight": w} for d, w in algebra.blocks]}


def algebra_from_dict(d: dict) -> TracialAlgebra:
    try:
        blocks = [(int(b["dim"]), float(b["weight"])) for b in d["blocks"]]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad algebra dict: {exc}") from exc
    return TracialAlgebra(blocks)


def operator_to_dict(x: Operator) -> dict:
    blocks = []
    for i in range(len(x.algebra.blocks)):
        mat = x.algebra.block_of(x, i)
        flat = mat.reshape(-1)
        blocks.append([[float(v.real), float(v.imag)] for v in flat])
    return {"blocks": blocks}


def operator_from_dict(algebra: TracialAlgebra, d: dict) -> Operator:
    try:
        raw = d["blocks"]
        mats = []
        for i, flat in enumerate(raw):
            dim = algebra.blocks[i][0]
            arr = np.array([complex(re, im) for re, im in flat], dtype=np.complex128)
            mats.append(arr.reshape(dim, dim))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad operator dict: {exc}") from exc
    return algebra.from_blocks(mats)


def filtration_to_dict(filt: Filtration) -> dict:
    if filt.space is not None:
        factors = []
        for f in filt.space.factors:
            if f.is_atoms:
                factors.append({"atoms": list(f.weights)})
            else:
                factors.append({"dim": f.dim})
        return {"type": "tensor", "factors": factors}
    raise ValueError("only tensor filtrations have a canonical serial form")


def filtration_from_dict(d: dict):
    if d.get("type") != "tensor":
        raise ConfigError("only tensor filtration descriptors are supported")
    factors = []
    for f in d.get("factors", []):
        if "atoms" in f:
            factors.append(atom_factor(f["atoms"]))
        elif "dim" in f:
            factors.append(matrix_factor(int(f["dim"])))
        else:
            raise ConfigError(f"bad factor descriptor {f!r}")
    return tensor_filtration(factors)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()
