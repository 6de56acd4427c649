"""Sparse HDMR surrogates: component modes, evaluation, and statistics.

A surrogate is u(xi) ~ f0 + sum_gamma f_gamma(xi_gamma) where each gamma is a
sorted tuple of 1-based stochastic dimensions. Low-cardinality modes carry a
dense tensor-product polynomial expansion; higher-cardinality modes carry a
rank-nr separated (CP) expansion whose univariate factors exclude the
constant, so every mode has zero mean under the uniform measure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .basis import BasisConfig, univariate_table

__all__ = [
    "Group",
    "DenseMode",
    "CPMode",
    "HdmrModel",
    "enumerate_dense_indices",
    "dense_design",
    "evaluate_model",
    "model_mean",
    "model_variance",
    "sobol_indices",
    "total_sobol",
    "dictionary_cardinality",
    "save_model",
    "load_model",
]

Group = tuple[int, ...]


def _check_dims(dims: Group, nd: int | None = None) -> Group:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise ValueError("a mode needs at least one dimension")
    if any(b <= a for a, b in zip(dims, dims[1:])) or dims[0] < 1:
        raise ValueError(f"dims must be sorted, strictly increasing, 1-based: {dims}")
    if nd is not None and dims[-1] > nd:
        raise ValueError(f"dim {dims[-1]} exceeds Nd={nd}")
    return dims


def enumerate_dense_indices(gamma: Group, no: int) -> list[tuple[int, ...]]:
    """Multi-indices of a dense mode on ``gamma`` at interaction order ``no``.

    All alpha with alpha_i >= 2 for every i in gamma and
    sum_i (alpha_i - 1) <= no, in lexicographic order. The count is
    comb(no, len(gamma)).
    """
    gamma = _check_dims(gamma)
    card = len(gamma)
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], budget: int):
        pos = len(prefix)
        if pos == card:
            out.append(prefix)
            return
        remaining = card - pos - 1
        # each later entry consumes at least 1 of the budget
        for a in range(2, budget - remaining + 2):
            rec(prefix + (a,), budget - (a - 1))

    rec((), no)
    return out


@dataclass(frozen=True)
class DenseMode:
    """Mode with an explicit coefficient per retained multi-index."""

    dims: Group
    indices: tuple[tuple[int, ...], ...]
    coeffs: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        indices = tuple(tuple(int(a) for a in idx) for idx in self.indices)
        coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if len(indices) != coeffs.shape[0]:
            raise ValueError(
                f"{len(indices)} indices but {coeffs.shape[0]} coefficients"
            )
        for idx in indices:
            if len(idx) != len(dims):
                raise ValueError(f"index {idx} does not match dims {dims}")
            if min(idx) < 2:
                raise ValueError(f"index {idx} touches the constant")
        coeffs.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def variance(self) -> float:
        # orthonormal basis: the mode variance is the squared coefficient norm
        return float(np.dot(self.coeffs, self.coeffs))


@dataclass(frozen=True)
class CPMode:
    """Rank-separated mode: sum_r prod_i (factor_{r,i} . psi_{2..No}).

    ``factors`` has shape (rank, len(dims), no - 1); entry [r, i, j] multiplies
    psi_{j+2} in dimension dims[i].
    """

    dims: Group
    factors: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        factors = np.asarray(self.factors, dtype=float)
        if factors.ndim != 3 or factors.shape[1] != len(dims):
            raise ValueError(
                f"factors must be (rank, {len(dims)}, No-1), got {factors.shape}"
            )
        if factors.shape[0] < 1 or factors.shape[2] < 1:
            raise ValueError(f"degenerate factor shape {factors.shape}")
        factors.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "factors", factors)

    @property
    def rank(self) -> int:
        return self.factors.shape[0]

    @property
    def variance(self) -> float:
        # E[f^2] = sum_{r,r'} prod_i <c_{r,i}, c_{r',i}>
        grams = np.einsum("rij,sij->rsi", self.factors, self.factors)
        return float(np.sum(np.prod(grams, axis=2)))


@dataclass
class HdmrModel:
    """Fitted surrogate with its basis and structural metadata."""

    f0: float
    basis: BasisConfig
    nd: int
    no: int
    ninter: int
    npc: int
    nr: int
    dense: list[DenseMode] = field(default_factory=list)
    cp: list[CPMode] = field(default_factory=list)

    def __post_init__(self):
        if self.nd < 1 or self.no < 1:
            raise ValueError("need Nd >= 1 and No >= 1")
        if not 0 <= self.npc <= self.ninter <= self.nd:
            raise ValueError(
                f"need 0 <= N_PC <= Ninter <= Nd, got {self.npc}, {self.ninter}, {self.nd}"
            )
        if self.basis.max_order < self.no + 1:
            raise ValueError(
                f"basis max_order {self.basis.max_order} < No + 1 = {self.no + 1}"
            )
        for m in self.dense:
            _check_dims(m.dims, self.nd)
        for m in self.cp:
            _check_dims(m.dims, self.nd)
            if m.factors.shape[2] != self.no - 1:
                raise ValueError(
                    f"CP factors on {m.dims} carry {m.factors.shape[2]} orders, "
                    f"expected No - 1 = {self.no - 1}"
                )
        seen = set()
        for m in list(self.dense) + list(self.cp):
            if m.dims in seen:
                raise ValueError(f"duplicate mode on dims {m.dims}")
            seen.add(m.dims)

    def groups(self) -> list[Group]:
        return [m.dims for m in self.dense] + [m.dims for m in self.cp]


def dense_design(table: np.ndarray, dims: Group, indices) -> np.ndarray:
    """Design columns prod_i psi_{alpha_i}(xi_{dims_i}) from a univariate table.

    ``table`` is univariate_table(cfg, xi) with shape (Nq, Nd, max_order);
    returns (Nq, len(indices)).
    """
    cols = np.ones((table.shape[0], len(indices)))
    for k, idx in enumerate(indices):
        for d, a in zip(dims, idx):
            cols[:, k] *= table[:, d - 1, a - 1]
    return cols


def _cp_values(table: np.ndarray, mode: CPMode, no: int) -> np.ndarray:
    # per-rank products of univariate factor evaluations, summed over ranks
    vals = np.ones((mode.rank, table.shape[0]))
    for i, d in enumerate(mode.dims):
        # columns alpha = 2..no map to table slots 1..no-1
        block = table[:, d - 1, 1:no]
        vals *= mode.factors[:, i, :] @ block.T
    return vals.sum(axis=0)


def evaluate_model(model: HdmrModel, xi) -> np.ndarray:
    """Evaluate the surrogate at rows of ``xi`` (shape (Nq, Nd) or (Nd,))."""
    xi = np.asarray(xi, dtype=float)
    squeeze = xi.ndim == 1
    if squeeze:
        xi = xi[None, :]
    if xi.shape[1] != model.nd:
        raise ValueError(f"xi has {xi.shape[1]} columns, model has Nd={model.nd}")
    table = univariate_table(model.basis, xi)
    out = np.full(xi.shape[0], model.f0)
    for m in model.dense:
        out += dense_design(table, m.dims, m.indices) @ m.coeffs
    for m in model.cp:
        out += _cp_values(table, m, model.no)
    return out[0] if squeeze else out


def model_mean(model: HdmrModel) -> float:
    """Mean under the product uniform measure: every mode integrates to zero."""
    return float(model.f0)


def variance_by_group(model: HdmrModel) -> dict[Group, float]:
    out: dict[Group, float] = {}
    for m in model.dense:
        out[m.dims] = m.variance
    for m in model.cp:
        out[m.dims] = m.variance
    return out


def model_variance(model: HdmrModel) -> float:
    return float(sum(variance_by_group(model).values()))


def sobol_indices(model: HdmrModel) -> dict[Group, float]:
    """First- and higher-order Sobol indices S_gamma = Var_gamma / Var.

    They sum to 1 over the retained groups (the surrogate has no unresolved
    interactions by construction).
    """
    per = variance_by_group(model)
    total = sum(per.values())
    if total <= 0:
        return {g: 0.0 for g in per}
    return {g: v / total for g, v in per.items()}

def total_sobol(model: HdmrModel, dim: int) -> float:
    """Total-effect index of dimension ``dim``: sum of S_gamma over gamma containing it."""
    if not 1 <= dim <= model.nd:
        raise ValueError(f"dim {dim} outside 1..{model.nd}")
    return float(sum(s for g, s in sobol_indices(model).items() if dim in g))


def dictionary_cardinality(nd: int, no: int, ninter: int, npc: int, nr: int) -> int:
    """Number of scalar coefficients the full dictionary could activate.

    Dense classes (cardinality l <= npc) contribute comb(nd, l)*comb(no, l)
    coefficients each; separated classes (npc < l <= ninter) contribute
    nr*l*no per group, counting each univariate factor block.
    """
    if not 0 <= npc <= ninter <= nd:
        raise ValueError("need 0 <= npc <= ninter <= nd")
    total = 0
    for l in range(0, min(npc, ninter) + 1):
        total += comb(nd, l) * comb(no, l)
    for l in range(npc + 1, ninter + 1):
        total += comb(nd, l) * nr * l * no
    return total


_SCHEMA = 1


def _model_payload(model: HdmrModel) -> dict:
    return {
        "schema": _SCHEMA,
        "kind": "hdmr",
        "f0": model.f0,
        "nd": model.nd,
        "no": model.no,
        "ninter": model.ninter,
        "npc": model.npc,
        "nr": model.nr,
        "basis": {
            "family": model.basis.family,
            "lo": model.basis.lo,
            "hi": model.basis.hi,
            "max_order": model.basis.max_order,
        },
        "dense": [
            {
                "dims": list(m.dims),
                "indices": [list(idx) for idx in m.indices],
                "coeffs": m.coeffs.tolist(),
            }
            for m in model.dense
        ],
        "cp": [
            {"dims": list(m.dims), "factors": m.factors.tolist()}
            for m in model.cp
        ],
    }


def save_model(model: HdmrModel, path) -> None:
    """Serialize to JSON. Keys are sorted and floats use shortest round-trip
    repr, so identical models produce byte-identical files."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_model_payload(model), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> HdmrModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != _SCHEMA:
        raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
    if doc.get("kind", "hdmr") != "hdmr":
        raise ValueError(
            f"model file holds a {doc.get('kind')!r} model; use the matching loader"
        )
    return _model_from_payload(doc)


def _model_from_payload(doc) -> HdmrModel:
    basis = BasisConfig(
        lo=doc["basis"]["lo"],
        hi=doc["basis"]["hi"],
        max_order=doc["basis"]["max_order"],
        family=doc["basis"]["family"],
    )
    dense = [
        DenseMode(tuple(m["dims"]), tuple(tuple(i) for i in m["indices"]),
                  np.asarray(m["coeffs"]))
        for m in doc["dense"]
    ]
    cp = [CPMode(tuple(m["dims"]), np.asarray(m["factors"])) for m in doc["cp"]]
    return HdmrModel(
        f0=doc["f0"], basis=basis, nd=doc["nd"], no=doc["no"],
        ninter=doc["ninter"], npc=doc["npc"], nr=doc["nr"],
        dense=dense, cp=cp,
    )
