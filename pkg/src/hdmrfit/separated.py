"""Rank-separated representation of a random field from scattered samples.

u(x, xi) is approximated by w_0(x) + sum_n w_n(x) lambda_n(xi): spatial
profiles times stochastic modes, built one rank at a time by deflation.
Each rank alternates a spatial least-squares fit (rows weighted by the
current lambda values) with a stochastic surrogate fit (design rows weighted
by the current spatial profile) until the stochastic-mode norm settles.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisConfig, univariate_table
from .data import SampleSet
from .fitting import FitConfig, fit_hdmr, ls_solve
from .model import HdmrModel, _model_from_payload, _model_payload, evaluate_model
from .selection import SelectionConfig, glars_select

__all__ = [
    "SpatialBasis",
    "SeparatedConfig",
    "SeparatedModel",
    "spatial_design",
    "fit_spatial_mode",
    "fit_separated",
    "evaluate_separated",
    "save_separated",
    "load_separated",
]

_TINY = 1e-300


@dataclass(frozen=True)
class SpatialBasis:
    """Deterministic basis {phi_l} over the spatial coordinate.

    kind "nodal-piecewise-linear": hat functions on a uniform grid of cardx
    nodes. kind "legendre-tensor": orthonormal Legendre polynomials of
    degree < cardx. One spatial dimension is supported.
    """

    kind: str = "nodal-piecewise-linear"
    cardx: int = 16
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("nodal-piecewise-linear", "legendre-tensor"):
            raise ValueError(f"unknown spatial basis kind {self.kind!r}")
        if self.cardx < 1:
            raise ValueError("cardx must be >= 1")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError(f"empty spatial domain [{lo}, {hi}]")
        if self.kind == "nodal-piecewise-linear" and self.cardx < 2:
            raise ValueError("nodal basis needs at least 2 nodes")


def spatial_design(sb: SpatialBasis, x) -> np.ndarray:
    """Evaluate the cardx basis functions at x, shape (len(x), cardx)."""
    x = np.asarray(x, dtype=float).ravel()
    lo, hi = sb.domain
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"spatial basis undefined outside [{lo}, {hi}]")
    if sb.kind == "legendre-tensor":
        return univariate_table(
            BasisConfig(lo=lo, hi=hi, max_order=sb.cardx), x)
    nodes = np.linspace(lo, hi, sb.cardx)
    h = nodes[1] - nodes[0]
    cell = np.clip(((x - lo) / h).astype(int), 0, sb.cardx - 2)
    t = (x - nodes[cell]) / h
    phi = np.zeros((x.shape[0], sb.cardx))
    rows = np.arange(x.shape[0])
    phi[rows, cell] = 1.0 - t
    phi[rows, cell + 1] = t
    return phi


@dataclass(frozen=True)
class SeparatedConfig:
    """Rank growth and inner-alternation controls."""

    lmax: int = 2
    outer_tol: float = 1e-4
    max_outer_iters: int = 50
    stop_norm_frac: float = 1e-3
    update_spatial_joint: bool = False

    def __post_init__(self):
        if self.lmax < 0:
            raise ValueError("lmax must be >= 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass
class SeparatedModel:
    """Ordered (spatial coefficients, stochastic mode) pairs.

    pairs[0] is the rank-0 profile with lambda_0 identically 1 (stored as
    None); later lambdas are fitted surrogates. Pair order is deflation
    order; for n >= 1 the spatial profile had unit empirical norm at fit
    time.
    """

    spatial_basis: SpatialBasis
    pairs: list[tuple[np.ndarray, HdmrModel | None]] = field(default_factory=list)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("a separated model needs at least the rank-0 pair")
        if self.pairs[0][1] is not None:
            raise ValueError("lambda_0 must be the unit function")
        fixed = []
        for c, lam in self.pairs:
            c = np.asarray(c, dtype=float).ravel()
            if c.shape[0] != self.spatial_basis.cardx:
                raise ValueError(
                    f"spatial coefficients have length {c.shape[0]}, "
                    f"expected {self.spatial_basis.cardx}"
                )
            fixed.append((c, lam))
        self.pairs = fixed

    @property
    def rank(self) -> int:
        return len(self.pairs) - 1


def fit_spatial_mode(residual, lam_values, train: SampleSet,
                     sb: SpatialBasis):
    """Solve min_c ||residual - (Phi c) * lam_values|| and normalize.

    Returns (coefficients with unit empirical norm over the sample
    locations, scale). The scale is meant to be absorbed into the stochastic
    mode; it is 0 for an identically zero fit.
    """
    lam = np.asarray(lam_values, dtype=float).ravel()
    if not np.all(np.isfinite(lam)):
        raise ValueError("non-finite stochastic-mode values")
    if not np.any(lam):
        raise ValueError("stochastic-mode values are identically zero")
    if train.ndx != 1:
        raise ValueError("spatial fitting needs exactly one spatial column")
    phi = spatial_design(sb, train.x[:, 0])
    c = ls_solve(phi * lam[:, None], residual, 0.0)
    wvals = phi @ c
    scale = float(np.linalg.norm(wvals))
    if scale == 0.0:
        return np.zeros(sb.cardx), 0.0
    return c / scale, scale


def fit_separated(train: SampleSet, sel_cfg: SelectionConfig, fit_cfg: FitConfig,
                  sep_cfg: SeparatedConfig, sb: SpatialBasis,
                  basis: BasisConfig, validation: SampleSet | None = None
                  ) -> SeparatedModel:
    """Build the separated representation by rank-wise deflation.

    Rank 0 is the plain spatial least-squares fit (lambda_0 = 1). For every
    later rank the group skeleton of lambda_n is selected once, on the first
    inner alternation, and kept fixed while the spatial and stochastic
    coefficients are alternated to convergence of ||lambda_n||. Ranks stop
    at sep_cfg.lmax or once ||lambda_n|| falls below
    stop_norm_frac * ||u||; a rank whose pair fails to reduce the training
    residual is discarded.
    """
    if train.nq < 1:
        raise ValueError("empty dataset")
    if train.ndx != 1:
        raise ValueError("separated fitting needs one spatial column")
    have_val = validation is not None and validation.nq > 0

    phi = spatial_design(sb, train.x[:, 0])
    u = train.u
    unorm = float(np.linalg.norm(u))
    c0 = ls_solve(phi, u, 0.0)
    pairs: list[tuple[np.ndarray, HdmrModel | None]] = [(c0, None)]
    res = u - phi @ c0
    if have_val:
        phi_val = spatial_design(sb, validation.x[:, 0])
        res_val = validation.u - phi_val @ c0

    for _ in range(sep_cfg.lmax):
        if float(np.linalg.norm(res)) == 0.0:
            break
        # start from the constant unit-norm profile and fit the stochastic
        # mode first: after deflation the residual has ~zero conditional
        # mean in x, so a spatial fit against lambda = 1 is pure noise
        w_c = ls_solve(phi, np.ones(train.nq), 0.0)
        w_c = w_c / float(np.linalg.norm(phi @ w_c))
        prev_norm = None
        kept_groups = None
        lam_model = None
        lam_vals = None
        degenerate = False
        for it in range(sep_cfg.max_outer_iters):
            w_train = phi @ w_c
            w_val = phi_val @ w_c if have_val else None
            if kept_groups is None:
                path = glars_select(train, sel_cfg, basis,
                                    response=res, row_weights=w_train)
                lam_model, diag = fit_hdmr(
                    train, validation if have_val else None, path, fit_cfg,
                    basis, row_weights=w_train, val_row_weights=w_val,
                    response=res, val_response=res_val if have_val else None,
                    retain="cv" if have_val else "all")
                kept_groups = path.groups()[: diag.retained] if have_val \
                    else path.groups()
            else:
                lam_model = _refit_lambda(train, validation if have_val else None,
                                          kept_groups, fit_cfg, basis,
                                          w_train, w_val, res,
                                          res_val if have_val else None)
            lam_vals = evaluate_model(lam_model, train.xi)
            lam_norm = float(np.linalg.norm(lam_vals))
            if lam_norm == 0.0:
                degenerate = True
                break
            if prev_norm is not None and \
                    abs(lam_norm - prev_norm) <= sep_cfg.outer_tol * lam_norm:
                break
            prev_norm = lam_norm
            w_c, scale = fit_spatial_mode(res, lam_vals, train, sb)
            if scale == 0.0:
                degenerate = True
                break
        if degenerate or lam_model is None:
            break
        if float(np.linalg.norm(lam_vals)) < sep_cfg.stop_norm_frac * unorm:
            break  # negligible stochastic content left; drop this rank

        w_train = phi @ w_c
        pair_vals = w_train * lam_vals
        new_res = res - pair_vals
        if float(np.linalg.norm(new_res)) > float(np.linalg.norm(res)):
            warnings.warn(
                "separated rank did not reduce the training residual; stopping"
            )
            break
        pairs.append((w_c, lam_model))
        res = new_res
        if have_val:
            res_val = res_val - (phi_val @ w_c) * evaluate_model(
                lam_model, validation.xi)

        if sep_cfg.update_spatial_joint:
            res = _joint_spatial_update(pairs, phi, train, u)
            if have_val:
                res_val = validation.u - _predict_pairs(pairs, phi_val,
                                                        validation.xi)

    return SeparatedModel(spatial_basis=sb, pairs=pairs)


def _refit_lambda(train, validation, groups, fit_cfg, basis, w_train, w_val,
                  res, res_val):
    # coefficient-only refit on the frozen skeleton; fit on the union of
    # train and validation to match the first iteration's final refit
    if validation is None:
        model, _ = fit_hdmr(train, None, groups, fit_cfg, basis,
                            row_weights=w_train, response=res, retain="all")
        return model
    combined = SampleSet(
        np.vstack([train.x, validation.x]),
        np.vstack([train.xi, validation.xi]),
        np.concatenate([train.u, validation.u]),
        "train",
    )
    model, _ = fit_hdmr(
        combined, None, groups, fit_cfg, basis,
        row_weights=np.concatenate([w_train, w_val]),
        response=np.concatenate([res, res_val]), retain="all")
    return model


def _predict_pairs(pairs, phi, xi):
    out = np.zeros(phi.shape[0])
    for c, lam in pairs:
        w = phi @ c
        out += w if lam is None else w * evaluate_model(lam, xi)
    return out


def _joint_spatial_update(pairs, phi, train, u):
    """Re-solve every spatial coefficient vector at fixed stochastic modes.

    A single least-squares problem over the concatenated blocks
    [phi * lam_n]; it can only reduce the training residual.
    """
    lam_cols = []
    for _, lam in pairs:
        lam_cols.append(np.ones(train.nq) if lam is None
                        else evaluate_model(lam, train.xi))
    blocks = [phi * lam[:, None] for lam in lam_cols]
    design = np.hstack(blocks)
    coeffs = ls_solve(design, u, 0.0)
    cardx = phi.shape[1]
    for n in range(len(pairs)):
        pairs[n] = (coeffs[n * cardx:(n + 1) * cardx], pairs[n][1])
    return u - design @ coeffs


def evaluate_separated(m: SeparatedModel, x, xi) -> np.ndarray:
    """Evaluate sum_n w_n(x) lambda_n(xi) at paired rows of (x, xi)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    squeeze = xi.ndim == 1
    if squeeze:
        xi = xi[None, :]
    xflat = x.ravel()
    if xflat.shape[0] != xi.shape[0]:
        raise ValueError(
            f"{xflat.shape[0]} spatial points for {xi.shape[0]} stochastic rows"
        )
    phi = spatial_design(m.spatial_basis, xflat)
    out = _predict_pairs(m.pairs, phi, xi)
    return float(out[0]) if squeeze else out


def save_separated(m: SeparatedModel, path) -> None:
    """JSON export mirroring the plain model schema (sorted keys, repr floats)."""
    doc = {
        "schema": 1,
        "kind": "separated",
        "spatial_basis": {
            "kind": m.spatial_basis.kind,
            "cardx": m.spatial_basis.cardx,
            "domain": list(m.spatial_basis.domain),
        },
        "pairs": [
            {
                "w": c.tolist(),
                "lambda": "unit" if lam is None else _model_payload(lam),
            }
            for c, lam in m.pairs
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_separated(path) -> SeparatedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != 1 or doc.get("kind") != "separated":
        raise ValueError(f"{path}: not a separated model file")
    sb = SpatialBasis(
        kind=doc["spatial_basis"]["kind"],
        cardx=doc["spatial_basis"]["cardx"],
        domain=tuple(doc["spatial_basis"]["domain"]),
    )
    pairs = []
    for pair in doc["pairs"]:
        c = np.asarray(pair["w"], dtype=float)
        lam = None
        if pair["lambda"] != "unit":
            lam = _model_from_payload(pair["lambda"])
        pairs.append((c, lam))
    return SeparatedModel(spatial_basis=sb, pairs=pairs)
