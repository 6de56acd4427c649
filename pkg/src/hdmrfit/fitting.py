"""Coefficient estimation for sparse HDMR surrogates.

Covers ordinary least squares, dense-mode fits, separated-rank (CP) mode
fits by alternating least squares, the multi-pass driver with
cross-validation stopping, and a weighted total least squares alternative
for data with noisy stochastic coordinates.

All fits accept optional per-row weights w_q: the surrogate then predicts
w_q * model(xi_q) at the sample rows, which is what the separated
representation driver needs when a stochastic mode is fitted under a fixed
spatial profile.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisConfig, univariate_deriv_table, univariate_table
from .data import NoiseModel, SampleSet, rng_stream
from .model import (
    CPMode,
    DenseMode,
    Group,
    HdmrModel,
    dense_design,
    enumerate_dense_indices,
    evaluate_model,
)

__all__ = [
    "FitConfig",
    "CovarianceBlocks",
    "PassRecord",
    "FitDiagnostics",
    "ls_solve",
    "fit_dense_mode",
    "fit_cp_mode",
    "fit_hdmr",
    "relative_error",
    "build_sample_covariance",
    "covariance_blocks",
    "wtls_solve",
    "save_diagnostics",
]

_TINY = 1e-300


@dataclass(frozen=True)
class FitConfig:
    """Structural and algorithmic knobs of the coefficient stage."""

    no: int = 4
    npc: int = 2
    ninter: int = 2
    nr: int = 3
    als_tol: float = 1e-8
    als_max_sweeps: int = 100
    update_sweeps: bool = True
    update_sweeps_tol: float = 1e-6
    max_update_sweeps: int = 20
    beta: float = 0.0
    seed: int = 0
    robust: bool = False
    noise: NoiseModel | None = None
    wtls_tol: float = 1e-10
    wtls_max_iter: int = 50

    def __post_init__(self):
        if self.npc > self.ninter:
            raise ValueError("npc must be <= ninter")
        if self.nr < 1:
            raise ValueError("nr must be >= 1")
        if self.no < 1:
            raise ValueError("no must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.robust and self.noise is None:
            raise ValueError("robust fitting needs a NoiseModel")


def fit_basis(basis: BasisConfig, cfg: FitConfig) -> BasisConfig:
    """Basis table wide enough for single-dimension modes of total degree no."""
    return replace(basis, max_order=max(basis.max_order, cfg.no + 1))


def ls_solve(psi, r, beta: float = 0.0) -> np.ndarray:
    """Minimize ||r - psi c||^2 + beta^2 ||c||^2.

    Rank-deficient systems get the minimum-norm solution when beta = 0.
    """
    psi = np.asarray(psi, dtype=float)
    r = np.asarray(r, dtype=float).ravel()
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(r))):
        raise ValueError("non-finite entries in the least-squares system")
    if psi.ndim != 2 or psi.shape[1] < 1:
        raise ValueError(f"bad design shape {psi.shape}")
    if beta > 0:
        psi = np.vstack([psi, beta * np.eye(psi.shape[1])])
        r = np.concatenate([r, np.zeros(psi.shape[1])])
    c, *_ = np.linalg.lstsq(psi, r, rcond=None)
    return c


def _is_noisy(cfg: FitConfig) -> bool:
    return cfg.robust and cfg.noise is not None and (
        cfg.noise.s > 0 or cfg.noise.s_u > 0
    )


def fit_dense_mode(gamma, residual, train: SampleSet, cfg: FitConfig,
                   basis: BasisConfig, row_weights=None, table=None,
                   u_base=None) -> DenseMode:
    """Least-squares (or robust) fit of one dense mode against a residual.

    The errors-in-variables path applies to plain rows only; row-weighted
    fits (stochastic-mode subproblems of the separated driver) always use
    least squares. u_base is the current model prediction excluding this
    mode; together with the mode's own least-squares estimate it provides
    the denoised response for the value-noise variance.
    """
    gamma = tuple(int(d) for d in gamma)
    if len(gamma) > cfg.npc:
        raise ValueError(f"group {gamma} exceeds the dense cutoff npc={cfg.npc}")
    indices = enumerate_dense_indices(gamma, cfg.no)
    if not indices:
        raise ValueError(f"group {gamma} has no predictors at degree no={cfg.no}")
    if table is None:
        table = univariate_table(fit_basis(basis, cfg), train.xi)
    psi = dense_design(table, gamma, indices)
    plain_rows = row_weights is None
    if row_weights is not None:
        rw = np.asarray(row_weights, dtype=float)
        plain_rows = bool(np.all(rw == 1.0))
        psi = psi * rw[:, None]
    residual = np.asarray(residual, dtype=float).ravel()
    if _is_noisy(cfg) and plain_rows:
        c0 = ls_solve(psi, residual, cfg.beta)
        u_ref = psi @ c0
        if u_base is not None:
            u_ref = u_ref + np.asarray(u_base, dtype=float).ravel()
        blocks = covariance_blocks(train, gamma, indices, cfg.noise,
                                   fit_basis(basis, cfg), u_ref=u_ref)
        c = wtls_solve(psi, residual, blocks, c0=c0,
                       tol=cfg.wtls_tol, max_iter=cfg.wtls_max_iter)
    else:
        c = ls_solve(psi, residual, cfg.beta)
    return DenseMode(gamma, tuple(indices), c)


def fit_cp_mode(gamma, residual, train: SampleSet, cfg: FitConfig,
                basis: BasisConfig, row_weights=None, table=None,
                init=None) -> CPMode:
    """Greedy rank-by-rank ALS fit of a separated mode against a residual.

    Each rank starts from seeded uniform draws in [-1, 1] (or from ``init``
    factors when warm-starting a refit), then cycles the dimensions solving
    the exact least-squares subproblem for one factor block at a time.
    """
    gamma = tuple(int(d) for d in gamma)
    if len(gamma) <= cfg.npc or len(gamma) > cfg.ninter:
        raise ValueError(
            f"group {gamma} is not in the separated range ({cfg.npc}, {cfg.ninter}]"
        )
    if table is None:
        table = univariate_table(fit_basis(basis, cfg), train.xi)
    residual = np.asarray(residual, dtype=float).ravel()
    w = None if row_weights is None else np.asarray(row_weights, dtype=float).ravel()
    card = len(gamma)
    # per-dimension design blocks over orders alpha = 2..no
    blocks_t = [table[:, d - 1, 1:cfg.no] for d in gamma]
    nord = cfg.no - 1
    factors = np.zeros((cfg.nr, card, nord))
    target = residual.copy()
    for rank in range(cfg.nr):
        if float(np.linalg.norm(target)) == 0.0:
            break
        for attempt in (0, 1):
            if init is not None and attempt == 0:
                fac = np.array(init[rank], dtype=float)
            else:
                g = rng_stream(cfg.seed, 4, *gamma, rank, attempt)
                fac = g.uniform(-1.0, 1.0, size=(card, nord))
            fac, contr = _als_rank(target, blocks_t, fac, w, cfg)
            if fac is not None:
                break
        else:
            warnings.warn(
                f"CP rank {rank + 1} on {gamma}: factor values vanished twice, "
                "skipping this rank"
            )
            continue
        factors[rank] = fac
        target = target - contr
    return CPMode(gamma, factors)


def _als_rank(target, blocks_t, fac, w, cfg: FitConfig):
    """ALS sweeps for one rank. Returns (factors, weighted contribution),
    or (None, None) when a partial product vanishes."""
    card = len(blocks_t)
    vals = [blocks_t[i] @ fac[i] for i in range(card)]
    prev = np.inf
    contr = np.zeros_like(target)
    for _ in range(cfg.als_max_sweeps):
        for i in range(card):
            partial = np.ones_like(target)
            for j in range(card):
                if j != i:
                    partial = partial * vals[j]
            if not np.any(partial):
                return None, None
            psi = blocks_t[i] * partial[:, None]
            if w is not None:
                psi = psi * w[:, None]
            fac[i] = ls_solve(psi, target, cfg.beta)
            vals[i] = blocks_t[i] @ fac[i]
        contr = np.ones_like(target)
        for v in vals:
            contr = contr * v
        if w is not None:
            contr = contr * w
        res = float(np.linalg.norm(target - contr))
        if abs(prev - res) <= cfg.als_tol * max(res, _TINY):
            break
        prev = res
    return fac, contr


@dataclass(frozen=True)
class PassRecord:
    """One driver pass: the group added, training residual norm after the
    update sweeps, and the validation error (nan without a validation set)."""

    s: int
    dims: Group | None
    train_residual_norm: float
    cv_eps: float


@dataclass
class FitDiagnostics:
    records: list[PassRecord] = field(default_factory=list)
    retained: int = 0


def save_diagnostics(diag: FitDiagnostics, path) -> None:
    """CSV export: pass, dims (semicolon-joined), train residual norm, CVeps."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pass,dims,train_residual_norm,cv_eps\n")
        for rec in diag.records:
            dims = ";".join(str(d) for d in rec.dims) if rec.dims else ""
            fh.write(f"{rec.s},{dims},{rec.train_residual_norm!r},{rec.cv_eps!r}\n")


class _ActiveMode:
    __slots__ = ("dims", "kind", "mode", "values", "val_values", "psi", "vdesign")

    def __init__(self, dims, kind):
        self.dims = dims
        self.kind = kind
        self.mode = None
        self.values = None
        self.val_values = None
        self.psi = None
        self.vdesign = None


def _mode_train_values(mode, table, no):
    if isinstance(mode, DenseMode):
        return dense_design(table, mode.dims, mode.indices) @ mode.coeffs
    from .model import _cp_values
    return _cp_values(table, mode, no)


def _concat_sets(a: SampleSet, b: SampleSet) -> SampleSet:
    return SampleSet(
        np.vstack([a.x, b.x]) if a.ndx else np.empty((a.nq + b.nq, 0)),
        np.vstack([a.xi, b.xi]),
        np.concatenate([a.u, b.u]),
        "train",
    )


def fit_hdmr(train: SampleSet, validation: SampleSet | None, path, cfg: FitConfig,
             basis: BasisConfig, row_weights=None, val_row_weights=None,
             response=None, val_response=None, retain: str = "cv"):
    """Multi-pass driver: grow the surrogate along a selection path.

    Groups from ``path`` are added one per pass; each pass fits the new mode
    on the current residual, cyclically re-fits all active modes (update
    sweeps), and evaluates the error on the validation set. Growth stops
    once the validation error has increased over two consecutive passes; the
    returned model keeps the pass with the smallest validation error and is
    refitted on train plus validation. ``retain="all"`` fits every group
    with no early stopping (used for refits on a fixed skeleton).

    Returns (HdmrModel, FitDiagnostics).
    """
    if train.nq < 1:
        raise ValueError("empty training set")
    groups = path.groups() if hasattr(path, "groups") else [tuple(g) for g in path]
    have_val = validation is not None and validation.nq > 0
    if retain == "cv" and not have_val:
        warnings.warn("no validation samples: fitting the whole path")
        retain = "all"
    if retain not in ("cv", "all"):
        raise ValueError(f"unknown retain policy {retain!r}")

    model, diag = _fit_passes(train, validation if have_val else None, groups,
                              cfg, basis, row_weights, val_row_weights,
                              response, val_response, retain)
    if retain == "all":
        return model, diag

    kept = groups[: diag.retained]
    combined = _concat_sets(train, validation)
    w_c = None
    if row_weights is not None or val_row_weights is not None:
        wt = np.ones(train.nq) if row_weights is None \
            else np.asarray(row_weights, dtype=float).ravel()
        wv = np.ones(validation.nq) if val_row_weights is None \
            else np.asarray(val_row_weights, dtype=float).ravel()
        w_c = np.concatenate([wt, wv])
    r_c = None
    if response is not None or val_response is not None:
        rt = train.u if response is None else np.asarray(response, dtype=float).ravel()
        rv = validation.u if val_response is None \
            else np.asarray(val_response, dtype=float).ravel()
        r_c = np.concatenate([rt, rv])
    model, _ = _fit_passes(combined, None, kept, cfg, basis, w_c, None,
                           r_c, None, "all")
    return model, diag


def _fit_passes(train, validation, groups, cfg, basis, row_weights,
                val_row_weights, response, val_response, retain):
    fbasis = fit_basis(basis, cfg)
    table = univariate_table(fbasis, train.xi)
    u = train.u if response is None else np.asarray(response, dtype=float).ravel()
    if u.shape[0] != train.nq:
        raise ValueError("response length does not match the training set")
    w = np.ones(train.nq) if row_weights is None \
        else np.asarray(row_weights, dtype=float).ravel()
    wsq = float(w @ w)
    if wsq <= 0:
        raise ValueError("row weights are identically zero")

    have_val = validation is not None and validation.nq > 0
    if have_val:
        vtable = univariate_table(fbasis, validation.xi)
        uval = validation.u if val_response is None \
            else np.asarray(val_response, dtype=float).ravel()
        wv = np.ones(validation.nq) if val_row_weights is None \
            else np.asarray(val_row_weights, dtype=float).ravel()
        val_norm = float(np.linalg.norm(uval))
        if val_norm == 0.0:
            warnings.warn("validation values are identically zero: no early stopping")
            have_val = False

    modes: list[_ActiveMode] = []

    def predicted():
        tot = np.zeros(train.nq)
        for m in modes:
            tot += m.values
        return tot

    def cv_eps(f0):
        if not have_val:
            return float("nan")
        tot = np.zeros(validation.nq)
        for m in modes:
            tot += m.val_values
        return float(np.linalg.norm(uval - wv * (f0 + tot)) / val_norm)

    f0 = float(w @ u) / wsq
    r0 = float(np.linalg.norm(u - w * f0))
    eps0 = cv_eps(f0)
    records = [PassRecord(0, None, r0, eps0)]
    best_eps, best_s = (eps0, 0) if have_val else (np.inf, len(groups))
    prev_eps, inc = eps0, 0
    unique = set()

    for s, dims in enumerate(groups, start=1):
        dims = tuple(int(d) for d in dims)
        if dims in unique:
            raise ValueError(f"group {dims} appears twice in the path")
        unique.add(dims)
        am = _ActiveMode(dims, "dense" if len(dims) <= cfg.npc else "cp")
        base = f0 + predicted()
        r = u - w * base
        _refit_mode(am, r, train, cfg, fbasis, w, table, u_base=base)
        if have_val:
            am.val_values = _mode_train_values(am.mode, vtable, cfg.no)
        modes.append(am)

        if cfg.update_sweeps:
            f0 = _update_sweeps(modes, u, train, cfg, fbasis, w, wsq, table, f0)
        f0 = float(w @ (u - w * predicted())) / wsq
        if have_val:
            for m in modes:
                m.val_values = _mode_train_values(m.mode, vtable, cfg.no)
        rnorm = float(np.linalg.norm(u - w * (f0 + predicted())))
        eps = cv_eps(f0)
        records.append(PassRecord(s, dims, rnorm, eps))

        if retain == "cv" and have_val:
            inc = inc + 1 if eps > prev_eps else 0
            if eps < best_eps:
                best_eps, best_s = eps, s
            prev_eps = eps
            if inc >= 2:
                break

    retained = best_s if (retain == "cv" and have_val) else len(modes)
    model = HdmrModel(
        f0=f0, basis=fbasis, nd=train.nd, no=cfg.no, ninter=cfg.ninter,
        npc=cfg.npc, nr=cfg.nr,
        dense=[m.mode for m in modes if m.kind == "dense"],
        cp=[m.mode for m in modes if m.kind == "cp"],
    )
    return model, FitDiagnostics(records=records, retained=retained)


def _refit_mode(am: _ActiveMode, r, train, cfg, fbasis, w, table, u_base=None):
    if am.kind == "dense":
        am.mode = fit_dense_mode(am.dims, r, train, cfg, fbasis,
                                 row_weights=w, table=table, u_base=u_base)
    else:
        init = am.mode.factors if am.mode is not None else None
        am.mode = fit_cp_mode(am.dims, r, train, cfg, fbasis,
                              row_weights=w, table=table, init=init)
    am.values = _mode_train_values(am.mode, table, cfg.no)


def _update_sweeps(modes, u, train, cfg, fbasis, w, wsq, table, f0):
    def total():
        tot = np.zeros(train.nq)
        for m in modes:
            tot += m.values
        return tot

    prev = float(np.linalg.norm(u - w * (f0 + total())))
    for _ in range(cfg.max_update_sweeps):
        f0 = float(w @ (u - w * total())) / wsq
        for m in modes:
            base = f0 + total() - m.values
            r_m = u - w * base
            _refit_mode(m, r_m, train, cfg, fbasis, w, table, u_base=base)
        cur = float(np.linalg.norm(u - w * (f0 + total())))
        if abs(prev - cur) <= cfg.update_sweeps_tol * max(cur, _TINY):
            break
        prev = cur
    return f0


def relative_error(model, test: SampleSet) -> float:
    """Relative L2 error ||u - u_hat|| / ||u|| over a test set."""
    if test.nq < 1:
        raise ValueError("empty test set")
    denom = float(np.linalg.norm(test.u))
    if denom == 0.0:
        raise ValueError("zero-norm reference values: relative error undefined")
    if isinstance(model, HdmrModel):
        pred = evaluate_model(model, test.xi)
    else:
        from .separated import evaluate_separated
        pred = evaluate_separated(model, test.x, test.xi)
    return float(np.linalg.norm(test.u - pred) / denom)


@dataclass(frozen=True)
class CovarianceBlocks:
    """Per-sample (p+1)x(p+1) noise covariance blocks, predictor rows first,
    residual row last."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=float)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"blocks must be (Nq, p+1, p+1), got {b.shape}")
        if np.max(np.abs(b - b.transpose(0, 2, 1)), initial=0.0) > 1e-12:
            raise ValueError("covariance blocks are not symmetric")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def nq(self) -> int:
        return self.blocks.shape[0]


def build_sample_covariance(xi_q, dims, indices, noise: NoiseModel, u_q,
                            basis: BasisConfig) -> np.ndarray:
    """First-order noise covariance block for one sample.

    Predictor rows get s^2 * sum_i (dpsi_a/dxi_i)(dpsi_b/dxi_i); the residual
    row variance is (s_u * u_q)^2; cross terms vanish because coordinate and
    value noise are independent.
    """
    xi_q = np.asarray(xi_q, dtype=float).ravel()
    dims = tuple(int(d) for d in dims)
    p = len(indices)
    lam = np.zeros((p + 1, p + 1))
    if noise.s > 0:
        sub = xi_q[[d - 1 for d in dims]]
        vals = univariate_table(basis, sub)
        ders = univariate_deriv_table(basis, sub)
        der = np.empty((p, len(dims)))
        for a, idx in enumerate(indices):
            for i, al in enumerate(idx):
                prod = 1.0
                for j, aj in enumerate(idx):
                    if j != i:
                        prod *= vals[j, aj - 1]
                der[a, i] = ders[i, al - 1] * prod
        lam[:p, :p] = noise.s**2 * (der @ der.T)
    lam[p, p] = (noise.s_u * float(u_q)) ** 2
    return lam


def covariance_blocks(train: SampleSet, dims, indices, noise: NoiseModel,
                      basis: BasisConfig, u_ref=None) -> CovarianceBlocks:
    """Vectorized build_sample_covariance over every training row.

    u_ref supplies the response values for the residual-row variance;
    it defaults to the observed train.u. A denoised estimate (the current
    model prediction) avoids feeding the value noise back into its own
    weights, which otherwise biases the fit toward rows the noise happened
    to pull toward zero.
    """
    dims = tuple(int(d) for d in dims)
    p = len(indices)
    nq = train.nq
    blocks = np.zeros((nq, p + 1, p + 1))
    if noise.s > 0:
        sub = train.xi[:, [d - 1 for d in dims]]
        vals = univariate_table(basis, sub)   # (nq, card, ord)
        ders = univariate_deriv_table(basis, sub)
        card = len(dims)
        der = np.empty((nq, p, card))
        for a, idx in enumerate(indices):
            cols = [vals[:, i, al - 1] for i, al in enumerate(idx)]
            for i in range(card):
                prod = np.ones(nq)
                for j in range(card):
                    if j != i:
                        prod = prod * cols[j]
                der[:, a, i] = ders[:, i, idx[i] - 1] * prod
        blocks[:, :p, :p] = noise.s**2 * np.einsum("qai,qbi->qab", der, der)
    uref = train.u if u_ref is None else np.asarray(u_ref, dtype=float).ravel()
    blocks[:, p, p] = (noise.s_u * uref) ** 2
    return CovarianceBlocks(blocks)


def wtls_solve(psi, r, blocks: CovarianceBlocks, c0=None, tol: float = 1e-10,
               max_iter: int = 50) -> np.ndarray:
    """Weighted total least squares via iteratively reweighted projections.

    Minimizes rho^2 = sum_q (psi_q c - r_q)^2 / (a' Lambda_q a) with
    a = (c', -1)'. Each iteration freezes the denominators at the current c,
    solves the induced weighted least-squares problem, and backtracks the
    step until the full objective does not increase. Returns the iterate
    with the smallest objective seen.
    """
    psi = np.asarray(psi, dtype=float)
    r = np.asarray(r, dtype=float).ravel()
    b = blocks.blocks
    if b.shape[0] != psi.shape[0] or b.shape[1] != psi.shape[1] + 1:
        raise ValueError(
            f"blocks shaped {b.shape} do not match design {psi.shape}"
        )
    if not np.any(b):
        return ls_solve(psi, r, 0.0)
    tau = 1e-12 * np.trace(b, axis1=1, axis2=2)

    def denom(c):
        a = np.concatenate([c, [-1.0]])
        d = np.einsum("i,qij,j->q", a, b, a) + tau * float(a @ a)
        return np.maximum(d, 1e-14 * d.max())

    def rho2(c):
        e = psi @ c - r
        return float(np.sum(e * e / denom(c)))

    c = ls_solve(psi, r, 0.0) if c0 is None else np.asarray(c0, dtype=float).ravel()
    prev = rho2(c)
    best_c, best_rho = c.copy(), prev
    converged = False
    for _ in range(max_iter):
        sw = 1.0 / np.sqrt(denom(c))
        c_prop = ls_solve(psi * sw[:, None], r * sw, 0.0)
        step, cand, rho_new = 1.0, None, prev
        for _ in range(30):
            cand = c + step * (c_prop - c)
            rho_new = rho2(cand)
            if rho_new <= prev * (1.0 + 1e-12):
                break
            step *= 0.5
        else:
            cand, rho_new = c, prev
        c = cand
        if rho_new < best_rho:
            best_c, best_rho = c.copy(), rho_new
        if abs(prev - rho_new) <= tol * max(prev, _TINY):
            converged = True
            break
        prev = rho_new
    if not converged:
        warnings.warn("weighted TLS did not converge; returning best iterate")
    return best_c
