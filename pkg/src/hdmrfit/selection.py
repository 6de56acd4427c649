"""Group least angle regression over the interaction-group dictionary.

Candidate groups gamma (all subsets of stochastic dimensions up to a chosen
interaction order) compete through the score ||Q_g' r||^2 / p_g, where Q_g
holds the group's design columns orthonormalized under the empirical inner
product and p_g counts its predictors. Groups enter one at a time; after each
entry the residual moves along the least-squares direction of the active
columns by the smallest step at which an inactive group ties the active
score. The output is the ordered entry sequence: a skeleton of groups whose
coefficients are discarded and re-estimated downstream.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
import scipy.linalg

from .basis import BasisConfig, univariate_table
from .data import SampleSet
from .model import Group, enumerate_dense_indices

__all__ = [
    "SelectionConfig",
    "PathStep",
    "SelectionPath",
    "build_group_dictionary",
    "group_correlation",
    "glars_select",
    "save_path",
]

log = logging.getLogger(__name__)

# scan chunks are sized from (Nq, p) only, never from the worker count, so
# per-chunk reductions happen in a fixed order and results are bit-identical
# for any HDMR_THREADS setting
_CHUNK_FLOATS = 4_000_000
_ROOT_FLOOR = 1e-10


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HDMR_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs of the selection stage.

    nolars is the max total polynomial degree of the selection dictionary
    (distinct from the fitting degree); ninter caps the interaction order.
    """

    nolars: int = 3
    ninter: int = 2
    max_groups: int = 64
    residual_tol: float = 1e-10
    hierarchical: bool = False
    dof_buffer: int = 1

    def __post_init__(self):
        if self.nolars < 1:
            raise ValueError("nolars must be >= 1")
        if self.max_groups < 1:
            raise ValueError("max_groups must be >= 1")
        if self.ninter < 1:
            raise ValueError("ninter must be >= 1")
        if self.dof_buffer < 0:
            raise ValueError("dof_buffer must be >= 0")


@dataclass(frozen=True)
class PathStep:
    dims: Group
    entry_score: float
    step_size: float
    residual_norm_after: float


@dataclass
class SelectionPath:
    """Ordered entry sequence with per-step diagnostics."""

    steps: list[PathStep]
    scan_seconds: float = 0.0

    def __post_init__(self):
        seen = set()
        for st in self.steps:
            if st.dims in seen:
                raise ValueError(f"group {st.dims} enters the path twice")
            seen.add(st.dims)
        norms = [st.residual_norm_after for st in self.steps]
        if any(b > a * (1 + 1e-12) for a, b in zip(norms, norms[1:])):
            raise ValueError("residual norm increases along the path")

    def groups(self) -> list[Group]:
        return [st.dims for st in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


def save_path(path: SelectionPath, file) -> None:
    """Export the path as CSV: step, dims (semicolon-joined), entry_score,
    residual_norm."""
    with open(file, "w", encoding="utf-8") as fh:
        fh.write("step,dims,entry_score,residual_norm\n")
        for s, st in enumerate(path.steps, start=1):
            dims = ";".join(str(d) for d in st.dims)
            fh.write(f"{s},{dims},{st.entry_score!r},{st.residual_norm_after!r}\n")


def build_group_dictionary(nd: int, cfg: SelectionConfig, active=()):
    """Lazily enumerate candidate (dims, predictor multi-indices) pairs.

    With cfg.hierarchical, a group is admitted only when all of its
    cardinality-(l-1) subsets appear in ``active``. Groups whose predictor
    set is empty at degree nolars are skipped.
    """
    if nd < 1:
        raise ValueError("nd must be >= 1")
    act = {tuple(g) for g in active}
    for card in range(1, min(cfg.ninter, nd) + 1):
        indices = enumerate_dense_indices(tuple(range(1, card + 1)), cfg.nolars)
        if not indices:
            continue
        for dims in combinations(range(1, nd + 1), card):
            if cfg.hierarchical and card > 1:
                if any(dims[:i] + dims[i + 1:] not in act for i in range(card)):
                    continue
            yield dims, indices


def group_correlation(gamma: Group, residual, design) -> float:
    """Score ||design' residual||^2 / p for a group's orthonormalized columns."""
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[1] == 0:
        raise ValueError(f"group {tuple(gamma)} has no usable predictors")
    proj = design.T @ np.asarray(residual, dtype=float).ravel()
    return float(proj @ proj) / design.shape[1]


class _ClassScan:
    """Batched score machinery for all groups of one cardinality.

    Holds per-chunk inverse Cholesky factors of the group Gram matrices;
    design tensors are rebuilt per scan so memory stays bounded by the chunk
    size regardless of the dictionary cardinality.
    """

    def __init__(self, table, groups, indices, weights):
        self.table = table
        self.groups = groups
        self.dims = np.asarray(groups, dtype=int) - 1          # (G, l)
        self.idx = np.asarray(indices, dtype=int) - 1          # (p, l)
        self.w = weights
        self.nq = table.shape[0]
        self.ngroups = self.dims.shape[0]
        self.p = self.idx.shape[0]
        self.card = self.dims.shape[1]
        self.chunk = max(1, min(256, _CHUNK_FLOATS // max(1, self.nq * self.p)))
        self.kept: list = []        # per chunk: None or list of kept-column index arrays
        self.linv: list = []        # per chunk: (g,p,p) array, or list of ragged factors
        self.pcount = np.full(self.ngroups, self.p)
        self._starts = list(range(0, self.ngroups, self.chunk))
        self._factorize()

    def _design(self, lo, hi):
        d = np.ones((hi - lo, self.nq, self.p))
        for i in range(self.card):
            cols = self.table[:, self.dims[lo:hi, i], :][:, :, self.idx[:, i]]
            d *= cols.transpose(1, 0, 2)
        if self.w is not None:
            d *= self.w[None, :, None]
        return d

    def _factorize(self):
        for lo in self._starts:
            hi = min(lo + self.chunk, self.ngroups)
            d = self._design(lo, hi)
            gram = np.einsum("gqi,gqj->gij", d, d)
            try:
                linv = np.linalg.inv(np.linalg.cholesky(gram))
                self.kept.append(None)
                self.linv.append(linv)
            except np.linalg.LinAlgError:
                self.kept.append([])
                self.linv.append([])
                self._factorize_ragged(lo, hi, d, gram)

    def _factorize_ragged(self, lo, hi, d, gram):
        # rank-deficient chunk: orthonormalize group by group, dropping
        # dependent columns found by pivoted QR
        for g in range(hi - lo):
            try:
                self.kept[-1].append(None)
                self.linv[-1].append(np.linalg.inv(np.linalg.cholesky(gram[g])))
                continue
            except np.linalg.LinAlgError:
                self.kept[-1].pop()
            r, piv = scipy.linalg.qr(d[g], mode="r", pivoting=True)
            diag = np.abs(np.diag(r))
            rank = int(np.sum(diag > max(d[g].shape) * np.finfo(float).eps * diag[0])) \
                if diag.size and diag[0] > 0 else 0
            keep = np.sort(piv[:rank])
            dims = tuple(self.dims[lo + g] + 1)
            log.warning("group %s: dropped %d dependent predictor column(s)",
                        dims, self.p - rank)
            self.pcount[lo + g] = rank
            if rank == 0:
                self.kept[-1].append(np.empty(0, dtype=int))
                self.linv[-1].append(None)
                continue
            sub = d[g][:, keep]
            self.kept[-1].append(keep)
            self.linv[-1].append(np.linalg.inv(np.linalg.cholesky(sub.T @ sub)))

    def _chunk_ids(self):
        return range(len(self._starts))

    def project(self, vecs, cid):
        """Orthonormal-coordinate projections L^-1 D' v for chunk ``cid``.

        vecs is (nq, k); returns (g, p, k) with zero rows for dropped columns.
        """
        lo = self._starts[cid]
        hi = min(lo + self.chunk, self.ngroups)
        d = self._design(lo, hi)
        m = np.einsum("gqi,qk->gik", d, vecs)
        if self.kept[cid] is None:
            return np.einsum("gij,gjk->gik", self.linv[cid], m)
        out = np.zeros_like(m)
        for g in range(hi - lo):
            keep, linv = self.kept[cid][g], self.linv[cid][g]
            if linv is None:
                continue
            if keep is None:
                out[g] = linv @ m[g]
            else:
                out[g, : keep.size] = linv @ m[g][keep]
        return out


def _quadratic_step(uu, uw, ww, c_score):
    """Smallest alpha in (0,1] where an inactive score ties the active one.

    Along r - alpha*v the active score is (1-alpha)^2 * c_score while an
    inactive group's is a quadratic in alpha; the tie condition is
    a*alpha^2 + b*alpha + c = 0 with the coefficients below.
    """
    a = ww - c_score
    b = 2.0 * (c_score - uw)
    c = uu - c_score
    best = np.inf
    lin = np.abs(a) <= 1e-14 * max(abs(c_score), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        roots_lin = -c / b
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = (-b - sq) / (2.0 * a)
        r2 = (-b + sq) / (2.0 * a)
    for roots, valid in (
        (roots_lin, lin & (np.abs(b) > 0)),
        (r1, ~lin & (disc >= 0)),
        (r2, ~lin & (disc >= 0)),
    ):
        good = valid & (roots > _ROOT_FLOOR) & (roots <= 1.0)
        if np.any(good):
            best = min(best, float(roots[good].min()))
    return best


def glars_select(train: SampleSet, cfg: SelectionConfig, basis: BasisConfig,
                 response=None, row_weights=None) -> SelectionPath:
    """Run the group selection path on a training set.

    ``response`` overrides train.u and ``row_weights`` scales every design
    row (both used by the separated-representation driver); the response is
    first centered by its (weighted) constant projection.
    """
    u = np.asarray(train.u if response is None else response, dtype=float).ravel()
    if u.shape[0] != train.nq:
        raise ValueError("response length does not match the sample set")
    w = None
    if row_weights is not None:
        w = np.asarray(row_weights, dtype=float).ravel()
        if w.shape[0] != train.nq:
            raise ValueError("row_weights length does not match the sample set")
    if train.nq < 2:
        raise ValueError("selection needs at least two samples")

    if w is None:
        r = u - u.mean()
    else:
        denom = float(w @ w)
        r = u - w * (float(w @ u) / denom) if denom > 0 else u.copy()
    unorm = float(np.linalg.norm(r))
    if unorm == 0.0:
        return SelectionPath(steps=[])

    need = max(basis.max_order, cfg.nolars + 1)
    table = univariate_table(replace(basis, max_order=need), train.xi)

    scans: list[_ClassScan] = []
    offsets: list[int] = []
    total = 0
    for card in range(1, min(cfg.ninter, train.nd) + 1):
        indices = enumerate_dense_indices(tuple(range(1, card + 1)), cfg.nolars)
        if not indices:
            continue
        groups = list(combinations(range(1, train.nd + 1), card))
        scans.append(_ClassScan(table, groups, indices, w))
        offsets.append(total)
        total += len(groups)
    if total == 0:
        return SelectionPath(steps=[])

    all_groups: list[Group] = []
    for sc in scans:
        all_groups.extend(sc.groups)
    pcounts = np.concatenate([sc.pcount for sc in scans])
    usable = pcounts > 0

    jobs = [(si, cid) for si, sc in enumerate(scans) for cid in sc._chunk_ids()]
    pool = ThreadPoolExecutor(max_workers=worker_count()) if worker_count() > 1 else None

    def projections(vecs):
        # fixed job order; the pool only reorders execution, not reduction
        if pool is None:
            return [scans[si].project(vecs, cid) for si, cid in jobs]
        return list(pool.map(lambda jc: scans[jc[0]].project(vecs, jc[1]), jobs))

    def hierarchy_mask(active_set):
        mask = np.ones(total, dtype=bool)
        if not cfg.hierarchical:
            return mask
        for gi, dims in enumerate(all_groups):
            if len(dims) == 1:
                continue
            mask[gi] = all(
                dims[:i] + dims[i + 1:] in active_set for i in range(len(dims))
            )
        return mask

    active: list[int] = []
    active_set: set[Group] = set()
    active_cols: list[np.ndarray] = []
    steps: list[PathStep] = []
    pred_count = 0
    scan_seconds = 0.0
    dof_cap = train.nq - cfg.dof_buffer

    try:
        while len(active) < cfg.max_groups:
            t0 = time.perf_counter()
            proj_r = projections(r[:, None])
            scan_seconds += time.perf_counter() - t0
            scores = np.empty(total)
            pos = 0
            for pr in proj_r:
                g = pr.shape[0]
                scores[pos:pos + g] = (pr[:, :, 0] ** 2).sum(axis=1)
                pos += g
            scores = np.where(usable, scores / np.maximum(pcounts, 1), -np.inf)
            cand = usable & hierarchy_mask(active_set)
            cand[active] = False
            if not np.any(cand):
                break
            masked = np.where(cand, scores, -np.inf)
            best_score = float(masked.max())
            if not best_score > 0.0:
                break
            ties = np.flatnonzero(masked == best_score)
            gi = int(min(ties, key=lambda t: all_groups[t]))
            p_gi = int(pcounts[gi])
            if pred_count + p_gi > dof_cap:
                break

            # materialize the entering group's columns for the direction solve
            si = int(np.searchsorted(offsets, gi, side="right")) - 1
            sc = scans[si]
            local = gi - offsets[si]
            dcol = sc._design(local, local + 1)[0]
            kpt = sc.kept[local // sc.chunk]
            if kpt is not None:
                keep = kpt[local % sc.chunk]
                if keep is not None:
                    dcol = dcol[:, keep]
            active.append(gi)
            active_set.add(all_groups[gi])
            active_cols.append(dcol)
            pred_count += p_gi

            x = np.hstack(active_cols)
            coef, *_ = np.linalg.lstsq(x, r, rcond=None)
            v = x @ coef

            t0 = time.perf_counter()
            proj = projections(np.stack([r, v], axis=1))
            scan_seconds += time.perf_counter() - t0
            in_active = np.zeros(total, dtype=bool)
            in_active[active] = True
            alpha = 1.0
            pos = 0
            for pr in proj:
                g = pr.shape[0]
                sel = cand[pos:pos + g] & ~in_active[pos:pos + g]
                if np.any(sel):
                    pk = np.maximum(pcounts[pos:pos + g][sel], 1)
                    uu = (pr[sel, :, 0] ** 2).sum(axis=1) / pk
                    uw = (pr[sel, :, 0] * pr[sel, :, 1]).sum(axis=1) / pk
                    ww = (pr[sel, :, 1] ** 2).sum(axis=1) / pk
                    alpha = min(alpha, _quadratic_step(uu, uw, ww, best_score))
                pos += g

            r = r - alpha * v
            rnorm = float(np.linalg.norm(r))
            steps.append(PathStep(all_groups[gi], float(best_score), float(alpha), rnorm))
            if rnorm <= cfg.residual_tol * unorm:
                break
            if pred_count >= dof_cap:
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    return SelectionPath(steps=steps, scan_seconds=scan_seconds)
