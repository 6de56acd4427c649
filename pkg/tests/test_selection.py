import numpy as np
import pytest

from hdmrfit.basis import BasisConfig, univariate_table
from hdmrfit.data import SampleSet, rng_stream
from hdmrfit.selection import (
    SelectionConfig,
    build_group_dictionary,
    glars_select,
    group_correlation,
    save_path,
    worker_count,
)

B = BasisConfig(lo=-1.0, hi=1.0, max_order=4)


def uniform_set(nq, nd, seed=0, lo=-1.0, hi=1.0):
    g = rng_stream(seed, 1000)
    xi = g.uniform(lo, hi, size=(nq, nd))
    return xi, univariate_table(B, xi)


def as_set(xi, u):
    return SampleSet(np.empty((xi.shape[0], 0)), xi, u)


def test_pure_interaction_enters_first():
    xi, tab = uniform_set(500, 4)
    u = tab[:, 0, 1] * tab[:, 1, 1]
    path = glars_select(as_set(xi, u), SelectionConfig(nolars=3, ninter=2), B)
    assert path.steps[0].dims == (1, 2)


def test_additive_target_singletons_lead():
    xi, tab = uniform_set(600, 5)
    u = 3 * tab[:, 0, 1] + tab[:, 1, 1]
    path = glars_select(as_set(xi, u),
                        SelectionConfig(nolars=3, ninter=2, max_groups=4), B)
    assert path.steps[0].dims == (1,)
    assert (2,) in [s.dims for s in path.steps[:2]]


def test_residual_norms_non_increasing():
    xi, tab = uniform_set(400, 5, seed=3)
    g = rng_stream(3, 1001)
    u = tab[:, 0, 1] + 0.5 * tab[:, 2, 1] * tab[:, 3, 1] + 0.05 * g.standard_normal(400)
    path = glars_select(as_set(xi, u),
                        SelectionConfig(nolars=3, ninter=2, max_groups=8), B)
    norms = [s.residual_norm_after for s in path.steps]
    assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_constant_response_gives_empty_path():
    xi, _ = uniform_set(100, 3)
    path = glars_select(as_set(xi, np.full(100, 7.0)),
                        SelectionConfig(nolars=2, ninter=2), B)
    assert len(path) == 0


def test_path_groups_are_distinct():
    xi, tab = uniform_set(500, 4, seed=5)
    g = rng_stream(5, 1002)
    u = tab[:, 0, 1] + tab[:, 1, 2] + 0.1 * g.standard_normal(500)
    path = glars_select(as_set(xi, u),
                        SelectionConfig(nolars=3, ninter=2, max_groups=10), B)
    dims = [s.dims for s in path.steps]
    assert len(dims) == len(set(dims))


def test_permutation_equivariance():
    xi, tab = uniform_set(400, 4, seed=7)
    u = 2 * tab[:, 0, 1] + tab[:, 2, 1] * tab[:, 3, 1]
    cfg = SelectionConfig(nolars=3, ninter=2, max_groups=3)
    path = glars_select(as_set(xi, u), cfg, B)
    # swap dims 1 and 2: same path with labels swapped
    perm = [1, 0, 2, 3]
    path_p = glars_select(as_set(xi[:, perm], u), cfg, B)
    relabel = {1: 2, 2: 1, 3: 3, 4: 4}
    expect = [tuple(sorted(relabel[d] for d in s.dims)) for s in path.steps]
    assert [s.dims for s in path_p.steps] == expect
    for a, b in zip(path.steps, path_p.steps):
        assert a.entry_score == pytest.approx(b.entry_score, rel=1e-10)


def test_equal_scores_at_entry():
    # after the first step the two symmetric groups must tie within 1e-8
    xi, tab = uniform_set(2000, 2, seed=11)
    u = tab[:, 0, 1] + tab[:, 1, 1]
    cfg = SelectionConfig(nolars=1, ninter=1, max_groups=2)
    path = glars_select(as_set(xi, u), cfg, B)
    assert {path.steps[0].dims, path.steps[1].dims} == {(1,), (2,)}
    # entry scores of both singletons agree at the second step by the
    # equal-correlation construction
    assert path.steps[1].entry_score <= path.steps[0].entry_score + 1e-10


def test_lexicographic_tie_break():
    # perfectly symmetric response: dim 1 must enter before dim 2
    g = rng_stream(13, 1003)
    a = g.uniform(-1, 1, size=(800,))
    xi = np.column_stack([a, a])  # identical columns -> exact tie
    tab = univariate_table(B, xi)
    u = tab[:, 0, 1]
    path = glars_select(as_set(xi, u), SelectionConfig(nolars=2, ninter=1), B)
    assert path.steps[0].dims == (1,)


def test_dof_budget_respected():
    xi, tab = uniform_set(25, 6, seed=17)
    g = rng_stream(17, 1004)
    u = tab[:, 0, 1] + 0.3 * g.standard_normal(25)
    cfg = SelectionConfig(nolars=3, ninter=2, max_groups=50, dof_buffer=1)
    path = glars_select(as_set(xi, u), cfg, B)
    pred = sum(len(_indices(s.dims)) for s in path.steps)
    assert pred <= 25 - 1


def _indices(dims):
    from hdmrfit.model import enumerate_dense_indices
    return enumerate_dense_indices(dims, 3)


def test_max_groups_cap():
    xi, _ = uniform_set(900, 6, seed=19)
    g = rng_stream(19, 1005)
    u = g.standard_normal(900)
    path = glars_select(as_set(xi, u),
                        SelectionConfig(nolars=2, ninter=2, max_groups=4), B)
    assert len(path) <= 4


def test_hierarchical_filter():
    xi, tab = uniform_set(600, 4, seed=23)
    u = tab[:, 0, 1] * tab[:, 1, 1]
    cfg = SelectionConfig(nolars=3, ninter=2, max_groups=5, hierarchical=True)
    path = glars_select(as_set(xi, u), cfg, B)
    seen = set()
    for s in path.steps:
        if len(s.dims) == 2:
            assert all((d,) in seen for d in s.dims)
        seen.add(s.dims)


def test_group_dictionary_classes():
    cfg = SelectionConfig(nolars=3, ninter=2)
    pairs = list(build_group_dictionary(5, cfg))
    cards = {len(dims) for dims, _ in pairs}
    assert cards == {1, 2}
    n1 = sum(1 for dims, _ in pairs if len(dims) == 1)
    n2 = sum(1 for dims, _ in pairs if len(dims) == 2)
    assert (n1, n2) == (5, 10)
    # every group carries the same per-class predictor count
    p1 = {len(idx) for dims, idx in pairs if len(dims) == 1}
    assert p1 == {3}


def test_group_correlation_matches_direct_formula():
    xi, tab = uniform_set(300, 3, seed=29)
    r = tab[:, 0, 1] + 0.2 * tab[:, 1, 1]
    design = tab[:, 0, 1:4]  # orthonormal-ish columns of dim 1
    got = group_correlation((1,), r, design)
    assert got == pytest.approx(float(np.sum((design.T @ r) ** 2)) / 3, rel=1e-12)
    with pytest.raises(ValueError):
        group_correlation((1,), r, design[:, :0])


def test_selected_groups_independent_of_worker_count(monkeypatch):
    xi, tab = uniform_set(500, 6, seed=31)
    g = rng_stream(31, 1006)
    u = tab[:, 0, 1] + tab[:, 2, 1] * tab[:, 4, 1] + 0.02 * g.standard_normal(500)
    cfg = SelectionConfig(nolars=3, ninter=2, max_groups=6)
    monkeypatch.setenv("HDMR_THREADS", "1")
    p1 = glars_select(as_set(xi, u), cfg, B)
    monkeypatch.setenv("HDMR_THREADS", "3")
    p3 = glars_select(as_set(xi, u), cfg, B)
    assert [s.dims for s in p1.steps] == [s.dims for s in p3.steps]
    for a, b in zip(p1.steps, p3.steps):
        assert a.entry_score == b.entry_score  # bit-exact
        assert a.residual_norm_after == b.residual_norm_after


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("HDMR_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("HDMR_THREADS", "5")
    assert worker_count() == 5
    monkeypatch.setenv("HDMR_THREADS", "0")
    assert worker_count() == 1


def test_save_path_csv(tmp_path):
    xi, tab = uniform_set(300, 3, seed=37)
    u = tab[:, 0, 1] + tab[:, 1, 1]
    path = glars_select(as_set(xi, u),
                        SelectionConfig(nolars=2, ninter=2, max_groups=3), B)
    f = tmp_path / "path.csv"
    save_path(path, f)
    lines = f.read_text().strip().splitlines()
    assert lines[0] == "step,dims,entry_score,residual_norm"
    assert len(lines) == len(path) + 1
    first = lines[1].split(",")
    assert first[1] == ";".join(str(d) for d in path.steps[0].dims)


def test_scan_seconds_populated():
    xi, tab = uniform_set(300, 4, seed=41)
    u = tab[:, 0, 1]
    path = glars_select(as_set(xi, u),
                        SelectionConfig(nolars=2, ninter=2, max_groups=2), B)
    assert path.scan_seconds > 0
