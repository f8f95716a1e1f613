import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spectra.windows import (
    IntervalUnion,
    WindowError,
    _hutchinson_intervals,
    covering_profile_intervals,
    hutchinson_cloud,
    rho_tilde_w1_series,
    render_windows,
    solve_intervals,
    tiling_lattice,
)

TAU = (1 + 5**0.5) / 2
SIGMA = 1 - TAU

INTERVAL_FIXTURES = ["fibonacci", "twisted_fib_ext", "rho_prime", "rho_tilde"]


def close(W, intervals, tol=1e-10):
    return len(W.intervals) == len(intervals) and all(
        abs(a - c) < tol and abs(b - d) < tol for (a, b), (c, d) in zip(W.intervals, intervals)
    )


def test_interval_union_merges_touching():
    U = IntervalUnion.build([(2, 3), (0, 1), (1, 2 - 1e-13)])
    assert U.intervals == ((0, 3),)
    U = IntervalUnion.build([(0, 1), (1.5, 2)])
    assert U.length == pytest.approx(1.5)
    assert U.hull == (0, 2)


def test_interval_union_ft_at_zero_is_length():
    U = IntervalUnion.build([(0, 1), (1.5, 2)])
    assert U.ft(0.0) == pytest.approx(1.5)


def test_hausdorff():
    A = IntervalUnion.build([(0, 1)])
    B = IntervalUnion.build([(0, 0.4), (0.6, 1)])
    assert A.hausdorff(B) == pytest.approx(0.1)
    assert A.hausdorff(A) == 0


def test_non_contractive_rejected():
    with pytest.raises(WindowError):
        solve_intervals([[np.zeros(1)]], 1.2, [1.0])


def test_fibonacci_windows(win_of):
    W = win_of("fibonacci").windows
    assert close(W[0], [(TAU - 2, TAU - 1)])
    assert close(W[1], [(-1, TAU - 2)])
    assert [x.to_str() for x in W[0].exact[0]] == ["L - 2", "L - 1"]


def test_fibonacci_volumes(win_of):
    sol = win_of("fibonacci")
    assert sol.volumes == pytest.approx([1, TAU - 1], abs=1e-12)
    assert sol.eta == pytest.approx(TAU, abs=1e-12)
    assert sol.covering.degree == 1
    assert sol.covering.constant


def test_twisted_fib_ext_windows(win_of, sys_of):
    sol = win_of("twisted_fib_ext")
    letters = sys_of("twisted_fib_ext").rule.letters
    W = dict(zip(letters, sol.windows))
    assert close(W["a"], [(TAU - 2, TAU - 1)]) and close(W["A"], [(TAU - 2, TAU - 1)])
    assert close(W["b"], [(-1, TAU - 2)]) and close(W["B"], [(-1, TAU - 2)])
    prof = sol.covering
    assert prof.constant and prof.degree == 2
    assert len(prof.pieces) == 1
    a, b, level = prof.pieces[0]
    assert (a, b, level) == (pytest.approx(-1, abs=1e-12), pytest.approx(TAU - 1, abs=1e-12), 2)


def test_rho_prime_two_level_profile(win_of):
    sol = win_of("rho_prime")
    prof = sol.covering
    assert not prof.constant
    assert prof.levels.keys() == {1, 2}
    assert prof.levels[1] == pytest.approx(TAU - 1, abs=1e-10)
    assert prof.levels[2] == pytest.approx(1.0, abs=1e-10)
    assert [(round(a, 9), round(b, 9), lv) for a, b, lv in prof.pieces] == [
        (round(-1, 9), round(TAU - 2, 9), 1),
        (round(TAU - 2, 9), round(TAU - 1, 9), 2),
    ]
    bounds = sol.meta["level_boundaries"]
    assert [x.to_str() for x in bounds] == ["-1", "L - 2", "L - 1"]


def test_rho_tilde_unions(win_of):
    W = win_of("rho_tilde").windows
    assert close(W[0].union(W[1]), [(-SIGMA**2, -SIGMA)])
    assert close(W[2].union(W[3]), [(-1, -SIGMA**2)])
    assert win_of("rho_tilde").covering.degree == 1


def test_rho_tilde_series_matches_w1(win_of):
    W1 = win_of("rho_tilde").windows[1]
    series, tail = rho_tilde_w1_series(SIGMA)
    assert tail < 1e-13
    assert abs(series.length - W1.length) < 1e-10
    assert series.hausdorff(W1) < 1e-10


@pytest.mark.parametrize("name", INTERVAL_FIXTURES)
def test_hutchinson_self_consistency(sys_of, win_of, name):
    s, sol = sys_of(name), win_of(name)
    again = _hutchinson_intervals(sol.windows, s.Tstar, s.emb.Q[0, 0])
    assert max(a.hausdorff(b) for a, b in zip(sol.windows, again)) < 2e-12


@pytest.mark.parametrize("name", INTERVAL_FIXTURES)
def test_volume_proportionality_exact(win_of, name):
    sol = win_of(name)
    assert np.all(sol.volumes > 0)
    assert np.max(sol.volume_ratio_error()) < 1e-8


@pytest.mark.parametrize("name", INTERVAL_FIXTURES)
def test_total_measure_identity(win_of, name):
    sol = win_of(name)
    assert sol.volumes.sum() == pytest.approx(sol.covering.integral(), abs=1e-10)
    assert all(1 <= lv <= sol.N for lv in sol.covering.levels)


def test_covering_profile_simple():
    prof = covering_profile_intervals([IntervalUnion.build([(0, 2)]), IntervalUnion.build([(1, 3)])])
    assert prof.pieces == ((0, 1, 1), (1, 2, 2), (2, 3, 1))
    assert prof.levels == {1: 2, 2: 1}
    assert not prof.constant


@pytest.mark.parametrize("name", ["tribonacci", "twisted_tribonacci"])
def test_tribonacci_clouds(sys_of, win_of, name):
    s, sol = sys_of(name), win_of(name)
    assert sol.kind == "cloud"
    sizes = np.array([len(c) for c in sol.windows])
    assert np.all(sizes >= 20000)
    if name == "tribonacci":
        for c in sol.windows:
            assert np.all(np.abs(c) <= 1.5)
    assert np.max(np.abs(sizes / sizes.sum() / s.pf.v - 1)) < 0.02


@pytest.mark.parametrize("name", ["tribonacci", "twisted_tribonacci", "pisa4"])
def test_cloud_volumes_within_three_sigma(win_of, name):
    sol = win_of(name)
    assert sol.meta["method"] == "periodic"
    assert np.all(sol.volume_ratio_error() < 3 * sol.meta["ratio_sigma"])
    assert sol.covering.degree == 1


def test_tiling_lattice_covolume(sys_of, win_of):
    # the window union tiles with covolume dens * |det B|
    for name in ("tribonacci", "pisa4"):
        s = sys_of(name)
        G = tiling_lattice(s)
        assert abs(np.linalg.det(G)) == pytest.approx(s.density * abs(np.linalg.det(s.emb.B)), rel=1e-10)
    assert tiling_lattice(sys_of("twisted_fib_ext")) is None


def test_hutchinson_one_step_from_origin(sys_of):
    s = sys_of("tribonacci")
    out = hutchinson_cloud([np.zeros((1, 2))] * 3, s.Tstar, s.emb.Q)
    assert [len(c) for c in out] == s.M.sum(axis=1).tolist()
    for i in range(3):
        expected = np.vstack([np.asarray(s.Tstar[i][j]).reshape(-1, 2) for j in range(3)])
        assert np.allclose(np.sort(out[i], axis=0), np.sort(expected, axis=0))


@pytest.mark.parametrize("name", ["rho_tilde", "tribonacci"])
def test_render_is_valid_svg(win_of, name):
    sol = win_of(name)
    svg = render_windows(sol)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    groups = [g for g in root.iter() if g.tag.split("}")[-1] == "g"]
    assert len(groups) == sol.N
    assert render_windows(sol) == svg
    assert render_windows(sol, {}) == svg
