import numpy as np
import pytest

from lmip.errors import InvalidConfig, LineSearchFail
from lmip.globalized import (
    GlobalConfig,
    HistoryWindow,
    g_lmm_ip_solve,
    lm_direction_filter,
    merit_and_gradient,
    nonmonotone_search,
    preset,
    projected_gradient_direction,
)
from lmip.local import ThetaSchedule
from lmip.problems import NlsProblem, desk_suite, get_desk_problem
from lmip.sets import BoxSet, Projector, SimplexSet
from lmip.trace import Status

from oracles import central_difference_jacobian


def identity_problem(n=2, lower=-10.0, upper=10.0, shift=0.0):
    return NlsProblem(
        residual=lambda x: np.asarray(x, dtype=float) - shift,
        jacobian=lambda x: np.eye(n),
        feasible_set=BoxSet(np.full(n, lower), np.full(n, upper)),
        n=n,
        m=n,
    )


def test_presets():
    box = preset("box41")
    assert (box.M, box.eta1, box.eta2, box.eta3, box.gamma, box.beta) == (
        1, 1e-4, 1e-2, 1e10, 1e-3, 0.5)
    assert box.theta.is_zero and box.tol_F == 1e-6
    spec = preset("spectra42")
    assert (spec.M, spec.eta1, spec.eta2, spec.eta3, spec.gamma, spec.beta) == (
        1, 1e-2, 1e-3, 1e6, 1e-3, 0.5)
    assert spec.theta(3) == 0.9 and spec.tol_F == 1e-2 and spec.projection == "fwp"
    assert preset("box41", M=15).M == 15
    with pytest.raises(InvalidConfig):
        preset("nope")


@pytest.mark.parametrize("bad", [dict(M=-1), dict(eta3=1e-3), dict(gamma=1.0),
                                 dict(beta=0.0), dict(eta1=0.0), dict(tol_F=0.0)])
def test_config_validation(bad):
    with pytest.raises(InvalidConfig):
        GlobalConfig(**bad)


def test_merit_examples():
    f, g = merit_and_gradient(identity_problem(), np.array([3.0, 4.0]))
    assert f == 12.5
    np.testing.assert_array_equal(g, [3.0, 4.0])
    f, g = merit_and_gradient(identity_problem(shift=1.5), np.array([1.5, 1.5]))
    assert f == 0.0 and not np.any(g)

    p = NlsProblem(lambda x: np.array([x[0] ** 2, x[1]]),
                   lambda x: np.diag([2 * x[0], 1.0]), BoxSet([-5, -5], [5, 5]), 2, 2)
    f, g = merit_and_gradient(p, np.array([1.0, 2.0]))
    assert f == 2.5
    np.testing.assert_allclose(g, [2.0, 2.0])

    def merit(x):
        return np.array([0.5 * np.sum(p.residual(x) ** 2)])

    fd = central_difference_jacobian(merit, np.array([1.0, 2.0]))[0]
    np.testing.assert_allclose(g, fd, rtol=1e-8)


def test_filter_examples():
    cfg = preset("box41")
    d = lm_direction_filter(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), cfg)
    np.testing.assert_array_equal(d, [-1.0, 0.0])
    assert lm_direction_filter(np.array([1.0, 0.0]), np.zeros(2), cfg) is None
    assert lm_direction_filter(np.array([1.0, 0.0]), np.array([0.0, 1.0]), cfg) is None


def test_filter_flips_ascent_direction():
    cfg = preset("box41")
    g = np.array([1.0, 2.0])
    d = lm_direction_filter(g, np.array([0.5, 0.5]), cfg)
    np.testing.assert_array_equal(d, [-0.5, -0.5])
    assert g @ d == -abs(g @ np.array([0.5, 0.5]))


def test_filter_length_bounds():
    cfg = GlobalConfig(eta2=0.5, eta3=2.0)
    g = np.array([1.0, 0.0])
    assert lm_direction_filter(g, np.array([-0.1, 0.0]), cfg) is None
    assert lm_direction_filter(g, np.array([-3.0, 0.0]), cfg) is None
    assert lm_direction_filter(g, np.array([-1.0, 0.0]), cfg) is not None


def test_projected_gradient_examples():
    box = BoxSet(np.zeros(2), np.ones(2))
    proj = Projector(box)
    x = np.array([0.5, 0.5])
    d, _ = projected_gradient_direction(x, np.array([0.1, -0.2]), 0.0, proj)
    np.testing.assert_allclose(d, [-0.1, 0.2])
    d, _ = projected_gradient_direction(np.array([1.0, 1.0]), np.array([-1.0, -1.0]), 0.0, proj)
    np.testing.assert_array_equal(d, [0.0, 0.0])
    d, _ = projected_gradient_direction(np.array([1.0, 0.5]), np.array([-1.0, 0.0]), 0.0, proj)
    np.testing.assert_array_equal(d, [0.0, 0.0])


def test_projected_gradient_inexact_tolerance_and_norm_bound():
    rng = np.random.default_rng(6)
    C = SimplexSet(6)
    proj = Projector(C, mode="condg", condg_budget=100_000)
    theta = 0.6
    for _ in range(30):
        x = C.project(rng.standard_normal(6))
        g = rng.standard_normal(6)
        d, res = projected_gradient_direction(x, g, theta, proj)
        y = x + d
        assert C.contains(y)
        assert res.gap <= theta**2 * float(d @ d) + 1e-15
        assert np.linalg.norm(d) <= np.linalg.norm(g) / (1 - theta) + 1e-8


def quadratic_problem():
    return NlsProblem(lambda x: np.array([x[0]]), lambda x: np.eye(1),
                      BoxSet([-5.0], [5.0]), 1, 1)


def test_search_accepts_full_step():
    cfg = GlobalConfig(gamma=1e-3, beta=0.5)
    window = HistoryWindow(0, 0.5)
    ls = nonmonotone_search(quadratic_problem(), np.array([1.0]), np.array([-1.0]),
                            window, cfg, slope=-1.0)
    assert ls.alpha == 1.0 and ls.backtracks == 0 and ls.f == 0.0


def test_search_backtracks_quartic():
    # F = sqrt(2) x^2, so f = x^4; slope at x=1 along d=-3 is -12
    p = NlsProblem(lambda x: np.array([np.sqrt(2.0) * x[0] ** 2]),
                   lambda x: np.array([[2 * np.sqrt(2.0) * x[0]]]), BoxSet([-5.0], [5.0]), 1, 1)
    f, g = merit_and_gradient(p, np.array([1.0]))
    assert f == pytest.approx(1.0) and g[0] == pytest.approx(4.0)
    cfg = GlobalConfig(gamma=0.5, beta=0.5)
    window = HistoryWindow(0, f)
    d = np.array([-3.0])
    ls = nonmonotone_search(p, np.array([1.0]), d, window, cfg, slope=float(g @ d))
    # alpha=1: 16 > 1-6; 0.5: 0.0625 > 1-3; 0.25: 0.0039 > 1-1.5; 0.125: 0.2 <= 0.25
    assert ls.alpha == 0.125 and ls.backtracks == 3


def test_search_failure():
    cfg = GlobalConfig(max_backtracks=3)
    window = HistoryWindow(0, 0.5)
    with pytest.raises(LineSearchFail):
        nonmonotone_search(quadratic_problem(), np.array([1.0]), np.array([1.0]),
                           window, cfg, slope=-1.0)
    with pytest.raises(ValueError):
        nonmonotone_search(quadratic_problem(), np.array([1.0]), np.array([1.0]),
                           window, cfg, slope=1.0)


def test_history_window():
    w = HistoryWindow(2, 5.0)
    assert w.m == 0 and w.watermark == 5.0
    w.push(3.0)
    w.push(4.0)
    assert w.m == 2 and w.watermark == 5.0
    w.push(1.0)
    assert w.watermark == 4.0 and w.m == 2
    w0 = HistoryWindow(0, 2.0)
    w0.push(1.5)
    assert w0.watermark == 1.5 and w0.m == 0


def test_solved_start():
    res = g_lmm_ip_solve(identity_problem(), np.zeros(2))
    assert res.status is Status.CONVERGED and res.n_iter == 0


def test_d3_golden():
    p = get_desk_problem("D3")
    res = g_lmm_ip_solve(p, p.start, preset("box41"))
    assert res.status is Status.CONVERGED and res.normF <= 1e-6
    np.testing.assert_allclose(res.x, p.solutions[0], atol=1e-6)


@pytest.mark.parametrize("M", [0, 1, 15])
def test_desk_suite_invariants(M):
    for p in desk_suite():
        res = g_lmm_ip_solve(p, p.start, preset("box41", M=M))
        assert res.status is Status.CONVERGED, p.name
        wm = res.diagnostics["watermark_seq"]
        assert all(b <= a for a, b in zip(wm, wm[1:]))
        assert all(s < 0 for s in res.diagnostics["dir_deriv"])
        assert res.n_fev == 1 + res.n_iter + sum(t.backtracks for t in res.trace)
        if M == 0:
            assert wm == [t.f for t in res.trace]


def test_stationary_point_detected():
    # F(x) = x^2 + 1 has no root; on [0, 2] the merit is stationary at 0
    p = NlsProblem(lambda x: np.array([x[0] ** 2 + 1.0]), lambda x: np.array([[2 * x[0]]]),
                   BoxSet([0.0], [2.0]), 1, 1)
    res = g_lmm_ip_solve(p, np.array([1.5]), preset("box41"))
    assert res.status is Status.STATIONARY
    assert res.x[0] == pytest.approx(0.0, abs=1e-8)


def cubic_problem():
    return NlsProblem(lambda x: np.array([x[0] ** 3 - 1.0, x[1] - 0.5]),
                      lambda x: np.array([[3 * x[0] ** 2, 0.0], [0.0, 1.0]]),
                      BoxSet([-2.0, 0.0], [2.0, 1.0]), 2, 2)


def test_critical_point_of_merit_is_stationary():
    # grad f = J^T F vanishes at x1 = 0 although F does not
    res = g_lmm_ip_solve(cubic_problem(), np.array([0.0, 0.5]), preset("box41"))
    assert res.status is Status.STATIONARY and res.n_iter == 0


def test_projected_gradient_steps_used():
    # a tight upper length bound rejects the long early LM steps
    res = g_lmm_ip_solve(cubic_problem(), np.array([0.2, 1.0]), preset("box41", eta3=0.3))
    kinds = [t.kind for t in res.trace]
    assert "pg" in kinds and "lm" in kinds
    assert res.status is Status.CONVERGED
    for rec, dn, gn in zip(res.trace[1:], res.diagnostics["d_norm"],
                           res.diagnostics["grad_norm"]):
        if rec.kind == "pg":
            assert dn <= gn + 1e-8


def test_inexact_theta_with_condg_on_desk():
    for p in desk_suite():
        res = g_lmm_ip_solve(p, p.start, preset("box41", theta=ThetaSchedule(0.5),
                                                projection="condg"))
        assert res.status is Status.CONVERGED, p.name
        assert res.normF <= 1e-6
