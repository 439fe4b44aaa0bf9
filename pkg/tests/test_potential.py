"""Well potential: derivative consistency, smoothness, curvature bound."""

import numpy as np
import pytest

from chmhd.potential import (
    ModelParams,
    conductivity_blend,
    dwell,
    dwell_bound,
    free_energy,
    ieq_aux,
    ieq_slope,
    poly_aux,
)


def fd_derivative(fun, x, h=1e-6):
    return (fun(x + h) - fun(x - h)) / (2 * h)


@pytest.mark.parametrize("extended", [True, False])
@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_dwell_is_derivative_of_free_energy(extended, eps):
    x = np.linspace(-2.5, 2.5, 401)
    got = dwell(x, eps, extended)
    want = fd_derivative(lambda u: free_energy(u, eps, extended), x)
    assert np.allclose(got, want, rtol=1e-6, atol=1e-4 / eps)


def test_extended_well_matches_quartic_on_core():
    x = np.linspace(-1.0, 1.0, 101)
    assert np.array_equal(free_energy(x, 0.5, True), free_energy(x, 0.5, False))
    assert np.array_equal(dwell(x, 0.5, True), dwell(x, 0.5, False))


def test_extended_well_c1_at_transition():
    eps = 0.3
    for s in (1.0, -1.0):
        lo, hi = s - 1e-9, s + 1e-9
        assert free_energy(hi, eps) == pytest.approx(free_energy(lo, eps), abs=1e-8)
        assert dwell(hi, eps) == pytest.approx(dwell(lo, eps), abs=1e-7)


def test_extended_curvature_bounded():
    eps = 0.05
    x = np.linspace(-4, 4, 2001)
    curv = fd_derivative(lambda u: dwell(u, eps), x, h=1e-5)
    assert np.abs(curv).max() <= dwell_bound(eps) * (1 + 1e-6)
    # and the bound is attained on the core boundary
    assert np.abs(curv).max() >= dwell_bound(eps) * (1 - 1e-3)


def test_quartic_curvature_unbounded_beyond_core():
    # motivates the extension: pure quartic curvature exceeds 2/eps outside
    eps = 0.1
    curv = fd_derivative(lambda u: dwell(u, eps, extended=False), np.r_[2.0], h=1e-5)
    assert curv[0] > dwell_bound(eps)


def test_ieq_aux_positive_and_consistent():
    eps = 0.2
    x = np.linspace(-3, 3, 301)
    n = ieq_aux(x, eps)
    assert np.all(n >= 1.0 - 1e-12)          # offset keeps the root real
    assert np.allclose(n**2, free_energy(x, eps, extended=False) + 1.0)
    # slope relation: d/dphi sqrt(F + c0) = ieq_slope / 2
    got = fd_derivative(lambda u: ieq_aux(u, eps), x)
    assert np.allclose(got, 0.5 * ieq_slope(x, eps), rtol=1e-5, atol=1e-5)
    assert ieq_slope(1.0, eps) == pytest.approx(0.0, abs=1e-14)


def test_poly_aux():
    assert np.allclose(poly_aux(np.r_[-1.0, 0.0, 1.0, 2.0]), [0.0, -1.0, 0.0, 3.0])


def test_conductivity_blend_endpoints_and_clamp():
    assert conductivity_blend(1.0, 300.0, 400.0) == pytest.approx(300.0)
    assert conductivity_blend(-1.0, 300.0, 400.0) == pytest.approx(400.0)
    assert conductivity_blend(1.7, 300.0, 400.0) == pytest.approx(300.0)
    assert conductivity_blend(0.0, 300.0, 400.0) == pytest.approx(350.0)


def test_model_params_validation_and_conductivity():
    with pytest.raises(ValueError):
        ModelParams(epsilon=-1.0)
    with pytest.raises(ValueError):
        ModelParams(sigma=(300.0, 0.0))
    p = ModelParams(sigma=(300.0, 400.0))
    assert p.conductivity(0.0) == pytest.approx(350.0)
    q = ModelParams(sigma=2.0)
    assert np.allclose(q.conductivity(np.zeros(3)), 2.0)
