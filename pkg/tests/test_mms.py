"""Manufactured solution: closures vs independent finite-difference residuals.

The source expressions in chmhd.mms were produced symbolically; here each
one is re-derived numerically from the primitive closures with 8th-order
central differences at scattered points.  Agreement to 1e-6 pins both the
derivation and the transcription.
"""

import numpy as np

from chmhd import mms

W1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
W2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315,
               -1 / 560])
OFF = np.arange(-4, 5)
H = 0.01


def dx(f, x, y, t):
    return sum(w * f(x + o * H, y, t) for w, o in zip(W1, OFF)) / H


def dy(f, x, y, t):
    return sum(w * f(x, y + o * H, t) for w, o in zip(W1, OFF)) / H


def dt(f, x, y, t):
    return sum(w * f(x, y, t + o * H) for w, o in zip(W1, OFF)) / H


def lap(f, x, y, t):
    return (sum(w * f(x + o * H, y, t) for w, o in zip(W2, OFF))
            + sum(w * f(x, y + o * H, t) for w, o in zip(W2, OFF))) / H**2


def sample_points():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.08, 0.92, size=(30, 2))
    return pts[:, 0], pts[:, 1]


def test_velocity_divergence_free():
    x, y = sample_points()
    for t in (0.3, 1.0):
        div = dx(mms.exact_u, x, y, t) + dy(mms.exact_v, x, y, t)
        assert np.abs(div).max() < 1e-10


def test_chemical_potential_closure():
    x, y = sample_points()
    for t in (0.3, 1.0):
        ph = mms.exact_phi(x, y, t)
        want = -lap(mms.exact_phi, x, y, t) + ph**3 - ph
        assert np.abs(mms.exact_w(x, y, t) - want).max() < 1e-9


def test_curl_closure():
    x, y = sample_points()
    for t in (0.3, 1.0):
        want = dx(mms.exact_b2, x, y, t) - dy(mms.exact_b1, x, y, t)
        assert np.abs(mms.exact_curl_b(x, y, t) - want).max() < 1e-9


def test_phase_and_potential_have_zero_normal_derivative():
    s = np.linspace(0.05, 0.95, 7)
    t = 0.7
    for f in (mms.exact_phi, mms.exact_w):
        assert np.abs(dx(f, np.zeros_like(s), s, t)).max() < 1e-9
        assert np.abs(dx(f, np.ones_like(s), s, t)).max() < 1e-9
        assert np.abs(dy(f, s, np.zeros_like(s), t)).max() < 1e-9
        assert np.abs(dy(f, s, np.ones_like(s), t)).max() < 1e-9


def test_velocity_vanishes_on_walls():
    s = np.linspace(0.0, 1.0, 9)
    for t in (0.0, 0.9):
        for wall_x in (0.0, 1.0):
            assert np.abs(mms.exact_u(wall_x, s, t)).max() < 1e-15
            assert np.abs(mms.exact_v(wall_x, s, t)).max() < 1e-15
        for wall_y in (0.0, 1.0):
            assert np.abs(mms.exact_u(s, wall_y, t)).max() < 1e-15
            assert np.abs(mms.exact_v(s, wall_y, t)).max() < 1e-15


def test_phase_source():
    x, y = sample_points()
    for t in (0.3, 1.0):
        want = (dt(mms.exact_phi, x, y, t)
                + dx(lambda a, b, c: mms.exact_phi(a, b, c) * mms.exact_u(a, b, c),
                     x, y, t)
                + dy(lambda a, b, c: mms.exact_phi(a, b, c) * mms.exact_v(a, b, c),
                     x, y, t)
                - lap(mms.exact_w, x, y, t))
        got = mms.source_phase(x, y, t)
        assert np.abs(got - want).max() < 1e-6


def test_momentum_sources():
    x, y = sample_points()
    for t in (0.3, 1.0):
        curl = mms.exact_curl_b(x, y, t)
        want_x = (dt(mms.exact_u, x, y, t)
                  + mms.exact_u(x, y, t) * dx(mms.exact_u, x, y, t)
                  + mms.exact_v(x, y, t) * dy(mms.exact_u, x, y, t)
                  - lap(mms.exact_u, x, y, t)
                  + mms.exact_b2(x, y, t) * curl
                  + dx(mms.exact_p, x, y, t)
                  + mms.exact_phi(x, y, t) * dx(mms.exact_w, x, y, t))
        want_y = (dt(mms.exact_v, x, y, t)
                  + mms.exact_u(x, y, t) * dx(mms.exact_v, x, y, t)
                  + mms.exact_v(x, y, t) * dy(mms.exact_v, x, y, t)
                  - lap(mms.exact_v, x, y, t)
                  - mms.exact_b1(x, y, t) * curl
                  + dy(mms.exact_p, x, y, t)
                  + mms.exact_phi(x, y, t) * dy(mms.exact_w, x, y, t))
        assert np.abs(mms.source_momentum_x(x, y, t) - want_x).max() < 1e-6
        assert np.abs(mms.source_momentum_y(x, y, t) - want_y).max() < 1e-6


def test_induction_sources():
    x, y = sample_points()

    def zeta(a, b, c):
        return (mms.exact_u(a, b, c) * mms.exact_b2(a, b, c)
                - mms.exact_v(a, b, c) * mms.exact_b1(a, b, c))

    for t in (0.3, 1.0):
        want_x = (dt(mms.exact_b1, x, y, t) + dy(mms.exact_curl_b, x, y, t)
                  - dy(zeta, x, y, t))
        want_y = (dt(mms.exact_b2, x, y, t) - dx(mms.exact_curl_b, x, y, t)
                  + dx(zeta, x, y, t))
        assert np.abs(mms.source_induction_x(x, y, t) - want_x).max() < 1e-6
        assert np.abs(mms.source_induction_y(x, y, t) - want_y).max() < 1e-6


def test_staggered_sampling_shapes():
    from chmhd.grid import GridSpec
    g = GridSpec(8, 6)
    assert mms.at_cells(mms.exact_phi, g, 0.5).shape == (8, 6)
    assert mms.at_xfaces(mms.exact_u, g, 0.5).shape == (9, 6)
    assert mms.at_yfaces(mms.exact_v, g, 0.5).shape == (8, 7)
    assert mms.at_xfaces(mms.exact_u, g, 0.5, count=8).shape == (8, 6)
