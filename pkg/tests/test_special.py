import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from persistlab.special import (
    PHParams,
    c_ph,
    c_ph_array,
    c_ph_bounds,
    c_ph_envelope,
    c_ph_envelope_constant,
    d_alpha_rho,
    f_ph,
    psi,
    selberg_f11,
)
from oracles import (
    c_0H_closed,
    c_ph_oracle,
    d_alpha_bruteforce,
    f_0H_closed,
    f_ph_oracle,
    f_ph_unit,
    fgn_rho,
)

P_GRID = (-0.6, -0.25, 0.0, 0.5, 1.0, 2.0, 5.0)
H_GRID = tuple(np.linspace(0.55, 0.95, 7))
PH_PAIRS = [(p, float(H)) for p in P_GRID for H in H_GRID if p + H > 0]


def test_params_domain():
    with pytest.raises(ValueError):
        PHParams(0.0, 0.5)
    with pytest.raises(ValueError):
        PHParams(-0.8, 0.7)
    PHParams(-0.6, 0.65)


@pytest.mark.parametrize("p,H", PH_PAIRS)
def test_unit_square_matches_closed_form_and_oracle(p, H):
    exact = selberg_f11((p, H))
    got = f_ph((p, H), 1.0, 1.0).value
    assert got == pytest.approx(exact, rel=1e-6)
    assert f_ph_unit(p, H) == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("H", [0.55, 0.7, 0.95])
@pytest.mark.parametrize("c", [1.0, 1.001, 1.3, 2.0, 10.0, 1e3, 1e7, 1e12])
def test_p0_against_closed_form(H, c):
    assert f_ph((0.0, H), 1.0, c).value == pytest.approx(f_0H_closed(H, c), rel=1e-9)


@pytest.mark.parametrize("p,H", [(0.5, 0.55), (0.5, 0.7), (1.0, 0.9), (2.0, 0.6), (5.0, 0.75)])
@pytest.mark.parametrize("c", [1.05, 1.7, 3.0, 25.0])
def test_positive_p_against_tensor_oracle(p, H, c):
    assert f_ph((p, H), 1.0, c).value == pytest.approx(f_ph_oracle(p, H, 1.0, c), rel=1e-8)


@given(p=st.floats(-0.4, 3.0), H=st.floats(0.55, 0.95), a=st.floats(0.05, 20.0),
       b=st.floats(0.05, 20.0), lam=st.floats(0.1, 10.0))
def test_scaling(p, H, a, b, lam):
    pr = PHParams(p, H)
    lhs = f_ph(pr, lam * a, lam * b).value
    rhs = lam ** (2 * p + 2 * H) * f_ph(pr, a, b).value
    assert lhs == pytest.approx(rhs, rel=1e-6)


@given(p=st.floats(-0.4, 3.0), H=st.floats(0.55, 0.95), a=st.floats(0.05, 20.0),
       b=st.floats(0.05, 20.0))
def test_symmetry(p, H, a, b):
    pr = PHParams(p, H)
    fa, fb = f_ph(pr, a, b), f_ph(pr, b, a)
    assert abs(fa.value - fb.value) <= fa.abs_error_estimate + fb.abs_error_estimate + 1e-14


@pytest.mark.parametrize("p,H", [(-0.25, 0.6), (0.0, 0.75), (2.0, 0.9)])
def test_monotone_in_b(p, H):
    bs = np.geomspace(1.0, 1e4, 60)
    vals = [f_ph((p, H), 1.0, b).value for b in bs]
    assert np.all(np.diff(vals) > 0)


def test_selberg_mode_and_errors():
    pr = PHParams(0.5, 0.7)
    a = f_ph(pr, 1.0, 4.0, unit_square="selberg").value
    b = f_ph(pr, 1.0, 4.0).value
    assert a == pytest.approx(b, rel=1e-9)
    assert f_ph(pr, 1.0, 4.0).abs_error_estimate < 1e-8 * b
    with pytest.raises(ValueError):
        f_ph(pr, 0.0, 1.0)
    with pytest.raises(ValueError):
        f_ph(pr, 1.0, 1.0, unit_square="nope")


def test_psi():
    assert psi(0.0, 3.0) == pytest.approx(2.0)
    assert psi(1.0, 3.0) == pytest.approx(4.0)
    assert psi(-1.0, math.e**2) == pytest.approx(2.0, rel=1e-12)
    # continuity through the removable point
    assert psi(-1.0 + 1e-9, 5.0) == pytest.approx(math.log(5.0), rel=1e-8)
    assert psi(-1.0 - 1e-7, 5.0) == pytest.approx(psi(-1.0 - 2e-7, 5.0), rel=1e-6)
    with pytest.raises(ValueError):
        psi(0.5, 0.5)


@pytest.mark.parametrize("H", [0.55, 0.75, 0.95])
def test_c_ph_p0_closed_form(H):
    for tau in (0.01, 0.3, 1.0, 4.0, 12.0):
        assert c_ph((0.0, H), tau) == pytest.approx(c_0H_closed(H, tau), rel=1e-9)


@pytest.mark.parametrize("p,H", [(0.5, 0.55), (1.0, 0.8)])
def test_c_ph_oracle(p, H):
    for tau in (0.1, 1.0, 3.0):
        assert c_ph((p, H), tau) == pytest.approx(c_ph_oracle(p, H, tau), rel=1e-8)


def test_c_ph_array_and_symmetry():
    pr = (0.5, 0.6)
    taus = np.array([[-1.0, 0.0], [0.5, 2.0]])
    out = c_ph_array(pr, taus)
    assert out.shape == (2, 2)
    assert out[0, 1] == 1.0
    assert out[0, 0] == pytest.approx(c_ph(pr, 1.0))
    with pytest.raises(ValueError):
        c_ph(pr, -1.0)


@pytest.mark.parametrize("p,H", [(0.0, 0.75), (0.5, 0.55), (1.0, 0.9), (-0.25, 0.6), (3.0, 0.7)])
def test_bounds_bracket_and_trivial_lower_bound(p, H):
    for tau in np.arange(0.1, 5.01, 0.1):
        v = c_ph((p, H), tau)
        lo, hi = c_ph_bounds((p, H), tau, min(2.0, math.exp(tau)))
        assert lo - 1e-8 <= v <= hi + 1e-8
        assert v >= math.exp(-(p + H) * tau) - 1e-8


def test_bounds_domain():
    with pytest.raises(ValueError):
        c_ph_bounds((0.0, 0.75), 0.5, 3.0)
    with pytest.raises(ValueError):
        c_ph_bounds((0.0, 0.75), 0.5, 0.5)


@pytest.mark.parametrize("p,H", [(0.0, 0.75), (0.5, 0.55), (-0.4, 0.6), (2.0, 0.95), (0.3, 0.7)])
def test_tail_envelope(p, H):
    M = c_ph_envelope_constant((p, H))
    taus = np.concatenate([np.linspace(0.0, 5.0, 51), np.geomspace(5.0, 200.0, 30)])
    vals = c_ph_array((p, H), taus)
    assert np.all(vals <= M * c_ph_envelope((p, H), taus) * (1 + 1e-10))


def test_d_alpha_delta_is_geometric():
    # with rho = delta, D(tau) = e^{-alpha tau}
    for alpha in (0.1, 0.5, 2.0):
        for tau in (0, 1, 3, 10):
            assert d_alpha_rho(alpha, "delta", tau) == pytest.approx(math.exp(-alpha * tau),
                                                                     rel=1e-10)


@pytest.mark.parametrize("kernel,rho", [
    ("exp:lambda=0.5", lambda k: np.exp(-0.5 * np.abs(k))),
    ("polysum:beta=2", lambda k: (1.0 + np.abs(k)) ** -2.0),
    ("fgn:H=0.5", lambda k: (np.asarray(k) == 0).astype(float)),
])
def test_d_alpha_bruteforce(kernel, rho):
    for alpha in (0.3, 1.0):
        for tau in (0, 1, 4, 9):
            v, tail = d_alpha_rho(alpha, kernel, tau, return_tail=True)
            assert v == pytest.approx(d_alpha_bruteforce(alpha, rho, tau), abs=1e-9)
            assert 0 <= tail < 1e-9


@pytest.mark.parametrize("kernel", ["delta", "exp:lambda=0.2", "polysum:beta=1.5"])
@pytest.mark.parametrize("alpha", [0.05, 0.5, 3.0])
def test_d_alpha_is_correlation(kernel, alpha):
    d = np.array([d_alpha_rho(alpha, kernel, t) for t in range(32)])
    assert np.all(np.abs(d) <= 1.0)
    idx = np.arange(32)
    T = d[np.abs(idx[:, None] - idx[None, :])]
    assert np.linalg.eigvalsh(T)[0] >= -1e-8


def test_d_alpha_rejects_nonsummable():
    with pytest.raises(ValueError):
        d_alpha_rho(0.5, "fgn:H=0.8", 1)
    with pytest.raises(ValueError):
        d_alpha_rho(0.5, "delta", 1.5)
    with pytest.raises(ValueError):
        d_alpha_rho(0.0, "delta", 1)


def test_fgn_oracle_sanity():
    # the oracle helper itself: fgn at H = 1/2 is white noise
    assert fgn_rho(0.5, 0) == 1.0 and fgn_rho(0.5, 3) == 0.0
