import math

import numpy as np
import pytest

from hypgrowth import thermo as th
from hypgrowth.config import ThermoConfig
from hypgrowth.cylinders import count_from_matrix
from hypgrowth.errors import AlphaOutOfRange


@pytest.fixture(scope="module")
def oct_brackets(octagon):
    betas = [0.0, 0.5, 1.0, 2.0]
    return betas, {n: th.cylinder_pressure_many(octagon.part, betas, n) for n in (6, 7)}


# -- cylinder brackets

@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_bracket_at_zero_is_log_count(name, request):
    part = request.getfixturevalue(name).part
    for n in (3, 5):
        lo, hi = th.cylinder_pressure(part, 0.0, n)
        assert lo == pytest.approx(hi, abs=1e-12)
        assert lo == pytest.approx(math.log(count_from_matrix(part, n)) / n, abs=1e-12)


@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_bracket_at_one_contains_zero(name, request):
    part = request.getfixturevalue(name).part
    lo, hi = th.cylinder_pressure(part, 1.0, 6)
    assert lo <= 0.0 <= hi


def test_brackets_are_ordered(octagon, quad):
    for part in (octagon.part, quad.part):
        lo, hi = th.cylinder_pressure_many(part, np.linspace(-2, 3, 11), 5)
        assert np.all(lo <= hi + 1e-12)


def test_unnormalised_bracket_misses_zero_at_one(octagon):
    # without the image-length factor the sum is no longer a partition of unity
    lo, hi = th.cylinder_pressure(octagon.part, 1.0, 6, normalize=False)
    assert lo > 0.0
    nlo, nhi = th.cylinder_pressure(octagon.part, 1.0, 6)
    assert nlo <= 0.0 <= nhi


def test_quad_bracket_at_two_closes_on_zero(quad):
    his = [th.cylinder_pressure(quad.part, 2.0, n)[1] for n in (4, 5, 6)]
    assert np.all(np.diff(his) > 0) and his[-1] < 0.0
    lo, _ = th.cylinder_pressure(quad.part, 2.0, 6)
    assert lo <= quad.curve.value(2.0)


# -- transfer operator

def test_transfer_at_zero_is_log_spectral_radius(octagon, quad):
    for s in (octagon, quad):
        assert abs(s.curve.value(0.0) - math.log(s.part.spectral_radius())) < 1e-6


def test_transfer_at_zero_vs_count_ratio(octagon, quad):
    # log(count(n+1)/count(n)) removes the prefactor of count(n) ~ c rho^n
    for s in (octagon, quad):
        r = math.log(count_from_matrix(s.part, 11) / count_from_matrix(s.part, 10))
        assert abs(s.curve.value(0.0) - r) < 0.02


@pytest.mark.xfail(strict=True, reason="(1/n) log count(n) carries log(c)/n from the "
                   "prefactor of count(n) ~ c rho^n: 0.19 (octagon) and 0.14 (quad) at n = 10")
@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_transfer_at_zero_vs_count_at_depth_10(name, request):
    s = request.getfixturevalue(name)
    assert abs(s.curve.value(0.0) - math.log(count_from_matrix(s.part, 10)) / 10) < 0.02


@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_transfer_monotone_and_convex(name, request):
    c = request.getfixturevalue(name).curve
    assert np.all(np.diff(c.P_hat) <= 1e-9)
    assert c.second_differences().min() >= -1e-3


@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_pressure_vanishes_at_one(name, request):
    assert abs(request.getfixturevalue(name).curve.value(1.0)) <= 0.05


def test_transfer_resolution_converged(octagon):
    a = th.transfer_pressure(octagon.part, 0.5, k=1024)
    b = th.transfer_pressure(octagon.part, 0.5, k=4096)
    assert abs(a - b) < 1e-3


@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_transfer_agrees_with_bracket(octagon, oct_brackets, beta):
    betas, br = oct_brackets
    lo, hi = (v[betas.index(beta)] for v in br[6])
    p = octagon.curve.value(beta)
    assert abs(p - 0.5 * (lo + hi)) <= 0.5 * (hi - lo) + 0.02


@pytest.mark.xfail(strict=True, reason="the depth-6 bracket at beta = 0.5 sits about 0.12 "
                   "above the limit; its 1/n bias exceeds the half-width")
def test_transfer_agrees_with_bracket_half(octagon, oct_brackets):
    betas, br = oct_brackets
    lo, hi = (v[betas.index(0.5)] for v in br[6])
    p = octagon.curve.value(0.5)
    assert abs(p - 0.5 * (lo + hi)) <= 0.5 * (hi - lo) + 0.02


def test_extrapolated_bracket_at_half(octagon, oct_brackets):
    betas, br = oct_brackets
    lo = th.richardson([br[6][0], br[7][0]], [6, 7])
    hi = th.richardson([br[6][1], br[7][1]], [6, 7])
    k = betas.index(0.5)
    p = octagon.curve.value(0.5)
    assert min(lo[k], hi[k]) - 0.02 <= p <= max(lo[k], hi[k]) + 0.02


def test_periodic_orbit_pressure(octagon):
    betas = [0.0, 0.5, 1.0]
    per = th.periodic_pressure(octagon.part, betas, 6)
    for b, v in zip(betas, per):
        assert abs(v - octagon.curve.value(b)) < 0.03


def test_richardson_exact_on_model():
    ns = [6, 7]
    vals = [1.5 + 0.7 / n for n in ns]
    assert th.richardson(vals, ns) == pytest.approx(1.5, abs=1e-14)


# -- parabolic case

def test_quad_flat_beyond_one(quad):
    for b in (1.2, 1.5, 2.0):
        assert -0.05 <= quad.curve.value(b) <= 0.05
    tail = quad.curve.P_hat[quad.curve.betas >= 1.0]
    assert tail.min() >= -0.02


def test_quad_transition_at_one(quad):
    c = quad.curve
    left = (c.value(0.95) - c.value(0.9)) / 0.05
    right = (c.value(1.5) - c.value(1.1)) / 0.4
    assert left < -0.1
    assert abs(right) < 0.02


# -- Legendre transform and spectrum

def test_alpha_G_data(octagon):
    s = octagon.spectrum
    beta, b, I = th.legendre_data(s.fit, s.alpha_G)
    assert abs(beta - 1.0) < 1e-6
    assert abs(b - 1.0) < 0.03
    assert abs(I) < 0.02


@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_legendre_involution(name, request):
    s = request.getfixturevalue(name).spectrum
    P = np.array([float(s.fit.P(x)) for x in s.beta])
    assert np.max(np.abs(s.alphas * s.b - P - s.alphas * s.beta)) < 1e-9


@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_b_prime_against_pressure(name, request):
    sys_ = request.getfixturevalue(name)
    s = sys_.spectrum
    ref = -np.array([sys_.curve.value(x) for x in s.beta]) / s.alphas ** 2
    rel = np.abs(s.b_prime - ref) / np.abs(ref)
    assert np.nanmax(rel[1:-1]) < 0.02


@pytest.mark.parametrize("name", ["octagon", "quad"])
def test_spectrum_shape(name, request):
    s = request.getfixturevalue(name).spectrum
    I2 = s.I_second()
    assert I2.min() >= -1e-3
    assert I2[1:-1].min() >= 1e-4
    step = s.alphas[1] - s.alphas[0]
    k = int(np.argmax(s.b))
    if name == "octagon":
        assert abs(s.alphas[k] - s.alpha_G) <= step
    else:
        assert k == 0                     # alpha_G = 0 lies left of the grid
    assert np.all(np.diff(s.b[:k + 1]) >= -1e-4)
    assert np.all(np.diff(s.b[k:]) <= 1e-4)
    assert np.all(s.I >= -0.02)


def test_octagon_alpha_range(octagon):
    s = octagon.spectrum
    assert 0 < s.alpha_lo < s.alpha_G < s.alpha_hi
    assert abs(s.alpha_G - 1.6142) < 1e-3


def test_quad_rate_flattens_at_cusp(quad):
    s = quad.spectrum
    assert s.alpha_G == 0.0
    assert np.all(np.diff(s.I_prime) > 0)
    assert 0 < s.I_prime[0] < 0.05


def test_alpha_out_of_range(octagon):
    s = octagon.spectrum
    with pytest.raises(AlphaOutOfRange):
        th.legendre_data(s.fit, s.alpha_hi + 0.1)
    with pytest.raises(AlphaOutOfRange):
        th.legendre_data(s.fit, 0.0)
    assert s.rate(s.alpha_hi + 0.1) == math.inf
    assert s.rate(s.alpha_lo - 0.1) == math.inf
    assert math.isfinite(s.rate(s.alpha_G))


def test_alpha_bounds_octagon(octagon):
    lows = [th.alpha_bounds(octagon.part, n)[0] for n in range(2, 7)]
    assert min(lows) > 0.5
    assert max(lows[1:]) <= octagon.spectrum.alpha_G - 1e-3


def test_alpha_bounds_quad_decrease(quad):
    lows = [th.alpha_bounds(quad.part, n)[0] for n in range(2, 9)]
    assert np.all(np.diff(lows) < 0)
    assert lows[-1] < 0.7


def test_config_validation():
    with pytest.raises(ValueError):
        ThermoConfig(bins=10)
    with pytest.raises(ValueError):
        ThermoConfig(extrapolation="aitken")


def test_curve_rows_and_extrapolation(octagon):
    cfg = ThermoConfig(extrapolation="richardson", beta_min=0.0, beta_max=1.0, beta_step=0.25,
                       refine_lo=0.5, refine_hi=0.5)
    c = th.pressure_curve(octagon.part, cfg, checkpoints=[0.5], bracket_n=(5, 6))
    rows = c.rows()
    assert len(rows) == 2 and rows[0][1] == 5
    assert c.extrapolated is not None
    _, lo, hi = c.extrapolated
    assert lo[0] <= hi[0]
