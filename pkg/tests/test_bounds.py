import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinsync.bounds import (ClosedFormBounds, PairedIntegrationBounds, default_mu,
                            paired_integration_curve, paired_integration_oracle,
                            rho_lipschitz, soundness_scan, varrho_one_sided)
from pinsync.dynamics import ChuaParams, chua_field, chua_jacobians, estimate_lipschitz, estimate_one_sided

Z3 = np.zeros(3)
E1 = np.array([1.0, 0.0, 0.0])


def test_rho_zero_at_time_zero():
    assert rho_lipschitz(0.0, E1, Z3, E1, -E1, 2.0) == 0.0


def test_rho_zero_for_identical_inputs():
    for t in (0.1, 1.0, 3.0):
        assert rho_lipschitz(t, E1, E1, E1, E1, 2.0) == 0.0


def test_rho_log_two_case():
    # unit Lipschitz, unit input mismatch, equal starts: (e^{ln 2} - 1) = 1
    assert rho_lipschitz(math.log(2.0), E1, Z3, E1, E1, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_rho_degenerate_lipschitz_limit():
    assert rho_lipschitz(3.0, E1, Z3, E1, -E1, 0.0) == pytest.approx(3.0)


def test_varrho_at_time_zero_is_distance():
    assert varrho_one_sided(0.0, E1, Z3, 2 * E1, Z3, -1.0, 1.0) == pytest.approx(2.0)


def test_varrho_zero_for_identical_trajectories():
    for t in (0.0, 0.5, 2.0):
        assert varrho_one_sided(t, E1, E1, E1, E1, -1.0, 1.0) == 0.0


def test_varrho_exponential_case():
    # sigma=0, mu=1, unit distance, matched inputs: sqrt(e^{-t})
    got = varrho_one_sided(1.0, E1, E1, E1, Z3, 0.0, 1.0)
    assert got == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_varrho_degenerate_rate_limit():
    # 2*sigma == mu: linear-in-t correction term
    got = varrho_one_sided(0.25, E1, Z3, E1, -E1, 0.5, 1.0)
    assert got == pytest.approx(math.sqrt(4.0 - 1.0 * 0.25), rel=1e-12)


def test_varrho_clamps_at_zero():
    got = varrho_one_sided(10.0, 5 * E1, Z3, E1, E1 + 1e-6, -3.0, 1.0)
    assert got == 0.0


def test_default_mu():
    assert default_mu(-9.86) == pytest.approx(19.72)
    assert default_mu(0.3) == 1.0


def test_oracle_identical_trajectories():
    f = lambda x: -x
    assert paired_integration_oracle(f, E1, E1, E1, E1, 1.0, 0.01) == (0.0, 0.0)


def test_oracle_time_zero():
    f = lambda x: -x
    dev, dist = paired_integration_oracle(f, E1, Z3, 2 * E1, E1, 0.0, 0.01)
    assert dev == 0.0 and dist == pytest.approx(1.0)


def test_oracle_linear_decay():
    # f(x) = -x with matched zero inputs: distance is e^{-t} ||u0 - v0||
    f = lambda x: -x
    dt = 1e-4
    _, dist = paired_integration_oracle(f, Z3, Z3, 2 * E1, E1, 1.0, dt)
    assert dist == pytest.approx(math.exp(-1.0), abs=5e-4)


def test_oracle_rejects_bad_grid():
    f = lambda x: -x
    with pytest.raises(ValueError, match="divide"):
        paired_integration_oracle(f, Z3, Z3, E1, Z3, 0.0105, 0.01)


def test_oracle_curve_matches_single_calls():
    params = ChuaParams()
    f = lambda x: chua_field(params, x)
    rng = np.random.default_rng(3)
    u0, v0 = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
    th, vt = rng.uniform(-10, 10, 3), rng.uniform(-10, 10, 3)
    devs, dists = paired_integration_curve(f, th, vt, u0, v0, [0.01, 0.05, 0.1], 1e-3)
    for t, dev, dist in zip([0.01, 0.05, 0.1], devs, dists):
        d2, s2 = paired_integration_oracle(f, th, vt, u0, v0, t, 1e-3)
        assert dev == d2 and dist == s2


@pytest.mark.filterwarnings("ignore:overflow")
def test_blowup_detection():
    f = lambda x: x ** 3
    with pytest.raises(FloatingPointError, match="blew up"):
        paired_integration_oracle(f, Z3, Z3, 50 * E1, -50 * E1, 10.0, 0.1)


@settings(max_examples=40, deadline=None)
@given(t1=st.floats(0.0, 0.5), t2=st.floats(0.0, 0.5),
       scale=st.floats(1.0, 3.0))
def test_rho_monotonicity(t1, t2, scale):
    lip = 2.0
    lo, hi = min(t1, t2), max(t1, t2)
    assert rho_lipschitz(lo, E1, Z3, E1, -E1, lip) <= rho_lipschitz(hi, E1, Z3, E1, -E1, lip)
    base = rho_lipschitz(0.3, E1, Z3, E1, -E1, lip)
    assert rho_lipschitz(0.3, scale * E1, Z3, E1, -E1, lip) >= base
    assert rho_lipschitz(0.3, E1, Z3, scale * E1, -scale * E1, lip) >= base


@settings(max_examples=40, deadline=None)
@given(d1=st.floats(0.0, 5.0), d2=st.floats(0.0, 5.0))
def test_varrho_nonincreasing_in_input_mismatch(d1, d2):
    lo, hi = min(d1, d2), max(d1, d2)
    a = varrho_one_sided(0.2, lo * E1, Z3, E1, -E1, -1.0, 2.0)
    b = varrho_one_sided(0.2, hi * E1, Z3, E1, -E1, -1.0, 2.0)
    assert b <= a + 1e-12


def _chua_soundness(trials, seed):
    params = ChuaParams()
    regions = chua_jacobians(params)
    lip = estimate_lipschitz(regions)
    sigma = estimate_one_sided(regions)
    rng = np.random.default_rng(seed)
    return soundness_scan(lambda x: chua_field(params, x), lip, sigma, default_mu(sigma),
                          trials=trials, ts=(0.01, 0.05, 0.1), dt=1e-4, rng=rng)


def test_bounds_sound_on_chua_samples():
    rows = _chua_soundness(100, 17)
    assert len(rows) == 300
    assert all(r.rho_ok() and r.varrho_ok() for r in rows)


def test_paired_generator_is_conservative_against_itself():
    params = ChuaParams()
    f = lambda x: chua_field(params, x)
    gen = PairedIntegrationBounds(field=f, dt=1e-3, margin_factor=1.1)
    rng = np.random.default_rng(8)
    for _ in range(10):
        u0, v0 = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        th, vt = rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3)
        dev, dist = paired_integration_oracle(f, th, vt, u0, v0, 0.05, 1e-3)
        assert gen.rho(0.05, th, vt, u0, v0) >= dev
        assert gen.varrho(0.05, th, vt, u0, v0) <= dist
    assert gen.rho(0.0, th, vt, u0, v0) == 0.0


def test_closed_form_bundle_matches_functions():
    cf = ClosedFormBounds(lipschitz=2.0, one_sided=-1.0, mu=3.0)
    assert cf.rho(0.2, E1, Z3, E1, -E1) == rho_lipschitz(0.2, E1, Z3, E1, -E1, 2.0)
    assert cf.varrho(0.2, E1, Z3, E1, -E1) == varrho_one_sided(0.2, E1, Z3, E1, -E1, -1.0, 3.0)
