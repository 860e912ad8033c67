import numpy as np
import pytest

from oracles import charpoly_eigvals, charpoly_max_eig, spectral_norm_oracle
from pinsync.dynamics import (ChuaParams, chua_field, chua_jacobians, estimate_lipschitz,
                              estimate_one_sided, estimate_quad_beta, make_chua,
                              resolve_dynamics)

PARAMS = ChuaParams()


def test_origin_is_fixed_point():
    assert np.array_equal(chua_field(PARAMS, np.zeros(3)), np.zeros(3))


def test_field_at_unit_x():
    # g(1) = m0, so the first component is p*(m0 - ... ) = 9.78*0.31
    out = chua_field(PARAMS, np.array([1.0, 0.0, 0.0]))
    assert out == pytest.approx([3.0318, 1.0, 0.0], rel=1e-12)


def test_field_at_unit_y():
    out = chua_field(PARAMS, np.array([0.0, 1.0, 0.0]))
    assert out == pytest.approx([9.78, -1.0, -14.97], rel=1e-12)


def test_field_batched_matches_rows():
    pts = np.random.default_rng(0).uniform(-3, 3, (17, 3))
    batched = chua_field(PARAMS, pts)
    rows = np.array([chua_field(PARAMS, p) for p in pts])
    assert np.array_equal(batched, rows)


def test_jacobian_entries():
    outer, inner = chua_jacobians(PARAMS)
    assert np.array_equal(outer[2], [0.0, -14.97, 0.0])
    assert np.array_equal(inner[2], [0.0, -14.97, 0.0])
    assert outer[0, 0] == pytest.approx(-2.445, rel=1e-12)
    assert inner[0, 0] == pytest.approx(3.0318, rel=1e-12)
    diff = inner - outer
    assert np.count_nonzero(diff) == 1 and diff[0, 0] != 0.0


def test_quad_beta_simple_regions():
    assert estimate_quad_beta(0.0, [-np.eye(2)]) == pytest.approx(1.0)
    assert estimate_quad_beta(2.0, [np.zeros((2, 2))]) == pytest.approx(2.0)


def test_quad_beta_warns_nonpositive():
    with pytest.warns(UserWarning, match="nonpositive"):
        estimate_quad_beta(0.0, [np.eye(2)])


def test_quad_beta_chua_matches_eigen_oracle():
    _, inner = chua_jacobians(PARAMS)
    lam = charpoly_max_eig((inner + inner.T) / 2.0)
    beta = estimate_quad_beta(10.0, chua_jacobians(PARAMS))
    assert beta == pytest.approx(10.0 - lam, abs=1e-9)
    assert abs(lam - 9.1207) < 1e-3  # reported rounding of the dominant eigenvalue


def test_lipschitz_simple_regions():
    assert estimate_lipschitz([np.eye(3)]) == pytest.approx(1.0)
    assert estimate_lipschitz([np.diag([3.0, -2.0])]) == pytest.approx(3.0)


def test_lipschitz_chua_matches_singular_value_oracle():
    regions = chua_jacobians(PARAMS)
    expected = max(spectral_norm_oracle(a) for a in regions)
    assert estimate_lipschitz(regions) == pytest.approx(expected, abs=1e-8)


def test_one_sided_simple_regions():
    assert estimate_one_sided([np.eye(2)]) == pytest.approx(1.0)
    assert estimate_one_sided([-2.0 * np.eye(2), -np.eye(2)]) == pytest.approx(-2.0)


def test_one_sided_chua_matches_eigen_oracle():
    regions = chua_jacobians(PARAMS)
    expected = min(charpoly_eigvals((a + a.T) / 2.0)[0] for a in regions)
    assert estimate_one_sided(regions) == pytest.approx(expected, abs=1e-9)


def _random_pairs(count, rng):
    return rng.uniform(-5, 5, (count, 3)), rng.uniform(-5, 5, (count, 3))


def test_quad_inequality_empirical():
    dyn = make_chua(alpha=10.0)
    beta = dyn.quad.beta
    xi, zeta = _random_pairs(10_000, np.random.default_rng(2))
    d = xi - zeta
    df = chua_field(PARAMS, xi) - chua_field(PARAMS, zeta)
    lhs = np.einsum("ij,ij->i", d, df - 10.0 * d)
    rhs = -beta * np.einsum("ij,ij->i", d, d)
    assert np.all(lhs <= rhs + 1e-9)


def test_lipschitz_bound_empirical():
    lip = estimate_lipschitz(chua_jacobians(PARAMS))
    u, v = _random_pairs(10_000, np.random.default_rng(3))
    df = np.linalg.norm(chua_field(PARAMS, u) - chua_field(PARAMS, v), axis=1)
    dx = np.linalg.norm(u - v, axis=1)
    assert np.all(df <= lip * dx + 1e-9)


def test_one_sided_bound_empirical():
    sigma = estimate_one_sided(chua_jacobians(PARAMS))
    u, v = _random_pairs(10_000, np.random.default_rng(4))
    d = u - v
    lhs = np.einsum("ij,ij->i", d, chua_field(PARAMS, u) - chua_field(PARAMS, v))
    rhs = sigma * np.einsum("ij,ij->i", d, d)
    assert np.all(lhs >= rhs - 1e-9)


def test_finite_difference_jacobian_matches_regions():
    outer, inner = chua_jacobians(PARAMS)
    step = 1e-6
    for point, expected in [(np.array([0.3, -0.8, 1.1]), inner),
                            (np.array([2.4, 0.5, -0.7]), outer),
                            (np.array([-3.0, 1.0, 2.0]), outer)]:
        fd = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            fd[:, k] = (chua_field(PARAMS, point + e) - chua_field(PARAMS, point - e)) / (2 * step)
        assert np.max(np.abs(fd - expected)) / np.max(np.abs(expected)) < 1e-4


def test_registry_round_trip():
    dyn = resolve_dynamics({"name": "chua", "alpha": 10.0,
                            "params": {"p": 9.78, "q": 14.97, "m0": -1.31, "m1": -0.75}})
    assert dyn.dimension == 3
    assert dyn.quad.beta == pytest.approx(0.8793, abs=1e-4)
    with pytest.raises(ValueError, match="unknown dynamics"):
        resolve_dynamics({"name": "rossler"})


def test_beta_override_pins_value():
    dyn = resolve_dynamics({"name": "chua", "alpha": 10.0, "beta": 0.8803})
    assert dyn.quad.beta == 0.8803


def test_linear_dynamics_builtin():
    dyn = resolve_dynamics({"name": "linear", "alpha": 1.0, "params": {"A": [[-1.0]]}})
    assert dyn.field(np.array([[2.0]]))[0, 0] == -2.0
    assert dyn.lipschitz == pytest.approx(1.0)
    assert dyn.one_sided == pytest.approx(-1.0)
