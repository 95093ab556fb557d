import json

import numpy as np
import pytest

from valgrad.cones import (
    FullSpace,
    NegatedSecondOrder,
    NonpositiveOrthant,
    Product,
    SecondOrder,
    Zero,
    cone_from_json,
    cone_to_json,
    distance,
    in_normal_cone,
    polar,
    project,
)

ALL_VARIANTS = [
    NonpositiveOrthant(3),
    NonpositiveOrthant(3, negated=True),
    Zero(2),
    FullSpace(2),
    SecondOrder(4),
    NegatedSecondOrder(4),
    Product((NonpositiveOrthant(2), Zero(1), SecondOrder(3))),
]


def brute_force_soc2_project(z, radius=4.0, n=401):
    """Independent oracle: grid minimization of ||z - y|| over SOC(2) cap ball."""
    best = None
    best_d = np.inf
    for t in np.linspace(0.0, radius, n):
        for x in np.linspace(-t, t, max(3, int(2 * t / (radius / n)) + 1)):
            d = np.hypot(z[0] - t, z[1] - x)
            if d < best_d:
                best_d = d
                best = np.array([t, x])
    return best, best_d


def test_polar_examples():
    assert polar(Zero(5)) == FullSpace(5)
    assert polar(NonpositiveOrthant(4)) == NonpositiveOrthant(4, negated=True)
    # the polar of the nonpositive orthant is the nonnegative orthant
    np.testing.assert_allclose(
        polar(NonpositiveOrthant(2)).project([1.0, -2.0]), [1.0, 0.0]
    )
    assert polar(SecondOrder(3)) == NegatedSecondOrder(3)
    assert polar(polar(SecondOrder(3))) == SecondOrder(3)
    prod = Product((NonpositiveOrthant(2), Zero(1)))
    assert polar(prod) == Product((NonpositiveOrthant(2, negated=True), FullSpace(1)))


def test_self_bipolarity():
    for cone in ALL_VARIANTS:
        assert polar(polar(cone)) == cone


def test_project_examples():
    np.testing.assert_allclose(project(NonpositiveOrthant(2), [1.0, -2.0]), [0.0, -2.0])
    np.testing.assert_allclose(project(Zero(3), [1.0, -2.0, 7.0]), np.zeros(3))

    # frozen from the brute-force oracle below: nearest SOC(2) point to (-1, 0)
    # is the origin at distance 1
    np.testing.assert_allclose(project(SecondOrder(2), [-1.0, 0.0]), [0.0, 0.0], atol=1e-12)
    assert distance(SecondOrder(2), [-1.0, 0.0]) == pytest.approx(1.0, abs=1e-12)
    y, d = brute_force_soc2_project(np.array([-1.0, 0.0]))
    assert np.linalg.norm(y) <= 2e-2
    assert d == pytest.approx(1.0, abs=1e-2)


def test_project_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    cone = SecondOrder(2)
    for _ in range(6):
        z = rng.uniform(-2, 2, size=2)
        y_bf, d_bf = brute_force_soc2_project(z)
        y = cone.project(z)
        assert np.linalg.norm(y - y_bf) <= 5e-2
        assert cone.distance(z) == pytest.approx(d_bf, abs=5e-2)


def test_soc_boundary_tiebreak_maps_to_origin():
    # t = -||xbar||: the projector's continuous branch sends it to 0
    z = np.array([-2.0, 2.0 * 0.6, 2.0 * 0.8])
    np.testing.assert_allclose(SecondOrder(3).project(z), np.zeros(3), atol=1e-15)


def test_distance_examples():
    assert distance(NonpositiveOrthant(1), [-5.0]) == 0.0
    assert distance(NonpositiveOrthant(1), [3.0]) == 3.0


def test_projection_idempotent():
    rng = np.random.default_rng(0)
    for cone in ALL_VARIANTS:
        for _ in range(50):
            z = rng.standard_normal(cone.dim) * 3.0
            once = cone.project(z)
            twice = cone.project(once)
            assert np.linalg.norm(twice - once) <= 1e-12


def test_moreau_decomposition():
    rng = np.random.default_rng(1)
    for cone in ALL_VARIANTS:
        pol = polar(cone)
        for _ in range(1000):
            z = rng.standard_normal(cone.dim) * 2.0
            pz = cone.project(z)
            qz = pol.project(z)
            assert np.linalg.norm(z - (pz + qz)) <= 1e-10
            assert abs(pz @ qz) <= 1e-10


def test_projection_nonexpansive():
    rng = np.random.default_rng(2)
    for cone in ALL_VARIANTS:
        for _ in range(50):
            a = rng.standard_normal(cone.dim)
            b = rng.standard_normal(cone.dim)
            assert np.linalg.norm(cone.project(a) - cone.project(b)) <= np.linalg.norm(a - b) + 1e-12


def test_in_normal_cone_examples():
    chk = in_normal_cone(NonpositiveOrthant(1), [0.0], [7.0])
    assert chk.ok
    chk = in_normal_cone(NonpositiveOrthant(1), [-1.0], [7.0])
    assert not chk.ok
    assert chk.complementarity_gap == pytest.approx(7.0)
    # z on the SOC boundary, lam on the polar boundary, orthogonal pair
    chk = in_normal_cone(SecondOrder(2), [1.0, 1.0], [-1.0, 1.0])
    assert chk.ok


def test_in_normal_cone_matches_componentwise_rule_on_orthant():
    # cases are generated decisively complementary or decisively not, so the
    # aggregated check must agree with the componentwise rule
    rng = np.random.default_rng(3)
    cone = NonpositiveOrthant(4)
    for case in range(200):
        z = np.minimum(rng.standard_normal(4), 0.0)
        lam = np.maximum(rng.standard_normal(4), 0.0)
        complementary = case % 2 == 0
        if complementary:
            lam[z < 0.0] = 0.0
        else:
            i = int(np.argmin(z))
            z[i] = min(z[i], -0.5)
            lam[i] = max(lam[i], 0.5)
        got = in_normal_cone(cone, z, lam).ok
        assert got == complementary


def test_normal_cone_projection_lands_in_normal_cone():
    rng = np.random.default_rng(4)
    for cone in ALL_VARIANTS:
        for _ in range(100):
            z = cone.project(rng.standard_normal(cone.dim) * 2.0)
            lam = cone.project_normal(z, rng.standard_normal(cone.dim) * 2.0, active_tol=1e-10)
            assert in_normal_cone(cone, z, lam, tol=1e-8).ok


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        project(NonpositiveOrthant(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        distance(SecondOrder(2), [1.0])
    with pytest.raises(ValueError):
        in_normal_cone(Zero(2), [0.0, 0.0], [1.0])


def test_invalid_construction():
    with pytest.raises(ValueError):
        SecondOrder(1)
    with pytest.raises(ValueError):
        Zero(0)
    with pytest.raises(ValueError):
        Product((Zero(1),))


def test_json_round_trip():
    for cone in ALL_VARIANTS:
        s = cone_to_json(cone)
        again = cone_from_json(s)
        assert again == cone
    d = json.loads(cone_to_json(Product((NonpositiveOrthant(2), Zero(1)))))
    assert d["kind"] == "product"
    assert d["dim"] == 3
    assert [p["kind"] for p in d["parts"]] == ["orthant_nonpos", "zero"]
    with pytest.raises(ValueError):
        cone_from_json('{"kind": "psd", "dim": 4}')
