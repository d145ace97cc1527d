import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acebounds.dist import TreatmentPair, ace_backdoor, ace_frontdoor, ace_twodoor
from acebounds.errors import MissingNuisance, PositivityViolation
from acebounds.influence import (
    MODEL_TAGS,
    NuisanceSet,
    Observation,
    brute_force_mean,
    brute_force_variance,
    evaluate_m,
    m_bd,
    m_fd,
    truth_nuisances,
)
from acebounds.quadrature import FiniteZRule

from conftest import PAIR, random_chain_dist

ALL_TAGS = MODEL_TAGS + ("TD_REDUCED",)


def _dist(seed=3):
    return random_chain_dist(np.random.default_rng(seed))


def _three_level_dist():
    from acebounds.dist import chain_joint

    pa = {0.0: 0.5, 1.0: 0.3, 2.0: 0.2}
    pz1 = {0.0: 0.3, 1.0: 0.6, 2.0: 0.45}
    py1 = {(0.0, 0.0): 0.2, (0.0, 1.0): 0.5, (1.0, 0.0): 0.7, (1.0, 1.0): 0.4}
    return chain_joint(
        [0.0, 1.0],
        [0.0, 1.0, 2.0],
        [0.0, 1.0],
        [0.0, 1.0],
        lambda c: 0.4 if c == 1 else 0.6,
        lambda a, c: pa[a],
        lambda z, a: pz1[a] if z == 1 else 1.0 - pz1[a],
        lambda y, z, c: py1[(z, c)] if y == 1 else 1.0 - py1[(z, c)],
    )


def test_bd_off_pair_rows_reduce_to_regression_contrast():
    # the observed treatment lies outside the compared pair: both indicators
    # vanish and only the regression contrast remains
    dist = _three_level_dist()
    eta = truth_nuisances(dist)
    pair = TreatmentPair(1.0, 0.0)
    x = Observation(c=1.0, a=2.0, z=1.0, y=1.0)
    contrast = float(eta.mean_y_ac(1.0, 1.0) - eta.mean_y_ac(0.0, 1.0))
    assert m_bd(x, eta, pair) == pytest.approx(contrast, abs=1e-12)
    assert brute_force_mean(dist, pair, "BD") == pytest.approx(ace_backdoor(dist, pair), abs=1e-10)


def test_bd_vanishing_outcome_gives_zero():
    eta = NuisanceSet(
        a_support=(0.0, 1.0),
        p_a_given_c=lambda a, c: 0.5 + 0.0 * np.asarray(c, dtype=float),
        mean_y_ac=lambda a, c: 0.0 * np.asarray(c, dtype=float),
    )
    x = Observation(c=0.0, a=1.0, z=0.0, y=0.0)
    assert m_bd(x, eta, TreatmentPair(1.0, 0.0)) == 0.0


def test_fd_mediator_shift_factor_vanishes_when_z_independent():
    # if the mediator law ignores treatment, the residual term drops out
    dist = _dist()
    eta = truth_nuisances(dist)
    flat = NuisanceSet(
        a_support=eta.a_support,
        c_support=eta.c_support,
        p_a=eta.p_a,
        p_z_given_a=lambda z, a: 0.5 + 0.0 * np.asarray(z, dtype=float) + 0.0 * np.asarray(a, dtype=float),
        mean_y_az=eta.mean_y_az,
        z_integrator=eta.z_integrator,
    )
    pair = TreatmentPair(1.0, 0.0)
    x = Observation(c=0.0, a=1.0, z=1.0, y=7.0)
    got = m_fd(x, flat, pair)
    pooled = sum(float(flat.mean_y_az(ab, 1.0)) * float(flat.p_a(ab)) for ab in (0.0, 1.0))
    # centering terms equal the pooled outcome at z (flat mediator law), and the
    # final shift-weighted term is exactly zero
    ey = {}
    for level in (1.0, 0.0):
        ey[level] = sum(
            0.5 * sum(float(flat.mean_y_az(ab, z0)) * float(flat.p_a(ab)) for ab in (0.0, 1.0))
            for z0 in (0.0, 1.0)
        )
    expected = (pooled - ey[1.0]) / float(flat.p_a(1.0))
    assert got == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("tag,ace", [("BD", ace_backdoor), ("FD", ace_frontdoor), ("TD", ace_twodoor)])
def test_enumeration_mean_recovers_ace(tag, ace):
    dist = _dist(11)
    assert brute_force_mean(dist, PAIR, tag) == pytest.approx(ace(dist, PAIR), abs=1e-10)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_mean_zero_for_every_influence_function(seed):
    dist = random_chain_dist(np.random.default_rng(seed))
    theta = ace_twodoor(dist, PAIR)
    for tag in ALL_TAGS:
        assert brute_force_mean(dist, PAIR, tag) - theta == pytest.approx(0.0, abs=1e-10)


def test_reduced_td_matches_general_td_variance_on_chain_family():
    dist = _dist(23)
    general = brute_force_variance(dist, PAIR, "TD")
    reduced = brute_force_variance(dist, PAIR, "TD_REDUCED")
    assert reduced == pytest.approx(general, abs=1e-10)


def test_pairwise_variances_not_larger():
    dist = _dist(17)
    var = {tag: brute_force_variance(dist, PAIR, tag) for tag in MODEL_TAGS}
    assert var["BD_TD"] <= min(var["BD"], var["TD"]) + 1e-12
    assert var["FD_TD"] <= var["FD"] + 1e-12
    assert var["BD_FD_TD"] <= min(var.values()) + 1e-12


def test_locality_row_permutation():
    dist = _dist(29)
    eta = truth_nuisances(dist)
    rng = np.random.default_rng(0)
    cells = np.array([cell for cell in dist.cells()])
    c, a, z, y = cells[:, 0], cells[:, 1], cells[:, 2], cells[:, 3]
    perm = rng.permutation(c.size)
    for tag in ALL_TAGS:
        base = evaluate_m(tag, c, a, z, y, eta, PAIR)
        shuffled = evaluate_m(tag, c[perm], a[perm], z[perm], y[perm], eta, PAIR)
        assert np.array_equal(shuffled, base[perm])


def test_missing_component_raises():
    dist = _dist(31)
    eta = truth_nuisances(dist)
    eta.mean_y_azc = None
    with pytest.raises(MissingNuisance, match="mean_y_azc"):
        evaluate_m("TD", np.array([0.0]), np.array([1.0]), np.array([0.0]), np.array([0.0]), eta, PAIR)


def test_positivity_guard_in_evaluators():
    eta = NuisanceSet(
        a_support=(0.0, 1.0),
        p_a_given_c=lambda a, c: 0.0 * np.asarray(c, dtype=float),
        mean_y_ac=lambda a, c: 0.0 * np.asarray(c, dtype=float),
    )
    with pytest.raises(PositivityViolation):
        m_bd(Observation(0.0, 1.0, 0.0, 0.0), eta, TreatmentPair(1.0, 0.0))


def test_truth_nuisances_components_match_tables():
    dist = _dist(41)
    eta = truth_nuisances(dist)
    assert float(eta.p_c(dist.c_support[1])) == pytest.approx(
        float(dist.table(("c",))[1]), abs=1e-15
    )
    cond = dist.conditional_table(("z",), {"a": 1.0, "c": 0.0})
    assert float(eta.p_z_given_ac(dist.z_support[1], 1.0, 0.0)) == pytest.approx(float(cond[1]), abs=1e-15)
    mean, _ = dist.cond_mean_var({"a": 1.0, "z": 0.0, "c": 1.0})
    assert float(eta.mean_y_azc(1.0, 0.0, 1.0)) == pytest.approx(mean, abs=1e-15)


def test_finite_rule_expectation_matches_direct_sum():
    dist = _dist(43)
    eta = truth_nuisances(dist)
    rule = FiniteZRule(dist.z_support)
    from acebounds.quadrature import expect_z

    got = expect_z(rule, eta.p_z_given_a, lambda z: z**2, 1.0)
    table = dist.conditional_table(("z",), {"a": 1.0})
    want = float(np.sum(table * dist.z_support**2))
    assert float(got) == pytest.approx(want, abs=1e-13)
