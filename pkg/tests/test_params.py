import math

import pytest

from hetnet.params import (
    NetworkParams, ParameterError, Topology, derived_intensities, distance_law, fig3_params,
    fig4_params, validate,
)


def test_reference_sets_validate():
    assert validate(fig3_params(), Topology.COVERAGE) == fig3_params()
    assert validate(fig4_params(), Topology.CAPACITY) == fig4_params()


def test_default_params_equal_coverage_reference_set():
    assert NetworkParams() == fig3_params()


@pytest.mark.parametrize("change, message", [
    ({"lambda_sc_prime": 1.0e-5}, "lambda_sc_prime must exceed lambda_mc"),
    ({"alpha": 2.0}, "alpha must exceed 2"),
    ({"gamma": 1.5}, "gamma out of [0,1]"),
    ({"eta": 1.0}, "eta must exceed 1"),
    ({"R_c": -1.0}, "R_c must be a finite positive number"),
    ({"F": 3.0}, "F must exceed F_sc"),
])
def test_single_violations(change, message):
    with pytest.raises(ParameterError) as err:
        validate(fig3_params().replace(**change), Topology.COVERAGE)
    assert any(v.startswith(message) for v in err.value.violations)


def test_all_violations_reported():
    bad = fig3_params().replace(alpha=1.5, gamma=-0.1, eta=0.9)
    with pytest.raises(ParameterError) as err:
        validate(bad)
    assert len(err.value.violations) == 3


def test_hole_constraint_only_for_coverage():
    p = fig4_params()
    assert p.lambda_sc_prime == p.lambda_mc
    validate(p, Topology.CAPACITY)
    with pytest.raises(ParameterError):
        validate(p, Topology.COVERAGE)


def test_topology_parse():
    assert Topology.parse("coverage") is Topology.COVERAGE
    assert Topology.parse("CAP") is Topology.CAPACITY
    assert Topology.parse("capacity-aided") is Topology.CAPACITY
    with pytest.raises(ValueError):
        Topology.parse("mesh")


def test_php_intensity_at_reference_set():
    d = derived_intensities(fig3_params(), Topology.COVERAGE)
    assert d.lambda_sc == pytest.approx(4.068e-5, rel=1e-3)
    assert d.lambda_sc == pytest.approx(5.5e-5 * math.exp(-1.5e-5 * math.pi * 80 ** 2), rel=1e-14)


def test_mcp_intensity_and_cluster_user_density():
    d = derived_intensities(fig4_params(), Topology.CAPACITY)
    assert d.lambda_sc == pytest.approx(4.5e-5, rel=1e-14)
    assert d.lambda_ut_s == pytest.approx(1.4921e-4, rel=1e-4)


def test_macro_user_density_default():
    assert fig3_params().macro_user_density == fig3_params().lambda_mc
    assert fig4_params().macro_user_density == 3.0e-5


def test_distance_law_default_and_override():
    k, nu = distance_law(fig3_params(), Topology.COVERAGE, "MU")
    assert k == 2.0 and nu == pytest.approx((math.pi * 1.5e-5) ** -0.5)
    p = fig3_params().replace(dist_k=1.5, dist_nu=50.0)
    assert distance_law(p, Topology.COVERAGE, "SU") == (1.5, 50.0)
    with pytest.raises(ValueError):
        distance_law(p, Topology.COVERAGE, "XU")
