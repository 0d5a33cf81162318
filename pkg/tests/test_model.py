import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from polling_lab import (
    Deterministic,
    Erlang,
    Exponential,
    HyperExponential,
    Pareto,
    PollingModel,
    check_stability,
)
from polling_lab.errors import HeavyTailNoClosedFormLst, ValidationError
from polling_lab.model import service_from_dict, service_lst

from conftest import LIGHT_SERVICES, base_polling_model


def _scipy_law(dist):
    """Independent reference law for the continuous cases."""
    if isinstance(dist, Exponential):
        return stats.expon(scale=1.0 / dist.rate)
    if isinstance(dist, Erlang):
        return stats.gamma(a=dist.shape, scale=1.0 / dist.rate)
    if isinstance(dist, Pareto):
        return stats.pareto(b=dist.index, scale=dist.scale)
    return None


def _expect(dist, fn):
    """E fn(B) by quadrature (or by hand for the atom / mixture)."""
    if isinstance(dist, Deterministic):
        return fn(dist.value)
    if isinstance(dist, HyperExponential):
        return sum(
            p * integrate.quad(lambda x, r=r: fn(x) * r * math.exp(-r * x), 0, np.inf, limit=200)[0]
            for p, r in zip(dist.probs, dist.rates)
        )
    law = _scipy_law(dist)
    lo = getattr(dist, "scale", 0.0)
    return integrate.quad(lambda x: fn(x) * law.pdf(x), lo, np.inf, limit=200)[0]


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
@pytest.mark.parametrize("k", [1, 2, 3])
def test_moments_match_quadrature(name, k):
    dist = LIGHT_SERVICES[name]
    assert dist.moment(k) == pytest.approx(_expect(dist, lambda x: x**k), rel=1e-9)


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
@pytest.mark.parametrize("s", [0.1, 0.7, 3.0])
def test_lst_matches_quadrature(name, s):
    dist = LIGHT_SERVICES[name]
    assert complex(dist.lst(s)).real == pytest.approx(_expect(dist, lambda x: math.exp(-s * x)), rel=1e-10)


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
def test_lst_complement_is_stable_near_zero(name):
    dist = LIGHT_SERVICES[name]
    s = 1e-10
    assert complex(dist.lst_complement(s)).real == pytest.approx(s * dist.moment(1), rel=1e-8)
    assert complex(dist.lst_complement(0.8)) == pytest.approx(1 - complex(dist.lst(0.8)), abs=1e-15)


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
def test_lst_derivative_matches_central_difference(name):
    dist = LIGHT_SERVICES[name]
    s, h = 0.6 + 0.3j, 1e-6
    fd = (dist.lst(s + h) - dist.lst(s - h)) / (2 * h)
    assert complex(dist.lst_derivative(s)) == pytest.approx(complex(fd), abs=1e-8)
    assert complex(dist.lst_derivative(0.0)).real == pytest.approx(-dist.moment(1), rel=1e-12)


@pytest.mark.parametrize("name", ["exp", "erlang"])
def test_survival_matches_scipy(name):
    dist = LIGHT_SERVICES[name]
    x = np.array([0.0, 0.3, 1.0, 4.0])
    np.testing.assert_allclose(dist.survival(x), _scipy_law(dist).sf(x), rtol=1e-12)


def test_pareto_survival_and_moments():
    dist = Pareto(1.5, 2.0)
    x = np.array([0.5, 2.0, 3.0, 100.0])
    np.testing.assert_allclose(dist.survival(x), stats.pareto(b=1.5, scale=2.0).sf(x), rtol=1e-12)
    assert dist.moment(1) == pytest.approx(6.0)
    assert math.isinf(dist.moment(2))
    assert dist.slowly_varying_constant == pytest.approx(2.0**1.5)


@pytest.mark.parametrize(
    "dist", [Exponential(1.3), Deterministic(0.7), Erlang(2, 1.5), HyperExponential((0.3, 0.7), (0.4, 3.0)), Pareto(1.5, 1.0)]
)
@pytest.mark.parametrize("x", [0.0, 0.5, 2.5, 40.0])
def test_residual_survival_is_integrated_tail(dist, x):
    breaks = [b for b in (getattr(dist, "value", None), getattr(dist, "scale", None)) if b is not None and b > x]
    tail = integrate.quad(lambda y: float(dist.survival(y)), x, np.inf, points=None, limit=400)[0] if not breaks else (
        integrate.quad(lambda y: float(dist.survival(y)), x, breaks[0])[0]
        + integrate.quad(lambda y: float(dist.survival(y)), breaks[0], np.inf, limit=400)[0]
    )
    assert float(dist.residual_survival(x)) == pytest.approx(tail / dist.moment(1), rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
def test_sampler_mean(name):
    dist = LIGHT_SERVICES[name]
    rng = np.random.default_rng(7)
    x = dist.sample(rng, 200_000)
    sd = math.sqrt(dist.moment(2) - dist.moment(1) ** 2)
    assert abs(x.mean() - dist.moment(1)) <= 5 * sd / math.sqrt(x.size) + 1e-12
    assert np.all(x >= 0)


def test_pareto_sampler_tail():
    rng = np.random.default_rng(3)
    x = Pareto(1.5, 1.0).sample(rng, 400_000)
    assert x.min() >= 1.0
    assert np.mean(x > 10.0) == pytest.approx(10.0**-1.5, rel=0.05)


def test_pareto_has_no_closed_form_lst():
    with pytest.raises(HeavyTailNoClosedFormLst):
        Pareto(1.5, 1.0).lst(1.0)


def test_service_lst_rejects_negative_real_part():
    with pytest.raises(ValidationError):
        service_lst(Exponential(1.0), -0.5)


@pytest.mark.parametrize(
    "factory, key",
    [
        (lambda: Exponential(-1.0), "rate"),
        (lambda: Deterministic(0.0), "value"),
        (lambda: Pareto(0.9, 1.0), "index"),
        (lambda: Erlang(0, 1.0), "shape"),
    ],
)
def test_invalid_parameters_name_the_key(factory, key):
    with pytest.raises(ValidationError) as info:
        factory()
    assert info.value.key == key


def test_hyperexponential_probs_must_sum_to_one():
    with pytest.raises(ValidationError):
        HyperExponential((0.5, 0.6), (1.0, 2.0))


def test_model_dict_round_trip():
    model = PollingModel.from_params(0.1, Erlang(2, 4.0), 1.5, 0.2, Pareto(1.5, 1.0), 0.5)
    assert PollingModel.from_dict(model.to_dict()) == model


def test_model_dict_errors_name_the_key():
    doc = base_polling_model().to_dict()
    doc["c1"] = -1.0
    with pytest.raises(ValidationError) as info:
        PollingModel.from_dict(doc)
    assert info.value.key == "c1"
    doc = base_polling_model().to_dict()
    doc["extra"] = 1
    with pytest.raises(ValidationError) as info:
        PollingModel.from_dict(doc)
    assert info.value.key == "extra"
    with pytest.raises(ValidationError) as info:
        service_from_dict({"kind": "exponential", "rate": 1.0, "shape": 2})
    assert info.value.key == "service"


def test_stability_bounds():
    report = check_stability(base_polling_model(c1=1.0, c2=3.0))
    assert report.bound1 == pytest.approx(0.75)
    assert report.bound2 == pytest.approx(0.25)
    assert report.stable
    assert not check_stability(base_polling_model(lam=0.3, c1=1.0, c2=3.0)).stable


@settings(max_examples=60, deadline=None)
@given(
    rate=st.floats(0.1, 10.0),
    s1=st.floats(0.0, 20.0),
    ds=st.floats(1e-3, 20.0),
)
def test_exponential_lst_is_a_decreasing_probability(rate, s1, ds):
    dist = Exponential(rate)
    a, b = complex(dist.lst(s1)).real, complex(dist.lst(s1 + ds)).real
    assert 0.0 < b < a <= 1.0


@settings(max_examples=60, deadline=None)
@given(lam1=st.floats(0.0, 2.0), c1=st.floats(0.05, 5.0), c2=st.floats(0.05, 5.0))
def test_stability_is_invariant_under_relabelling(lam1, c1, c2):
    model = base_polling_model(lam=lam1, c1=c1, c2=c2, lam2=0.01)
    a, b = check_stability(model), check_stability(model.swapped())
    assert a.stable == b.stable
    assert a.bound1 + a.bound2 == pytest.approx(1.0)
