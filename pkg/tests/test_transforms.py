import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from polling_lab import Deterministic, Erlang, Exponential, HyperExponential, Pareto, PollingModel
from polling_lab.errors import HeavyTailNoClosedFormLst, InfiniteMoment, Unstable, ValidationError
from polling_lab.transforms import (
    busy_period_lst,
    invert_workload_cdf,
    marginal_workload_lst,
    mg1_workload_lst,
    mg1_workload_mean,
    mg1_workload_variance,
    switch_epoch_lst,
    switch_epoch_mean,
    visit_end_lst,
    workload_atom_at_zero,
    workload_mean,
    workload_moments,
    workload_variance,
    y_lst,
    y_mean,
    y_variance,
)

from conftest import LIGHT_SERVICES, base_polling_model


def _symbolic_lst(lam, mu, c1, c2):
    """Workload LST of queue 1 with Exp(mu) service, built symbolically."""
    s = sp.symbols("s", positive=True)
    lam, mu, c1, c2 = (sp.nsimplify(v) for v in (lam, mu, c1, c2))
    f = lam * (1 - mu / (mu + s))
    rho = lam / mu
    expr = s * (rho * (c1 + c2) - c2) * (c1 + c2 + f) / (((c2 + f) * (c1 + f - s) - c1 * c2) * (c1 + c2))
    return s, sp.simplify(expr)


def _symbolic_moments(lam, mu, c1, c2):
    s, expr = _symbolic_lst(lam, mu, c1, c2)
    series = sp.series(expr, s, 0, 3).removeO()
    m1 = -series.coeff(s, 1)
    m2 = 2 * series.coeff(s, 2)
    return float(m1), float(m2 - m1**2), float(sp.limit(expr, s, sp.oo))


# ---------------------------------------------------------------- frozen values

def test_base_model_moments_frozen():
    # frozen from the symbolic oracle below
    model = base_polling_model()
    assert workload_mean(model) == pytest.approx(0.3125, rel=1e-14)
    assert workload_variance(model) == pytest.approx(0.72890625, rel=1e-12)
    assert y_mean(model) == pytest.approx(0.2013888888888889, rel=1e-12)
    assert switch_epoch_mean(model) == pytest.approx(0.3625, rel=1e-12)
    assert workload_atom_at_zero(model) == pytest.approx(0.7636363636363637, rel=1e-12)


@pytest.mark.parametrize(
    "lam, mu, c1, c2",
    [(0.1, 1.0, 1.0, 1.0), (0.3, 2.0, 0.5, 1.5), (0.05, 0.5, 2.0, 3.0), (0.2, 1.0, 0.3, 0.9)],
)
def test_moments_match_symbolic_derivatives(lam, mu, c1, c2):
    mean, var, atom = _symbolic_moments(lam, mu, c1, c2)
    model = PollingModel.from_params(lam, Exponential(mu), c1, 0.01, Exponential(1.0), c2)
    assert workload_mean(model) == pytest.approx(mean, rel=1e-12)
    assert workload_variance(model) == pytest.approx(var, rel=1e-12)
    assert workload_atom_at_zero(model) == pytest.approx(atom, rel=1e-12)


def test_lst_matches_symbolic_form():
    s, expr = _symbolic_lst(0.3, 2.0, 0.5, 1.5)
    fn = sp.lambdify(s, expr, "mpmath")
    model = PollingModel.from_params(0.3, Exponential(2.0), 0.5, 0.1, Exponential(1.0), 1.5)
    for x in (0.01, 0.5, 3.0, 40.0, 2.0 + 5.0j):
        assert complex(marginal_workload_lst(model, 1, x)) == pytest.approx(complex(fn(x)), rel=1e-12)


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
def test_variance_matches_numerical_second_derivative(name):
    model = base_polling_model(lam=0.2, service=LIGHT_SERVICES[name], c1=0.7, c2=1.3)
    h = 1e-3
    lst = lambda x: complex(marginal_workload_lst(model, 1, x)).real  # noqa: E731
    # Richardson-extrapolated one-sided differences at 0
    def second(h):
        return (lst(2 * h) - 2 * lst(h) + 1.0) / h**2 - (lst(3 * h) - 3 * lst(2 * h) + 3 * lst(h) - 1.0) / h**2
    m2 = (4 * second(h / 2) - second(h)) / 3
    mean = workload_mean(model)
    assert workload_variance(model) == pytest.approx(m2 - mean**2, rel=1e-5)


# ---------------------------------------------------------------- busy period and P-K

@pytest.mark.parametrize("s", [0.0, 0.2, 1.0, 5.0])
def test_busy_period_matches_mm1_closed_form(s):
    lam, mu = 0.4, 1.0
    closed = (lam + mu + s - math.sqrt((lam + mu + s) ** 2 - 4 * lam * mu)) / (2 * lam)
    assert complex(busy_period_lst(lam, Exponential(mu), s)).real == pytest.approx(closed, rel=1e-11)


def test_busy_period_rejects_heavy_tail_and_critical_load():
    with pytest.raises(HeavyTailNoClosedFormLst):
        busy_period_lst(0.1, Pareto(1.5, 1.0), 1.0)
    with pytest.raises(Unstable):
        busy_period_lst(1.0, Exponential(1.0), 0.0)


def test_mg1_moments_are_classical():
    # M/M/1 workload: P(V > x) = rho exp(-(mu - lam) x)
    lam, mu = 0.4, 1.0
    rho = lam / mu
    assert mg1_workload_mean(lam, Exponential(mu)) == pytest.approx(rho / (mu - lam))
    second = 2 * rho / (mu - lam) ** 2
    assert mg1_workload_variance(lam, Exponential(mu)) == pytest.approx(second - (rho / (mu - lam)) ** 2)
    s = 0.7
    assert complex(mg1_workload_lst(lam, Exponential(mu), s)).real == pytest.approx(
        1 - rho + rho * (mu - lam) / (mu - lam + s)
    )


# ---------------------------------------------------------------- structure

@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
def test_decomposition_identity(name):
    model = base_polling_model(lam=0.15, service=LIGHT_SERVICES[name], c1=0.8, c2=1.1)
    dist = model.q1.service
    s = np.concatenate([np.linspace(0, 10, 30), 0.5 + 1j * np.linspace(-8, 8, 20)])
    lhs = marginal_workload_lst(model, 1, s)
    rhs = mg1_workload_lst(0.15, dist, s) * y_lst(model, 1, s)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_queue_two_is_queue_one_of_swapped_model():
    model = PollingModel.from_params(0.1, Erlang(2, 2.0), 0.6, 0.2, Exponential(1.5), 1.4)
    s = np.array([0.1, 1.0, 4.0])
    np.testing.assert_array_equal(marginal_workload_lst(model, 2, s), marginal_workload_lst(model.swapped(), 1, s))
    assert workload_moments(model, 2) == workload_moments(model.swapped(), 1)


def test_zero_branch_is_continuous():
    model = base_polling_model()
    for fn in (lambda x: marginal_workload_lst(model, 1, x), lambda x: switch_epoch_lst(model, x)):
        near, at = complex(fn(2e-9)), complex(fn(5e-10))
        assert abs(near - at) < 1e-8
        assert complex(fn(0.0)) == 1.0


def test_switch_epoch_and_visit_end_transforms():
    model = base_polling_model()
    h = 1e-6
    sw = lambda x: complex(switch_epoch_lst(model, x)).real  # noqa: E731
    assert (1.0 - sw(h)) / h == pytest.approx(switch_epoch_mean(model), rel=1e-5)
    # frozen values at the acceptance points (symbolic evaluation gives 90/101, 320/379, 360/449)
    assert sw(0.5) == pytest.approx(90 / 101, rel=1e-13)
    assert sw(1.0) == pytest.approx(320 / 379, rel=1e-13)
    assert sw(2.0) == pytest.approx(360 / 449, rel=1e-13)
    assert complex(visit_end_lst(model, 0.0)) == pytest.approx(1.0)
    # a visit to queue 2 only adds work, so the end-of-visit workload is stochastically smaller
    assert complex(visit_end_lst(model, 1.0)).real > sw(1.0)


def test_switch_epoch_fractions_are_symbolic():
    lam, mu, c = sp.Rational(1, 10), 1, 1
    s = sp.symbols("s")
    f = lam * (1 - mu / (mu + s))
    rho = lam / mu
    expr = s * (rho * 2 * c - c) / ((2 * c - s) * f + f**2 - s * c)
    assert [sp.nsimplify(expr.subs(s, x)) for x in (sp.Rational(1, 2), 1, 2)] == [
        sp.Rational(90, 101),
        sp.Rational(320, 379),
        sp.Rational(360, 449),
    ]


def test_errors():
    with pytest.raises(Unstable):
        workload_mean(base_polling_model(lam=0.5))
    with pytest.raises(HeavyTailNoClosedFormLst):
        marginal_workload_lst(base_polling_model(service=Pareto(1.5, 1.0)), 1, 1.0)
    with pytest.raises(InfiniteMoment):
        workload_mean(base_polling_model(service=Pareto(1.5, 1.0)))
    with pytest.raises(InfiniteMoment):
        y_variance(base_polling_model(service=Pareto(2.5, 1.0)))
    with pytest.raises(ValidationError):
        marginal_workload_lst(base_polling_model(), 1, -1.0)
    with pytest.raises(ValidationError):
        workload_mean(base_polling_model(), 3)


@pytest.mark.parametrize("name", sorted(LIGHT_SERVICES))
def test_degenerates_to_mg1_when_server_rarely_leaves(name):
    dist = LIGHT_SERVICES[name]
    lam = 0.3 / dist.moment(1)
    model = base_polling_model(lam=lam, service=dist, c2=1e8)
    m1, m2, m3 = dist.moment(1), dist.moment(2), dist.moment(3)
    rho = lam * m1
    assert workload_mean(model) == pytest.approx(lam * m2 / (2 * (1 - rho)), rel=1e-6)
    classical = lam * m3 / (3 * (1 - rho)) + (lam * m2) ** 2 / (4 * (1 - rho) ** 2)
    assert workload_variance(model) == pytest.approx(classical, rel=1e-6)


# ---------------------------------------------------------------- inversion

@pytest.mark.parametrize("name", ["exp", "erlang", "hyper"])
def test_cdf_inversion_matches_de_hoog(name):
    model = base_polling_model(lam=0.2, service=LIGHT_SERVICES[name], c1=0.9, c2=1.2)
    xs = np.array([0.25, 1.0, 3.0, 8.0])
    ours = invert_workload_cdf(model, 1, xs)
    mpmath.mp.dps = 30

    def transform(p):
        return mpmath.mpc(complex(marginal_workload_lst(model, 1, complex(p)))) / p

    ref = [float(mpmath.invertlaplace(transform, float(x), method="dehoog")) for x in xs]
    np.testing.assert_allclose(ours, ref, atol=1e-7)


def test_cdf_inversion_exponential_mm1_limit():
    # with c2 huge the workload is M/M/1: P(V <= x) = 1 - rho exp(-(mu - lam) x)
    model = base_polling_model(lam=0.5, c2=1e8)
    xs = np.array([0.0, 0.5, 2.0, 6.0])
    np.testing.assert_allclose(invert_workload_cdf(model, 1, xs), 1 - 0.5 * np.exp(-0.5 * xs), atol=1e-6)


def test_cdf_is_monotone_and_starts_at_atom():
    model = base_polling_model()
    xs = np.linspace(0, 20, 41)
    cdf = invert_workload_cdf(model, 1, xs)
    assert cdf[0] == pytest.approx(workload_atom_at_zero(model))
    assert np.all(np.diff(cdf) >= -1e-9)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------- properties

_light = st.sampled_from(sorted(LIGHT_SERVICES))


@settings(max_examples=80, deadline=None)
@given(
    name=_light,
    load=st.floats(0.01, 0.95),
    c1=st.floats(0.05, 5.0),
    c2=st.floats(0.05, 5.0),
    s=st.complex_numbers(max_magnitude=50.0, allow_nan=False, allow_infinity=False),
)
def test_lst_properties(name, load, c1, c2, s):
    assume(s.real >= 0)
    dist = LIGHT_SERVICES[name]
    lam = load * c2 / (c1 + c2) / dist.moment(1)
    model = base_polling_model(lam=lam, service=dist, c1=c1, c2=c2)
    value = complex(marginal_workload_lst(model, 1, s))
    assert abs(value) <= 1.0 + 1e-9
    decomposed = complex(mg1_workload_lst(lam, dist, s)) * complex(y_lst(model, 1, s))
    assert abs(value - decomposed) <= 1e-9 * max(1.0, abs(value))
    assert workload_variance(model) >= 0.0
    assert workload_mean(model) >= mg1_workload_mean(lam, dist)
    assert 0.0 <= workload_atom_at_zero(model) <= 1.0 - lam * dist.moment(1) + 1e-12


@settings(max_examples=40, deadline=None)
@given(load=st.floats(0.05, 0.9), c1=st.floats(0.1, 3.0), c2=st.floats(0.1, 3.0), a=st.floats(0.01, 5.0), b=st.floats(0.01, 5.0))
def test_real_lst_is_decreasing(load, c1, c2, a, b):
    assume(abs(a - b) > 1e-3)
    lam = load * c2 / (c1 + c2)
    model = base_polling_model(lam=lam, c1=c1, c2=c2)
    lo, hi = sorted((a, b))
    assert complex(marginal_workload_lst(model, 1, hi)).real < complex(marginal_workload_lst(model, 1, lo)).real
