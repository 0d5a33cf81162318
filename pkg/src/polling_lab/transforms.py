"""Transform-level results for the marginal workload of one queue.

All functions take the queue of interest as "queue 1": the model is relabelled
internally, so querying queue 2 of ``model`` is literally the same computation
as querying queue 1 of ``model.swapped()``.

Notation used in comments: ``lam``/``rho`` arrival rate and load of the queue,
``c_own`` the rate at which the server leaves it, ``c_other`` the rate at which
the server leaves the other queue, and ``f(s) = lam * (1 - b(s))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    HeavyTailNoClosedFormLst,
    InfiniteMoment,
    InversionAccuracyLoss,
    NonConvergence,
    Unstable,
    ValidationError,
)
from .model import PollingModel, ServiceDistribution

__all__ = [
    "WorkloadMoments",
    "busy_period_lst",
    "mg1_workload_lst",
    "mg1_workload_mean",
    "mg1_workload_variance",
    "marginal_workload_lst",
    "switch_epoch_lst",
    "visit_end_lst",
    "y_lst",
    "workload_mean",
    "workload_variance",
    "workload_moments",
    "y_mean",
    "y_variance",
    "switch_epoch_mean",
    "workload_atom_at_zero",
    "invert_workload_cdf",
    "EULER_A",
    "EULER_N",
    "EULER_M",
]

# Below this modulus the 0/0 forms are replaced by their first-order expansion.
ZERO_BRANCH = 1e-9

# Abate-Whitt EULER inversion (Fourier series + binomial averaging of partial
# sums). Discretisation error is about exp(-EULER_A) ~ 1e-8; roundoff grows like
# exp(EULER_A / 2) * machine epsilon ~ 1e-12.
EULER_A = 18.4
EULER_N = 38
EULER_M = 11
INVERSION_TOL = 1e-7


@dataclass(frozen=True)
class WorkloadMoments:
    mean: float
    variance: float


@dataclass(frozen=True)
class _Queue:
    lam: float
    dist: ServiceDistribution
    c_own: float
    c_other: float

    @property
    def rho(self):
        return self.lam * self.dist.moment(1)

    @property
    def csum(self):
        return self.c_own + self.c_other

    @property
    def share(self):
        """Long-run fraction of time the server attends this queue."""
        return self.c_other / self.csum


def _oriented(model: PollingModel, queue_index: int, *, need_lst=True, stable=True) -> _Queue:
    m = model.oriented(queue_index)
    q = _Queue(m.q1.lam, m.q1.service, m.q1.c, m.q2.c)
    if need_lst and q.dist.heavy_tailed:
        raise HeavyTailNoClosedFormLst(f"queue {queue_index} has heavy-tailed service; no closed-form LST")
    if stable and not q.rho < q.share:
        raise Unstable(
            f"queue {queue_index} is unstable: rho={q.rho:.6g} >= c_other/(c1+c2)={q.share:.6g}"
        )
    return q


def _as_s(s):
    arr = np.asarray(s, dtype=complex)
    if np.any(arr.real < 0):
        raise ValidationError("transform argument needs Re s >= 0", key="s")
    return arr


def _finish(arr, original):
    if np.ndim(original) == 0:
        value = complex(arr)
        return value
    return arr


def _with_zero_branch(s, mean, evaluate):
    """Evaluate ``evaluate(s)`` but use ``1 - s * mean`` where ``|s|`` is tiny."""
    small = np.abs(s) < ZERO_BRANCH
    safe = np.where(small, 1.0, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = evaluate(safe)
    return np.where(small, 1.0 - s * mean, value)


def busy_period_lst(lam: float, dist: ServiceDistribution, s, *, max_iter: int = 100_000, tol: float = 1e-12):
    """Busy-period LST: the root of ``z = b(s + (1 - z) lam)`` of smallest modulus.

    Found by the fixed-point iteration ``z <- b(s + (1 - z) lam)`` from ``z = 0``,
    which increases monotonically to the root for real ``s >= 0``.
    """
    if dist.heavy_tailed:
        raise HeavyTailNoClosedFormLst("busy-period LST needs a closed-form service LST")
    s = complex(_as_s(s))
    if s == 0 and lam * dist.moment(1) >= 1:
        raise Unstable("busy period is defective when lam * E B >= 1")
    z = 0j
    for _ in range(max_iter):
        z_next = complex(dist.lst(s + (1 - z) * lam))
        if abs(z_next - z) <= 1e-15 * max(1.0, abs(z_next)):
            z = z_next
            break
        z = z_next
    else:
        raise NonConvergence(f"busy-period iteration did not converge in {max_iter} steps (near-critical?)")
    residual = abs(z - complex(dist.lst(s + (1 - z) * lam)))
    if residual > tol:
        raise NonConvergence(f"busy-period fixed point residual {residual:.3g} exceeds {tol:.1g}")
    return z


def mg1_workload_mean(lam: float, dist: ServiceDistribution) -> float:
    rho = lam * dist.moment(1)
    if rho >= 1:
        raise Unstable(f"M/G/1 queue unstable: rho={rho:.6g}")
    m2 = dist.moment(2)
    if math.isinf(m2):
        raise InfiniteMoment("M/G/1 mean workload needs E B^2 < inf")
    return lam * m2 / (2.0 * (1.0 - rho))


def mg1_workload_variance(lam: float, dist: ServiceDistribution) -> float:
    rho = lam * dist.moment(1)
    if rho >= 1:
        raise Unstable(f"M/G/1 queue unstable: rho={rho:.6g}")
    m2, m3 = dist.moment(2), dist.moment(3)
    if math.isinf(m3):
        raise InfiniteMoment("M/G/1 workload variance needs E B^3 < inf")
    return lam * m3 / (3.0 * (1.0 - rho)) + (lam * m2) ** 2 / (4.0 * (1.0 - rho) ** 2)


def mg1_workload_lst(lam: float, dist: ServiceDistribution, s):
    """Pollaczek-Khinchine workload LST ``(1 - rho) s / (s - lam (1 - b(s)))``."""
    if dist.heavy_tailed:
        raise HeavyTailNoClosedFormLst("M/G/1 LST needs a closed-form service LST")
    rho = lam * dist.moment(1)
    if rho >= 1:
        raise Unstable(f"M/G/1 queue unstable: rho={rho:.6g}")
    arr = _as_s(s)
    mean = mg1_workload_mean(lam, dist)

    def pk(x):
        return (1.0 - rho) * x / (x - lam * dist.lst_complement(x))

    return _finish(_with_zero_branch(arr, mean, pk), s)


def _denominator(q: _Queue, s, f):
    # (c_other + f)(c_own + f - s) - c_own c_other, expanded to avoid cancelling c_own c_other
    return (q.csum - s) * f + f * f - s * q.c_other


def marginal_workload_lst(model: PollingModel, queue_index: int, s):
    """Stationary LST ``E exp(-s V)`` of the workload at one queue."""
    q = _oriented(model, queue_index)
    arr = _as_s(s)

    def lst(x):
        f = q.lam * q.dist.lst_complement(x)
        num = x * (q.rho * q.csum - q.c_other) * (q.csum + f)
        return num / (_denominator(q, x, f) * q.csum)

    return _finish(_with_zero_branch(arr, _mean(q), lst), s)


def switch_epoch_lst(model: PollingModel, s, queue_index: int = 1):
    """LST of the workload at the moments the server returns to the queue.

    For queue 1 these are the ends of the visits to queue 2, i.e. the epochs
    ``T1 + T2`` of the cycle renewal process.
    """
    q = _oriented(model, queue_index)
    arr = _as_s(s)

    def lst(x):
        f = q.lam * q.dist.lst_complement(x)
        return x * (q.rho * q.csum - q.c_other) / _denominator(q, x, f)

    return _finish(_with_zero_branch(arr, _switch_mean(q), lst), s)


def visit_end_lst(model: PollingModel, s, queue_index: int = 1):
    """LST of the workload at the end of a visit to the queue.

    Obtained from :func:`switch_epoch_lst` by removing the compound-Poisson
    input during the exponential visit to the other queue.
    """
    q = _oriented(model, queue_index)
    arr = _as_s(s)
    sw = np.asarray(switch_epoch_lst(model, arr, queue_index))
    f = q.lam * q.dist.lst_complement(arr)
    return _finish(sw * (q.c_other + f) / q.c_other, s)


def y_lst(model: PollingModel, queue_index: int, s):
    """LST of the extra term ``Y`` with ``V =d V_MG1 + Y`` (independent)."""
    q = _oriented(model, queue_index)
    arr = _as_s(s)

    def lst(x):
        f = q.lam * q.dist.lst_complement(x)
        front = (q.c_other - q.rho * q.csum) / ((1.0 - q.rho) * q.csum)
        return front * (1.0 - x * q.c_own / _denominator(q, x, f))

    return _finish(_with_zero_branch(arr, _y_mean(q), lst), s)


def _mean(q: _Queue) -> float:
    m1, m2 = q.dist.moment(1), q.dist.moment(2)
    if math.isinf(m2):
        raise InfiniteMoment("mean workload needs E B^2 < inf")
    pref = q.rho * q.csum / (q.c_other - q.rho * q.csum)
    return pref * (0.5 * m2 / m1 + q.c_own / q.csum**2)


def _switch_mean(q: _Queue) -> float:
    return _mean(q) + q.rho / q.csum


def y_expansion(lam, dist, c_own, c_other):
    """Coefficients (A0, A1, A2) of the small-s expansion of ``E exp(-sY)``.

    ``E exp(-sY) = [A0 + w A0 / (A0 + s A1 - s^2 A2 / 2 + o(s^2))] / (1 - rho)``
    with ``w = c_own / (c_own + c_other)``.
    """
    m1, m2, m3 = dist.moment(1), dist.moment(2), dist.moment(3)
    if math.isinf(m3):
        raise InfiniteMoment("expansion coefficients need E B^3 < inf")
    csum = c_own + c_other
    rho = lam * m1
    a0 = c_other / csum - rho
    a1 = rho / csum * (1.0 - rho + 0.5 * csum * m2 / m1)
    a2 = rho / (3.0 * m1 * csum) * (csum * m3 + 3.0 * m2 - 6.0 * m2 * rho)
    return a0, a1, a2


def _y_mean(q: _Queue) -> float:
    return _mean(q) - mg1_workload_mean(q.lam, q.dist)


def _y_variance(q: _Queue) -> float:
    a0, a1, a2 = y_expansion(q.lam, q.dist, q.c_own, q.c_other)
    w = q.c_own / q.csum
    ratio = a1 / a0
    first = w * ratio / (1.0 - q.rho)
    second = w * (a2 / a0 + 2.0 * ratio**2) / (1.0 - q.rho)
    return second - first**2


def workload_mean(model: PollingModel, queue_index: int = 1) -> float:
    q = _oriented(model, queue_index, need_lst=False)
    return _mean(q)


def workload_variance(model: PollingModel, queue_index: int = 1) -> float:
    """Variance of the stationary workload, ``Var V_MG1 + Var Y``.

    ``Var Y`` comes from the second-order expansion coefficients (A0, A1, A2),
    so the value agrees with the second derivative of
    :func:`marginal_workload_lst` at 0.
    """
    q = _oriented(model, queue_index, need_lst=False)
    return mg1_workload_variance(q.lam, q.dist) + _y_variance(q)


def workload_moments(model: PollingModel, queue_index: int = 1) -> WorkloadMoments:
    return WorkloadMoments(workload_mean(model, queue_index), workload_variance(model, queue_index))


def y_mean(model: PollingModel, queue_index: int = 1) -> float:
    return _y_mean(_oriented(model, queue_index, need_lst=False))


def y_variance(model: PollingModel, queue_index: int = 1) -> float:
    return _y_variance(_oriented(model, queue_index, need_lst=False))


def switch_epoch_mean(model: PollingModel, queue_index: int = 1) -> float:
    return _switch_mean(_oriented(model, queue_index, need_lst=False))


def workload_atom_at_zero(model: PollingModel, queue_index: int = 1) -> float:
    """``P(V = 0)``: the limit of the workload LST as ``s -> infinity``.

    Valid for service laws without an atom at zero (all supported laws).
    """
    q = _oriented(model, queue_index, need_lst=False)
    return (q.c_other - q.rho * q.csum) * (q.csum + q.lam) / ((q.c_other + q.lam) * q.csum)


def _euler_inverse(transform, x, a=EULER_A, n=EULER_N, m=EULER_M):
    """Abate-Whitt EULER inversion of a Laplace transform at points ``x > 0``.

    Returns the estimate and the change in the estimate when one more term of
    the alternating series is included.
    """
    x = np.asarray(x, dtype=float)[:, None]
    k = np.arange(n + m + 2)
    s = (a + 2j * np.pi * k) / (2.0 * x)
    values = np.real(transform(s))
    terms = np.exp(a / 2.0) / x * (-1.0) ** k * values
    terms[:, 0] *= 0.5
    partial = np.cumsum(terms, axis=1)
    binom = np.array([math.comb(m, j) for j in range(m + 1)]) / 2.0**m
    est = partial[:, n : n + m + 1] @ binom
    est_next = partial[:, n + 1 : n + m + 2] @ binom
    return est, np.abs(est_next - est)


def invert_workload_cdf(model: PollingModel, queue_index: int, x):
    """``P(V <= x)`` by numerical inversion of ``E exp(-sV) / s``.

    Raises :class:`InversionAccuracyLoss` when the internal error estimate
    (tail of the Euler-summed series plus the discretisation bound
    ``exp(-A)``) exceeds ``1e-7``.
    """
    _oriented(model, queue_index)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0) or not np.all(np.isfinite(xs)):
        raise ValidationError("x must be finite and >= 0", key="x")
    out = np.empty_like(xs)
    zero = xs == 0
    out[zero] = workload_atom_at_zero(model, queue_index)
    if np.any(~zero):

        def transform(s):
            return marginal_workload_lst(model, queue_index, s) / s

        est, err = _euler_inverse(transform, xs[~zero])
        err = err + math.exp(-EULER_A)
        if np.any(err > INVERSION_TOL):
            worst = float(np.max(err))
            raise InversionAccuracyLoss(f"inversion error estimate {worst:.3g} exceeds {INVERSION_TOL:g}")
        out[~zero] = np.clip(est, 0.0, 1.0)
    if np.ndim(x) == 0:
        return float(out[0])
    return out
