"""Heavy-traffic limits and tail asymptotics of the queue-1 workload.

Light-tailed heavy traffic: ``a0 * V1`` converges to an exponential law with
mean ``a1`` as the load of queue 1 approaches ``c2 / (c1 + c2)``. Heavy tails:
for Pareto service at queue 1 the workload tail is regularly varying with the
same index as the integrated service tail.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import (
    AsymmetricModel,
    InfiniteMoment,
    NotRegularlyVarying,
    QuadratureFailure,
    Unstable,
    ValidationError,
)
from .model import Pareto, PollingModel, QueueParams
from .transforms import marginal_workload_lst, workload_mean, y_expansion

__all__ = [
    "HeavyTrafficCoefficients",
    "TailAsymptote",
    "WorkConservationGap",
    "ht_coefficients",
    "ht_limit_mean",
    "ht_scaled_lst",
    "ht_limit_lst",
    "with_gap",
    "heavy_tail_asymptote",
    "subexp_tail_approx",
    "one_big_jump_integral",
    "contraction_delta",
    "mittag_leffler_limit_lst",
    "work_conservation_gap",
]


@dataclass(frozen=True)
class HeavyTrafficCoefficients:
    """Expansion coefficients; ``a0`` is the distance to the stability bound."""

    a0: float
    a1: float
    a2: float

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TailAsymptote:
    """``P(X > x) ~ prefactor * x ** exponent`` as ``x -> infinity``."""

    prefactor: float
    exponent: float
    note: str

    def __call__(self, x):
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class WorkConservationGap:
    polling_total: float
    conserving_total: float

    def to_dict(self):
        return dataclasses.asdict(self)


def _gap(model: PollingModel) -> float:
    return model.c2 / (model.c1 + model.c2) - model.q1.rho


def _require_stable(model: PollingModel) -> float:
    gap = _gap(model)
    if not gap > 0:
        raise Unstable(f"queue 1 is unstable: distance to the load bound is {gap:.6g}")
    return gap


def ht_coefficients(model: PollingModel) -> HeavyTrafficCoefficients:
    """Coefficients ``(a0, a1, a2)`` for queue 1; ``a0 <= 0`` is reported, not rejected."""
    q = model.q1
    return HeavyTrafficCoefficients(*y_expansion(q.lam, q.service, model.c1, model.c2))


def ht_limit_mean(model: PollingModel) -> float:
    """Mean of the exponential heavy-traffic limit of ``a0 * V1``.

    This is ``a1`` evaluated at the critical load ``c2 / (c1 + c2)``.
    """
    dist = model.q1.service
    m1, m2 = dist.moment(1), dist.moment(2)
    if math.isinf(m2):
        raise InfiniteMoment("heavy-traffic mean needs E B^2 < inf")
    c1, c2 = model.c1, model.c2
    csum = c1 + c2
    return c1 * c2 / csum**3 + (c2 / csum) * m2 / (2.0 * m1)


def ht_scaled_lst(model: PollingModel, s):
    """``E exp(-s * a0 * V1)``, evaluated exactly from the workload LST."""
    gap = _require_stable(model)
    return marginal_workload_lst(model, 1, np.asarray(s) * gap if np.ndim(s) else s * gap)


def ht_limit_lst(model: PollingModel, s):
    """Exponential limit form ``1 / (1 + s * a1)`` at the model's current load."""
    a1 = ht_coefficients(model).a1
    return 1.0 / (1.0 + np.asarray(s, dtype=float) * a1) if np.ndim(s) else 1.0 / (1.0 + s * a1)


def with_gap(model: PollingModel, gap: float) -> PollingModel:
    """Copy of ``model`` with ``lambda1`` tuned so queue 1 sits ``gap`` below its bound."""
    if not gap > 0:
        raise ValidationError("gap must be positive", key="gap")
    bound = model.c2 / (model.c1 + model.c2)
    if gap >= bound:
        raise ValidationError("gap exceeds the load bound", key="gap")
    lam = (bound - gap) / model.q1.service.moment(1)
    return PollingModel(QueueParams(lam, model.q1.service, model.q1.c), model.q2)


def _pareto(model: PollingModel) -> Pareto:
    dist = model.q1.service
    if not isinstance(dist, Pareto):
        raise NotRegularlyVarying("queue 1 service must be Pareto")
    if not 1.0 < dist.index < 2.0:
        raise NotRegularlyVarying(f"tail index must lie in (1, 2), got {dist.index}")
    return dist


def heavy_tail_asymptote(model: PollingModel, which: str = "V1") -> TailAsymptote:
    """Regularly varying tail of ``V1`` or of one of its two independent parts.

    ``which`` is ``"V1"`` (the workload), ``"MG1"`` (the plain M/G/1 workload)
    or ``"Y"`` (the extra term caused by the server's absences). The constant
    ``scale ** index`` of the Pareto tail is folded into the prefactor.
    """
    dist = _pareto(model)
    gap = _require_stable(model)
    nu, mean = dist.index, dist.moment(1)
    rho = model.q1.rho
    c1, c2 = model.c1, model.c2
    base = dist.slowly_varying_constant / (mean * (nu - 1.0))
    if which == "V1":
        prefactor = rho / gap * base
    elif which == "MG1":
        prefactor = rho / (1.0 - rho) * base
    elif which == "Y":
        prefactor = rho * c1 / ((1.0 - rho) * (c2 - rho * (c1 + c2))) * base
    else:
        raise ValidationError(f"which must be V1, MG1 or Y, got {which!r}", key="which")
    return TailAsymptote(prefactor, 1.0 - nu, f"P({which} > x) ~ C x^(1-nu) as x -> inf")


def subexp_tail_approx(model: PollingModel, x):
    """``P(V1 > x)`` for large ``x`` from the integrated service tail."""
    gap = _require_stable(model)
    rho = model.q1.rho
    if math.isinf(model.q1.service.moment(1)):
        raise InfiniteMoment("needs a finite mean service time")
    value = rho / gap * np.asarray(model.q1.service.residual_survival(x), dtype=float)
    return float(value) if np.ndim(x) == 0 else value


def one_big_jump_integral(model: PollingModel, x: float, *, epsabs: float = 1e-12) -> float:
    """``lambda1 * int_0^inf P(B > x + y * gap) dy`` by adaptive quadrature.

    A single large service requirement arriving ``y`` time units before the
    observation epoch overshoots ``x`` if it exceeds ``x + y * gap``, since the
    workload otherwise drains at the net rate ``gap``.
    """
    gap = _require_stable(model)
    dist = model.q1.service
    lam = model.q1.lam

    # substitute y = scale * t / gap so the integrand varies on an O(1) range of t
    kink = getattr(dist, "scale", getattr(dist, "value", None))
    scale = max(x, kink or 0.0, dist.moment(1))

    def integrand(t):
        return float(dist.survival(x + scale * t))

    # split where the integrand has a kink (Pareto scale, Deterministic value)
    bounds = [0.0]
    if kink is not None and kink > x:
        bounds.append((kink - x) / scale)
    bounds.append(np.inf)
    total, err = 0.0, 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        value, abserr, info, *msg = integrate.quad(
            integrand, lo, hi, epsabs=epsabs, epsrel=1e-12, limit=500, full_output=1
        )
        total += value
        err += abserr
    if not err <= 1e-8 * max(1.0, abs(total)):
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} too large")
    return lam * total * scale / gap


def contraction_delta(model: PollingModel, nu: float | None = None) -> float:
    """Root ``x`` of ``x ** (nu - 1) * L(1 / x) = gap / rho1`` for a Pareto tail.

    With the constant slowly varying factor ``L = scale ** nu`` the root is
    explicit. It tends to 0 as the load approaches the bound.
    """
    dist = _pareto(model)
    nu = dist.index if nu is None else float(nu)
    if not 1.0 < nu < 2.0:
        raise NotRegularlyVarying(f"tail index must lie in (1, 2), got {nu}")
    gap = _require_stable(model)
    rho = model.q1.rho
    return (gap / (rho * dist.scale**nu)) ** (1.0 / (nu - 1.0))


def mittag_leffler_limit_lst(mean_b: float, nu: float, s):
    """LST ``1 / (1 + (mean_b * s) ** (nu - 1))`` of the heavy-traffic limit."""
    s = np.asarray(s, dtype=float)
    value = 1.0 / (1.0 + mean_b ** (nu - 1.0) * s ** (nu - 1.0))
    return float(value) if value.ndim == 0 else value


def work_conservation_gap(model: PollingModel) -> WorkConservationGap:
    """Total mean workload of the symmetric polling model vs. a work-conserving server.

    The work-conserving total is the M/G/1 mean workload at the combined load.
    """
    if model.q1 != model.q2:
        raise AsymmetricModel("work_conservation_gap needs identical queues")
    q = model.q1
    m1, m2 = q.service.moment(1), q.service.moment(2)
    polling = 2.0 * workload_mean(model, 1)
    total_load = 2.0 * q.rho
    conserving = total_load / (1.0 - total_load) * m2 / (2.0 * m1)
    return WorkConservationGap(polling, conserving)
