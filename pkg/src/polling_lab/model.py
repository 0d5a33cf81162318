"""Model parameters, service-time laws and the stability test.

Every service law exposes the same small surface: raw moments up to order
three, the Laplace-Stieltjes transform (LST) ``E exp(-s B)`` for light-tailed
laws, a numerically stable ``1 - LST`` companion, the survival function, the
survival function of the residual (equilibrium) law, and a vectorised sampler
driven by a caller-owned :class:`numpy.random.Generator`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import special

from .errors import HeavyTailNoClosedFormLst, ValidationError

__all__ = [
    "ServiceDistribution",
    "Exponential",
    "Deterministic",
    "Erlang",
    "HyperExponential",
    "Pareto",
    "QueueParams",
    "PollingModel",
    "StabilityReport",
    "moment",
    "service_lst",
    "survival",
    "residual_survival",
    "check_stability",
    "sample",
    "service_from_dict",
]


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a finite positive number, got {value!r}", key=name)
    return float(value)


class ServiceDistribution:
    """Common interface of the service-time laws."""

    kind: ClassVar[str] = ""
    heavy_tailed: ClassVar[bool] = False

    def moment(self, k: int) -> float:
        raise NotImplementedError

    def lst(self, s):
        raise NotImplementedError

    def lst_complement(self, s):
        """``1 - lst(s)`` without cancellation for small ``|s|``."""
        raise NotImplementedError

    def lst_derivative(self, s):
        raise NotImplementedError

    def survival(self, x):
        raise NotImplementedError

    def residual_survival(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}

    @property
    def mean(self) -> float:
        return self.moment(1)

    def _check_order(self, k):
        if k not in (1, 2, 3):
            raise ValidationError(f"moment order must be 1, 2 or 3, got {k!r}", key="k")


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def moment(self, k):
        self._check_order(k)
        return math.factorial(k) / self.rate**k

    def lst(self, s):
        return self.rate / (self.rate + s)

    def lst_complement(self, s):
        return s / (self.rate + s)

    def lst_derivative(self, s):
        return -self.rate / (self.rate + s) ** 2

    def survival(self, x):
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def residual_survival(self, x):
        return self.survival(x)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    value: float
    kind: ClassVar[str] = "deterministic"

    def __post_init__(self):
        object.__setattr__(self, "value", _positive("value", self.value))

    def moment(self, k):
        self._check_order(k)
        return self.value**k

    def lst(self, s):
        return np.exp(-s * self.value)

    def lst_complement(self, s):
        return -np.expm1(-s * self.value)

    def lst_derivative(self, s):
        return -self.value * np.exp(-s * self.value)

    def survival(self, x):
        return np.where(np.asarray(x) < self.value, 1.0, 0.0)

    def residual_survival(self, x):
        return np.clip(self.value - np.maximum(x, 0.0), 0.0, None) / self.value

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True)
class Erlang(ServiceDistribution):
    shape: int
    rate: float
    kind: ClassVar[str] = "erlang"

    def __post_init__(self):
        if isinstance(self.shape, bool) or not isinstance(self.shape, (int, np.integer)) or self.shape < 1:
            raise ValidationError(f"shape must be a positive integer, got {self.shape!r}", key="shape")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def moment(self, k):
        self._check_order(k)
        num = 1.0
        for j in range(k):
            num *= self.shape + j
        return num / self.rate**k

    def lst(self, s):
        return (self.rate / (self.rate + s)) ** self.shape

    def lst_complement(self, s):
        return -np.expm1(-self.shape * np.log1p(s / self.rate))

    def lst_derivative(self, s):
        return -self.shape * self.rate**self.shape / (self.rate + s) ** (self.shape + 1)

    def survival(self, x):
        return special.gammaincc(self.shape, self.rate * np.maximum(x, 0.0))

    def residual_survival(self, x):
        z = self.rate * np.maximum(x, 0.0)
        return sum(special.gammaincc(j, z) for j in range(1, self.shape + 1)) / self.shape

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def params(self):
        return {"shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class HyperExponential(ServiceDistribution):
    probs: tuple
    rates: tuple
    kind: ClassVar[str] = "hyperexponential"

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        rates = tuple(_positive("rates", r) for r in self.rates)
        if len(probs) != len(rates) or not probs:
            raise ValidationError("probs and rates must be non-empty and of equal length", key="probs")
        if any(not (0.0 < p <= 1.0) for p in probs):
            raise ValidationError("every branch probability must lie in (0, 1]", key="probs")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValidationError(f"probs must sum to 1 (got {sum(probs)!r})", key="probs")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rates", rates)

    def moment(self, k):
        self._check_order(k)
        return sum(p * math.factorial(k) / r**k for p, r in zip(self.probs, self.rates))

    def lst(self, s):
        return sum(p * r / (r + s) for p, r in zip(self.probs, self.rates))

    def lst_complement(self, s):
        return sum(p * s / (r + s) for p, r in zip(self.probs, self.rates))

    def lst_derivative(self, s):
        return sum(-p * r / (r + s) ** 2 for p, r in zip(self.probs, self.rates))

    def survival(self, x):
        x = np.maximum(x, 0.0)
        return sum(p * np.exp(-r * x) for p, r in zip(self.probs, self.rates))

    def residual_survival(self, x):
        x = np.maximum(x, 0.0)
        tail = sum(p * np.exp(-r * x) / r for p, r in zip(self.probs, self.rates))
        return tail / self.moment(1)

    def sample(self, rng, size=None):
        rates = np.asarray(self.rates)
        branch = rng.choice(len(rates), size=size, p=np.asarray(self.probs))
        return rng.exponential(1.0 / rates[branch])

    def params(self):
        return {"probs": list(self.probs), "rates": list(self.rates)}


@dataclass(frozen=True)
class Pareto(ServiceDistribution):
    """Pareto law ``P(B > x) = (scale / x) ** index`` for ``x >= scale``.

    The slowly varying factor of the regularly varying tail is the constant
    ``scale ** index``.
    """

    index: float
    scale: float
    kind: ClassVar[str] = "pareto"
    heavy_tailed: ClassVar[bool] = True

    def __post_init__(self):
        index = _positive("index", self.index)
        if index <= 1.0:
            raise ValidationError("Pareto index must exceed 1 (finite mean)", key="index")
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    @property
    def slowly_varying_constant(self) -> float:
        return self.scale**self.index

    def moment(self, k):
        self._check_order(k)
        if self.index <= k:
            return math.inf
        return self.index * self.scale**k / (self.index - k)

    def lst(self, s):
        raise HeavyTailNoClosedFormLst("the Pareto LST has no closed form; use tail asymptotics")

    lst_complement = lst
    lst_derivative = lst

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            tail = (self.scale / np.maximum(x, self.scale)) ** self.index
        return np.where(x < self.scale, 1.0, tail)

    def residual_survival(self, x):
        x = np.asarray(x, dtype=float)
        nu, xm = self.index, self.scale
        mean = self.moment(1)
        far = xm ** (nu - 1.0) * np.maximum(x, xm) ** (1.0 - nu) / nu
        near = (xm - np.maximum(x, 0.0) + xm / (nu - 1.0)) / mean
        return np.where(x < xm, near, far)

    def sample(self, rng, size=None):
        return self.scale * (1.0 + rng.pareto(self.index, size))

    def params(self):
        return {"index": self.index, "scale": self.scale}


_KINDS = {cls.kind: cls for cls in (Exponential, Deterministic, Erlang, HyperExponential, Pareto)}
_PARAMS = {
    "exponential": ("rate",),
    "deterministic": ("value",),
    "erlang": ("shape", "rate"),
    "hyperexponential": ("probs", "rates"),
    "pareto": ("index", "scale"),
}


def service_from_dict(doc: dict, key: str = "service") -> ServiceDistribution:
    """Build a service law from ``{"kind": ..., <params>}``; unknown keys are rejected."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValidationError(f"{key} must be an object with a 'kind' field", key=key)
    kind = doc["kind"]
    if kind not in _KINDS:
        raise ValidationError(f"{key}.kind must be one of {sorted(_KINDS)}, got {kind!r}", key=f"{key}.kind")
    expected = set(_PARAMS[kind])
    given = set(doc) - {"kind"}
    if given - expected:
        raise ValidationError(f"unknown keys in {key}: {sorted(given - expected)}", key=key)
    if expected - given:
        raise ValidationError(f"missing keys in {key}: {sorted(expected - given)}", key=key)
    try:
        return _KINDS[kind](**{name: doc[name] for name in _PARAMS[kind]})
    except ValidationError as exc:
        raise ValidationError(str(exc), key=f"{key}.{exc.key}" if exc.key else key) from None
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {key}: {exc}", key=key) from None


@dataclass(frozen=True)
class QueueParams:
    lam: float
    service: ServiceDistribution
    c: float

    def __post_init__(self):
        lam = self.lam
        if not (isinstance(lam, (int, float)) and math.isfinite(lam) and lam >= 0):
            raise ValidationError(f"lambda must be finite and >= 0, got {lam!r}", key="lambda")
        object.__setattr__(self, "lam", float(lam))
        object.__setattr__(self, "c", _positive("c", self.c))
        if not isinstance(self.service, ServiceDistribution):
            raise ValidationError("service must be a ServiceDistribution", key="service")

    @property
    def rho(self) -> float:
        return self.lam * self.service.moment(1)


@dataclass(frozen=True)
class PollingModel:
    """Two queues served by one server with exponential residing times.

    Construction never checks stability; see :func:`check_stability`.
    """

    q1: QueueParams
    q2: QueueParams

    @classmethod
    def from_params(cls, lambda1, service1, c1, lambda2, service2, c2):
        return cls(QueueParams(lambda1, service1, c1), QueueParams(lambda2, service2, c2))

    def queue(self, index: int) -> QueueParams:
        if index == 1:
            return self.q1
        if index == 2:
            return self.q2
        raise ValidationError(f"queue_index must be 1 or 2, got {index!r}", key="queue_index")

    def swapped(self) -> "PollingModel":
        return PollingModel(self.q2, self.q1)

    def oriented(self, index: int) -> "PollingModel":
        """The model relabelled so that queue ``index`` becomes queue 1."""
        self.queue(index)
        return self if index == 1 else self.swapped()

    @property
    def c1(self):
        return self.q1.c

    @property
    def c2(self):
        return self.q2.c

    def to_dict(self) -> dict:
        out = {}
        for i, q in ((1, self.q1), (2, self.q2)):
            out[f"lambda{i}"] = q.lam
            out[f"service{i}"] = q.service.to_dict()
            out[f"c{i}"] = q.c
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "PollingModel":
        keys = {"lambda1", "service1", "c1", "lambda2", "service2", "c2"}
        if not isinstance(doc, dict):
            raise ValidationError("model must be an object", key="model")
        unknown = set(doc) - keys
        if unknown:
            raise ValidationError(f"unknown model keys: {sorted(unknown)}", key=sorted(unknown)[0])
        missing = keys - set(doc)
        if missing:
            raise ValidationError(f"missing model keys: {sorted(missing)}", key=sorted(missing)[0])
        queues = []
        for i in (1, 2):
            service = service_from_dict(doc[f"service{i}"], key=f"service{i}")
            try:
                queues.append(QueueParams(doc[f"lambda{i}"], service, doc[f"c{i}"]))
            except ValidationError as exc:
                name = {"lambda": f"lambda{i}", "c": f"c{i}"}.get(exc.key, exc.key)
                raise ValidationError(str(exc).replace(exc.key or "", name, 1), key=name) from None
        return cls(*queues)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    rho1: float
    rho2: float
    bound1: float
    bound2: float

    def to_dict(self):
        return {
            "stable": self.stable,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "bound1": self.bound1,
            "bound2": self.bound2,
        }


def check_stability(model: PollingModel) -> StabilityReport:
    """Queue i is stable iff its load is below the fraction of time the server spends there."""
    c1, c2 = model.c1, model.c2
    rho1, rho2 = model.q1.rho, model.q2.rho
    bound1, bound2 = c2 / (c1 + c2), c1 / (c1 + c2)
    return StabilityReport(rho1 < bound1 and rho2 < bound2, rho1, rho2, bound1, bound2)


def moment(dist: ServiceDistribution, k: int) -> float:
    return dist.moment(k)


def service_lst(dist: ServiceDistribution, s):
    if np.any(np.real(s) < 0):
        raise ValidationError("service LST needs Re s >= 0", key="s")
    return dist.lst(s)


def survival(dist: ServiceDistribution, x):
    return dist.survival(x)


def residual_survival(dist: ServiceDistribution, x):
    return dist.residual_survival(x)


def sample(dist: ServiceDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)
