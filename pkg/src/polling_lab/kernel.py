"""Kernel of the joint-workload functional equation in the symmetric model.

Only evaluation of the kernel and tracing of the closed contour on which
``K(z, conj(z)) = 0`` are provided; solving the resulting boundary value
problem is out of scope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import AsymmetricModel, HeavyTailNoClosedFormLst, RootNotFound, Unstable, ValidationError
from .model import PollingModel, ServiceDistribution

__all__ = ["SymmetricModel", "kernel_eval", "contour_point", "trace_contour"]


@dataclass(frozen=True)
class SymmetricModel:
    """Both queues share the arrival rate, service law and timer rate."""

    lam: float
    service: ServiceDistribution
    c: float

    def __post_init__(self):
        if self.service.heavy_tailed:
            raise HeavyTailNoClosedFormLst("the kernel needs a light-tailed service LST")
        if not (self.lam >= 0 and self.c > 0):
            raise ValidationError("need lam >= 0 and c > 0", key="lam" if self.lam < 0 else "c")
        rho = self.lam * self.service.moment(1)
        if not rho < 0.5:
            raise Unstable(f"symmetric model needs lam * E B < 1/2, got {rho:.6g}")

    @classmethod
    def from_model(cls, model: PollingModel) -> "SymmetricModel":
        if model.q1 != model.q2:
            raise AsymmetricModel("kernel tools need identical queues")
        return cls(model.q1.lam, model.q1.service, model.q1.c)

    def g(self, s):
        """``lam * (1 - b(s))``."""
        return self.lam * self.service.lst_complement(s)


def kernel_eval(sym: SymmetricModel, s1, s2):
    """``K(s1, s2) = c^2 - (c - s1 + g(s1) + g(s2)) (c - s2 + g(s1) + g(s2))``."""
    s1 = np.asarray(s1, dtype=complex)
    s2 = np.asarray(s2, dtype=complex)
    if np.any(s1.real < 0) or np.any(s2.real < 0):
        raise ValidationError("kernel needs Re s1, Re s2 >= 0", key="s")
    common = sym.c + sym.g(s1) + sym.g(s2)
    value = sym.c**2 - (common - s1) * (common - s2)
    return complex(value) if value.ndim == 0 else value


def _residual(sym: SymmetricModel, z: complex, theta: float) -> complex:
    return sym.c - z + 2.0 * sym.g(z).real - sym.c * complex(math.cos(theta), math.sin(theta))


def _newton(sym, theta, seed, tol, max_iter=100):
    """Damped complex Newton on ``c - z + 2 Re g(z) = c e^{i theta}``.

    ``Re g`` is not holomorphic, so the step uses the real 2x2 Jacobian of
    ``(x, y) -> (Re residual, Im residual)``, built from ``g'(z)``.
    """
    z = complex(seed)
    r = _residual(sym, z, theta)
    for _ in range(max_iter):
        if abs(r) < tol:
            return z
        dg = complex(-sym.lam * sym.service.lst_derivative(z))
        jac = np.array([[-1.0 + 2.0 * dg.real, -2.0 * dg.imag], [0.0, -1.0]])
        step = np.linalg.solve(jac, -np.array([r.real, r.imag]))
        delta = complex(step[0], step[1])
        lam_step = 1.0
        while True:
            candidate = z + lam_step * delta
            if candidate.real >= 0:
                rc = _residual(sym, candidate, theta)
                if abs(rc) < abs(r) or lam_step < 1e-6:
                    break
            lam_step *= 0.5
            if lam_step < 1e-12:
                return None
        z, r = candidate, rc
    return z if abs(r) < tol else None


def _bracketed(sym, theta, tol):
    """Real-line root of ``h(x) = c - x + 2 Re g(x + iy) - c cos(theta)`` with ``y`` fixed.

    The imaginary part of the equation forces ``Im z = -c sin(theta)``, and
    ``h`` is strictly decreasing because ``|d Re g / dx| <= rho < 1/2``.
    """
    y = -sym.c * math.sin(theta)

    def h(x):
        return _residual(sym, complex(x, y), theta).real

    lo, hi = 0.0, 2.0 * sym.c + 4.0 * sym.lam + 1.0
    h_lo = h(lo)
    if abs(h_lo) < tol:
        return complex(0.0, y)
    if h_lo < 0:
        return None
    while h(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            return None
    x = optimize.brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return complex(x, y)


def contour_point(sym: SymmetricModel, theta: float, seed: complex | None = None, *, tol: float = 1e-12) -> complex:
    """The point ``z(theta)`` with ``Re z >= 0`` on the kernel's zero contour.

    ``z`` solves ``c - z + 2 lam Re(1 - b(z)) = c e^{i theta}``; then
    ``K(z, conj(z)) = 0``. Newton iteration seeded at ``seed`` (default: 0 at
    ``theta = 0``, else the bracketing solution) with a bracketing fallback.
    """
    theta = float(theta)
    z = None
    if seed is not None:
        z = _newton(sym, theta, seed, tol)
        if z is not None and (z.real < -1e-14 or abs(z.imag + sym.c * math.sin(theta)) > 1e-8):
            z = None
    if z is None:
        z = _bracketed(sym, theta, tol)
    if z is None or abs(_residual(sym, z, theta)) > 1e-10:
        raise RootNotFound(f"no contour point found at theta={theta!r}", theta=theta)
    return complex(max(z.real, 0.0), z.imag)


def trace_contour(sym: SymmetricModel, n_points: int = 64) -> np.ndarray:
    """Points ``z(2 pi j / n)``, ``j = 0..n``, by continuation in ``theta``.

    The first and last points both correspond to ``theta = 0`` (closed curve).
    """
    if n_points < 8:
        raise ValidationError("n_points must be at least 8", key="n_points")
    thetas = 2.0 * np.pi * np.arange(n_points + 1) / n_points
    out = np.empty(n_points + 1, dtype=complex)
    seed = 0j
    for j, theta in enumerate(thetas):
        out[j] = contour_point(sym, theta, seed)
        seed = out[j]
    return out
