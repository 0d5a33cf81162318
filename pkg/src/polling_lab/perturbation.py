"""Joint queue-length distribution for exponential services via singular perturbation.

Arrival and service rates are scaled by ``epsilon`` while the visit timers are
not, so the generator splits as ``G(eps) = G0 + eps * G1`` with ``G0`` moving
only the server. As ``eps -> 0`` the server alternates infinitely fast and the
queue lengths form an aggregated chain of two independent M/M/1 queues. The
stationary law of ``G(eps)`` is the power series ``sum eps^m pi0 U^m``.

States are ``(n1, n2, k)`` with ``k`` in ``{1, 2}`` the server position, stored
row-major: ``index = (n1 * (N2 + 1) + n2) * 2 + (k - 1)``. Aggregated states
``(n1, n2)`` use ``n1 * (N2 + 1) + n2``. Truncation at ``N1``/``N2`` deletes the
arrival transitions that would leave the grid and adjusts the diagonal.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    AggregatedUnstable,
    DimensionMismatch,
    NonExponentialService,
    SeriesDiverging,
    SingularSystem,
    ValidationError,
)
from .model import Exponential

__all__ = [
    "ExpModel",
    "TruncationSpec",
    "SparseGenerator",
    "StationaryDistribution",
    "PhiResult",
    "PerturbationWorkspace",
    "CertificateReport",
    "build_g0",
    "build_g1",
    "check_uniformization",
    "aggregated_generator",
    "aggregated_stationary",
    "aggregated_loads",
    "build_vw",
    "deviation_h",
    "deviation_phi",
    "build_u",
    "series_stationary",
    "resolvent_stationary",
    "direct_stationary",
    "total_variation",
    "verify_lyapunov_unperturbed",
    "verify_lyapunov_aggregated",
    "verify_g1_norm_bound",
]


@dataclass(frozen=True)
class ExpModel:
    """Rates of the exponential-service model (``E B_i = 1 / mu_i``)."""

    lambda1: float
    lambda2: float
    mu1: float
    mu2: float
    c1: float
    c2: float

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"{f.name} must be positive and finite, got {value!r}", key=f.name)
            object.__setattr__(self, f.name, float(value))

    @property
    def csum(self) -> float:
        return self.c1 + self.c2

    @property
    def uniformizable(self) -> bool:
        return check_uniformization(self)[0]

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExpModel":
        keys = {f.name for f in dataclasses.fields(cls)}
        if not isinstance(doc, dict):
            raise ValidationError("model must be an object", key="model")
        unknown = set(doc) - keys
        if unknown:
            raise ValidationError(f"unknown model keys: {sorted(unknown)}", key=sorted(unknown)[0])
        missing = keys - set(doc)
        if missing:
            raise ValidationError(f"missing model keys: {sorted(missing)}", key=sorted(missing)[0])
        return cls(**doc)

    @classmethod
    def from_polling_model(cls, model) -> "ExpModel":
        for i, q in ((1, model.q1), (2, model.q2)):
            if not isinstance(q.service, Exponential):
                raise NonExponentialService(f"queue {i} service must be exponential", key=f"service{i}")
        return cls(model.q1.lam, model.q2.lam, model.q1.service.rate, model.q2.service.rate, model.c1, model.c2)


@dataclass(frozen=True)
class TruncationSpec:
    N1: int
    N2: int

    def __post_init__(self):
        for name in ("N1", "N2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value >= 1):
                raise ValidationError(f"{name} must be an integer >= 1", key=name.lower())

    @property
    def n_classes(self) -> int:
        return (self.N1 + 1) * (self.N2 + 1)

    @property
    def dimension(self) -> int:
        return 2 * self.n_classes

    def cls(self, n1: int, n2: int) -> int:
        return n1 * (self.N2 + 1) + n2

    def index(self, n1: int, n2: int, k: int) -> int:
        return 2 * self.cls(n1, n2) + (k - 1)

    def grid(self):
        """Arrays ``n1, n2`` over aggregated states in storage order."""
        n1, n2 = np.divmod(np.arange(self.n_classes), self.N2 + 1)
        return n1, n2


@dataclass(frozen=True)
class SparseGenerator:
    """A CSR matrix with its triplet view; used for ``G0``, ``G1`` and ``Gamma``."""

    matrix: sp.csr_matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def triplets(self):
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _csr(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    return m


def build_g0(trunc: TruncationSpec, model: ExpModel) -> SparseGenerator:
    """Server switches only: block ``[[-c1, c1], [c2, -c2]]`` per ``(n1, n2)``."""
    base = 2 * np.arange(trunc.n_classes)
    rows = np.concatenate([base, base, base + 1, base + 1])
    cols = np.concatenate([base, base + 1, base, base + 1])
    n = trunc.n_classes
    vals = np.concatenate([np.full(n, -model.c1), np.full(n, model.c1), np.full(n, model.c2), np.full(n, -model.c2)])
    return SparseGenerator(_csr(rows, cols, vals, (trunc.dimension, trunc.dimension)))


def build_g1(trunc: TruncationSpec, model: ExpModel) -> SparseGenerator:
    """Arrivals and services at unit ``epsilon``; rows sum to 0."""
    rows, cols, vals = [], [], []
    n1, n2 = trunc.grid()
    cls = np.arange(trunc.n_classes)
    for k in (1, 2):
        src = 2 * cls + (k - 1)
        out = np.zeros(trunc.n_classes)
        # arrivals at queue 1 / queue 2, dropped on the truncation boundary
        for mask, step, rate in (
            (n1 < trunc.N1, trunc.N2 + 1, model.lambda1),
            (n2 < trunc.N2, 1, model.lambda2),
        ):
            rows.append(src[mask])
            cols.append(2 * (cls[mask] + step) + (k - 1))
            vals.append(np.full(mask.sum(), rate))
            out[mask] += rate
        # service at the attended queue
        if k == 1:
            mask, step, rate = n1 >= 1, trunc.N2 + 1, model.mu1
        else:
            mask, step, rate = n2 >= 1, 1, model.mu2
        rows.append(src[mask])
        cols.append(2 * (cls[mask] - step) + (k - 1))
        vals.append(np.full(mask.sum(), rate))
        out[mask] += rate
        rows.append(src)
        cols.append(src)
        vals.append(-out)
    shape = (trunc.dimension, trunc.dimension)
    return SparseGenerator(_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), shape))


def check_uniformization(model: ExpModel) -> tuple[bool, tuple[float, float]]:
    """Whether ``I + G(eps)`` is stochastic for all ``eps`` in ``[0, 1]``, with both slacks."""
    slack1 = 1.0 - (model.lambda1 + model.lambda2 + model.mu1 + model.c1)
    slack2 = 1.0 - (model.lambda1 + model.lambda2 + model.mu2 + model.c2)
    return (slack1 >= 0 and slack2 >= 0), (slack1, slack2)


def aggregated_loads(model: ExpModel) -> tuple[float, float]:
    """Loads of the two M/M/1 queues of the aggregated chain."""
    rho1 = model.lambda1 * model.c1 * model.csum / (model.mu1 * model.c1 * model.c2)
    rho2 = model.lambda2 * model.c2 * model.csum / (model.mu2 * model.c1 * model.c2)
    return rho1, rho2


def aggregated_generator(trunc: TruncationSpec, model: ExpModel) -> SparseGenerator:
    """Generator of two independent M/M/1 queues with service rates weighted by server presence."""
    n1, n2 = trunc.grid()
    cls = np.arange(trunc.n_classes)
    d1 = model.mu1 * model.c2 / model.csum
    d2 = model.mu2 * model.c1 / model.csum
    rows, cols, vals = [], [], []
    out = np.zeros(trunc.n_classes)
    for mask, step, rate in (
        (n1 < trunc.N1, trunc.N2 + 1, model.lambda1),
        (n2 < trunc.N2, 1, model.lambda2),
        (n1 >= 1, -(trunc.N2 + 1), d1),
        (n2 >= 1, -1, d2),
    ):
        rows.append(cls[mask])
        cols.append(cls[mask] + step)
        vals.append(np.full(mask.sum(), rate))
        out[mask] += rate
    rows.append(cls)
    cols.append(cls)
    vals.append(-out)
    shape = (trunc.n_classes, trunc.n_classes)
    return SparseGenerator(_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), shape))


def aggregated_stationary(model: ExpModel, trunc: TruncationSpec) -> np.ndarray:
    """Product of two geometric laws, renormalised on the truncated grid.

    Exactly stationary for the truncated aggregated chain, since each
    truncated birth-death factor is reversible.
    """
    rho1, rho2 = aggregated_loads(model)
    if not (rho1 < 1 and rho2 < 1):
        raise AggregatedUnstable(f"aggregated loads must be < 1, got {rho1:.6g}, {rho2:.6g}")
    p1 = rho1 ** np.arange(trunc.N1 + 1)
    p2 = rho2 ** np.arange(trunc.N2 + 1)
    joint = np.outer(p1 / p1.sum(), p2 / p2.sum()).ravel()
    return joint / joint.sum()


def build_vw(trunc: TruncationSpec, model: ExpModel) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """``V`` (classes x states) holds the server-position law; ``W`` the class indicators."""
    cls = np.arange(trunc.n_classes)
    d, m = trunc.dimension, trunc.n_classes
    weights = np.tile([model.c2 / model.csum, model.c1 / model.csum], m)
    states = np.arange(d)
    V = _csr(np.repeat(cls, 2), states, weights, (m, d))
    W = _csr(states, np.repeat(cls, 2), np.ones(d), (d, m))
    return V, W


def deviation_h(trunc: TruncationSpec, model: ExpModel) -> sp.csr_matrix:
    """Deviation matrix of the server-switching chain, ``-G0 / (c1 + c2)^2``."""
    return (-build_g0(trunc, model).matrix / model.csum**2).tocsr()


@dataclass(frozen=True)
class PhiResult:
    phi: np.ndarray
    residuals: dict


def deviation_phi(trunc: TruncationSpec, model: ExpModel, gamma_gen: sp.csr_matrix | None = None,
                  pi_bar: np.ndarray | None = None) -> PhiResult:
    """Deviation matrix ``Phi`` of the truncated aggregated chain.

    Computed as ``(gamma - Gamma)^{-1} - gamma`` with ``gamma = 1 pi_bar``,
    which is the unique solution of ``Phi Gamma = Gamma Phi = gamma - I``,
    ``gamma Phi = Phi gamma = 0``. All four identities are reported as
    max-abs residuals.
    """
    Gamma = (gamma_gen if gamma_gen is not None else aggregated_generator(trunc, model).matrix).toarray()
    pi = aggregated_stationary(model, trunc) if pi_bar is None else pi_bar
    m = Gamma.shape[0]
    if pi.shape != (m,):
        raise DimensionMismatch(f"pi_bar has shape {pi.shape}, expected ({m},)")
    gamma = np.broadcast_to(pi, (m, m))
    try:
        with np.errstate(all="raise"):
            lu = scipy.linalg.lu_factor(gamma - Gamma, check_finite=True)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise SingularSystem(f"aggregated fundamental matrix is singular: {exc}") from None
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(np.diag(lu[0]))):
        raise SingularSystem("aggregated fundamental matrix is numerically singular")
    phi = scipy.linalg.lu_solve(lu, np.eye(m)) - gamma
    target = gamma - np.eye(m)
    residuals = {
        "phi_gamma": float(np.abs(phi @ Gamma - target).max()),
        "gamma_phi": float(np.abs(Gamma @ phi - target).max()),
        "pi_phi": float(np.abs(pi @ phi).max()),
        "phi_one": float(np.abs(phi.sum(axis=1)).max()),
    }
    return PhiResult(phi, residuals)


def build_u(workspace: "PerturbationWorkspace") -> np.ndarray:
    """``U = G1 H (I + G1 W Phi V)`` (dense, states x states)."""
    G1, H, W, V, phi = workspace.G1.matrix, workspace.H, workspace.W, workspace.V, workspace.phi
    d, m = G1.shape[0], phi.shape[0]
    if H.shape != (d, d) or W.shape != (d, m) or V.shape != (m, d) or phi.shape != (m, m):
        raise DimensionMismatch("G1, H, W, Phi, V have incompatible shapes")
    inner = (G1 @ W) @ phi  # dense d x m
    inner = (V.T @ inner.T).T  # inner @ V, keeping V sparse
    inner[np.diag_indices(d)] += 1.0
    return (G1 @ H) @ inner


@dataclass
class PerturbationWorkspace:
    """All matrices of the expansion for one model and truncation."""

    model: ExpModel
    trunc: TruncationSpec
    G0: SparseGenerator
    G1: SparseGenerator
    V: sp.csr_matrix
    W: sp.csr_matrix
    Gamma: SparseGenerator
    pi_bar: np.ndarray
    H: sp.csr_matrix
    phi: np.ndarray
    phi_residuals: dict
    U: np.ndarray | None = None
    pi0: np.ndarray | None = None
    terms: list = field(default_factory=list, repr=False)

    @property
    def gamma_projection(self) -> np.ndarray:
        return np.broadcast_to(self.pi_bar, (self.trunc.n_classes, self.trunc.n_classes))

    @classmethod
    def build(cls, model: ExpModel, trunc: TruncationSpec) -> "PerturbationWorkspace":
        G0 = build_g0(trunc, model)
        G1 = build_g1(trunc, model)
        V, W = build_vw(trunc, model)
        Gamma = aggregated_generator(trunc, model)
        pi_bar = aggregated_stationary(model, trunc)
        phi = deviation_phi(trunc, model, Gamma.matrix, pi_bar)
        ws = cls(model, trunc, G0, G1, V, W, Gamma, pi_bar, deviation_h(trunc, model), phi.phi, phi.residuals)
        ws.U = build_u(ws)
        ws.pi0 = np.asarray(V.T @ pi_bar).ravel()
        ws.terms = [ws.pi0]
        return ws

    def term(self, m: int) -> np.ndarray:
        """``pi0 U^m`` (cached)."""
        while len(self.terms) <= m:
            self.terms.append(self.terms[-1] @ self.U)
        return self.terms[m]


@dataclass(frozen=True)
class StationaryDistribution:
    probabilities: np.ndarray
    trunc: TruncationSpec
    epsilon: float
    method: str
    diagnostics: dict

    def as_array(self) -> np.ndarray:
        """Shape ``(N1 + 1, N2 + 1, 2)``; last axis is the server position."""
        return self.probabilities.reshape(self.trunc.N1 + 1, self.trunc.N2 + 1, 2)

    def queue_length_marginal(self) -> np.ndarray:
        return self.as_array().sum(axis=2)

    def server_marginal(self) -> np.ndarray:
        return self.as_array().sum(axis=(0, 1))

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "method": self.method,
            "N1": self.trunc.N1,
            "N2": self.trunc.N2,
            "probabilities": self.probabilities.tolist(),
            "diagnostics": self.diagnostics,
        }


def total_variation(p, q) -> float:
    p = getattr(p, "probabilities", p)
    q = getattr(q, "probabilities", q)
    p, q = np.asarray(p, dtype=float).ravel(), np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes differ: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def _to_distribution(x, ws_trunc, epsilon, method, diagnostics) -> StationaryDistribution:
    x = np.asarray(x, dtype=float).ravel()
    raw_sum = float(x.sum())
    clipped = float(-x[x < 0].sum())
    x = np.where(x < 0, 0.0, x)
    x = x / x.sum()
    diagnostics = {**diagnostics, "renormalization": abs(raw_sum - 1.0), "clipped_negative_mass": clipped}
    return StationaryDistribution(x, ws_trunc, float(epsilon), method, diagnostics)


def series_stationary(ws: PerturbationWorkspace, epsilon: float, M: int) -> StationaryDistribution:
    """Partial sum ``sum_{m <= M} eps^m pi0 U^m``.

    Raises :class:`SeriesDiverging` when ``||eps^m pi^(m)||_1`` increased
    over each of the last five terms.
    """
    if not (epsilon >= 0 and M >= 0):
        raise ValidationError("need epsilon >= 0 and M >= 0", key="epsilon" if epsilon < 0 else "terms")
    total = np.zeros(ws.trunc.dimension)
    norms = []
    for m in range(M + 1):
        contribution = epsilon**m * ws.term(m)
        total += contribution
        norms.append(float(np.abs(contribution).sum()))
    tail = norms[-6:]
    if len(tail) == 6 and tail[-1] > 0 and all(b > a for a, b in zip(tail, tail[1:])):
        raise SeriesDiverging(f"series terms grow at epsilon={epsilon}: last norms {tail[1:]}")
    return _to_distribution(total, ws.trunc, epsilon, f"series-{M}", {"term_norms": norms})


def resolvent_stationary(ws: PerturbationWorkspace, epsilon: float) -> StationaryDistribution:
    """Solve ``x (I - eps U) = pi0``."""
    if not epsilon >= 0:
        raise ValidationError("epsilon must be >= 0", key="epsilon")
    d = ws.trunc.dimension
    A = np.eye(d) - epsilon * ws.U
    try:
        lu = scipy.linalg.lu_factor(A.T)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"I - eps U is singular at eps={epsilon}: {exc}") from None
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() < 1e-13 * pivots.max():
        raise SingularSystem(f"I - eps U is numerically singular at eps={epsilon}")
    x = scipy.linalg.lu_solve(lu, ws.pi0)
    residual = float(np.abs(x @ A - ws.pi0).max())
    return _to_distribution(x, ws.trunc, epsilon, "resolvent", {"solve_residual": residual})


def direct_stationary(trunc: TruncationSpec, model: ExpModel, epsilon: float) -> StationaryDistribution:
    """Oracle: solve ``pi G(eps) = 0, pi 1 = 1`` on the truncated generator."""
    if not epsilon >= 0:
        raise ValidationError("epsilon must be >= 0", key="epsilon")
    G = (build_g0(trunc, model).matrix + epsilon * build_g1(trunc, model).matrix).tocsr()
    d = G.shape[0]
    A = G.T.tolil()
    A[d - 1, :] = np.ones(d)
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            x = spla.spsolve(A.tocsc(), rhs)
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        raise SingularSystem(f"generator system is singular at eps={epsilon}: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise SingularSystem("direct solve produced non-finite values")
    residual = float(np.abs(G.T @ x).max())
    if residual > 1e-10:
        raise SingularSystem(f"direct solve residual {residual:.3g} exceeds 1e-10")
    return _to_distribution(x, trunc, epsilon, "direct", {"generator_residual": residual})


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of a drift-inequality check ``P u <= delta u + b e``."""

    passed: bool
    delta: float
    b: float
    max_violation: float
    details: dict

    def to_dict(self):
        return dataclasses.asdict(self)


def verify_lyapunov_unperturbed(model: ExpModel, *, tol: float = 1e-12) -> CertificateReport:
    """Drift check for the server-switching chain with ``u = (1, 1 + c1/c2)``.

    Uses ``delta = 1 - c1 c2 / (c1 + c2)``, the right end of the admissible
    interval: both rows then hold with equality.
    """
    c1, c2 = model.c1, model.c2
    delta = 1.0 - c1 * c2 / (c1 + c2)
    b = 1.0 - delta + c1**2 / c2
    u = np.array([1.0, 1.0 + c1 / c2])
    P = np.array([[1.0 - c1, c1], [c2, 1.0 - c2]])
    lhs = P @ u
    rhs = delta * u + np.array([b, 0.0])
    slack = rhs - lhs
    stochastic = bool(np.all(P >= 0))
    valid = 0.0 < delta < 1.0 and b > 0
    violation = float(max(0.0, -slack.min()))
    return CertificateReport(
        passed=bool(violation <= tol and stochastic and valid),
        delta=delta,
        b=b,
        max_violation=violation,
        details={"u": u.tolist(), "row_slack": slack.tolist(), "stochastic": stochastic, "constants_valid": valid},
    )


def _u_bar(trunc: TruncationSpec, model: ExpModel) -> tuple[np.ndarray, float, float]:
    r1 = math.sqrt(model.mu1 * model.c2 / (model.lambda1 * model.csum))
    r2 = math.sqrt(model.mu2 * model.c1 / (model.lambda2 * model.csum))
    n1, n2 = trunc.grid()
    return r1 ** n1.astype(float) * r2 ** n2.astype(float), r1, r2


def verify_lyapunov_aggregated(trunc: TruncationSpec, model: ExpModel, *, tol: float = 1e-12) -> CertificateReport:
    """Drift check ``(I + Gamma) u_bar <= delta_bar u_bar + b_bar e_(0,0)`` on the truncated grid.

    ``u_bar`` grows geometrically, so violations are reported relative to
    ``u_bar`` of the row. ``details`` separates interior rows from rows on the
    truncation boundary and records whether ``delta_bar`` lies in ``(0, 1)``.
    """
    ubar, r1, r2 = _u_bar(trunc, model)
    d1 = model.mu1 * model.c2 / model.csum
    d2 = model.mu2 * model.c1 / model.csum
    l1, l2 = model.lambda1, model.lambda2
    delta = (
        1.0
        - (math.sqrt(l1) - math.sqrt(d1)) ** 2
        - (math.sqrt(l2) - math.sqrt(d2)) ** 2
        + max(d2 * (1.0 - math.sqrt(l2 / d2)), d1 * (1.0 - math.sqrt(l1 / d1)))
    )
    b = 1.0 - delta + l1 * (r1 - 1.0) + l2 * (r2 - 1.0)
    Gamma = aggregated_generator(trunc, model).matrix
    lhs = ubar + Gamma @ ubar
    rhs = delta * ubar
    rhs[0] += b
    rel = (lhs - rhs) / ubar
    n1, n2 = trunc.grid()
    interior = (n1 < trunc.N1) & (n2 < trunc.N2)
    max_interior = float(max(0.0, rel[interior].max()))
    max_boundary = float(max(0.0, rel[~interior].max())) if (~interior).any() else 0.0
    _, slack = check_uniformization(model)
    strongly_aperiodic = bool(1.0 + Gamma[0, 0] > 0)
    valid = 0.0 < delta < 1.0 and b < math.inf
    return CertificateReport(
        passed=bool(max(max_interior, max_boundary) <= tol and valid and strongly_aperiodic),
        delta=delta,
        b=b,
        max_violation=max(max_interior, max_boundary),
        details={
            "max_interior_violation": max_interior,
            "max_boundary_violation": max_boundary,
            "delta_in_unit_interval": 0.0 < delta < 1.0,
            "strongly_aperiodic_origin": strongly_aperiodic,
            "ratios": [r1, r2],
            "uniformization_slack": list(slack),
        },
    )


def verify_g1_norm_bound(trunc: TruncationSpec, model: ExpModel, *, tol: float = 1e-12) -> dict:
    """Weighted row-sum norm of ``G1`` against ``max(g1, g2)``.

    The weight of ``(n1, n2, k)`` is ``u_bar(n1, n2) * u_k``. The norm
    includes the diagonal of ``G1``; the off-diagonal part alone is reported as
    ``offdiagonal_sup``.
    """
    ubar, r1, r2 = _u_bar(trunc, model)
    u = np.array([1.0, 1.0 + model.c1 / model.c2])
    weights = (ubar[:, None] * u[None, :]).ravel()
    G1 = build_g1(trunc, model).matrix
    absG = abs(G1)
    row = (absG @ weights) / weights
    off = absG - sp.diags(np.abs(G1.diagonal()))
    off_row = (off @ weights) / weights
    mix = (model.mu1 * model.c2 + model.mu2 * model.c1) / model.csum
    g1 = (model.mu1 + mix) / r1
    g2 = (model.mu2 + mix) / r2
    bound = max(g1, g2)
    sup = float(row.max())
    argmax = int(row.argmax())
    n12, k = divmod(argmax, 2)
    n1, n2 = divmod(n12, trunc.N2 + 1)
    return {
        "passed": bool(sup <= bound + tol),
        "sup": sup,
        "offdiagonal_sup": float(off_row.max()),
        "g1": g1,
        "g2": g2,
        "bound": bound,
        "argmax_state": [int(n1), int(n2), int(k) + 1],
    }
