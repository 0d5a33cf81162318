"""Discrete-event simulation of the two-queue model with exponential visit timers.

Two simulators share one design: a tight event loop (compiled from
``_speedups.pyx`` when available, otherwise the pure-Python twin in
``_fallback.py``) fed with pre-drawn random numbers by the driver here.

* :func:`simulate` tracks the two workloads. Between events the attended
  workload drains at rate 1 and the other one is constant, so time integrals
  are accumulated exactly.
* :func:`simulate_queue_lengths` runs the ``(n1, n2, server)`` Markov chain for
  exponential services, with arrival and service rates scaled by ``epsilon``.

Random numbers: NumPy's PCG64 generator. Replication ``r`` of a run with seed
``seed`` uses ``SeedSequence(seed, spawn_key=(r,))``, whose children feed one
stream per random source (arrivals 1, arrivals 2, timers, services 1,
services 2), so every replication is reproducible on its own.

Set ``POLLING_LAB_PURE_PYTHON=1`` to force the pure-Python loops.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _fallback
from .errors import ConfigError, EmptySample, NonExponentialService, ValidationError
from .model import Exponential, PollingModel, check_stability

try:
    if os.environ.get("POLLING_LAB_PURE_PYTHON") == "1":
        raise ImportError("pure Python requested")
    from . import _speedups
except ImportError:
    _speedups = None

BACKEND = "compiled" if _speedups is not None else "python"

__all__ = [
    "BACKEND",
    "SimConfig",
    "Metric",
    "QueueEstimate",
    "SimEstimate",
    "LstEstimate",
    "QueueLengthEstimate",
    "simulate",
    "estimate_lst",
    "simulate_queue_lengths",
    "available_backends",
]

CHUNK = 1 << 16
_TABLE_START = 16


def available_backends() -> list[str]:
    return ["compiled", "python"] if _speedups is not None else ["python"]


def _loops(backend: str | None):
    backend = backend or BACKEND
    if backend == "compiled":
        if _speedups is None:
            raise ConfigError("compiled backend is not available", key="backend")
        return _speedups
    if backend == "python":
        return _fallback
    raise ConfigError(f"unknown backend {backend!r}", key="backend")


@dataclass(frozen=True)
class SimConfig:
    """Run settings; statistics are collected on ``[warmup, horizon]``."""

    horizon: float = 1e6
    warmup: float = 1e3
    seed: int = 2024
    replications: int = 10
    tail_levels: tuple = ()
    cdf_grid: tuple = (0.0, 0.5, 1.0, 2.0, 5.0)
    max_switch_samples: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "tail_levels", tuple(float(x) for x in self.tail_levels))
        object.__setattr__(self, "cdf_grid", tuple(float(x) for x in self.cdf_grid))
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError("horizon must be positive and finite", key="horizon")
        if not (0 <= self.warmup < self.horizon):
            raise ConfigError("need 0 <= warmup < horizon", key="warmup")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ConfigError("seed must be an integer in [0, 2^64)", key="seed")
        if not (isinstance(self.replications, (int, np.integer)) and self.replications >= 1):
            raise ConfigError("replications must be >= 1", key="replications")
        if any(x < 0 or not math.isfinite(x) for x in self.tail_levels + self.cdf_grid):
            raise ConfigError("levels must be finite and >= 0", key="tail_levels")
        if self.max_switch_samples < 0:
            raise ConfigError("max_switch_samples must be >= 0", key="max_switch_samples")

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "warmup": self.warmup,
            "seed": int(self.seed),
            "replications": int(self.replications),
            "tail_levels": list(self.tail_levels),
            "cdf_grid": list(self.cdf_grid),
            "max_switch_samples": int(self.max_switch_samples),
        }


@dataclass(frozen=True)
class Metric:
    """Mean over replications; ``stderr`` is ``None`` for a single replication."""

    mean: float
    stderr: float | None

    @classmethod
    def from_samples(cls, values) -> "Metric":
        values = np.asarray(values, dtype=float)
        stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size >= 2 else None
        return cls(float(values.mean()), stderr)

    def within(self, target: float, k: float = 3.0) -> bool:
        if self.stderr is None:
            raise ValidationError("no stderr with a single replication", key="replications")
        return abs(self.mean - target) <= k * self.stderr

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr}


@dataclass(frozen=True)
class QueueEstimate:
    time_avg_workload: Metric
    workload_second_moment: Metric
    workload_variance: Metric
    zero_fraction: Metric
    busy_fraction: Metric
    cdf: dict
    tail: dict

    def to_dict(self):
        return {
            "time_avg_workload": self.time_avg_workload.to_dict(),
            "workload_second_moment": self.workload_second_moment.to_dict(),
            "workload_variance": self.workload_variance.to_dict(),
            "zero_fraction": self.zero_fraction.to_dict(),
            "busy_fraction": self.busy_fraction.to_dict(),
            "cdf": [{"x": x, **m.to_dict()} for x, m in self.cdf.items()],
            "tail": [{"x": x, **m.to_dict()} for x, m in self.tail.items()],
        }


@dataclass(frozen=True)
class LstEstimate:
    value: float
    stderr: float

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr}


@dataclass(frozen=True)
class SimEstimate:
    """Result of :func:`simulate`.

    ``per_replication`` holds the raw per-replication statistics from which
    the :class:`Metric` fields are formed; ``switch_epoch_samples[r]`` holds
    the queue-1 workload at the ends of post-warmup visits to queue 2 in
    replication ``r``.
    """

    config: SimConfig
    stable: bool
    backend: str
    queues: tuple
    server_at_queue1: Metric
    switch_epoch_samples: tuple
    switch_epochs_seen: tuple
    conservation_residual: float
    per_replication: dict = field(repr=False)

    def queue(self, index: int) -> QueueEstimate:
        return self.queues[index - 1]

    @property
    def all_switch_samples(self) -> np.ndarray:
        return np.concatenate(self.switch_epoch_samples) if self.switch_epoch_samples else np.empty(0)

    def switch_epoch_lst(self, s: float) -> Metric:
        """``E exp(-s V1)`` at switch epochs, one estimate per replication."""
        return Metric.from_samples([estimate_lst(x, s).value for x in self.switch_epoch_samples])

    def to_dict(self, include_samples: bool = False):
        out = {
            "config": self.config.to_dict(),
            "stable": self.stable,
            "backend": self.backend,
            "queues": [q.to_dict() for q in self.queues],
            "server_at_queue1": self.server_at_queue1.to_dict(),
            "switch_epoch_count": [int(x.size) for x in self.switch_epoch_samples],
            "switch_epochs_seen": [int(x) for x in self.switch_epochs_seen],
            "conservation_residual": self.conservation_residual,
        }
        if include_samples:
            out["switch_epoch_samples"] = [x.tolist() for x in self.switch_epoch_samples]
        return out


def _generators(seed: int, rep: int, n: int) -> list[np.random.Generator]:
    seq = np.random.SeedSequence(int(seed), spawn_key=(rep,))
    return [np.random.Generator(np.random.PCG64(child)) for child in seq.spawn(n)]


def _service_chunk(dist, rng) -> np.ndarray:
    return np.ascontiguousarray(dist.sample(rng, CHUNK), dtype=np.float64)


def _exp_chunk(rng) -> np.ndarray:
    return rng.standard_exponential(CHUNK)


def _workload_replication(model: PollingModel, config: SimConfig, rep: int, loops, levels: np.ndarray) -> dict:
    g_a1, g_a2, g_t, g_s1, g_s2 = _generators(config.seed, rep, 5)
    buffers = [
        _exp_chunk(g_a1),
        _exp_chunk(g_a2),
        _exp_chunk(g_t),
        _service_chunk(model.q1.service, g_s1),
        _service_chunk(model.q2.service, g_s2),
    ]
    refill = [
        lambda: _exp_chunk(g_a1),
        lambda: _exp_chunk(g_a2),
        lambda: _exp_chunk(g_t),
        lambda: _service_chunk(model.q1.service, g_s1),
        lambda: _service_chunk(model.q2.service, g_s2),
    ]
    state = np.array([0.0, 0.0, 0.0, -1.0, -1.0, -1.0])
    istate = np.zeros(2, dtype=np.int64)
    params = np.array([model.q1.lam, model.q2.lam, model.c1, model.c2, config.horizon, config.warmup])
    pos = np.zeros(5, dtype=np.int64)
    acc = np.zeros(_fallback.ACC_SIZE)
    above1 = np.zeros(levels.size)
    above2 = np.zeros(levels.size)
    switches = np.empty(config.max_switch_samples)

    while True:
        status = loops.run_workload(
            state, istate, params, *buffers, pos, acc, levels, above1, levels, above2, switches
        )
        if status == _fallback.DONE:
            break
        i = status - 1
        buffers[i] = refill[i]()
        pos[i] = 0

    observed = acc[0]
    out = {
        "observed_time": observed,
        "switch_samples": switches[: istate[1]].copy(),
        "switch_seen": int(acc[17]),
        "server_at_queue1": acc[7] / observed,
        # input - drained - final workload, relative to the input
        "conservation": max(
            abs(acc[8] - acc[10] - state[1]) / max(acc[8], 1.0),
            abs(acc[9] - acc[11] - state[2]) / max(acc[9], 1.0),
        ),
        "zero_plus_busy": max(abs(acc[5] + acc[15] - observed), abs(acc[6] + acc[16] - observed)) / observed,
    }
    for j, above in ((1, above1), (2, above2)):
        mean = acc[1 + 2 * (j - 1)] / observed
        second = acc[2 + 2 * (j - 1)] / observed
        out[f"q{j}.mean"] = mean
        out[f"q{j}.second"] = second
        out[f"q{j}.variance"] = second - mean * mean
        out[f"q{j}.zero"] = acc[4 + j] / observed
        out[f"q{j}.busy"] = acc[14 + j] / observed
        out[f"q{j}.above"] = above / observed
    return out


def simulate(model: PollingModel, config: SimConfig | None = None, *, backend: str | None = None) -> SimEstimate:
    """Simulate ``config.replications`` independent runs and pool them.

    Unstable models are simulated as well; ``SimEstimate.stable`` flags them.
    """
    config = config or SimConfig()
    if not isinstance(model, PollingModel):
        raise ConfigError("simulate needs a PollingModel", key="model")
    loops = _loops(backend)
    levels = np.array(sorted(set(config.tail_levels) | set(config.cdf_grid)), dtype=float)
    reps = [_workload_replication(model, config, r, loops, levels) for r in range(config.replications)]

    def metric(key):
        return Metric.from_samples([r[key] for r in reps])

    queues = []
    for j in (1, 2):
        above = np.array([r[f"q{j}.above"] for r in reps]).reshape(len(reps), levels.size)
        index = {x: i for i, x in enumerate(levels.tolist())}
        cdf = {x: Metric.from_samples(1.0 - above[:, index[x]]) for x in config.cdf_grid}
        tail = {x: Metric.from_samples(above[:, index[x]]) for x in config.tail_levels}
        queues.append(
            QueueEstimate(
                metric(f"q{j}.mean"),
                metric(f"q{j}.second"),
                metric(f"q{j}.variance"),
                metric(f"q{j}.zero"),
                metric(f"q{j}.busy"),
                cdf,
                tail,
            )
        )
    per_rep = {
        key: np.array([r[key] for r in reps])
        for key in reps[0]
        if key not in ("switch_samples", "q1.above", "q2.above")
    }
    return SimEstimate(
        config=config,
        stable=check_stability(model).stable,
        backend=backend or BACKEND,
        queues=tuple(queues),
        server_at_queue1=metric("server_at_queue1"),
        switch_epoch_samples=tuple(r["switch_samples"] for r in reps),
        switch_epochs_seen=tuple(r["switch_seen"] for r in reps),
        conservation_residual=float(max(r["conservation"] for r in reps)),
        per_replication=per_rep,
    )


def estimate_lst(samples, s: float, *, batches: int = 20) -> LstEstimate:
    """Empirical ``mean(exp(-s * x))`` with a batch-means standard error.

    Consecutive switch-epoch samples are correlated, so the standard error is
    taken from ``batches`` contiguous batch means (plain i.i.d. formula when
    there are fewer than ``2 * batches`` samples).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("estimate_lst needs at least one sample", key="samples")
    if not (math.isfinite(s) and s >= 0):
        raise ValidationError("s must be real and >= 0", key="s")
    if s == 0:
        return LstEstimate(1.0, 0.0)
    values = np.exp(-s * x)
    mean = float(values.mean())
    if x.size >= 2 * batches:
        usable = x.size - x.size % batches
        means = values[:usable].reshape(batches, -1).mean(axis=1)
        stderr = float(means.std(ddof=1) / math.sqrt(batches))
    elif x.size >= 2:
        stderr = float(values.std(ddof=1) / math.sqrt(x.size))
    else:
        stderr = math.inf
    return LstEstimate(mean, stderr)


@dataclass(frozen=True)
class QueueLengthEstimate:
    """Long-run fraction of time in ``(n1, n2, k)``; ``k = 0`` is queue 1.

    ``table`` and ``stderr`` have shape ``(N1 + 1, N2 + 1, 2)`` with ``N``
    the largest queue length observed in any replication.
    """

    epsilon: float
    table: np.ndarray
    stderr: np.ndarray | None
    per_replication: np.ndarray = field(repr=False)

    def queue_length_marginal(self) -> np.ndarray:
        return self.table.sum(axis=2)

    def server_marginal(self) -> Metric:
        """Fraction of time at queue 1 (mean and stderr over replications)."""
        return Metric.from_samples(self.per_replication[:, :, :, 0].sum(axis=(1, 2)))

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "shape": list(self.table.shape),
            "table": self.table.tolist(),
            "stderr": None if self.stderr is None else self.stderr.tolist(),
        }


def _exponential_rates(model) -> tuple[float, float, float, float, float, float]:
    """``(lambda1, lambda2, mu1, mu2, c1, c2)`` from a PollingModel or an ExpModel."""
    if isinstance(model, PollingModel):
        for i, q in ((1, model.q1), (2, model.q2)):
            if not isinstance(q.service, Exponential):
                raise NonExponentialService(f"queue {i} service must be exponential", key=f"service{i}")
        return model.q1.lam, model.q2.lam, model.q1.service.rate, model.q2.service.rate, model.c1, model.c2
    try:
        return model.lambda1, model.lambda2, model.mu1, model.mu2, model.c1, model.c2
    except AttributeError:
        raise NonExponentialService("need exponential services", key="model") from None


def _grow(table: np.ndarray, cap1: int, cap2: int, new1: int, new2: int) -> np.ndarray:
    grown = np.zeros((new1 + 1, new2 + 1, 2))
    grown[: cap1 + 1, : cap2 + 1, :] = table.reshape(cap1 + 1, cap2 + 1, 2)
    return grown.ravel()


def _queue_length_replication(rates, epsilon, config: SimConfig, rep: int, loops) -> np.ndarray:
    lam1, lam2, mu1, mu2, c1, c2 = rates
    g_exp, g_unif = _generators(config.seed, rep, 2)
    expo, unif = g_exp.standard_exponential(CHUNK), g_unif.random(CHUNK)
    state = np.zeros(1)
    istate = np.zeros(3, dtype=np.int64)
    params = np.array(
        [epsilon * lam1, epsilon * lam2, epsilon * mu1, epsilon * mu2, c1, c2, config.horizon, config.warmup]
    )
    pos = np.zeros(2, dtype=np.int64)
    cap1 = cap2 = _TABLE_START
    table = np.zeros((cap1 + 1) * (cap2 + 1) * 2)
    while True:
        status = loops.run_queue_lengths(state, istate, params, expo, unif, pos, table, cap1, cap2)
        if status == _fallback.DONE:
            break
        if status == _fallback.NEED_EXP:
            expo, pos[0] = g_exp.standard_exponential(CHUNK), 0
        elif status == _fallback.NEED_UNIF:
            unif, pos[1] = g_unif.random(CHUNK), 0
        else:
            new1 = cap1 * 2 if istate[0] >= cap1 else cap1
            new2 = cap2 * 2 if istate[1] >= cap2 else cap2
            table = _grow(table, cap1, cap2, new1, new2)
            cap1, cap2 = new1, new2
    return table.reshape(cap1 + 1, cap2 + 1, 2)


def simulate_queue_lengths(model, epsilon: float, config: SimConfig | None = None, *,
                           backend: str | None = None) -> QueueLengthEstimate:
    """Time fractions of ``(n1, n2, k)`` with arrival/service rates scaled by ``epsilon``.

    Timer rates are not scaled. ``model`` is a :class:`PollingModel` with
    exponential services or any object with ``lambda1, lambda2, mu1, mu2, c1,
    c2`` attributes.
    """
    config = config or SimConfig()
    rates = _exponential_rates(model)
    if not (0 < epsilon <= 1):
        raise ValidationError("epsilon must lie in (0, 1]", key="epsilon")
    loops = _loops(backend)
    tables = [_queue_length_replication(rates, epsilon, config, r, loops) for r in range(config.replications)]
    n1 = max(t.shape[0] for t in tables)
    n2 = max(t.shape[1] for t in tables)
    stacked = np.zeros((len(tables), n1, n2, 2))
    for i, t in enumerate(tables):
        stacked[i, : t.shape[0], : t.shape[1], :] = t / t.sum()
    # trim rows/columns never visited
    visited = stacked.sum(axis=(0, 3))
    last1 = int(np.nonzero(visited.sum(axis=1))[0].max())
    last2 = int(np.nonzero(visited.sum(axis=0))[0].max())
    stacked = stacked[:, : last1 + 1, : last2 + 1, :]
    mean = stacked.mean(axis=0)
    stderr = stacked.std(axis=0, ddof=1) / math.sqrt(len(tables)) if len(tables) >= 2 else None
    return QueueLengthEstimate(float(epsilon), mean, stderr, stacked)
