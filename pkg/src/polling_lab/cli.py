"""Command-line front end: ``polling-lab {analyze,simulate,perturb,contour} CONFIG``.

``CONFIG`` is a JSON document (``-`` reads stdin)::

    {"model": {...}, "analyze": {...}, "simulate": {...}, "perturb": {...}, "contour": {...}}

``model`` uses the keys ``lambda1, service1, c1, lambda2, service2, c2`` with
services written as ``{"kind": "exponential", "rate": 1.0}``; ``perturb`` also
accepts ``lambda1, lambda2, mu1, mu2, c1, c2``. Each optional command section
holds that command's settings (every section is validated, only the running
command's is used). Command-line flags override the file, and the environment
variable ``POLLING_LAB_SEED`` overrides the seed from the file.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics, kernel, perturbation, simulator, transforms
from .errors import (
    HeavyTailNoClosedFormLst,
    InfiniteMoment,
    NotRegularlyVarying,
    NumericalError,
    ParseError,
    PollingLabError,
    Unstable,
    ValidationError,
)
from .model import Pareto, PollingModel, check_stability

log = logging.getLogger("polling_lab")

SCHEMA_VERSION = 1
COMMANDS = ("analyze", "simulate", "perturb", "contour")
DEFAULT_EPS = 0.1

_OPTION_KEYS = {
    "analyze": {"s_grid", "asymptotics", "cdf_grid", "tail_x"},
    "simulate": {
        "horizon", "warmup", "seed", "replications", "tail_levels", "cdf_grid",
        "max_switch_samples", "switch_lst_s", "include_samples", "queue_lengths_eps", "backend",
    },
    "perturb": {"n1", "n2", "eps", "terms", "method"},
    "contour": {"n_points"},
}
_METHODS = ("series", "resolvent", "direct", "all")


@dataclass
class RunConfig:
    command: str
    model: object
    options: dict = field(default_factory=dict)
    output_format: str = "json"
    output_path: str | None = None


# ---------------------------------------------------------------- parsing

def _number(options, key, *, positive=False, nonneg=False, integer=False):
    value = options[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{key} must be a number, got {value!r}", key=key)
    if integer and int(value) != value:
        raise ValidationError(f"{key} must be an integer, got {value!r}", key=key)
    if not math.isfinite(value) or (positive and value <= 0) or (nonneg and value < 0):
        raise ValidationError(f"{key} must be {'positive' if positive else 'non-negative'}, got {value!r}", key=key)
    return int(value) if integer else float(value)


def _number_list(options, key):
    value = options[key]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list):
        raise ValidationError(f"{key} must be a list of numbers", key=key)
    out = []
    for x in value:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x < 0:
            raise ValidationError(f"{key} entries must be finite numbers >= 0", key=key)
        out.append(float(x))
    return out


def _validate_options(command: str, options: dict) -> dict:
    unknown = set(options) - _OPTION_KEYS[command]
    if unknown:
        raise ValidationError(f"unknown {command} options: {sorted(unknown)}", key=sorted(unknown)[0])
    out = dict(options)
    for key in ("horizon", "eps", "queue_lengths_eps"):
        if key in out:
            out[key] = _number(out, key, positive=True)
    if "warmup" in out:
        out["warmup"] = _number(out, "warmup", nonneg=True)
    for key in ("replications", "n1", "n2", "terms", "n_points", "max_switch_samples"):
        if key in out:
            out[key] = _number(out, key, nonneg=key in ("terms", "max_switch_samples"),
                               positive=key not in ("terms", "max_switch_samples"), integer=True)
    if "seed" in out:
        out["seed"] = _number(out, "seed", nonneg=True, integer=True)
    for key in ("s_grid", "cdf_grid", "tail_x", "tail_levels", "switch_lst_s"):
        if key in out:
            out[key] = _number_list(out, key)
    for key in ("asymptotics", "include_samples"):
        if key in out and not isinstance(out[key], bool):
            raise ValidationError(f"{key} must be true or false", key=key)
    if "method" in out and out["method"] not in _METHODS:
        raise ValidationError(f"method must be one of {_METHODS}", key="method")
    if "backend" in out and out["backend"] not in ("compiled", "python"):
        raise ValidationError("backend must be 'compiled' or 'python'", key="backend")
    return out


def _parse_model(command: str, doc):
    if not isinstance(doc, dict):
        raise ValidationError("model must be an object", key="model")
    if command == "perturb":
        if "mu1" in doc or "mu2" in doc:
            return perturbation.ExpModel.from_dict(doc)
        return perturbation.ExpModel.from_polling_model(PollingModel.from_dict(doc))
    return PollingModel.from_dict(doc)


def parse_config(document, command: str, overrides: dict | None = None, *, env=None) -> RunConfig:
    """Validate a config document plus flag overrides into a :class:`RunConfig`.

    Precedence for every option: flag, then (seed only) ``POLLING_LAB_SEED``,
    then the document. Errors name the offending key.
    """
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}", key="command")
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}", key="config") from None
    if not isinstance(document, dict):
        raise ParseError("config must be a JSON object", key="config")
    unknown = set(document) - {"model", "schema_version", *COMMANDS}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}", key=sorted(unknown)[0])
    if "model" not in document:
        raise ValidationError("config needs a 'model' object", key="model")
    if document.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {document['schema_version']!r}", key="schema_version")
    for section in COMMANDS:
        if not isinstance(document.get(section, {}), dict):
            raise ValidationError(f"{section} must be an object", key=section)
        _validate_options(section, document.get(section, {}))
    options = dict(document.get(command, {}))
    env = os.environ if env is None else env
    if command == "simulate" and env.get("POLLING_LAB_SEED") not in (None, ""):
        try:
            options["seed"] = int(env["POLLING_LAB_SEED"])
        except ValueError:
            raise ValidationError("POLLING_LAB_SEED must be an integer", key="seed") from None
    overrides = dict(overrides or {})
    output_format = overrides.pop("format", None) or "json"
    output_path = overrides.pop("output", None)
    options.update({k: v for k, v in overrides.items() if v is not None})
    options = _validate_options(command, options)
    if command == "perturb" and "eps" not in options:
        log.warning("epsilon not given; using the default %s", DEFAULT_EPS)
        options["eps"] = DEFAULT_EPS
    if output_format not in ("json", "csv"):
        raise ValidationError("format must be json or csv", key="format")
    model = _parse_model(command, document["model"])
    return RunConfig(command, model, options, output_format, output_path)


# ---------------------------------------------------------------- serialization

def _fmt(x: float) -> str:
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy types, non-finite floats (to None) and tuples for output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    obj = _plain(obj)

    def emit(value, level):
        pad = "\n" + " " * (indent * (level + 1))
        end = "\n" + " " * (indent * level)
        if isinstance(value, dict):
            if not value:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {emit(v, level + 1)}" for k, v in value.items()]
            return "{" + ",".join(items) + end + "}"
        if isinstance(value, list):
            if not value:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in value):
                return "[" + ", ".join(emit(v, level + 1) for v in value) + "]"
            return "[" + ",".join(pad + emit(v, level + 1) for v in value) + end + "]"
        if isinstance(value, float):
            return _fmt(value)
        return json.dumps(value)

    return emit(obj, 0) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else _fmt(v) if isinstance(v, float) else v for v in _plain(row)])
    return buf.getvalue()


def _flatten(obj, prefix=""):
    obj = _plain(obj)
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}.{i}")
    else:
        yield prefix, obj


# ---------------------------------------------------------------- commands

def _try(fn, notes, label):
    """Evaluate ``fn``; record why a quantity is unavailable instead of failing."""
    try:
        return fn()
    except (HeavyTailNoClosedFormLst, InfiniteMoment, Unstable, NotRegularlyVarying) as exc:
        notes.append(f"{label}: {exc}")
        return None


def _analyze(cfg: RunConfig) -> dict:
    model = cfg.model
    opts = cfg.options
    s_grid = opts.get("s_grid", [0.1, 0.5, 1.0, 2.0, 5.0])
    cdf_grid = opts.get("cdf_grid", [0.5, 1.0, 2.0, 5.0])
    notes = []
    queues = []
    residuals = []
    for i in (1, 2):
        def lst_rows(i=i):
            rows = []
            for s in s_grid:
                total = transforms.marginal_workload_lst(model, i, s)
                q = model.oriented(i).q1
                pk = transforms.mg1_workload_lst(q.lam, q.service, s)
                y = transforms.y_lst(model, i, s)
                residual = abs(total - pk * y)
                residuals.append(residual)
                rows.append({"s": s, "workload": total.real, "mg1": pk.real, "y": y.real,
                             "switch_epoch": transforms.switch_epoch_lst(model, s, i).real,
                             "decomposition_residual": residual})
            return rows

        def cdf_rows(i=i):
            values = transforms.invert_workload_cdf(model, i, np.array(cdf_grid))
            return [{"x": x, "value": float(v)} for x, v in zip(cdf_grid, np.atleast_1d(values))]

        queues.append({
            "queue": i,
            "mean": _try(lambda i=i: transforms.workload_mean(model, i), notes, f"queue {i} mean"),
            "variance": _try(lambda i=i: transforms.workload_variance(model, i), notes, f"queue {i} variance"),
            "y_mean": _try(lambda i=i: transforms.y_mean(model, i), notes, f"queue {i} y_mean"),
            "atom_at_zero": _try(lambda i=i: transforms.workload_atom_at_zero(model, i), notes, f"queue {i} atom"),
            "switch_epoch_mean": _try(lambda i=i: transforms.switch_epoch_mean(model, i), notes,
                                      f"queue {i} switch_epoch_mean"),
            "lst": _try(lst_rows, notes, f"queue {i} lst") or [],
            "cdf": _try(cdf_rows, notes, f"queue {i} cdf") or [],
        })
    out = {
        "schema": "analyze",
        "schema_version": SCHEMA_VERSION,
        "model": model.to_dict(),
        "stability": check_stability(model).to_dict(),
        "mean": queues[0]["mean"],
        "variance": queues[0]["variance"],
        "queues": queues,
        "decomposition_residual": max(residuals) if residuals else None,
        "ht_coefficients": _try(lambda: asymptotics.ht_coefficients(model).to_dict(), notes, "ht_coefficients"),
        "ht_limit_mean": _try(lambda: asymptotics.ht_limit_mean(model), notes, "ht_limit_mean"),
    }
    if isinstance(model.q1.service, Pareto):
        out["tail_asymptotes"] = _try(
            lambda: {w: asymptotics.heavy_tail_asymptote(model, w).to_dict() for w in ("V1", "MG1", "Y")},
            notes, "tail_asymptotes")
    if opts.get("asymptotics"):
        out["asymptotics"] = _asymptotics_block(model, s_grid, opts.get("tail_x", [10.0, 100.0]), notes)
    out["notes"] = notes
    return out


def _asymptotics_block(model, s_grid, tail_x, notes) -> dict:
    block = {}
    block["heavy_traffic"] = _try(lambda: [
        {"s": s, "scaled_lst": asymptotics.ht_scaled_lst(model, s).real,
         "limit_lst": asymptotics.ht_limit_lst(model, s)} for s in s_grid
    ], notes, "heavy_traffic")

    def tails():
        return [{"x": x, "subexp_tail_approx": asymptotics.subexp_tail_approx(model, x),
                 "one_big_jump_integral": asymptotics.one_big_jump_integral(model, x)} for x in tail_x]

    block["tail"] = _try(tails, notes, "tail")
    if isinstance(model.q1.service, Pareto):
        dist = model.q1.service
        block["contraction_delta"] = _try(lambda: asymptotics.contraction_delta(model), notes, "contraction_delta")
        block["mittag_leffler_lst"] = [
            {"s": s, "value": asymptotics.mittag_leffler_limit_lst(dist.mean, dist.index, s)} for s in s_grid
        ] if 1 < dist.index < 2 else None
    if model.q1 == model.q2:
        block["work_conservation"] = _try(lambda: asymptotics.work_conservation_gap(model).to_dict(),
                                          notes, "work_conservation")
    return block


def _simulate(cfg: RunConfig) -> dict:
    opts = cfg.options
    keys = ("horizon", "warmup", "seed", "replications", "tail_levels", "cdf_grid", "max_switch_samples")
    sim_cfg = simulator.SimConfig(**{k: opts[k] for k in keys if k in opts})
    est = simulator.simulate(cfg.model, sim_cfg, backend=opts.get("backend"))
    out = {"schema": "simulate", "schema_version": SCHEMA_VERSION, "model": cfg.model.to_dict()}
    out.update(est.to_dict(include_samples=opts.get("include_samples", False)))
    rows = []
    if any(x.size for x in est.switch_epoch_samples):
        for s in opts.get("switch_lst_s", [0.5, 1.0, 2.0]):
            rows.append({"s": s, **est.switch_epoch_lst(s).to_dict()})
    out["switch_epoch_lst"] = rows
    if "queue_lengths_eps" in opts:
        ql = simulator.simulate_queue_lengths(cfg.model, opts["queue_lengths_eps"], sim_cfg,
                                              backend=opts.get("backend"))
        out["queue_lengths"] = ql.to_dict()
    return out


def _perturb(cfg: RunConfig) -> dict:
    opts = cfg.options
    model = cfg.model
    trunc = perturbation.TruncationSpec(opts.get("n1", 30), opts.get("n2", 30))
    eps = opts["eps"]
    method = opts.get("method", "all")
    terms = opts.get("terms", 20)
    dists = {}
    residuals = {}
    if method in ("series", "resolvent", "all"):
        ws = perturbation.PerturbationWorkspace.build(model, trunc)
        residuals["phi"] = ws.phi_residuals
        if method in ("series", "all"):
            dists["series"] = perturbation.series_stationary(ws, eps, terms)
        if method in ("resolvent", "all"):
            dists["resolvent"] = perturbation.resolvent_stationary(ws, eps)
    if method in ("direct", "all"):
        dists["direct"] = perturbation.direct_stationary(trunc, model, eps)
    names = list(dists)
    tv = {
        f"{a}-{b}": perturbation.total_variation(dists[a], dists[b])
        for i, a in enumerate(names) for b in names[i + 1:]
    }
    for name, dist in dists.items():
        residuals[name] = dist.diagnostics
    uniform, slack = perturbation.check_uniformization(model)
    return {
        "schema": "perturb",
        "schema_version": SCHEMA_VERSION,
        "model": model.to_dict(),
        "truncation": {"N1": trunc.N1, "N2": trunc.N2},
        "epsilon": eps,
        "terms": terms,
        "uniformization": {"holds": uniform, "slack": list(slack)},
        "distribution": {
            name: {
                "probabilities": d.probabilities,
                "queue1_marginal": d.queue_length_marginal().sum(axis=1),
                "queue2_marginal": d.queue_length_marginal().sum(axis=0),
                "server_marginal": d.server_marginal(),
            }
            for name, d in dists.items()
        },
        "residuals": residuals,
        "tv_comparisons": tv,
    }


def _contour(cfg: RunConfig) -> dict:
    sym = kernel.SymmetricModel.from_model(cfg.model)
    n = cfg.options.get("n_points", 64)
    points = kernel.trace_contour(sym, n)
    thetas = 2.0 * np.pi * np.arange(n + 1) / n
    residual = np.abs(kernel.kernel_eval(sym, points, points.conj()))
    return {
        "schema": "contour",
        "schema_version": SCHEMA_VERSION,
        "model": cfg.model.to_dict(),
        "n_points": n,
        "points": [
            {"theta": t, "re_z": z.real, "im_z": z.imag, "kernel_residual": r}
            for t, z, r in zip(thetas.tolist(), points.tolist(), residual.tolist())
        ],
        "max_kernel_residual": float(residual.max()),
    }


_HANDLERS = {"analyze": _analyze, "simulate": _simulate, "perturb": _perturb, "contour": _contour}


def to_csv(command: str, result: dict) -> str:
    """CSV view of a result; numbers are identical to the JSON view."""
    if command == "contour":
        pts = result["points"]
        return _csv(["theta", "re_z", "im_z", "kernel_residual"],
                    [[p["theta"], p["re_z"], p["im_z"], p["kernel_residual"]] for p in pts])
    if command == "simulate":
        rows = []
        for i, q in enumerate(result["queues"], start=1):
            for name in ("time_avg_workload", "workload_second_moment", "workload_variance",
                         "zero_fraction", "busy_fraction"):
                rows.append([name, i, None, q[name]["mean"], q[name]["stderr"]])
            for kind in ("cdf", "tail"):
                for row in q[kind]:
                    rows.append([kind, i, row["x"], row["mean"], row["stderr"]])
        m = result["server_at_queue1"]
        rows.append(["server_at_queue1", None, None, m["mean"], m["stderr"]])
        for row in result["switch_epoch_lst"]:
            rows.append(["switch_epoch_lst", 1, row["s"], row["mean"], row["stderr"]])
        return _csv(["metric", "queue", "x", "mean", "stderr"], rows)
    if command == "perturb":
        rows = []
        for name, d in result["distribution"].items():
            for variable in ("queue1_marginal", "queue2_marginal", "server_marginal"):
                for level, p in enumerate(_plain(d[variable])):
                    rows.append([name, variable.replace("_marginal", ""), level, p])
        return _csv(["method", "variable", "level", "probability"], rows)
    return _csv(["key", "value"], list(_flatten(result)))


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute a parsed config and write its output; returns the exit code."""
    stdout = stdout or sys.stdout
    try:
        result = _HANDLERS[cfg.command](cfg)
    except ValidationError as exc:
        log.error("invalid input%s: %s", f" ({exc.key})" if exc.key else "", exc)
        return 2
    except (Unstable, HeavyTailNoClosedFormLst, InfiniteMoment, NotRegularlyVarying) as exc:
        log.error("invalid input: %s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    text = dumps(result) if cfg.output_format == "json" else to_csv(cfg.command, result)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def _levels(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polling-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON config file, or - for stdin")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
        p.add_argument("--verbose", "-v", action="store_true")
        return p

    p = common(sub.add_parser("analyze", help="transforms, moments and asymptotics"))
    p.add_argument("--asymptotics", action="store_true", default=None)
    p.add_argument("--s-grid", dest="s_grid", type=_levels)
    p.add_argument("--tail-x", dest="tail_x", type=_levels)

    p = common(sub.add_parser("simulate", help="discrete-event simulation"))
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--warmup", type=float)
    p.add_argument("--reps", dest="replications", type=int)
    p.add_argument("--tail-levels", dest="tail_levels", type=_levels)
    p.add_argument("--queue-lengths", dest="queue_lengths_eps", type=float, metavar="EPS")
    p.add_argument("--include-samples", dest="include_samples", action="store_true", default=None)

    p = common(sub.add_parser("perturb", help="perturbation series for exponential services"))
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--terms", type=int)
    p.add_argument("--method", choices=_METHODS)

    p = common(sub.add_parser("contour", help="trace the kernel contour (symmetric model)"))
    p.add_argument("--n-points", dest="n_points", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="polling-lab: %(message)s", stream=sys.stderr)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        if args.config == "-":
            text = sys.stdin.read()
        else:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return 2
    try:
        cfg = parse_config(text, args.command, overrides)
    except PollingLabError as exc:
        key = getattr(exc, "key", None)
        log.error("invalid config%s: %s", f" ({key})" if key else "", exc)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
