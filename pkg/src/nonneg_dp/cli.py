"""Command-line front end: bias curves, optimizer, comparisons, DP certificates.

Emits plot-ready CSV for curves and JSON for scalar reports, all floats fixed
to 17 significant digits so identical seeds give byte-identical files.
Parameters come from flags or a JSON config file (flags win).  Exit codes:
0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import bias as bias_mod
from .distributions import LaplaceDist, laplace_pdf, log_laplace_mgf
from .mechanisms import (
    MechanismSpec,
    PostProcessor,
    PrivacyParams,
    Variant,
    restricted_pdf,
)
from .queries import Dataset, QueryDescriptor, QueryKind, evaluate_query, load_records, relative_bound_K, sensitivity
from .verify import certify_dp_densities, mc_bias

__all__ = ["ExperimentConfig", "main", "read_csv_report"]

SEED_ENV_VAR = "NONNEG_DP_SEED"

_MECHANISMS = ("laplace", "bit", "ramp", "restricted", "multiplicative")
_QUERY_NAMES = {"count": QueryKind.COUNT_ABOVE_THRESHOLD,
                "sum": QueryKind.BOUNDED_SUM,
                "mean": QueryKind.BOUNDED_MEAN}


class UsageError(Exception):
    """Bad flags or config; maps to exit code 2."""


@dataclass
class ExperimentConfig:
    command: str
    mechanism: str = "bit"
    epsilon: float = 1.0
    sensitivity: float = 1.0
    scale: float | None = None
    alpha: float = 0.0
    kbound: float | None = None
    claimed: float | None = None
    q_min: float = 0.0
    q_max: float = 10.0
    q_points: int = 21
    q_log: bool = False
    samples: int = 100_000
    seed: int = 0
    out: str | None = None
    format: str | None = None
    data: str | None = None
    lower: float = 0.0
    upper: float = 1.0
    lower_open: bool = False
    query: str = "mean"
    threshold: float = 0.0
    count_floor: int | None = None

    def validate(self) -> None:
        if self.mechanism not in _MECHANISMS:
            raise UsageError(f"unknown mechanism {self.mechanism!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise UsageError(f"epsilon must be positive, got {self.epsilon}")
        if not (math.isfinite(self.sensitivity) and self.sensitivity >= 0):
            raise UsageError(f"sensitivity must be nonnegative, got {self.sensitivity}")
        if self.scale is not None and not (math.isfinite(self.scale) and self.scale > 0):
            raise UsageError(f"scale must be positive, got {self.scale}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise UsageError(f"alpha must be nonnegative, got {self.alpha}")
        if self.kbound is not None and not (math.isfinite(self.kbound) and self.kbound > 0):
            raise UsageError(f"kbound must be positive, got {self.kbound}")
        if self.mechanism == "multiplicative" and self.kbound is None:
            raise UsageError("multiplicative mechanism requires --kbound")
        if not (math.isfinite(self.q_min) and self.q_min >= 0):
            raise UsageError(f"q-min must be nonnegative, got {self.q_min}")
        if not (math.isfinite(self.q_max) and self.q_max >= self.q_min):
            raise UsageError("q-max must be at least q-min")
        if self.q_points < 1:
            raise UsageError("q-points must be at least 1")
        if self.q_log and self.q_min <= 0:
            raise UsageError("logarithmic q grid requires q-min > 0")
        if self.samples < 100:
            raise UsageError("samples must be at least 100")
        if self.format not in (None, "csv", "json"):
            raise UsageError(f"unknown format {self.format!r}")
        if self.query not in _QUERY_NAMES:
            raise UsageError(f"unknown query {self.query!r}")

    @property
    def resolved_scale(self) -> float:
        if self.scale is not None:
            return self.scale
        if self.mechanism == "multiplicative":
            return self.kbound / self.epsilon
        return self.sensitivity / self.epsilon

    def q_grid(self) -> np.ndarray:
        if self.q_points == 1:
            return np.array([self.q_min])
        if self.q_log:
            return np.geomspace(self.q_min, self.q_max, self.q_points)
        return np.linspace(self.q_min, self.q_max, self.q_points)

    def row_seeds(self, count: int) -> list[int]:
        return [int(s) for s in np.random.SeedSequence(self.seed).generate_state(count, np.uint64)]


# --------------------------------------------------------------------------
# deterministic formatting

def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _json_render(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(f"{pad}  {json.dumps(k)}: {_json_render(v, indent + 1)}"
                           for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}  {_json_render(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        if math.isinf(obj) or math.isnan(obj):
            return json.dumps(_fmt(obj))
        return _fmt(obj)
    if isinstance(obj, int):
        return str(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _write_text(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _emit_csv(out: str | None, header: list[str], rows: list[list], summary: str | None = None) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    if summary is not None:
        lines.append(f"# {summary}")
    _write_text(out, "\n".join(lines) + "\n")


def _emit_report(conf: ExperimentConfig, header: list[str], rows: list[list],
                 summary: str | None = None) -> None:
    fmt = conf.format or "csv"
    if fmt == "csv":
        _emit_csv(conf.out, header, rows, summary)
        return
    records = [dict(zip(header, row)) for row in rows]
    payload: dict = {"rows": records}
    if summary is not None:
        payload["summary"] = summary
    _write_text(conf.out, _json_render(payload) + "\n")


def _emit_scalar(conf: ExperimentConfig, record: dict) -> None:
    fmt = conf.format or "json"
    if fmt == "json":
        _write_text(conf.out, _json_render(record) + "\n")
        return
    _emit_csv(conf.out, ["key", "value"], [[k, v] for k, v in record.items()])


def read_csv_report(path: str) -> tuple[list[str], list[list], list[str]]:
    """Parse a CSV report back into header, typed rows, and summary lines."""
    header: list[str] = []
    rows: list[list] = []
    summaries: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                summaries.append(line[1:].strip())
                continue
            if not header:
                header = line.split(",")
                continue
            row = []
            for cell in line.split(","):
                if cell == "":
                    row.append("")
                    continue
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    return header, rows, summaries


# --------------------------------------------------------------------------
# mechanism assembly shared by the subcommands

def _build_spec(conf: ExperimentConfig) -> MechanismSpec:
    privacy = PrivacyParams(conf.epsilon, conf.sensitivity)
    b = conf.resolved_scale
    if conf.mechanism == "laplace":
        return MechanismSpec(Variant.PLAIN, privacy, b)
    if conf.mechanism == "bit":
        return MechanismSpec(Variant.POST_PROCESSED, privacy, b, postprocessor=PostProcessor.ramp())
    if conf.mechanism == "ramp":
        return MechanismSpec(Variant.POST_PROCESSED, privacy, b,
                             postprocessor=PostProcessor.translated_ramp(conf.alpha))
    if conf.mechanism == "restricted":
        return MechanismSpec(Variant.RESTRICTED, privacy, b)
    privacy = PrivacyParams(conf.epsilon, conf.kbound)
    warning = None
    if conf.kbound >= conf.epsilon:
        warning = "relative bound >= epsilon: mechanism mean is infinite"
    elif conf.kbound >= conf.epsilon / 2.0:
        warning = "relative bound >= epsilon/2: mechanism variance is infinite"
    return MechanismSpec(Variant.MULTIPLICATIVE, privacy, b, k_bound=conf.kbound, warning=warning)


def _closed_form_bias(conf: ExperimentConfig, q: float) -> float:
    b = conf.resolved_scale
    if conf.mechanism == "laplace":
        return 0.0
    if conf.mechanism == "bit":
        return bias_mod.bias_bit(q, b)
    if conf.mechanism == "ramp":
        return bias_mod.bias_translated_ramp(q, conf.alpha, b)
    if conf.mechanism == "restricted":
        return bias_mod.bias_restricted(q, b)
    return q * (log_laplace_mgf(b, 1.0) - 1.0) if math.isfinite(log_laplace_mgf(b, 1.0)) else math.inf


def _quadrature_bias(conf: ExperimentConfig, q: float) -> float:
    b = conf.resolved_scale
    if conf.mechanism == "laplace":
        base = LaplaceDist(q, b)
        value, _ = integrate.quad(lambda x: x * laplace_pdf(base, x),
                                  q - 40 * b, q + 40 * b, points=[q], limit=200)
        return value - q
    if conf.mechanism == "bit":
        return bias_mod.expectation_postprocessed_quadrature(PostProcessor.ramp(), q, b) - q
    if conf.mechanism == "ramp":
        pp = PostProcessor.translated_ramp(conf.alpha)
        return bias_mod.expectation_postprocessed_quadrature(pp, q, b) - q
    if conf.mechanism == "restricted":
        base = LaplaceDist(q, b)
        value, _ = integrate.quad(lambda x: x * restricted_pdf(base, x),
                                  0.0, q + 40 * b, points=[q] if q > 0 else None, limit=200)
        return value - q
    if b >= 1.0:
        return math.inf
    radius = 40.0 * b / (1.0 - b)
    value, _ = integrate.quad(lambda x: math.exp(x) * math.exp(-abs(x) / b) / (2 * b),
                              -radius, radius, points=[0.0], limit=200)
    return q * (value - 1.0)


# --------------------------------------------------------------------------
# subcommands

def cmd_bias_curve(conf: ExperimentConfig) -> int:
    spec = _build_spec(conf)
    grid = conf.q_grid()
    seeds = conf.row_seeds(len(grid))
    rows = []
    for q, seed in zip(grid, seeds):
        q = float(q)
        if conf.mechanism == "multiplicative" and q == 0.0:
            raise UsageError("multiplicative mechanism requires q > 0; use --q-min > 0")
        estimate = mc_bias(spec, q, conf.samples, seed)
        rows.append([q, _closed_form_bias(conf, q), _quadrature_bias(conf, q),
                     estimate.mean, estimate.stderr])
    _emit_report(conf, ["q", "bias_closed_form", "bias_quadrature", "bias_mc", "mc_stderr"], rows)
    return 0


def cmd_optimal_alpha(conf: ExperimentConfig) -> int:
    b = conf.resolved_scale
    alpha_star = bias_mod.optimal_alpha(b)
    at_star = bias_mod.max_abs_bias_translated_ramp(alpha_star, b)
    at_zero = bias_mod.max_abs_bias_translated_ramp(0.0, b)
    _emit_scalar(conf, {
        "b": b,
        "alpha_star": alpha_star,
        "B_at_alpha_star": at_star,
        "B_at_zero": at_zero,
        "improvement_ratio": at_zero / at_star,
    })
    return 0


def cmd_compare(conf: ExperimentConfig) -> int:
    b_post = conf.sensitivity / conf.epsilon
    b_restricted = 2.0 * b_post
    rows = []
    for q in conf.q_grid():
        q = float(q)
        rows.append([
            q,
            bias_mod.bias_bit(q, b_post),
            bias_mod.bias_restricted(q, b_restricted),
            bias_mod.bias_ratio_restricted_vs_bit(q, conf.epsilon, conf.sensitivity),
        ])
    _emit_report(conf, ["q", "bias_bit", "bias_restricted_same_eps", "ratio"], rows)
    return 0


def cmd_verify_dp(conf: ExperimentConfig) -> int:
    b = conf.resolved_scale
    delta = conf.sensitivity
    if conf.mechanism in ("bit", "ramp"):
        raise UsageError("post-processed mechanisms have no closed-form density to certify")
    if conf.mechanism == "laplace":
        pair = (LaplaceDist(0.0, b), LaplaceDist(delta, b))
        grid = np.linspace(-10 * b, delta + 10 * b, 2000)
        densities = (lambda x: laplace_pdf(pair[0], x), lambda x: laplace_pdf(pair[1], x))
        claimed_default = conf.epsilon
    elif conf.mechanism == "restricted":
        pair = (LaplaceDist(0.0, b), LaplaceDist(delta, b))
        grid = np.linspace(0.0, delta + 10 * b, 2000)
        densities = (lambda x: restricted_pdf(pair[0], x), lambda x: restricted_pdf(pair[1], x))
        claimed_default = 2.0 * conf.epsilon
    else:
        # Log-domain densities: adjacent queries are at log-distance <= kbound.
        pair = (LaplaceDist(0.0, b), LaplaceDist(conf.kbound, b))
        grid = np.linspace(-10 * b, conf.kbound + 10 * b, 2000)
        densities = (lambda x: laplace_pdf(pair[0], x), lambda x: laplace_pdf(pair[1], x))
        claimed_default = conf.epsilon
    claimed = conf.claimed if conf.claimed is not None else claimed_default
    certificate = certify_dp_densities(densities[0], densities[1], claimed, grid)
    _emit_scalar(conf, {
        "mechanism": conf.mechanism,
        "epsilon_claimed": certificate.epsilon_claimed,
        "max_log_ratio_observed": certificate.max_log_ratio_observed,
        "grid_description": certificate.grid_description,
        "passed": certificate.passed,
    })
    return 0 if certificate.passed else 1


def cmd_mc_validate(conf: ExperimentConfig) -> int:
    spec = _build_spec(conf)
    grid = conf.q_grid()
    seeds = conf.row_seeds(len(grid))
    rows = []
    max_abs_z = 0.0
    for q, seed in zip(grid, seeds):
        q = float(q)
        if conf.mechanism == "multiplicative" and q == 0.0:
            raise UsageError("multiplicative mechanism requires q > 0; use --q-min > 0")
        closed = _closed_form_bias(conf, q)
        estimate = mc_bias(spec, q, conf.samples, seed)
        if math.isfinite(closed) and estimate.stderr > 0:
            z = (estimate.mean - closed) / estimate.stderr
            max_abs_z = max(max_abs_z, abs(z))
        else:
            z = math.nan
        rows.append([q, closed, estimate.mean, estimate.stderr, z, estimate.warning or ""])
    _emit_report(conf, ["q", "bias_closed_form", "bias_mc", "mc_stderr", "z", "warning"],
                 rows, summary=f"max_abs_z={_fmt(max_abs_z)}")
    return 0


def cmd_query_info(conf: ExperimentConfig) -> int:
    if conf.data is None:
        raise UsageError("query-info requires --data")
    try:
        records = load_records(conf.data)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read dataset: {exc}") from exc
    kind = _QUERY_NAMES[conf.query]
    qd = QueryDescriptor(kind, threshold=conf.threshold, count_floor=conf.count_floor)
    try:
        dataset = Dataset(records, conf.lower, conf.upper, conf.lower_open)
        value = evaluate_query(qd, dataset)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    bounds = (conf.lower, conf.upper)
    delta = sensitivity(qd, bounds, len(dataset))
    _emit_scalar(conf, {
        "query": conf.query,
        "n": len(dataset),
        "value": value,
        "sensitivity": delta,
        "relative_bound": relative_bound_K(qd, bounds, len(dataset)),
        "epsilon": conf.epsilon,
        "scale": delta / conf.epsilon,
    })
    return 0


_HANDLERS = {
    "bias-curve": cmd_bias_curve,
    "optimal-alpha": cmd_optimal_alpha,
    "compare": cmd_compare,
    "verify-dp": cmd_verify_dp,
    "mc-validate": cmd_mc_validate,
    "query-info": cmd_query_info,
}


# --------------------------------------------------------------------------
# argument parsing and config-file merging

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of parameters; flags override it")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${SEED_ENV_VAR}, then 0)")

    mech = argparse.ArgumentParser(add_help=False)
    mech.add_argument("--mechanism", choices=_MECHANISMS)
    mech.add_argument("--epsilon", type=float)
    mech.add_argument("--sensitivity", type=float)
    mech.add_argument("--scale", type=float, help="override the Laplace scale b")
    mech.add_argument("--alpha", type=float, help="ramp translation")
    mech.add_argument("--kbound", type=float, help="relative bound for the multiplicative mechanism")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--q-min", type=float, dest="q_min")
    grid.add_argument("--q-max", type=float, dest="q_max")
    grid.add_argument("--q-points", type=int, dest="q_points")
    grid.add_argument("--q-log", action=argparse.BooleanOptionalAction, dest="q_log")

    samples = argparse.ArgumentParser(add_help=False)
    samples.add_argument("--samples", type=int)

    parser = argparse.ArgumentParser(prog="nonneg-dp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bias-curve", parents=[common, mech, grid, samples],
                   help="closed-form vs quadrature vs Monte Carlo bias over a q grid")
    sub.add_parser("optimal-alpha", parents=[common, mech],
                   help="worst-case-bias-minimizing ramp translation")
    sub.add_parser("compare", parents=[common, mech, grid],
                   help="clamping vs restriction bias at equal privacy level")
    p = sub.add_parser("verify-dp", parents=[common, mech],
                       help="density-ratio privacy certificate")
    p.add_argument("--claimed", type=float, help="privacy level to certify (default: the guaranteed level)")
    sub.add_parser("mc-validate", parents=[common, mech, grid, samples],
                   help="Monte Carlo validation of closed-form bias with z-scores")
    p = sub.add_parser("query-info", parents=[common, mech],
                       help="evaluate a dataset query and its sensitivity bounds")
    p.add_argument("--data", help="newline-delimited decimal records")
    p.add_argument("--lower", type=float)
    p.add_argument("--upper", type=float)
    p.add_argument("--lower-open", action=argparse.BooleanOptionalAction, dest="lower_open")
    p.add_argument("--query", choices=sorted(_QUERY_NAMES))
    p.add_argument("--threshold", type=float)
    p.add_argument("--count-floor", type=int, dest="count_floor")
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    merged = {key: value for key, value in vars(args).items() if key != "config"}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as handle:
                file_values = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        if not isinstance(file_values, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in file_values.items():
            key = key.replace("-", "_")
            if key in merged and merged[key] is None:
                merged[key] = value
    if merged.get("seed") is None:
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                merged["seed"] = int(env_seed)
            except ValueError as exc:
                raise UsageError(f"${SEED_ENV_VAR} must be an integer, got {env_seed!r}") from exc
    conf = ExperimentConfig(command=merged.pop("command"))
    for key, value in merged.items():
        if value is not None:
            setattr(conf, key, value)
    conf.validate()
    return conf


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        conf = _resolve_config(args)
        return _HANDLERS[conf.command](conf)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
