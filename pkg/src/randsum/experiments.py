"""Verification runs, parameter sweeps and report files.

A run pairs a theorem bound with a distance estimate for the same random sum
and target, and records a verdict. Configs are plain nested dicts (usually
read from YAML); see ``configs/`` for examples.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import os
import platform
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import scipy
import yaml

from . import __version__
from .bounds import (DEFAULT_TOL, BoundValue, ConstantsRegistry, Metric, general_bound,
                     geometric_laplace_bound, normal_limit_bound)
from .distances import (DistanceEstimate, dkw_band, empirical_dk, empirical_w1,
                        exact_dk_lattice, exact_w1_lattice, gaussian_random_sum_law,
                        numeric_dk_between_cdfs, numeric_w1_between_cdfs,
                        random_sum_exact_pmf, sample_random_sum)
from .index_models import IndexModel, ScaledIndexLimit, exact_dk_scaled_index
from .limits import LimitLaw
from .summands import SummandDist, SummandModel

log = logging.getLogger(__name__)

CSV_COLUMNS = ("param", "metric", "theorem_tag", "bound", "truncation_error",
               "estimate", "band", "margin", "verdict", "seed")
METHODS = ("exact", "empirical", "numeric", "none")
SEED_ENV = "RANDSUM_SEED"


class ConfigError(ValueError):
    """The experiment configuration is invalid or asks for an unsupported pairing."""


class SweepAborted(RuntimeError):
    def __init__(self, message, reports):
        super().__init__(message)
        self.reports = reports


@dataclass
class ExperimentConfig:
    index: dict
    summands: dict
    metric: str = "kolmogorov"
    mode: str = "iid"
    sharp: bool = False
    target: Any = "auto"
    constants: dict = field(default_factory=dict)
    method: dict = field(default_factory=lambda: {"kind": "none"})
    sweep: Optional[dict] = None
    output: dict = field(default_factory=dict)
    series_tol: float = DEFAULT_TOL
    workers: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("index", "summands"):
            if key not in raw:
                raise ConfigError(f"config is missing the {key!r} section")
        cfg = cls(**copy.deepcopy(raw))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    def validate(self):
        if self.metric not in ("kolmogorov", "wasserstein"):
            raise ConfigError(f"metric must be kolmogorov or wasserstein, not {self.metric!r}")
        if self.mode not in ("iid", "noniid", "noniid_alt"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        kind = self.method.get("kind", "none")
        if kind not in METHODS:
            raise ConfigError(f"method kind must be one of {METHODS}, not {kind!r}")
        for key in ("tail_tol", "delta"):
            if key in self.method and not self.method[key] > 0:
                raise ConfigError(f"method.{key} must be positive")
        if kind == "empirical":
            if int(self.method.get("n_samples", 0)) < 1:
                raise ConfigError("empirical method needs n_samples >= 1")
            if self.metric == "wasserstein" and int(self.method.get("n_seeds", 1)) < 2:
                raise ConfigError("Wasserstein Monte Carlo needs n_seeds >= 2 for its error band")
        if not self.series_tol > 0:
            raise ConfigError("series_tol must be positive")
        if self.sweep is not None:
            values = self.sweep.get("values", [])
            if "param" not in self.sweep or len(values) < 4:
                raise ConfigError("a sweep needs a param and at least 4 grid values")
            diffs = np.diff(np.asarray(values, dtype=float))
            if not (np.all(diffs > 0) or np.all(diffs < 0)):
                raise ConfigError("sweep values must be strictly monotone")
        try:
            self.index_model()
            self.summand_model()
            self.constants_registry()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def master_seed(self) -> int:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            return int(env)
        return int(self.method.get("master_seed", 0))

    # model builders

    def index_model(self) -> IndexModel:
        spec = dict(self.index)
        family = spec.pop("family", None)
        if family == "geometric":
            return IndexModel.geometric(spec["p"])
        if family == "poisson":
            return IndexModel.poisson(spec["lam"])
        if family == "binomial":
            return IndexModel.binomial(spec["m"], spec["p"])
        if family == "deterministic":
            return IndexModel.deterministic(spec["n"])
        if family == "custom":
            probs = spec["probs"]
            if isinstance(probs, dict):
                probs = {int(k): v for k, v in probs.items()}
            return IndexModel.custom(probs)
        raise ConfigError(f"unknown index family {family!r}")

    def summand_model(self) -> SummandModel:
        spec = dict(self.summands)
        preset = spec.get("preset")
        params = spec.get("params", [])
        builders = {
            "rademacher": SummandDist.rademacher,
            "two_point": SummandDist.two_point,
            "centered_uniform": SummandDist.centered_uniform,
            "centered_exponential": SummandDist.centered_exponential,
            "gaussian": SummandDist.gaussian,
            "lattice": SummandDist.lattice,
        }
        if preset not in builders:
            raise ConfigError(f"unknown summand preset {preset!r}")
        base = builders[preset](*params)
        schedule = spec.get("schedule")
        if schedule is None:
            return SummandModel.iid(base)
        if schedule.get("kind") == "harmonic":
            return SummandModel.harmonic_schedule(base, float(schedule.get("c", 1.0)))
        raise ConfigError(f"unknown schedule {schedule!r}")

    def constants_registry(self) -> ConstantsRegistry:
        return ConstantsRegistry(**self.constants)

    def target_law(self) -> Optional[LimitLaw]:
        if self.target == "auto":
            return None
        spec = dict(self.target)
        kind = spec.pop("kind")
        if kind == "normal":
            return LimitLaw.normal(spec.get("sigma", 1.0))
        if kind == "laplace":
            return LimitLaw.laplace(spec.get("a", 0.0), spec.get("b", 1.0))
        if kind == "scale_mixture":
            mixing = {"exponential": ScaledIndexLimit.exponential(),
                      "point_mass": ScaledIndexLimit.point_mass()}[spec.get("mixing", "exponential")]
            return LimitLaw.scale_mixture(spec.get("sigma", 1.0), mixing)
        raise ConfigError(f"unknown target kind {kind!r}")


@dataclass
class VerificationReport:
    bound: BoundValue
    estimate: Optional[DistanceEstimate]
    target: LimitLaw
    provenance: dict
    param: Optional[float] = None

    @property
    def margin(self) -> Optional[float]:
        if self.estimate is None:
            return None
        return self.bound.certified - self.estimate.value - self.estimate.band

    @property
    def verdict(self) -> str:
        if self.estimate is None:
            return "n/a"
        if self.margin >= 0:
            return "pass"
        if self.estimate.value - self.estimate.band > self.bound.certified:
            return "fail"
        return "inconclusive"

    def row(self) -> dict:
        est = self.estimate
        return {
            "param": self.param,
            "metric": self.bound.metric.value,
            "theorem_tag": self.bound.theorem_tag,
            "bound": self.bound.value,
            "truncation_error": self.bound.truncation_error,
            "estimate": None if est is None else est.value,
            "band": None if est is None else est.band,
            "margin": self.margin,
            "verdict": self.verdict,
            "seed": self.provenance.get("master_seed"),
        }


def _as_mixing(target: LimitLaw, sigma_hat: float) -> ScaledIndexLimit:
    """Mixing law U with target = sigma_hat*sqrt(U)*zeta, or ConfigError."""
    if target.kind == "normal":
        scale, mixing = target.sigma, ScaledIndexLimit.point_mass()
    elif target.kind == "laplace":
        if target.a != 0.0:
            raise ConfigError("only centered Laplace targets are normal scale mixtures")
        scale, mixing = target.b * math.sqrt(2.0), ScaledIndexLimit.exponential()
    else:
        if not isinstance(target.mixing, ScaledIndexLimit):
            raise ConfigError("mixture target needs a continuous or point-mass mixing law")
        scale, mixing = target.sigma, target.mixing
    if not math.isclose(scale, sigma_hat, rel_tol=1e-12):
        raise ConfigError(
            f"target scale {scale!r} does not match the summands' limiting scale {sigma_hat!r}"
        )
    return mixing


def theorem_bound(cfg: ExperimentConfig) -> tuple[BoundValue, LimitLaw]:
    """Pick the bound that applies to the configured index, metric and target."""
    index = cfg.index_model()
    summands = cfg.summand_model()
    constants = cfg.constants_registry()
    metric = Metric(cfg.metric)
    target = cfg.target_law()
    tol = cfg.series_tol
    if target is None:
        if index.family == "geometric" and metric is Metric.KOLMOGOROV:
            return geometric_laplace_bound(index.p, summands, cfg.mode, constants, tol, cfg.sharp)
        if index.family in ("poisson", "binomial") and metric is Metric.WASSERSTEIN:
            return normal_limit_bound(index, summands,
                                      "iid" if cfg.mode == "iid" else "noniid", constants, tol)
        if index.family == "geometric":
            raise ConfigError(
                "no Wasserstein bound is available for the Laplace limit of a geometric sum; "
                "use metric kolmogorov or an explicit normal target"
            )
        s2 = summands.sigma_hat_sq()
        if s2 is None:
            raise ConfigError("the summand schedule has no limiting variance")
        target = LimitLaw.normal(math.sqrt(s2))
    s2 = summands.sigma_hat_sq()
    if s2 is None:
        raise ConfigError("the summand schedule has no limiting variance")
    if metric is Metric.WASSERSTEIN:
        if target.kind != "normal" or not math.isclose(target.sigma, math.sqrt(s2), rel_tol=1e-12):
            raise ConfigError("Wasserstein bounds are available only against N(0, sigma_hat^2)")
        return general_bound(index, summands, metric, None, constants, tol), target
    mixing = _as_mixing(target, math.sqrt(s2))
    dk_u = exact_dk_scaled_index(index, mixing)
    return general_bound(index, summands, metric, dk_u, constants, tol), target


def _stream(master_seed: int, row: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(row, rep)))


def estimate_distance(cfg: ExperimentConfig, target: LimitLaw, row: int = 0
                      ) -> tuple[Optional[DistanceEstimate], dict]:
    method = dict(cfg.method)
    kind = method.get("kind", "none")
    metric = Metric(cfg.metric)
    index = cfg.index_model()
    summands = cfg.summand_model()
    info: dict = {"method": kind}
    if kind == "none":
        return None, info
    if kind == "exact":
        tail = float(method.get("tail_tol", 1e-10))
        try:
            pmf = random_sum_exact_pmf(index, summands, tail)
        except ValueError as exc:
            raise ConfigError(f"exact method unavailable: {exc}") from exc
        info["deficiency"] = pmf.deficiency
        if metric is Metric.KOLMOGOROV:
            return exact_dk_lattice(pmf, target.cdf), info
        if target.kind not in ("normal", "laplace"):
            raise ConfigError("exact Wasserstein needs a closed-form normal or Laplace target")
        return exact_w1_lattice(pmf, target), info
    if kind == "numeric":
        tail = float(method.get("tail_tol", 1e-9))
        try:
            law = gaussian_random_sum_law(index, summands)
        except ValueError as exc:
            raise ConfigError(f"numeric method unavailable: {exc}") from exc
        if metric is Metric.WASSERSTEIN:
            return numeric_w1_between_cdfs(law, target, tail), info
        lo = min(law.support_edges(tail)[0], target.support_edges(tail)[0])
        hi = max(law.support_edges(tail)[1], target.support_edges(tail)[1])
        est = numeric_dk_between_cdfs(law.cdf, target.cdf, (lo, hi))
        band = est.band + law.mixing_deficiency()
        return DistanceEstimate(est.value, est.metric, est.method, band), info
    # empirical
    n_samples = int(method["n_samples"])
    n_seeds = int(method.get("n_seeds", 1))
    delta = float(method.get("delta", 0.01))
    master = cfg.master_seed()
    values = []
    for rep in range(n_seeds):
        rng = _stream(master, row, rep)
        w = sample_random_sum(index, summands, rng, n_samples)
        if metric is Metric.KOLMOGOROV:
            values.append(empirical_dk(w, target.cdf, delta).value)
        else:
            values.append(empirical_w1(w, target).value)
    info["replicates"] = values
    mean = float(np.mean(values))
    if metric is Metric.KOLMOGOROV:
        band = dkw_band(n_samples, delta)
    else:
        band = 3.0 * float(np.std(values, ddof=1)) / math.sqrt(n_seeds)
    return DistanceEstimate(mean, metric, "empirical", band, n_samples, master), info


def _versions() -> dict:
    return {"randsum": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_verify(cfg: ExperimentConfig | dict, row: int = 0,
               param: Optional[float] = None) -> VerificationReport:
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    try:
        bound, target = theorem_bound(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    estimate, info = estimate_distance(cfg, target, row)
    provenance = {
        "config": cfg.to_dict(),
        "target": target.describe(),
        "master_seed": cfg.master_seed() if cfg.method.get("kind") == "empirical" else None,
        "row": row,
        "versions": _versions(),
        **info,
    }
    return VerificationReport(bound, estimate, target, provenance, param)


def _set_path(raw: dict, path: str, value) -> dict:
    out = copy.deepcopy(raw)
    node = out
    keys = path.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value
    return out


def fit_loglog_slope(points) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y): (slope, intercept, residual norm)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two points")
    if np.any(pts <= 0):
        raise ValueError("log-log fit needs positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.unique(lx).size < 2:
        raise ValueError("need at least two distinct x values")
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = float(np.linalg.norm(ly - design @ coef))
    return float(coef[0]), float(coef[1]), resid


@dataclass
class SweepResult:
    reports: list
    bound_slope: Optional[tuple]
    estimate_slope: Optional[tuple]

    def slopes(self) -> dict:
        out = {}
        if self.bound_slope:
            out["bound"] = dict(zip(("slope", "intercept", "residual"), self.bound_slope))
        if self.estimate_slope:
            out["estimate"] = dict(zip(("slope", "intercept", "residual"), self.estimate_slope))
        return out


def _sweep_row(args):
    raw, path, value, row = args
    return run_verify(_set_path(raw, path, value), row=row, param=value)


def run_sweep(cfg: ExperimentConfig | dict) -> SweepResult:
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    raw = cfg.to_dict()
    raw["sweep"] = None
    path = cfg.sweep["param"]
    jobs = [(raw, path, v, i) for i, v in enumerate(cfg.sweep["values"])]
    reports = []
    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                for rep in pool.map(_sweep_row, jobs):
                    reports.append(rep)
        else:
            for job in jobs:
                reports.append(_sweep_row(job))
    except (ConfigError, ValueError) as exc:
        raise SweepAborted(f"sweep stopped at grid point {len(reports)}: {exc}", reports) from exc
    params = [r.param for r in reports]
    bound_slope = fit_loglog_slope(list(zip(params, [r.bound.value for r in reports])))
    est = [r.estimate.value if r.estimate else 0.0 for r in reports]
    estimate_slope = None
    if all(v > 0 for v in est):
        estimate_slope = fit_loglog_slope(list(zip(params, est)))
    return SweepResult(reports, bound_slope, estimate_slope)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def render_report(reports, fmt: str = "csv", slopes: Optional[dict] = None,
                  aborted: Optional[str] = None) -> str:
    """Serialize reports; identical inputs give identical text."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            row = rep.row()
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        if aborted is not None:
            writer.writerow(["" for _ in CSV_COLUMNS[:-2]] + ["aborted", ""])
        for name, fit in (slopes or {}).items():
            buf.write(f"# slope_{name}={_fmt(fit['slope'])} intercept={_fmt(fit['intercept'])}"
                      f" residual={_fmt(fit['residual'])}\n")
        return buf.getvalue()
    if fmt == "json":
        rows = []
        for rep in reports:
            row = rep.row()
            row["provenance"] = rep.provenance
            rows.append(row)
        doc = {"rows": rows, "slopes": slopes or {}}
        if aborted is not None:
            doc["aborted"] = aborted
        return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def emit_report(reports, fmt: str = "csv", path: Optional[str] = None,
                slopes: Optional[dict] = None, aborted: Optional[str] = None) -> str:
    text = render_report(reports, fmt, slopes, aborted)
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc}") from exc
    return text


class _ConfigLoader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-6`` style numbers (no dot) as floats."""


_ConfigLoader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."),
)


def _parse_value(text: str):
    return yaml.load(text, Loader=_ConfigLoader)


def load_config(path: str, overrides=()) -> ExperimentConfig:
    """Read a YAML (or JSON) config and apply ``key.sub=value`` overrides."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.load(fh, Loader=_ConfigLoader)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} is not a key/value document")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        raw = _set_path(raw, key, _parse_value(value))
    return ExperimentConfig.from_dict(raw)
