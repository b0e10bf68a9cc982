"""Experiment configs, dispatch and report files.

A report has a canonical section (everything determined by config and seed)
and a ``meta`` section holding timestamps and wall time.  Only the canonical
section takes part in reproducibility checks.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import rng
from .bitpred import (
    PreparedFrog,
    automaton_from_json,
    automaton_predictor,
    evaluate,
    load_automaton,
    strongly_accessible,
    two_sided_predictor,
)
from .errors import InvalidArgument
from .forecast import (
    exact_failure_probability,
    forecast_params,
    martingale_report,
    run_forecaster,
    score_forecast,
)
from .frog_composed import DEFAULT_C, CompositionParams, composed_exact, default_K
from .frog_core import (
    RationalThreshold,
    chip_stack_distribution,
    lemma_bounds_check,
    outcome_probabilities,
    sample_finite,
)
from .streams import generate, parse_stream_spec, prefix_density

KINDS = ("frog-finite", "frog-composed", "bitpred", "forecast", "streams")
OPS = {"bitpred": ("run", "check"), "forecast": ("run", "exact", "martingale"), "streams": ("gen", "density")}


class ConfigError(InvalidArgument):
    pass


def rat(x: Fraction) -> dict:
    """Exact rational plus an approximate decimal rendering."""
    x = Fraction(x)
    return {"exact": f"{x.numerator}/{x.denominator}", "approx": float(x)}


def _fraction(value, name) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"parameter {name!r}: {value!r} is not a rational") from None


@dataclass
class ExperimentConfig:
    kind: str
    op: Optional[str] = None
    stream: Optional[str] = None
    params: dict = field(default_factory=dict)
    mode: str = "exact"
    trials: int = 1
    seed: int = 0
    out: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in OPS:
            if self.op is None:
                self.op = OPS[self.kind][0]
            if self.op not in OPS[self.kind]:
                raise ConfigError(f"{self.kind} has no operation {self.op!r}")
        if self.mode not in ("exact", "sample"):
            raise ConfigError(f"mode must be 'exact' or 'sample', got {self.mode!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must lie in [0, 2**64)")
        if self.stream is not None:
            parse_stream_spec(self.stream)
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        if "kind" not in doc:
            raise ConfigError("config needs a 'kind'")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def param(self, name, default=None, kind=Fraction):
        if name not in self.params or self.params[name] is None:
            if default is ...:
                raise ConfigError(f"{self.kind} needs parameter {name!r}")
            return default
        value = self.params[name]
        if kind is Fraction:
            return _fraction(value, name)
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"parameter {name!r}: bad value {value!r}") from None


@dataclass
class RunReport:
    canonical: dict
    meta: dict

    def canonical_json(self) -> str:
        return json.dumps(self.canonical, sort_keys=True, indent=2)

    def to_json(self) -> str:
        return json.dumps({"canonical": self.canonical, "meta": self.meta}, sort_keys=True, indent=2)

    def summary_rows(self) -> list[tuple[str, str]]:
        rows = []
        for key, value in sorted(self.canonical["summary"].items()):
            if isinstance(value, dict) and "exact" in value:
                rows.append((key, value["exact"]))
            else:
                rows.append((key, json.dumps(value) if isinstance(value, (list, dict)) else str(value)))
        return rows

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jpath, cpath = out / "report.json", out / "summary.csv"
        jpath.write_text(self.to_json() + "\n")
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "value"])
            w.writerows(self.summary_rows())
        return jpath, cpath


def _stream(cfg: ExperimentConfig):
    if cfg.stream is None:
        raise ConfigError(f"{cfg.kind} needs a stream spec")
    return generate(cfg.stream, rng.derive_seed(cfg.seed, 0xB175))


def _frog_finite(cfg):
    stream = _stream(cfg)
    K = cfg.param("K", ..., int)
    th = RationalThreshold.from_fraction(cfg.param("delta", ...))
    offset = cfg.param("offset", 0, int)
    window = [int(b) for b in stream.segment(offset, K)]
    dist = chip_stack_distribution(window[:-1], th, K)
    out = outcome_probabilities(dist, window)
    bounds = lemma_bounds_check(window, th, K)
    summary = {"success": rat(out.success), "death": rat(out.death), "wait": rat(out.wait),
               "pass_ii": bounds.pass_ii, "pass_iii": bounds.pass_iii}
    body = {"window": "".join(map(str, window)),
            "step_probs": [rat(x) for x in dist.step_probs], "p_infty": rat(dist.p_infty),
            "bounds": {"delta_prime": rat(bounds.delta_prime),
                       "bound_ii": None if bounds.bound_ii is None else rat(bounds.bound_ii),
                       "excess_iii": rat(bounds.excess_iii), "bound_iii": rat(bounds.bound_iii)}}
    if cfg.mode == "sample":
        counts = {"crossed_safely": 0, "squashed": 0, "waited": 0}
        for k in range(cfg.trials):
            counts[sample_finite(stream, offset, th, K, rng.derive_seed(cfg.seed, k)).result] += 1
        summary.update({f"sampled_{k}": v for k, v in counts.items()})
    return summary, body


def _composition(cfg) -> CompositionParams:
    eps, gamma = cfg.param("eps", ...), cfg.param("gamma", ...)
    K = cfg.param("K", None, int)
    if K is None:
        K = default_K(eps, gamma, cfg.param("C", DEFAULT_C))
    return CompositionParams(eps, gamma, K)


def _frog_composed(cfg):
    stream = _stream(cfg)
    params = _composition(cfg)
    R_max = cfg.param("rmax", 6, int)
    rep = composed_exact(stream, params, R_max)
    rep.check_consistency()
    summary = {"K": params.K, "eps2": rat(params.eps2), "R_max": R_max,
               "success_total": rat(rep.success_total), "death_total": rat(rep.death_total),
               "residual": rat(rep.residual)}
    body = {"intervals": [{"r": rec.r, "start": rec.start, "end": rec.end, "reach": rat(rec.reach),
                           "success": rat(rec.outcome.success), "death": rat(rec.outcome.death),
                           "wait": rat(rec.outcome.wait)} for rec in rep.intervals]}
    if cfg.mode == "sample":
        horizon = rep.intervals[-1].end
        bits = stream.prefix(horizon)
        prepared = PreparedFrog(bits, params, R_max)
        counts = {"crossed_safely": 0, "squashed": 0, "waited": 0}
        for k in range(cfg.trials):
            f = prepared.play(rng.derive_seed(cfg.seed, k))
            counts["waited" if f is None else ("squashed" if bits[f - 1] else "crossed_safely")] += 1
        summary.update({f"sampled_{k}": v for k, v in counts.items()})
    return summary, body


def _automaton(cfg):
    spec = cfg.params.get("automaton")
    if spec is None:
        return None, None
    if isinstance(spec, dict):
        return automaton_from_json(spec)
    return load_automaton(spec)


def _bitpred(cfg):
    M, B = _automaton(cfg)
    if cfg.op == "check":
        if M is None:
            raise ConfigError("bitpred check needs an automaton")
        acc = strongly_accessible(M, B)
        return {"strongly_accessible": acc.accessible, "witness": acc.witness}, {}
    stream = _stream(cfg)
    eps = cfg.param("eps", ...)
    K = cfg.param("K", None, int)
    C = cfg.param("C", DEFAULT_C)
    R_max = cfg.param("rmax", 8, int)
    if M is None:
        strategy = two_sided_predictor(eps, K, R_max, C)
        inner = strategy
    else:
        strategy = automaton_predictor(M, B, eps, K, R_max, C,
                                       on_inaccessible=cfg.params.get("on_inaccessible", "raise"))
        inner = strategy.inner
    horizon = cfg.param("horizon", inner.horizon, int)
    stats = evaluate(strategy, stream, horizon, cfg.trials, cfg.seed)
    none_exact = strategy.prepare(stream.prefix(horizon)).none_probability()
    lo, hi = stats.correct_ci
    summary = {"trials": stats.trials, "correct": stats.correct, "incorrect": stats.incorrect,
               "none": stats.none, "correct_rate": stats.correct_rate,
               "correct_wilson95": [lo, hi], "none_probability": rat(none_exact),
               "inner_K": inner.params.K, "inner_delta": rat(inner.delta), "horizon": horizon}
    return summary, {"outcomes": "".join(o[0] for o in stats.outcomes)}


def _forecast(cfg):
    if cfg.op == "run":
        stream = _stream(cfg)
        fp = forecast_params(cfg.param("delta", ...), cfg.param("eps", ...), cfg.param("n", None, int))
        records, ok = [], 0
        for k in range(cfg.trials):
            sc = score_forecast(stream, run_forecaster(stream, fp.n, rng.derive_seed(cfg.seed, k)), fp.eps)
            ok += sc.success
            f = sc.forecast
            records.append({"R": f.R, "S": f.S, "t": f.t, "N": f.N, "p": rat(f.p),
                            "p_star": rat(sc.p_star), "success": sc.success})
        summary = {"n": fp.n, "n_overridden": fp.overridden, "horizon": fp.horizon,
                   "successes": ok, "trials": cfg.trials}
        return summary, {"forecasts": records}
    n = cfg.param("n", ..., int)
    stream = _stream(cfg)
    prefix = stream.prefix(1 << n)
    if cfg.op == "exact":
        eps = cfg.param("eps", ...)
        fail = exact_failure_probability(prefix, n, eps)
        return {"n": n, "eps": rat(eps), "failure_probability": rat(fail),
                "markov_bound": rat(Fraction(4, n) / (eps * eps))}, {}
    rep = martingale_report(prefix, n)
    summary = {"n": n, "total_variance": rat(rep.total_variance), "level_sum": rat(rep.level_sum),
               "identity_holds": rep.identity_holds, "forecast_sq_error": rat(rep.forecast_sq_error),
               "forecast_bound": rat(rep.forecast_bound)}
    return summary, {"level_terms": [rat(x) for x in rep.level_terms],
                     "residuals": [rat(x) for x in rep.residuals]}


def _streams(cfg):
    stream = _stream(cfg)
    t = cfg.param("t", 64, int)
    if cfg.op == "gen":
        return {"t": t, "bits": "".join(map(str, stream.prefix(t).tolist()))}, {}
    rep = prefix_density(stream, t, cfg.param("tail_from", None, int))
    return {"t": t, "ones": rep.ones, "density": rat(rep.density), "running_inf": rat(rep.running_inf)}, {}


DISPATCH = {"frog-finite": _frog_finite, "frog-composed": _frog_composed, "bitpred": _bitpred,
            "forecast": _forecast, "streams": _streams}


def run_experiment(config: ExperimentConfig) -> RunReport:
    config.validate()
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    summary, body = DISPATCH[config.kind](config)
    canonical = {"config": json.loads(config.to_json()), "summary": summary, "detail": body}
    canonical["config"].pop("out", None)
    meta = {"started": started.isoformat(), "wall_seconds": time.perf_counter() - clock}
    report = RunReport(canonical, meta)
    if config.out:
        report.write(config.out)
    return report


__all__ = ["ExperimentConfig", "RunReport", "run_experiment", "parse_stream_spec", "ConfigError", "rat"]
