"""Experiment drivers: configuration, runs and reports behind the command line.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`Report`, a plain container that renders to JSON or to CSV with a
``#`` header block.  Reports carry their own pass/fail checks; whether a
failed check changes the exit status is up to the caller.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__, engine, statkit
from .erroranalysis import fit_rate, error_row, z11_closed_form
from .limitlaw import default_checkpoints, heavy_tail, limit_samples, moment_diagnostics, sample_error_law
from .model import Model, check_cir_condition, get_model
from .path import STREAM_SYNTH, generate, path_generator
from .reference import ReferenceMethod, reference_method
from .scheme import Scheme, default_scheme, simulate
from .weakerror import clamp_functional, estimate_weak_error, min_functional, tail_probability_check

SUBCOMMANDS = ("strong-rate", "error-law", "zstats", "moments", "weak-error")
SELF_CHECK_PATHS = 500
ERROR_LAW_KS_MAX = 0.05
CIR_RATIO_MAX = 2.0


class ConfigError(ValueError):
    """The configuration is invalid or refused before (or instead of) simulating."""


@dataclass
class ExperimentConfig:
    subcommand: str
    model: str = "gbm"
    params: dict = field(default_factory=dict)
    x0: float = 1.0
    T: float = 1.0
    n_list: tuple = (16, 32, 64, 128, 256)
    n: int = 1024
    paths: int = 1000
    seed: int = 0
    refinement: int = 64
    schemes: tuple = ()
    source: str = "limit"
    functional: str = "clamp"
    tail_x: tuple = (2.0, 4.0, 8.0)
    workers: int | None = None
    output: str | None = None
    format: str | None = None

    # neither changes a single output bit, so they stay out of the echo
    _NOT_ECHOED = ("workers", "output", "format")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.normalize()
        return cfg

    def normalize(self) -> None:
        try:
            self.x0 = float(self.x0)
            self.T = float(self.T)
            self.n_list = tuple(int(n) for n in self.n_list)
            self.n = int(self.n)
            self.paths = int(self.paths)
            self.seed = int(self.seed)
            self.refinement = int(self.refinement)
            self.schemes = tuple(Scheme(s).value for s in self.schemes)
            self.tail_x = tuple(float(x) for x in self.tail_x)
            self.params = {str(k): float(v) for k, v in dict(self.params).items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.paths < 1:
            raise ConfigError("paths must be at least 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.refinement < 1:
            raise ConfigError("refinement must be at least 1")
        if self.source not in ("limit", "error"):
            raise ConfigError("source must be 'limit' or 'error'")
        if self.functional not in ("clamp", "min"):
            raise ConfigError("functional must be 'clamp' or 'min'")
        if self.format not in (None, "csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.uses_n_list:
            ns = self.n_list
            if len(ns) < 1 or any(n < 1 or n & (n - 1) for n in ns):
                raise ConfigError(f"n_list must hold powers of two, got {list(ns)}")
            if any(b <= a for a, b in zip(ns, ns[1:])):
                raise ConfigError("n_list must be strictly increasing")
            fine = self.n_fine
            bad = [n for n in ns if fine % n]
            if bad:
                raise ConfigError(f"n values {bad} do not divide the fine grid of {fine} steps")
        elif self.n < 1:
            raise ConfigError("n must be positive")

    @property
    def uses_n_list(self) -> bool:
        return self.subcommand in ("strong-rate", "weak-error") or (
            self.subcommand == "moments" and self.source == "error")

    @property
    def n_fine(self) -> int:
        return self.refinement * (max(self.n_list) if self.uses_n_list else self.n)

    def echo(self) -> dict:
        d = asdict(self)
        for k in self._NOT_ECHOED:
            d.pop(k)
        d["params"] = dict(sorted(d["params"].items()))
        return d

    def build_model(self) -> Model:
        try:
            return get_model(self.model, **self.params)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc.args[0] if exc.args else exc)) from None


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class Report:
    meta: dict
    body: dict
    columns: list
    rows: list
    footer: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    noise_floor: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        d = dict(self.meta)
        d.update(self.body)
        d["checks"] = [asdict(c) for c in self.checks]
        return _clean(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        lines = [f"# {k}: {json.dumps(_clean(v))}" for k, v in self.meta.items()]
        lines.append(",".join(self.columns))
        lines += [",".join(_cell(v) for v in row) for row in self.rows]
        lines += [f"# {f}" for f in self.footer]
        lines += [f"# check {c.name}: {'pass' if c.passed else 'FAIL'} {c.detail}".rstrip() for c in self.checks]
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _meta(cfg: ExperimentConfig, model: Model, notes=()) -> dict:
    method = reference_method(model)
    return {
        "artifact": "sde_errlab",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "reference_method": method.value,
        "refinement": cfg.refinement,
        "fine_steps": cfg.n_fine,
        "notes": list(notes),
    }


def _hypothesis_notes(model: Model) -> list[str]:
    if model.half_line:
        return ["diffusion is not bounded below near 0: the limit-law comparison runs outside "
                "the hypotheses under which the limit is established"]
    return []


def _schemes(cfg: ExperimentConfig, model: Model) -> tuple[str, ...]:
    if cfg.schemes:
        return cfg.schemes
    if model.half_line:
        return (Scheme.SYMMETRIZED_EULER.value,)
    return (Scheme.EULER.value, Scheme.MILSTEIN.value)


def _finite_rms(x) -> tuple[float, int]:
    """RMS over the finite entries, scaled so huge errors do not overflow when squared."""
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(x)
    if not ok.any():
        return float("nan"), int(x.size)
    v = x[ok]
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return 0.0, int((~ok).sum())
    return scale * float(np.sqrt(np.mean((v / scale) ** 2))), int((~ok).sum())


@dataclass(frozen=True)
class SelfConsistency:
    reference_gap_rms: float
    scheme_error_rms: float
    paths: int
    nonfinite: int
    passed: bool


def reference_self_consistency(model: Model, x0: float, T: float, n_fine: int, n_coarsest: int, scheme: str,
                               seed: int, paths: int = SELF_CHECK_PATHS, workers=1) -> SelfConsistency:
    """Halve the reference refinement on the same Brownian paths.

    The reference is trusted when its terminal RMS change is at most half the
    terminal RMS error of the coarsest scheme it is meant to measure.
    """
    plan = engine.SimulationPlan(model, x0, T, n_fine, seed, ns=(n_coarsest,), schemes=(scheme,),
                                 aux_ref_factor=2)
    out = engine.run(plan, paths, workers=workers)
    with np.errstate(invalid="ignore"):
        gap, bad_gap = _finite_rms(out["ref_T"] - out["ref_coarse_T"])
        err, bad_err = _finite_rms(out[f"{scheme}:{n_coarsest}:terminal"] - out["ref_T"])
    passed = bool(np.isfinite(gap) and np.isfinite(err) and 2.0 * gap <= err)
    return SelfConsistency(gap, err, paths, max(bad_gap, bad_err), passed)


def _ensure_reference(cfg, model, n_coarsest, scheme) -> dict | None:
    if reference_method(model) is ReferenceMethod.EXACT_GBM:
        return None
    sc = reference_self_consistency(model, cfg.x0, cfg.T, cfg.n_fine, n_coarsest, scheme, cfg.seed,
                                    workers=cfg.workers)
    info = asdict(sc)
    if not sc.passed:
        raise ConfigError(
            f"reference refinement R={cfg.refinement} is too coarse: halving it moves the terminal value by "
            f"{sc.reference_gap_rms:.3g} (RMS), more than half the coarsest scheme error {sc.scheme_error_rms:.3g}")
    return info


def run_strong_rate(cfg: ExperimentConfig) -> Report:
    model = cfg.build_model()
    schemes = _schemes(cfg, model)
    ns = cfg.n_list
    self_check = _ensure_reference(cfg, model, ns[0], schemes[0])
    plan = engine.SimulationPlan(model, cfg.x0, cfg.T, cfg.n_fine, cfg.seed, ns=ns, schemes=schemes, track_sup=True)
    out = engine.run(plan, cfg.paths, workers=cfg.workers)
    ref_T = out["ref_T"]
    columns = ["scheme", "n", "paths", "rms_sup", "rms_sup_se", "rms_norm_sup", "rms_terminal", "mean_Un", "var_Un"]
    rows, table, fits, checks, footer = [], [], {}, [], []
    for sch in schemes:
        pts = []
        for n in ns:
            with np.errstate(invalid="ignore"):
                row = error_row(n, out[f"{sch}:{n}:sup"], out[f"{sch}:{n}:terminal"] - ref_T)
            row = {"scheme": sch, **row, "rms_norm_sup": math.sqrt(n) * row["rms_sup"]}
            table.append(row)
            rows.append([row[c] for c in columns])
            pts.append((n, row["rms_sup"]))
        fit = fit_rate(pts)
        fits[sch] = asdict(fit)
        footer.append(f"fit {sch}: alpha={fit.alpha!r} intercept={fit.intercept!r} r2={fit.r2!r} "
                      f"slope_se={fit.slope_se!r}")
        lo, hi = (0.85, 1.15) if sch == Scheme.MILSTEIN.value else (0.40, 0.60)
        checks.append(Check(f"{sch}_alpha", lo <= fit.alpha <= hi, f"alpha={fit.alpha:.4f} in [{lo}, {hi}]"))
        checks.append(Check(f"{sch}_r2", fit.r2 >= 0.98, f"r2={fit.r2:.5f} >= 0.98"))
    body = {"model": model.name, "M": cfg.paths, "rows": table, "fits": fits, "reference_check": self_check}
    return Report(_meta(cfg, model), body, columns, rows, footer, checks)


def _moment_rows(rep):
    cols = ["t", "mean", "se_mean", "m2", "se_m2", "m2_max", "se_m2_max"]
    rows = [[getattr(c, k) for k in cols] for c in rep.checkpoints]
    return cols, rows, [asdict(c) for c in rep.checkpoints]


def _heavy_tail_dict(ht) -> dict:
    return {"hill": ht.hill, "ci": list(ht.ci), "k": ht.k, "flag": ht.flag, "sensitivity": ht.sensitivity,
            "nonfinite": ht.nonfinite, "m2_halves": list(ht.m2_halves)}


def _martingale_checks(rep) -> list[Check]:
    checks = []
    if rep.martingale:
        ok = [abs(c.mean) <= 3 * c.se_mean for c in rep.checkpoints]
        checks.append(Check("martingale_mean", all(ok),
                            " ".join(f"t={c.t:g}:{c.mean:.3g}/{c.se_mean:.3g}" for c in rep.checkpoints)))
    checks.append(Check("max_m2_nondecreasing", rep.max_m2_nondecreasing,
                        " ".join(f"{c.m2_max:.4g}" for c in rep.checkpoints)))
    return checks


def run_error_law(cfg: ExperimentConfig) -> Report:
    model = cfg.build_model()
    scheme = cfg.schemes[0] if cfg.schemes else default_scheme(model).value
    if cfg.paths < 100:
        raise ConfigError("error-law needs at least 100 paths")
    self_check = _ensure_reference(cfg, model, cfg.n, scheme)
    s = sample_error_law(model, cfg.x0, cfg.n, cfg.paths, cfg.seed, refinement=cfg.refinement, T=cfg.T,
                         scheme=scheme, workers=cfg.workers)
    a = s.scheme_side[np.isfinite(s.scheme_side)]
    b = s.limit_side[np.isfinite(s.limit_side)]
    ks = statkit.ks_two_sample(a, b)
    times = [c * cfg.T / s.n_fine for c in s.checkpoints]
    rep = moment_diagnostics(s.limit_at, s.limit_max_at, times, model.drift_free_derivative)
    cols, rows, ck = _moment_rows(rep)
    ht = heavy_tail(s.limit_side)
    body = {
        "model": model.name, "n": cfg.n, "M": cfg.paths, "scheme": scheme,
        "checkpoints": ck,
        "ks": {"d": ks.d, "critical": ks.critical_05, "pass": ks.passed},
        "heavy_tail": _heavy_tail_dict(ht),
        "nonfinite": {"scheme_side": int(s.scheme_side.size - a.size), "limit_side": int(s.limit_side.size - b.size)},
        "max_m2_nondecreasing": rep.max_m2_nondecreasing,
        "dropped_paths": rep.dropped,
        "reference_check": self_check,
    }
    footer = [f"ks: d={ks.d!r} critical={ks.critical_05!r} pass={ks.passed}",
              f"heavy_tail: hill={ht.hill!r} ci=({ht.ci[0]!r}, {ht.ci[1]!r}) flag={ht.flag}"]
    checks = [Check("ks_distance", ks.d < ERROR_LAW_KS_MAX, f"d={ks.d:.4f} < {ERROR_LAW_KS_MAX}")]
    return Report(_meta(cfg, model, _hypothesis_notes(model)), body, cols, rows, footer, checks)


def run_zstats(cfg: ExperimentConfig) -> Report:
    model = cfg.build_model()
    n, T = cfg.n, cfg.T
    plan = engine.SimulationPlan(model, cfg.x0, T, cfg.n_fine, cfg.seed, ns=(n,), track_z=True)
    out = engine.run(plan, cfg.paths, workers=cfg.workers)
    z = {"z12": out[f"z12:{n}"], "z21": out[f"z21:{n}"], "z22": out[f"z22:{n}"]}
    z11 = z11_closed_form(n, T)
    columns = ["statistic", "mean", "variance", "rms"]
    stats_ = {}
    rows = [["z11", z11, 0.0, z11]]
    for k, v in z.items():
        var = float(np.var(v, ddof=1)) if v.size > 1 else float("nan")
        r = float(np.sqrt(np.mean(v**2)))
        stats_[k] = {"mean": float(v.mean()), "variance": var, "rms": r}
        rows.append([k, float(v.mean()), var, r])
    normal = path_generator(cfg.seed, STREAM_SYNTH).standard_normal(cfg.paths)
    ks = statkit.ks_two_sample(np.sqrt(2.0 / T) * z["z22"], normal)
    body = {"model": model.name, "n": n, "T": T, "M": cfg.paths, "z11": z11, **stats_,
            "ks_sqrt2_z22_vs_normal": {"d": ks.d, "critical": ks.critical_05, "pass": ks.passed}}
    r22 = stats_["z22"]["rms"]
    v22 = stats_["z22"]["variance"]
    checks = [
        Check("ks_normal", ks.passed, f"d={ks.d:.4f} < {ks.critical_05:.4f}"),
        Check("var_z22", abs(v22 - T / 2) <= 0.03, f"var={v22:.4f} in {T / 2:g} +- 0.03"),
        Check("rms_z12_small", stats_["z12"]["rms"] < r22 / 5, f"{stats_['z12']['rms']:.4g} < {r22 / 5:.4g}"),
        Check("rms_z21_small", stats_["z21"]["rms"] < r22 / 5, f"{stats_['z21']['rms']:.4g} < {r22 / 5:.4g}"),
    ]
    footer = [f"ks sqrt(2/T) z22 vs N(0,1): d={ks.d!r} critical={ks.critical_05!r}"]
    return Report(_meta(cfg, model), body, columns, rows, footer, checks)


def run_moments(cfg: ExperimentConfig) -> Report:
    model = cfg.build_model()
    if cfg.source == "error":
        return _moments_from_errors(cfg, model)
    n_fine = cfg.n_fine
    ckpts = default_checkpoints(n_fine)
    out = limit_samples(model, cfg.x0, cfg.T, n_fine, cfg.paths, cfg.seed, checkpoints=ckpts, workers=cfg.workers)
    times = [c * cfg.T / n_fine for c in ckpts]
    rep = moment_diagnostics(out["U_ckpt"], out["Umax_ckpt"], times, model.drift_free_derivative)
    cols, rows, ck = _moment_rows(rep)
    ht = heavy_tail(out["U_T"])
    body = {"model": model.name, "n": cfg.n, "M": cfg.paths, "source": "limit", "checkpoints": ck,
            "martingale": rep.martingale, "max_m2_nondecreasing": rep.max_m2_nondecreasing,
            "m2_below_max_m2": rep.m2_below_max_m2, "dropped_paths": rep.dropped,
            "heavy_tail": _heavy_tail_dict(ht)}
    footer = [f"heavy_tail: hill={ht.hill!r} ci=({ht.ci[0]!r}, {ht.ci[1]!r}) flag={ht.flag}"]
    return Report(_meta(cfg, model, _hypothesis_notes(model)), body, cols, rows, footer, _martingale_checks(rep))


def _moments_from_errors(cfg: ExperimentConfig, model: Model) -> Report:
    scheme = cfg.schemes[0] if cfg.schemes else default_scheme(model).value
    ns = cfg.n_list
    self_check = _ensure_reference(cfg, model, ns[0], scheme)
    plan = engine.SimulationPlan(model, cfg.x0, cfg.T, cfg.n_fine, cfg.seed, ns=ns, schemes=(scheme,),
                                 track_sup=True)
    out = engine.run(plan, cfg.paths, workers=cfg.workers)
    columns = ["n", "m2_norm_sup", "se", "nonfinite"]
    rows, table = [], []
    for n in ns:
        v = math.sqrt(n) * out[f"{scheme}:{n}:sup"]
        ok = np.isfinite(v)
        m2, se = statkit.second_moment(v[ok])
        rows.append([n, m2, se, int((~ok).sum())])
        table.append({"n": n, "m2_norm_sup": m2, "se": se, "nonfinite": int((~ok).sum())})
    m2s = [r[1] for r in rows]
    ratio = max(m2s) / min(m2s)
    body = {"model": model.name, "M": cfg.paths, "source": "error", "scheme": scheme, "rows": table,
            "ratio": ratio, "reference_check": self_check}
    checks = [Check("m2_ratio", ratio < CIR_RATIO_MAX, f"max/min={ratio:.4f} < {CIR_RATIO_MAX}")]
    if model.name == "cir":
        p = model.params
        cond = check_cir_condition(p["a"], p["b"], p["sigma"])
        body["cir_condition"] = {"holds": cond.holds, "lhs": cond.lhs, "rhs": cond.rhs}
        checks.insert(0, Check("cir_condition", cond.holds, f"{cond.lhs:.4g} > {cond.rhs:.4g}"))
    footer = [f"ratio max/min of second moments: {ratio!r}"]
    return Report(_meta(cfg, model), body, columns, rows, footer, checks)


def run_weak_error(cfg: ExperimentConfig) -> Report:
    model = cfg.build_model()
    scheme = cfg.schemes[0] if cfg.schemes else default_scheme(model).value
    if cfg.paths < 1000:
        raise ConfigError("weak-error needs at least 1000 paths")
    spec = clamp_functional() if cfg.functional == "clamp" else min_functional()
    self_check = _ensure_reference(cfg, model, cfg.n_list[0], scheme)
    rep = estimate_weak_error(model, cfg.x0, spec, cfg.n_list, cfg.paths, cfg.seed, refinement=cfg.refinement,
                              T=cfg.T, scheme=scheme, workers=cfg.workers)
    columns = ["n", "estimate", "se", "bound"]
    rows = [[n, e, s, b] for n, e, s, b in zip(rep.ns, rep.estimates, rep.ses, rep.bound_curve)]
    nonincr = rep.nonincreasing()
    dom = rep.dominated()
    checks = [
        Check("nonincreasing", all(nonincr), " ".join("ok" if x else "up" for x in nonincr)),
        Check("bound_dominates", all(dom), " ".join("ok" if x else "over" for x in dom)),
    ]
    body = {
        "model": model.name, "functional": spec.name, "scheme": scheme, "M": cfg.paths,
        "rows": [dict(zip(columns, r)) for r in rows],
        "bound_constant": rep.bound_constant, "rate_exponent": rep.rate_exponent,
        "tail": asdict(rep.tail), "growth_exponent": rep.growth_exponent, "pair_ses": list(rep.pair_ses),
        "noise_floor": rep.noise_floor, "reference_check": self_check,
    }
    footer = [f"bound: C={rep.bound_constant!r} exponent={rep.rate_exponent!r} tail_source={rep.tail.source}"]
    if model.name == "cev":
        xs = [x for x in cfg.tail_x if x > cfg.x0]
        tc = tail_probability_check(rep.running_max, cfg.x0, xs)
        body["tail_checks"] = [asdict(t) for t in tc]
        for t in tc:
            footer.append(f"tail x={t.x!r}: fraction={t.fraction!r} ci=({t.ci[0]!r}, {t.ci[1]!r}) bound={t.bound!r}")
        checks.append(Check("tail_probability", all(t.passed for t in tc),
                            " ".join(f"x={t.x:g}:{t.fraction:.4f}<{t.bound:.4f}" for t in tc)))
    return Report(_meta(cfg, model), body, columns, rows, footer, checks, noise_floor=rep.noise_floor)


RUNNERS = {
    "strong-rate": run_strong_rate,
    "error-law": run_error_law,
    "zstats": run_zstats,
    "moments": run_moments,
    "weak-error": run_weak_error,
}


def run(cfg: ExperimentConfig) -> Report:
    cfg.normalize()
    cfg.validate()
    return RUNNERS[cfg.subcommand](cfg)


def dump_path(cfg: ExperimentConfig, fh) -> None:
    """Write the driving Brownian path of path index 0 on the fine grid."""
    from .path import dump_path_csv

    dump_path_csv(generate(cfg.seed, 0, cfg.T, cfg.n_fine), fh)


def dump_trajectory(cfg: ExperimentConfig, fh) -> None:
    """Write the scheme trajectory of path index 0 at the coarsest n."""
    from .scheme import dump_trajectory_csv

    model = cfg.build_model()
    scheme = _schemes(cfg, model)[0]
    n = cfg.n_list[0] if cfg.uses_n_list else cfg.n
    dump_trajectory_csv(simulate(model, cfg.x0, n, generate(cfg.seed, 0, cfg.T, cfg.n_fine), scheme), fh)
