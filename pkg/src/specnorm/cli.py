"""Batch command line front end.

Orchestrates the pipeline simulate/ingest -> estimate -> measure -> infer and
writes machine-readable JSON reports. Configuration is a line-oriented
"key = value" file with ``#`` comments; unknown keys are rejected. Numbers in
reports are serialized with 17 significant digits, so a fixed config and seed
produce byte-identical output and CSV round trips are exact.

Subcommands: ``simulate`` (emit CSV), ``estimate`` (spectral tensor summary),
``measure`` (one deviation-measure path), ``infer`` (full inference report),
``select-d`` (order selection), ``quantiles`` (build/cache a pivot table).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
error. Failures are reported as an error JSON with the pipeline stage tag.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from ._version import __version__
from .errors import ConfigError, DataError, NumericalError
from .estimator import (
    BandwidthPlan,
    SequentialSDO,
    TimeSeriesSample,
    default_bandwidth_plan,
    estimate_sequential_sdo,
    kernel_by_name,
)
from .hermitian import ProductStructure
from .inference import (
    DEFAULT_QUANTILE_SEED,
    PivotLaw,
    confidence_interval,
    estimate_dstar,
    mc_quantiles,
    pivot_cache_path,
    relevant_test,
    self_norm_V,
)
from .measures import (
    SCALING_EXPONENTS,
    SequentialFunctional,
    coherence_sequential,
    stationarity_sequential,
    tvdfpca_sequential,
    tvdpsca_sequential,
)
from .simulate import (
    CoherentPairSpec,
    IidSpec,
    ProcessSpec,
    SeparableSpec,
    TvFar1Spec,
    simulate,
)

__all__ = ["RunConfig", "parse_config", "ingest_csv", "run_pipeline", "dumps_report", "main"]

_MEASURES = ("tvdfpca", "tvdpsca", "coherence", "stationarity")
_PROCESSES = ("iid", "tvfar1", "separable", "coherent_pair")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration (defaults applied, ranges checked)."""

    input: str | None = None
    process: str | None = None
    T: int | None = None
    p: int | None = None
    burn_in: int = 200
    sigma_diag: tuple[float, ...] | None = None
    ar_coeff: float | None = None
    sigma_eps_diag: tuple[float, ...] | None = None
    p1: int | None = None
    p2: int | None = None
    sigma_x_diag: tuple[float, ...] | None = None
    sigma_y_diag: tuple[float, ...] | None = None
    coupling: float | None = None
    alpha: float = 0.5
    kappa: float = 0.4
    kernel: str = "parzen"
    m: int | None = None
    k_omega: int | None = None
    band_lo: float = 0.0
    band_hi: float = math.pi
    measure: str | None = None
    d: int = 1
    d_max: int | None = None
    level_alpha: float = 0.05
    delta: float | None = None
    nu: float | None = None
    d0: int | None = None
    quantile_r: int = 100_000
    quantile_n: int = 2000
    quantile_seed: int = DEFAULT_QUANTILE_SEED
    f_exp: int | None = None
    g_exp: int | None = None
    seed: int = 0
    threads: int = 1
    out: str | None = None


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from None


def _parse_float(raw: str, key: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"key {key!r}: value must be finite, got {raw!r}")
    return value


def _parse_floats(raw: str, key: str) -> tuple[float, ...]:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"key {key!r}: expected a comma-separated list of numbers")
    return tuple(_parse_float(s, key) for s in items)


def _parse_str(raw: str, key: str) -> str:
    return raw


_PARSERS = {
    "input": _parse_str,
    "process": _parse_str,
    "T": _parse_int,
    "p": _parse_int,
    "burn_in": _parse_int,
    "sigma_diag": _parse_floats,
    "ar_coeff": _parse_float,
    "sigma_eps_diag": _parse_floats,
    "p1": _parse_int,
    "p2": _parse_int,
    "sigma_x_diag": _parse_floats,
    "sigma_y_diag": _parse_floats,
    "coupling": _parse_float,
    "alpha": _parse_float,
    "kappa": _parse_float,
    "kernel": _parse_str,
    "m": _parse_int,
    "k_omega": _parse_int,
    "band_lo": _parse_float,
    "band_hi": _parse_float,
    "measure": _parse_str,
    "d": _parse_int,
    "d_max": _parse_int,
    "level_alpha": _parse_float,
    "delta": _parse_float,
    "nu": _parse_float,
    "d0": _parse_int,
    "quantile_r": _parse_int,
    "quantile_n": _parse_int,
    "quantile_seed": _parse_int,
    "f_exp": _parse_int,
    "g_exp": _parse_int,
    "seed": _parse_int,
    "threads": _parse_int,
    "out": _parse_str,
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a "key = value" configuration.

    Lines may carry ``#`` comments; blank lines are skipped. Unknown keys,
    type mismatches, out-of-range values, and inconsistent combinations all
    raise :class:`ConfigError`.
    """
    values: dict = {}
    unknown: list[str] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _PARSERS:
            unknown.append(key)
            continue
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for key {key!r}")
        values[key] = _PARSERS[key](raw, key)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**values)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    if cfg.input is not None and cfg.process is not None:
        raise ConfigError("exactly one of 'input' and 'process' may be set, not both")
    if cfg.process is not None and cfg.process not in _PROCESSES:
        raise ConfigError(f"process must be one of {_PROCESSES}, got {cfg.process!r}")
    if cfg.process is not None and cfg.T is None:
        raise ConfigError("missing required key 'T' for a simulated process")
    if cfg.measure is not None and cfg.measure not in _MEASURES:
        raise ConfigError(f"measure must be one of {_MEASURES}, got {cfg.measure!r}")
    kernel = kernel_by_name(cfg.kernel)  # validates the name
    lo = 1.0 / (2 * kernel.iota + 1)
    if not lo < cfg.kappa < 1.0:
        raise ConfigError(
            f"kappa = {cfg.kappa} outside the admissible range ({lo:.6g}, 1) "
            f"for the {kernel.name} kernel"
        )
    if not 0.0 < cfg.alpha < 1.0:
        raise ConfigError(f"alpha = {cfg.alpha} must lie strictly between 0 and 1")
    if not 0.0 <= cfg.band_lo < cfg.band_hi <= math.pi + 1e-12:
        raise ConfigError(
            f"band [{cfg.band_lo}, {cfg.band_hi}] must satisfy 0 <= lo < hi <= pi"
        )
    if cfg.d < 1:
        raise ConfigError(f"d = {cfg.d} must be at least 1")
    if cfg.d_max is not None and cfg.d_max < 1:
        raise ConfigError(f"d_max = {cfg.d_max} must be at least 1")
    if not 0.002 <= cfg.level_alpha <= 0.5:
        raise ConfigError(
            f"level_alpha = {cfg.level_alpha} outside the supported range [0.002, 0.5]"
        )
    if cfg.delta is not None and cfg.delta < 0:
        raise ConfigError(f"delta = {cfg.delta} must be non-negative")
    if cfg.nu is not None and not 0.0 < cfg.nu < 1.0:
        raise ConfigError(f"nu = {cfg.nu} must lie strictly between 0 and 1")
    if cfg.d0 is not None and cfg.d0 < 1:
        raise ConfigError(f"d0 = {cfg.d0} must be at least 1")
    if cfg.seed < 0 or cfg.quantile_seed < 0:
        raise ConfigError("seeds must be non-negative integers")
    if cfg.threads < 1:
        raise ConfigError(f"threads = {cfg.threads} must be at least 1")
    if cfg.m is not None and cfg.m < 1:
        raise ConfigError(f"m = {cfg.m} must be at least 1")
    if cfg.k_omega is not None and cfg.k_omega < 1:
        raise ConfigError(f"k_omega = {cfg.k_omega} must be at least 1")
    if cfg.measure in ("tvdpsca", "coherence"):
        if _product_structure(cfg) is None:
            raise ConfigError(f"measure = {cfg.measure}: product structure required (keys p1, p2)")


def _product_structure(cfg: RunConfig) -> ProductStructure | None:
    p1, p2 = cfg.p1, cfg.p2
    if p1 is None and cfg.sigma_x_diag is not None:
        p1 = len(cfg.sigma_x_diag)
    if p2 is None and cfg.sigma_y_diag is not None:
        p2 = len(cfg.sigma_y_diag)
    if p1 is None or p2 is None:
        return None
    if p1 < 1 or p2 < 1:
        raise ConfigError("p1 and p2 must be at least 1")
    return ProductStructure(p1=p1, p2=p2)


def ingest_csv(path: str) -> TimeSeriesSample:
    """Read a T x p numeric CSV, auto-detecting an optional header row."""
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: empty file")

    def _numeric(cell: str) -> bool:
        try:
            float(cell)
        except ValueError:
            return False
        return True

    start = 0
    if not all(_numeric(c) for c in rows[0]):
        start = 1
    data_rows = rows[start:]
    if not data_rows:
        raise DataError(f"{path}: no data rows")
    p = len(data_rows[0])
    values = np.empty((len(data_rows), p))
    for i, row in enumerate(data_rows):
        if len(row) != p:
            raise DataError(
                f"{path}: ragged row {start + i + 1} has {len(row)} cells, expected {p}"
            )
        for j, cell in enumerate(row):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {start + i + 1}, column {j + 1}: {cell!r}"
                ) from None
            if not math.isfinite(x):
                raise DataError(
                    f"{path}: non-finite value at row {start + i + 1}, column {j + 1}: {cell!r}"
                )
            values[i, j] = x
    if len(data_rows) < 64:
        raise DataError(f"{path}: need at least 64 rows, got {len(data_rows)}")
    return TimeSeriesSample(data=values)


def _diag_or_eye(diag: tuple[float, ...] | None, p: int | None, what: str) -> np.ndarray:
    if diag is not None:
        return np.diag(np.asarray(diag, dtype=float))
    if p is not None:
        return np.eye(p)
    raise ConfigError(f"{what}: set either its diagonal or the dimension 'p'")


def build_process_spec(cfg: RunConfig) -> ProcessSpec:
    """Translate a configuration into a simulation spec."""
    if cfg.process is None or cfg.T is None:
        raise ConfigError("simulation requires keys 'process' and 'T'")
    common = dict(T=cfg.T, burn_in=cfg.burn_in, seed=cfg.seed)
    if cfg.process == "iid":
        sigma = _diag_or_eye(cfg.sigma_diag, cfg.p, "process iid")
        return IidSpec(sigma=sigma, **common)
    if cfg.process == "tvfar1":
        if cfg.ar_coeff is None:
            raise ConfigError("process tvfar1 requires key 'ar_coeff'")
        sigma = _diag_or_eye(cfg.sigma_eps_diag, cfg.p, "process tvfar1")
        a = cfg.ar_coeff * np.eye(sigma.shape[0])
        return TvFar1Spec(a=a, sigma_eps=sigma, **common)
    if cfg.process == "separable":
        if cfg.sigma_x_diag is None or cfg.sigma_y_diag is None:
            raise ConfigError("process separable requires keys 'sigma_x_diag' and 'sigma_y_diag'")
        return SeparableSpec(
            sigma_x=np.diag(np.asarray(cfg.sigma_x_diag, dtype=float)),
            sigma_y=np.diag(np.asarray(cfg.sigma_y_diag, dtype=float)),
            **common,
        )
    if cfg.process == "coherent_pair":
        if cfg.p1 is None or cfg.p2 is None:
            raise ConfigError("process coherent_pair requires keys 'p1' and 'p2'")
        coupling = None
        if cfg.coupling is not None and cfg.coupling != 0.0:
            if cfg.p1 != cfg.p2:
                raise ConfigError("scalar coupling needs p1 = p2")
            coupling = cfg.coupling * np.eye(cfg.p1)
        return CoherentPairSpec(p1=cfg.p1, p2=cfg.p2, coupling=coupling, **common)
    raise ConfigError(f"unknown process {cfg.process!r}")


def _load_sample(cfg: RunConfig) -> TimeSeriesSample:
    if cfg.input is not None:
        return ingest_csv(cfg.input)
    if cfg.process is not None:
        return simulate(build_process_spec(cfg))
    raise ConfigError("exactly one of 'input' and 'process' is required")


def _build_plan(cfg: RunConfig, t_len: int) -> BandwidthPlan:
    return default_bandwidth_plan(
        T=t_len, alpha=cfg.alpha, kappa=cfg.kappa, M=cfg.m, kernel=kernel_by_name(cfg.kernel)
    )


def _build_sdo(cfg: RunConfig, sample: TimeSeriesSample, plan: BandwidthPlan) -> SequentialSDO:
    return estimate_sequential_sdo(
        sample,
        plan,
        kernel=kernel_by_name(cfg.kernel),
        band=(cfg.band_lo, cfg.band_hi),
        k_omega=cfg.k_omega,
    )


def _measure_path(cfg: RunConfig, sdo: SequentialSDO, d: int) -> SequentialFunctional:
    if cfg.measure is None:
        raise ConfigError("missing required key 'measure'")
    if cfg.measure == "tvdfpca":
        return tvdfpca_sequential(sdo, d)
    if cfg.measure == "tvdpsca":
        return tvdpsca_sequential(sdo, d, _require_ps(cfg))
    if cfg.measure == "coherence":
        return coherence_sequential(sdo, d, _require_ps(cfg))
    if cfg.measure == "stationarity":
        return stationarity_sequential(sdo, d)
    raise ConfigError(f"unknown measure {cfg.measure!r}")


def _require_ps(cfg: RunConfig) -> ProductStructure:
    ps = _product_structure(cfg)
    if ps is None:
        raise ConfigError(f"measure = {cfg.measure}: product structure required (keys p1, p2)")
    return ps


def _pivot_law(cfg: RunConfig, f_exp: int, g_exp: int) -> PivotLaw:
    return mc_quantiles(
        f_exp,
        g_exp,
        replications=cfg.quantile_r,
        bm_steps=cfg.quantile_n,
        seed=cfg.quantile_seed,
        threads=cfg.threads,
    )


def _config_echo(cfg: RunConfig) -> dict:
    echo = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = list(val)
        echo[f.name] = val
    return echo


def _plan_diagnostics(plan: BandwidthPlan, sdo: SequentialSDO) -> dict:
    return {
        "N": plan.N,
        "b_f": plan.b_f,
        "M": plan.M,
        "k_omega": sdo.k_omega,
        "rho_sq": plan.rho_sq,
        "kernel": sdo.kernel_name,
        "plan_warnings": list(plan.warnings),
        "psd_clip_max": sdo.diagnostics.get("psd_clip_max", 0.0),
    }


def run_pipeline(cfg: RunConfig) -> dict:
    """Full inference pipeline; returns the report as a JSON-ready dict."""
    _STAGE.set("data")
    sample = _load_sample(cfg)
    _STAGE.set("estimate")
    plan = _build_plan(cfg, sample.T)
    sdo = _build_sdo(cfg, sample, plan)
    _STAGE.set("measure")
    seq = _measure_path(cfg, sdo, cfg.d)
    _STAGE.set("inference")
    v = self_norm_V([seq]).values[0]
    law = _pivot_law(cfg, seq.f_exponent, seq.g_exponent)
    estimate = seq.point_estimate
    delta = cfg.delta if cfg.delta is not None else 0.0
    if v > 0:
        pivot = (estimate - delta) / v
    elif estimate > delta:
        pivot = math.inf
    elif estimate < delta:
        pivot = -math.inf
    else:
        pivot = math.nan  # degenerate path exactly at the hypothesized value
    ci = confidence_interval(estimate, v, law, cfg.level_alpha)
    rel = relevant_test(estimate, v, law, delta, cfg.level_alpha)
    order_block: dict = {"nu": None, "d_hat": None, "stats": []}
    if cfg.nu is not None and cfg.d_max is not None:
        if cfg.measure not in ("tvdfpca", "tvdpsca"):
            raise ConfigError("order selection requires measure tvdfpca or tvdpsca")
        paths = [_measure_path(cfg, sdo, d) for d in range(1, cfg.d_max + 1)]
        sel = estimate_dstar(paths, law, cfg.nu, cfg.level_alpha)
        order_block = {
            "nu": sel.nu,
            "d_hat": sel.d_hat,
            "stats": [
                {"d": st.d, "estimate": st.estimate, "v": st.v, "statistic": st.statistic}
                for st in sel.stats
            ],
        }
    _STAGE.set("report")
    diagnostics = _plan_diagnostics(plan, sdo)
    diagnostics.update(seq.diagnostics)
    return {
        "config_echo": _config_echo(cfg),
        "estimate": estimate,
        "V": float(v),
        "pivot": float(pivot),
        "ci": {"level": ci.level, "lo": ci.lo, "hi": ci.hi},
        "relevant_test": {"delta": rel.delta, "quantile": rel.quantile, "reject": rel.reject},
        "order": order_block,
        "diagnostics": diagnostics,
        "seed": cfg.seed,
        "version": __version__,
    }


def _json_number(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def _emit(obj, parts: list) -> None:
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_json_number(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                parts.append(", ")
            parts.append(json.dumps(str(key)))
            parts.append(": ")
            _emit(val, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        parts.append("[")
        for i, val in enumerate(seq):
            if i:
                parts.append(", ")
            _emit(val, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def dumps_report(obj: dict) -> str:
    """Deterministic JSON with 17 significant digits on floats.

    Non-finite floats have no JSON representation and are emitted as the
    strings "Infinity", "-Infinity", "NaN".
    """
    parts: list = []
    _emit(obj, parts)
    return "".join(parts)


class _Stage:
    """Tracks the pipeline stage for error tagging."""

    def __init__(self) -> None:
        self.name = "config"

    def set(self, name: str) -> None:
        self.name = name


_STAGE = _Stage()


def _cmd_simulate(cfg: RunConfig) -> str:
    _STAGE.set("data")
    if cfg.process is None:
        raise ConfigError("subcommand 'simulate' requires key 'process'")
    sample = simulate(build_process_spec(cfg))
    lines = [",".join(f"x{j + 1}" for j in range(sample.p))]
    for row in sample.data:
        lines.append(",".join(format(float(x), ".17g") for x in row))
    return "\n".join(lines) + "\n"


def _cmd_estimate(cfg: RunConfig) -> str:
    _STAGE.set("data")
    sample = _load_sample(cfg)
    _STAGE.set("estimate")
    plan = _build_plan(cfg, sample.T)
    sdo = _build_sdo(cfg, sample, plan)
    trace = np.einsum("mkii->mk", sdo.tensor[:, :, -1]).real
    _STAGE.set("report")
    report = {
        "config_echo": _config_echo(cfg),
        "shape": {"m": sdo.m, "k_omega": sdo.k_omega, "n_window": sdo.n_window, "p": sdo.p},
        "u_points": sdo.u_points,
        "omega_points": sdo.omega_points,
        "eta_points": sdo.eta_points,
        "trace_eta1": trace,
        "diagnostics": _plan_diagnostics(plan, sdo),
        "seed": cfg.seed,
        "version": __version__,
    }
    return dumps_report(report) + "\n"


def _cmd_measure(cfg: RunConfig) -> str:
    _STAGE.set("data")
    sample = _load_sample(cfg)
    _STAGE.set("estimate")
    plan = _build_plan(cfg, sample.T)
    sdo = _build_sdo(cfg, sample, plan)
    _STAGE.set("measure")
    seq = _measure_path(cfg, sdo, cfg.d)
    _STAGE.set("report")
    diagnostics = _plan_diagnostics(plan, sdo)
    diagnostics.update(seq.diagnostics)
    report = {
        "config_echo": _config_echo(cfg),
        "kind": seq.kind,
        "d": seq.d,
        "f_exponent": seq.f_exponent,
        "g_exponent": seq.g_exponent,
        "estimate": seq.point_estimate,
        "eta": seq.eta,
        "values": seq.values,
        "valid": seq.valid,
        "diagnostics": diagnostics,
        "seed": cfg.seed,
        "version": __version__,
    }
    return dumps_report(report) + "\n"


def _cmd_infer(cfg: RunConfig) -> str:
    return dumps_report(run_pipeline(cfg)) + "\n"


def _cmd_select_d(cfg: RunConfig) -> str:
    if cfg.nu is None:
        raise ConfigError("subcommand 'select-d' requires key 'nu'")
    if cfg.d_max is None:
        raise ConfigError("subcommand 'select-d' requires key 'd_max'")
    measure = cfg.measure if cfg.measure is not None else "tvdfpca"
    if measure not in ("tvdfpca", "tvdpsca"):
        raise ConfigError("order selection requires measure tvdfpca or tvdpsca")
    cfg = replace(cfg, measure=measure)
    _STAGE.set("data")
    sample = _load_sample(cfg)
    _STAGE.set("estimate")
    plan = _build_plan(cfg, sample.T)
    sdo = _build_sdo(cfg, sample, plan)
    _STAGE.set("measure")
    paths = [_measure_path(cfg, sdo, d) for d in range(1, cfg.d_max + 1)]
    _STAGE.set("inference")
    law = _pivot_law(cfg, paths[0].f_exponent, paths[0].g_exponent)
    sel = estimate_dstar(paths, law, cfg.nu, cfg.level_alpha)
    _STAGE.set("report")
    diagnostics = _plan_diagnostics(plan, sdo)
    report = {
        "config_echo": _config_echo(cfg),
        "nu": sel.nu,
        "alpha": sel.alpha,
        "quantile": sel.quantile,
        "d_hat": sel.d_hat,
        "stats": [
            {"d": st.d, "estimate": st.estimate, "v": st.v, "statistic": st.statistic}
            for st in sel.stats
        ],
        "diagnostics": diagnostics,
        "seed": cfg.seed,
        "version": __version__,
    }
    return dumps_report(report) + "\n"


def _cmd_quantiles(cfg: RunConfig) -> str:
    _STAGE.set("inference")
    if cfg.f_exp is not None and cfg.g_exp is not None:
        f_exp, g_exp = cfg.f_exp, cfg.g_exp
    elif cfg.measure is not None:
        f_exp, g_exp = SCALING_EXPONENTS[cfg.measure]
    else:
        raise ConfigError("subcommand 'quantiles' requires 'measure' or 'f_exp' and 'g_exp'")
    law = _pivot_law(cfg, f_exp, g_exp)
    cache_file = pivot_cache_path(
        f_exp, g_exp, cfg.quantile_r, cfg.quantile_n, cfg.quantile_seed
    )
    _STAGE.set("report")
    report = {
        "config_echo": _config_echo(cfg),
        "f_exponent": law.f_exponent,
        "g_exponent": law.g_exponent,
        "replications": law.replications,
        "bm_steps": law.bm_steps,
        "quantile_seed": law.seed,
        "cache_file": str(cache_file),
        "alphas": law.alphas,
        "quantiles": law.quantiles,
        "version": __version__,
    }
    return dumps_report(report) + "\n"


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "measure": _cmd_measure,
    "infer": _cmd_infer,
    "select-d": _cmd_select_d,
    "quantiles": _cmd_quantiles,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specnorm",
        description="Self-normalized inference for time-varying spectral density operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to a key = value configuration file")
        cmd.add_argument("--seed", type=int, default=None, help="override the configured seed")
        cmd.add_argument("--threads", type=int, default=None, help="cap worker threads")
        cmd.add_argument("--out", default=None, help="output path (default: config 'out' or stdout)")
    return parser


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    _STAGE.set("config")
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        sys.stdout.write(
            dumps_report(
                {"error": {"stage": "config", "type": "ConfigError", "message": str(exc)}}
            )
            + "\n"
        )
        return 2
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            cfg = replace(cfg, threads=args.threads)
        out = args.out if args.out is not None else cfg.out
        text_out = _COMMANDS[args.command](cfg)
        _write_output(text_out, out)
        return 0
    except (ConfigError, DataError, NumericalError, ValueError) as exc:
        code = 4 if isinstance(exc, NumericalError) else 3 if isinstance(exc, DataError) else 2
        error_report = {
            "error": {
                "stage": _STAGE.name,
                "type": type(exc).__name__,
                "message": str(exc),
            },
            "version": __version__,
        }
        sys.stdout.write(dumps_report(error_report) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
