"""Self-normalized inference for sequential deviation measures.

The studentizer V is built from the measure's own partial-sum path, so no
long-run variance is ever estimated. For a path s_hat(eta) with exponent
pair (f, g) and point estimate s_hat(1),

    D(eta)  = eta^f (s_hat(eta) - s_hat(1)),
    V^2     = (1/N) sum_k D(k/N)^2,

and (s_hat(1) - s) / V converges to the pivot

    T(f, g) = B(1) / sqrt( integral_0^1 (g(eta) B(eta) - f(eta) B(1))^2 deta )

with B standard Brownian motion, f(eta) = eta^f, g(eta) = eta^g. All rate
and nuisance-scale factors cancel in the ratio, so confidence intervals and
tests use the estimate and V directly.

Pivot quantiles are tabulated once by Monte Carlo on a fixed fine alpha grid
and cached on disk in a plain text format; lookups interpolate the table, so
runs with a warm or cold cache produce identical bytes. The Monte Carlo is
chunked with a fixed chunk size and per-chunk generators, making results
independent of the thread count.
"""

from __future__ import annotations

import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .measures import SequentialFunctional

__all__ = [
    "ALPHA_GRID",
    "DEFAULT_QUANTILE_SEED",
    "PivotLaw",
    "JointPivotLaw",
    "mc_quantiles",
    "mc_quantiles_joint",
    "quantile_se",
    "pivot_cache_path",
    "save_pivot_law",
    "load_pivot_law",
    "SelfNormV",
    "self_norm_V",
    "ConfidenceInterval",
    "confidence_interval",
    "RelevantTestResult",
    "relevant_test",
    "OrderStatistic",
    "OrderSelection",
    "estimate_dstar",
    "test_order_upper",
    "OrderLowerResult",
    "test_order_lower",
    "JointTestResult",
    "joint_statistic",
]

# Fixed tabulation grid: every lookup interpolates this table, never the raw
# Monte Carlo sample, so cached and fresh laws agree to the last bit.
ALPHA_GRID = np.arange(1, 1000) / 1000.0

DEFAULT_QUANTILE_SEED = 1_000_003

_CHUNK = 2048  # replications per Monte Carlo chunk, fixed for determinism


@dataclass(frozen=True)
class PivotLaw:
    """Tabulated quantiles of the scalar self-normalized pivot."""

    f_exponent: int
    g_exponent: int
    replications: int
    bm_steps: int
    seed: int
    alphas: np.ndarray
    quantiles: np.ndarray

    def quantile(self, alpha: float) -> float:
        lo, hi = float(self.alphas[0]), float(self.alphas[-1])
        if not lo <= alpha <= hi:
            raise ConfigError(
                f"alpha = {alpha} outside the tabulated range [{lo}, {hi}]"
            )
        return float(np.interp(alpha, self.alphas, self.quantiles))


@dataclass(frozen=True)
class JointPivotLaw:
    """Tabulated quantiles of the joint quadratic-form pivot."""

    pairs: tuple[tuple[int, int], ...]
    replications: int
    bm_steps: int
    seed: int
    alphas: np.ndarray
    quantiles: np.ndarray

    def quantile(self, alpha: float) -> float:
        lo, hi = float(self.alphas[0]), float(self.alphas[-1])
        if not lo <= alpha <= hi:
            raise ConfigError(
                f"alpha = {alpha} outside the tabulated range [{lo}, {hi}]"
            )
        return float(np.interp(alpha, self.alphas, self.quantiles))


def _validate_mc_args(replications: int, bm_steps: int, seed: int, threads: int) -> None:
    if replications < 10_000:
        raise ConfigError(f"replications = {replications} too small; need at least 10000")
    if bm_steps < 500:
        raise ConfigError(f"bm_steps = {bm_steps} too small; need at least 500")
    if seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if threads < 1:
        raise ConfigError("threads must be at least 1")


def _chunk_sizes(total: int) -> list[int]:
    sizes = [_CHUNK] * (total // _CHUNK)
    if total % _CHUNK:
        sizes.append(total % _CHUNK)
    return sizes


def _scalar_chunk(
    f_exp: int, g_exp: int, bm_steps: int, seed: int, index: int, size: int
) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, index]))
    eta = np.arange(1, bm_steps + 1) / bm_steps
    fvec = eta**f_exp
    gvec = eta**g_exp
    scale = 1.0 / math.sqrt(bm_steps)
    b = np.cumsum(rng.standard_normal((size, bm_steps)), axis=1) * scale
    b1 = b[:, -1]
    den = ((b * gvec - b1[:, None] * fvec) ** 2).mean(axis=1)
    bad = ~(den > 0) | ~np.isfinite(den)
    while bad.any():  # probability-zero guard; keeps the law well defined
        n_bad = int(bad.sum())
        b_new = np.cumsum(rng.standard_normal((n_bad, bm_steps)), axis=1) * scale
        b[bad] = b_new
        b1 = b[:, -1]
        den = ((b * gvec - b1[:, None] * fvec) ** 2).mean(axis=1)
        bad = ~(den > 0) | ~np.isfinite(den)
    x = b1 / np.sqrt(den)
    # the pivot is odd in the driving noise, so each path also contributes
    # its sign flip: the tabulated sample is exactly symmetric (antithetic
    # pairing halves tail variance and pins the median at 0)
    return np.concatenate([x, -x])


def _run_chunks(worker, sizes: list[int], threads: int) -> np.ndarray:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(worker, range(len(sizes)), sizes))
    else:
        parts = [worker(i, m) for i, m in enumerate(sizes)]
    return np.concatenate(parts)


def pivot_cache_path(
    f_exponent: int,
    g_exponent: int,
    replications: int,
    bm_steps: int,
    seed: int,
    cache_dir: str | os.PathLike | None = None,
) -> Path:
    """Location of the on-disk quantile table for the given key."""
    if cache_dir is None:
        cache_dir = os.environ.get("SPECNORM_CACHE_DIR")
    if cache_dir is None:
        cache_dir = Path.home() / ".cache" / "specnorm"
    name = (
        f"pivot_f{f_exponent}_g{g_exponent}_R{replications}"
        f"_n{bm_steps}_seed{seed}.txt"
    )
    return Path(cache_dir) / name


def save_pivot_law(law: PivotLaw, path: str | os.PathLike) -> None:
    """Write a quantile table as plain text (header line, then alpha/quantile pairs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{law.f_exponent} {law.g_exponent} {law.replications} "
        f"{law.bm_steps} {law.seed}\n"
    ]
    lines.extend(
        f"{a:.17g} {q:.17g}\n" for a, q in zip(law.alphas, law.quantiles)
    )
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.writelines(lines)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_pivot_law(path: str | os.PathLike) -> PivotLaw:
    """Read a quantile table written by :func:`save_pivot_law`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ValueError(f"malformed quantile table header in {path}")
        f_exp, g_exp, reps, steps, seed = (int(x) for x in header)
        alphas, quantiles = [], []
        for line in fh:
            if not line.strip():
                continue
            a, q = line.split()
            alphas.append(float(a))
            quantiles.append(float(q))
    return PivotLaw(
        f_exponent=f_exp,
        g_exponent=g_exp,
        replications=reps,
        bm_steps=steps,
        seed=seed,
        alphas=np.asarray(alphas),
        quantiles=np.asarray(quantiles),
    )


def quantile_se(law: PivotLaw | JointPivotLaw, alpha: float) -> float:
    """Monte Carlo standard error of a tabulated quantile.

    Uses the asymptotic formula sqrt(alpha (1-alpha) / R) / density, with the
    density estimated from neighbouring table entries. R counts simulated
    paths; under the scalar engine's antithetic pairing the formula is
    slightly conservative in the tails.
    """
    lo = max(alpha - 0.005, float(law.alphas[0]))
    hi = min(alpha + 0.005, float(law.alphas[-1]))
    qlo, qhi = law.quantile(lo), law.quantile(hi)
    if not qhi > qlo:
        return math.inf
    density = (hi - lo) / (qhi - qlo)
    return math.sqrt(alpha * (1.0 - alpha) / law.replications) / density


def mc_quantiles(
    f_exponent: int,
    g_exponent: int,
    replications: int = 100_000,
    bm_steps: int = 2000,
    seed: int = DEFAULT_QUANTILE_SEED,
    threads: int = 1,
    use_cache: bool = True,
    cache_dir: str | os.PathLike | None = None,
) -> PivotLaw:
    """Monte Carlo quantile table of the scalar pivot for exponents (f, g).

    Brownian motion is discretized on ``bm_steps`` equidistant points, the
    denominator integral by the left-matching Riemann sum on the same grid.
    Each path enters with both signs (antithetic pairing), so the table is
    exactly symmetric: q(0.5) = 0 and q(a) = -q(1-a) up to rounding.
    Results depend only on the arguments, not on thread count or cache state.
    """
    if f_exponent < 0 or g_exponent < 0:
        raise ConfigError("scaling exponents must be non-negative integers")
    _validate_mc_args(replications, bm_steps, seed, threads)
    path = pivot_cache_path(
        f_exponent, g_exponent, replications, bm_steps, seed, cache_dir
    )
    if use_cache and path.is_file():
        try:
            law = load_pivot_law(path)
            key = (law.f_exponent, law.g_exponent, law.replications, law.bm_steps, law.seed)
            if key == (f_exponent, g_exponent, replications, bm_steps, seed) and len(
                law.alphas
            ) == len(ALPHA_GRID):
                return law
            warnings.warn(f"stale quantile cache at {path}; recomputing", stacklevel=2)
        except (ValueError, OSError):
            warnings.warn(f"unreadable quantile cache at {path}; recomputing", stacklevel=2)

    def worker(index: int, size: int) -> np.ndarray:
        return _scalar_chunk(f_exponent, g_exponent, bm_steps, seed, index, size)

    sample = _run_chunks(worker, _chunk_sizes(replications), threads)
    quantiles = np.quantile(sample, ALPHA_GRID, method="linear")
    law = PivotLaw(
        f_exponent=f_exponent,
        g_exponent=g_exponent,
        replications=replications,
        bm_steps=bm_steps,
        seed=seed,
        alphas=ALPHA_GRID.copy(),
        quantiles=quantiles,
    )
    med = law.quantile(0.5)
    se = quantile_se(law, 0.5)
    if abs(med) > 3.0 * se:
        warnings.warn(
            f"pivot median {med:.3g} deviates from 0 by more than 3 standard errors",
            stacklevel=2,
        )
    if use_cache:
        try:
            save_pivot_law(law, path)
        except OSError as exc:
            warnings.warn(f"could not write quantile cache {path}: {exc}", stacklevel=2)
    return law


def _joint_chunk(
    pairs: tuple[tuple[int, int], ...],
    bm_steps: int,
    seed: int,
    index: int,
    size: int,
) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, index]))
    k = len(pairs)
    eta = np.arange(1, bm_steps + 1) / bm_steps
    fmat = np.stack([eta ** f for f, _ in pairs])
    gmat = np.stack([eta ** g for _, g in pairs])
    scale = 1.0 / math.sqrt(bm_steps)

    def draw(m: int) -> tuple[np.ndarray, np.ndarray]:
        b = np.cumsum(rng.standard_normal((m, k, bm_steps)), axis=2) * scale
        b1 = b[:, :, -1]
        g_paths = b * gmat - b1[:, :, None] * fmat
        u = np.einsum("mkn,mln->mkl", g_paths, g_paths) / bm_steps
        return b1, u

    b1, u = draw(size)
    out = np.empty(size)
    for i in range(size):
        while True:
            try:
                x = np.linalg.solve(u[i], b1[i])
                val = float(b1[i] @ x)
                if math.isfinite(val) and val >= 0:
                    out[i] = val
                    break
            except np.linalg.LinAlgError:
                pass
            nb1, nu = draw(1)  # probability-zero degenerate draw; replace it
            b1[i], u[i] = nb1[0], nu[0]
    return out


def mc_quantiles_joint(
    pairs: Sequence[tuple[int, int]],
    replications: int = 100_000,
    bm_steps: int = 2000,
    seed: int = DEFAULT_QUANTILE_SEED,
    threads: int = 1,
) -> JointPivotLaw:
    """Quantile table of the joint pivot B(1)' U^{-1} B(1) for several paths.

    Components use independent Brownian motions; cross-correlations of the
    underlying estimates cancel from the quadratic form. Not cached on disk.
    """
    pairs = tuple((int(f), int(g)) for f, g in pairs)
    if not pairs:
        raise ConfigError("joint pivot needs at least one exponent pair")
    if any(f < 0 or g < 0 for f, g in pairs):
        raise ConfigError("scaling exponents must be non-negative integers")
    _validate_mc_args(replications, bm_steps, seed, threads)

    def worker(index: int, size: int) -> np.ndarray:
        return _joint_chunk(pairs, bm_steps, seed, index, size)

    sample = _run_chunks(worker, _chunk_sizes(replications), threads)
    quantiles = np.quantile(sample, ALPHA_GRID, method="linear")
    return JointPivotLaw(
        pairs=pairs,
        replications=replications,
        bm_steps=bm_steps,
        seed=seed,
        alphas=ALPHA_GRID.copy(),
        quantiles=quantiles,
    )


@dataclass(frozen=True)
class SelfNormV:
    """Self-normalization matrix for one or more measure paths.

    ``matrix`` is V^2 (k x k, positive semidefinite), ``values`` its diagonal
    square roots, one scalar V per path.
    """

    matrix: np.ndarray
    values: np.ndarray

    @property
    def scalar(self) -> float:
        if self.values.shape != (1,):
            raise ValueError("scalar V requested from a multi-path normalizer")
        return float(self.values[0])


def self_norm_V(paths: Sequence[SequentialFunctional]) -> SelfNormV:
    """Self-normalizer from the partial-sum paths of one or more measures.

    Each path contributes D(k/N) = (k/N)^f (s_hat(k/N) - s_hat(1)); entries
    where the path is undefined contribute zero (their weight vanishes in
    the limit). V^2_{ij} averages D_i D_j over the grid, a left-matching
    Riemann sum of the limiting integral.
    """
    if not paths:
        raise ValueError("need at least one path")
    n = len(paths[0].eta)
    for pth in paths[1:]:
        if len(pth.eta) != n or not np.allclose(pth.eta, paths[0].eta):
            raise ValueError("paths must share the same fraction grid")
    d_rows = np.empty((len(paths), n))
    for i, pth in enumerate(paths):
        dev = pth.eta ** pth.f_exponent * (pth.values - pth.values[-1])
        dev = np.where(pth.valid, dev, 0.0)
        d_rows[i] = dev
    v2 = (d_rows @ d_rows.T) / n
    diag = np.maximum(np.diag(v2), 0.0)
    return SelfNormV(matrix=v2, values=np.sqrt(diag))


@dataclass(frozen=True)
class ConfidenceInterval:
    level: float
    lo: float
    hi: float


def confidence_interval(
    estimate: float, v: float, law: PivotLaw, alpha: float = 0.05
) -> ConfidenceInterval:
    """Two-sided confidence interval [estimate + q_{a/2} V, estimate + q_{1-a/2} V]."""
    if not 0.002 <= alpha < 1.0:
        raise ConfigError(f"alpha = {alpha} outside the supported range [0.002, 1)")
    if v < 0:
        raise ValueError("V must be non-negative")
    lo = estimate + law.quantile(alpha / 2.0) * v
    hi = estimate + law.quantile(1.0 - alpha / 2.0) * v
    return ConfidenceInterval(level=1.0 - alpha, lo=lo, hi=hi)


@dataclass(frozen=True)
class RelevantTestResult:
    reject: bool
    delta: float
    alpha: float
    quantile: float
    threshold: float


def relevant_test(
    estimate: float, v: float, law: PivotLaw, delta: float, alpha: float = 0.05
) -> RelevantTestResult:
    """One-sided test of 'deviation at most delta' against 'larger than delta'.

    Rejects when estimate > delta + q_{1-alpha} V.
    """
    if delta < 0:
        raise ConfigError(f"delta = {delta} must be non-negative")
    if not 0.001 <= alpha <= 0.999:
        raise ConfigError(f"alpha = {alpha} outside the tabulated range")
    q = law.quantile(1.0 - alpha)
    threshold = delta + q * v
    return RelevantTestResult(
        reject=bool(estimate > threshold),
        delta=delta,
        alpha=alpha,
        quantile=q,
        threshold=threshold,
    )


@dataclass(frozen=True)
class OrderStatistic:
    d: int
    estimate: float
    v: float
    statistic: float


@dataclass(frozen=True)
class OrderSelection:
    d_hat: int | None
    nu: float
    alpha: float
    quantile: float
    stats: tuple[OrderStatistic, ...]


def _order_statistic(path: SequentialFunctional, nu: float) -> OrderStatistic:
    s = path.point_estimate
    v = self_norm_V([path]).values[0]
    if v == 0.0:
        if s == nu:
            raise NumericalError(
                f"order statistic undefined at d = {path.d}: zero self-normalizer "
                "with estimate exactly at the threshold"
            )
        stat = math.inf if s > nu else -math.inf
    else:
        stat = (s - nu) / v
    return OrderStatistic(d=path.d, estimate=s, v=float(v), statistic=stat)


def estimate_dstar(
    paths: Sequence[SequentialFunctional],
    law: PivotLaw,
    nu: float,
    alpha: float = 0.05,
) -> OrderSelection:
    """Smallest d whose explained-share statistic clears the threshold nu.

    d_hat is the first d with (s_hat_d - nu) / V_d strictly above the lower
    alpha quantile of the pivot; if no candidate clears it, d_hat is None
    (the candidate list was too short or the data contradict every order).
    """
    if not paths:
        raise ValueError("need at least one candidate order")
    if not 0.0 < nu < 1.0:
        raise ConfigError(f"nu = {nu} must lie strictly between 0 and 1")
    if not 0.001 <= alpha <= 0.999:
        raise ConfigError(f"alpha = {alpha} outside the tabulated range")
    ds = [pth.d for pth in paths]
    if any(b <= a for a, b in zip(ds, ds[1:])):
        raise ValueError("candidate paths must have strictly increasing d")
    q = law.quantile(alpha)
    stats = tuple(_order_statistic(pth, nu) for pth in paths)
    d_hat = next((st.d for st in stats if st.statistic > q), None)
    return OrderSelection(d_hat=d_hat, nu=nu, alpha=alpha, quantile=q, stats=stats)


def test_order_upper(selection: OrderSelection, d0: int) -> bool:
    """Reject 'true order at most d0' when the selected order exceeds d0."""
    if d0 < 1:
        raise ConfigError(f"d0 = {d0} must be at least 1")
    return selection.d_hat is not None and selection.d_hat > d0


@dataclass(frozen=True)
class OrderLowerResult:
    reject: bool
    estimate: float
    v: float
    quantile: float
    threshold: float


def test_order_lower(
    path: SequentialFunctional, law: PivotLaw, nu: float, alpha: float = 0.05
) -> OrderLowerResult:
    """Reject 'true order at least d0' when s_hat_{d0} is already above nu.

    Uses the path at d = d0; rejects when s_hat > nu + q_{1-alpha} V.
    """
    if not 0.0 < nu < 1.0:
        raise ConfigError(f"nu = {nu} must lie strictly between 0 and 1")
    if not 0.001 <= alpha <= 0.999:
        raise ConfigError(f"alpha = {alpha} outside the tabulated range")
    s = path.point_estimate
    v = self_norm_V([path]).values[0]
    q = law.quantile(1.0 - alpha)
    threshold = nu + q * v
    return OrderLowerResult(
        reject=bool(s > threshold),
        estimate=s,
        v=float(v),
        quantile=q,
        threshold=threshold,
    )


@dataclass(frozen=True)
class JointTestResult:
    statistic: float
    alpha: float
    quantile: float
    reject: bool


def joint_statistic(
    deviations: np.ndarray,
    v: SelfNormV,
    law: JointPivotLaw,
    alpha: float = 0.05,
) -> JointTestResult:
    """Joint quadratic-form test across several measures.

    ``deviations`` holds estimate minus hypothesized value per path, in the
    order the paths were passed to :func:`self_norm_V`; the statistic is
    deviations' (V^2)^{-1} deviations, compared against the joint pivot law.

    :raises NumericalError: if V^2 is numerically singular (condition number
        above 1e12), in which case the quadratic form is meaningless.
    """
    dev = np.asarray(deviations, dtype=float)
    v2 = v.matrix
    if dev.shape != (v2.shape[0],):
        raise ValueError(
            f"deviation vector of length {dev.shape} does not match V^2 of shape {v2.shape}"
        )
    if len(law.pairs) != v2.shape[0]:
        raise ValueError("joint law was tabulated for a different number of paths")
    cond = np.linalg.cond(v2)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(
            "self-normalizer matrix is numerically singular; the joint statistic "
            "requires it positive definite"
        )
    stat = float(dev @ np.linalg.solve(v2, dev))
    if not 0.001 <= alpha <= 0.999:
        raise ConfigError(f"alpha = {alpha} outside the tabulated range")
    q = law.quantile(1.0 - alpha)
    return JointTestResult(statistic=stat, alpha=alpha, quantile=q, reject=bool(stat > q))
