"""Sequential time-varying spectral density estimation.

Implements the partial-sum, kernel-smoothed estimator of the time-varying
spectral density operator on a discretized grid: lag-window weights
w_tilde(omega, s, t) = (2 pi)^{-1} w(b_f (s-t)) e^{i omega (s-t)}, windows of
length N centered at the equidistant midpoints u_1 = N/(2T), ...,
u_M = 1 - N/(2T), and the full sequential path eta -> F_hat_{u,omega}(eta)
over the fraction grid {k/N}. On that grid each slice is an exact partial-sum
estimate (the interpolation residue eta*N - floor(eta*N) vanishes), which is
what the self-normalization layer relies on.

Grid weights: sample rows are embedded once as x * sqrt(p * q) with q the
quadrature weights of the function-space inner product. Under the default
uniform q = 1/p the embedding is the identity and the stored matrices are the
plain multivariate spectral density (white noise Sigma gives Sigma/(2 pi)
entrywise); under non-uniform q, matrix traces and Hilbert-Schmidt norms equal
p times the quadrature approximation of their functional counterparts, so all
normalized deviation measures are weight-consistent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "Kernel",
    "PARZEN",
    "FLAT_TOP",
    "kernel_by_name",
    "local_weight",
    "BandwidthPlan",
    "default_bandwidth_plan",
    "midpoint_grid",
    "TimeSeriesSample",
    "SequentialSDO",
    "estimate_sequential_sdo",
    "sequential_estimate_at",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Kernel:
    """Lag-window kernel: even, supported on [-1, 1], w(0) = 1, w - 1 = O(x^iota).

    ``kappa_f`` is the squared-kernel mass integral over [-1, 1], the constant
    in the normalizing sequence rho_T^2 = N * b_f / kappa_f.
    """

    name: str
    weight: Callable[[np.ndarray], np.ndarray]
    iota: int
    kappa_f: float

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        return self.weight(np.asarray(x, dtype=float))


def _parzen(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    inner = 1.0 - 6.0 * ax**2 + 6.0 * ax**3
    outer = 2.0 * (1.0 - ax) ** 3
    return np.where(ax <= 0.5, inner, np.where(ax <= 1.0, outer, 0.0))


def _flat_top(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return np.clip(2.0 * (1.0 - ax), 0.0, 1.0) * (ax <= 1.0)


# kappa_f values are the exact integrals of w^2 over [-1, 1]:
# Parzen 151/280, trapezoidal flat-top 4/3 (verified against quadrature in tests).
PARZEN = Kernel(name="parzen", weight=_parzen, iota=2, kappa_f=151.0 / 280.0)
FLAT_TOP = Kernel(name="truncated_flat_top", weight=_flat_top, iota=8, kappa_f=4.0 / 3.0)

_KERNELS = {PARZEN.name: PARZEN, FLAT_TOP.name: FLAT_TOP, "flat_top": FLAT_TOP}


def kernel_by_name(name: str) -> Kernel:
    try:
        return _KERNELS[name]
    except KeyError:
        raise ConfigError(
            f"unknown kernel {name!r}; choose from {sorted(set(k.name for k in _KERNELS.values()))}"
        ) from None


def local_weight(kernel: Kernel, b_f: float, omega: float, s: int, t: int) -> complex:
    """Smoothing weight (2 pi)^{-1} w(b_f (s - t)) e^{i omega (s - t)}.

    Zero whenever |s - t| exceeds the kernel support radius 1/b_f.
    """
    h = s - t
    return complex(kernel(b_f * h) / TWO_PI * np.exp(1j * omega * h))


@dataclass(frozen=True)
class BandwidthPlan:
    """Resolved estimation plan: window length N, bandwidth b_f, midpoint count M.

    ``warnings`` lists any asymptotic-regime inequality the finite-sample
    choice violates; violations degrade the quality of the normal
    approximation but do not invalidate the computation.
    """

    T: int
    alpha: float
    kappa: float
    N: int
    b_f: float
    M: int
    iota: int
    kappa_f: float
    warnings: tuple[str, ...] = field(default=())

    @property
    def rho_sq(self) -> float:
        """Normalizing constant rho_T^2 = N * b_f / kappa_f."""
        return self.N * self.b_f / self.kappa_f

    @property
    def eta_points(self) -> np.ndarray:
        return np.arange(1, self.N + 1) / self.N


def default_bandwidth_plan(
    T: int,
    *,
    alpha: float = 0.5,
    kappa: float = 0.4,
    M: int | None = None,
    kernel: Kernel = PARZEN,
) -> BandwidthPlan:
    """Window/bandwidth plan N = T^alpha (forced even), b_f = N^-kappa.

    Defaults: alpha = 0.5, kappa = 0.4, M = max(4, round(N^0.3)). The hard
    constraints kappa in (1/(2 iota + 1), 1) and M * N <= T raise; the
    asymptotic-regime inequalities (alpha bound of the relevant bandwidth
    case, M = o(N^{1-kappa}), N^{1-kappa} = o(M^3)) only produce warnings,
    since no finite T can satisfy an o(.) literally.

    :param T: series length, at least 64.
    :param kernel: supplies the smoothness order iota and kappa_f.
    """
    if T < 64:
        raise ConfigError(f"series too short: T = {T} < 64")
    iota = kernel.iota
    lo = 1.0 / (2 * iota + 1)
    if not lo < kappa < 1.0:
        raise ConfigError(
            f"kappa = {kappa} outside the admissible range ({lo:.6g}, 1) for iota = {iota}"
        )
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha = {alpha} outside (0, 1)")
    N = int(round(T**alpha))
    N -= N % 2
    if N < 2:
        raise ConfigError(f"window length N = {N} too small (T = {T}, alpha = {alpha})")
    b_f = float(N ** (-kappa))
    if M is None:
        M = max(4, int(round(N**0.3)))
    if M < 1:
        raise ConfigError(f"M = {M} must be positive")
    if M * N > T:
        raise ConfigError(f"series too short for M windows: M * N = {M * N} > T = {T}")

    regime: list[str] = []
    if kappa >= 1.0 / (iota + 1):
        if alpha >= 2.0 / (4.0 - kappa):
            regime.append(f"alpha = {alpha} >= 2/(4 - kappa) = {2.0 / (4.0 - kappa):.4g}")
    else:
        bound = 2.0 / ((2 * iota + 1) * kappa + 2.0)
        if alpha >= bound:
            regime.append(f"alpha = {alpha} >= 2/((2 iota + 1) kappa + 2) = {bound:.4g}")
        if M > N ** ((2 * iota + 1) * kappa - 1.0):
            regime.append(f"M = {M} > N^((2 iota + 1) kappa - 1)")
    if M > N ** (1.0 - kappa):
        regime.append(f"M = {M} > N^(1 - kappa) = {N ** (1.0 - kappa):.4g}")
    if N ** (1.0 - kappa) > M**3:
        regime.append(f"N^(1 - kappa) = {N ** (1.0 - kappa):.4g} > M^3 = {M**3}")
    for msg in regime:
        warnings.warn(f"bandwidth plan outside asymptotic regime: {msg}", stacklevel=2)
    return BandwidthPlan(
        T=T, alpha=alpha, kappa=kappa, N=N, b_f=b_f, M=M,
        iota=iota, kappa_f=kernel.kappa_f, warnings=tuple(regime),
    )


def midpoint_grid(plan: BandwidthPlan) -> np.ndarray:
    """Equidistant window midpoints u_1 = N/(2T) < ... < u_M = 1 - N/(2T).

    For M = 1 the two endpoint formulas coincide only when N = T; a single
    centered window at u = 1/2 is returned in that case.
    """
    if plan.M == 1:
        return np.array([0.5])
    half = plan.N / (2.0 * plan.T)
    return np.linspace(half, 1.0 - half, plan.M)


def _window_starts(plan: BandwidthPlan) -> np.ndarray:
    # floor(u T) - floor(N/2), nudged so exact integers survive FP rounding.
    u = midpoint_grid(plan)
    starts = np.floor(u * plan.T + 1e-9).astype(int) - plan.N // 2
    if starts[0] < 0 or starts[-1] + plan.N > plan.T:
        raise ConfigError(
            f"window of length {plan.N} at the boundary midpoints falls outside the sample"
        )
    return starts


@dataclass(frozen=True)
class TimeSeriesSample:
    """T x p real sample of a discretized functional time series.

    ``grid_weights`` are the quadrature weights of the function-space inner
    product (positive, summing to 1); the default is uniform 1/p.
    """

    data: np.ndarray
    grid_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(np.asarray(self.data, dtype=float))
        if data.ndim != 2:
            raise DataError(f"sample must be a T x p array, got shape {data.shape}")
        T, p = data.shape
        if T < 2 or p < 1:
            raise DataError(f"sample needs T >= 2 and p >= 1, got T = {T}, p = {p}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise DataError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
        w = self.grid_weights
        if w is None:
            w = np.full(p, 1.0 / p)
        else:
            w = np.asarray(w, dtype=float)
            if w.shape != (p,):
                raise DataError(f"grid_weights must have shape ({p},), got {w.shape}")
            if not np.all(w > 0):
                raise DataError("grid_weights must be positive")
            if abs(float(w.sum()) - 1.0) > 1e-8:
                raise DataError(f"grid_weights must sum to 1, got {float(w.sum()):.12g}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "grid_weights", w)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SequentialSDO:
    """Sequential spectral density estimates on the (u, omega, eta) grid.

    ``tensor[i, j, k-1]`` is the p x p Hermitian estimate at midpoint
    u_points[i], frequency omega_points[j], and fraction eta = k/N, computed
    from the first k observations of the window. The eta = 1 slices are
    projected onto the PSD cone (a no-op for PSD kernels like Parzen, up to
    roundoff recorded in ``diagnostics["psd_clip_max"]``).
    """

    tensor: np.ndarray
    u_points: np.ndarray
    omega_points: np.ndarray
    eta_points: np.ndarray
    band: tuple[float, float]
    plan: BandwidthPlan | None = None
    kernel_name: str = "parzen"
    grid_weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.tensor.shape[0]

    @property
    def k_omega(self) -> int:
        return self.tensor.shape[1]

    @property
    def n_window(self) -> int:
        return self.tensor.shape[2]

    @property
    def p(self) -> int:
        return self.tensor.shape[3]

    @classmethod
    def from_tensor(
        cls,
        tensor: np.ndarray,
        band: tuple[float, float] = (0.0, math.pi),
        u_points: np.ndarray | None = None,
        omega_points: np.ndarray | None = None,
        kernel_name: str = "analytic",
    ) -> "SequentialSDO":
        """Wrap an explicit (M, K, N, p, p) tensor, filling default grids."""
        tensor = np.asarray(tensor, dtype=complex)
        if tensor.ndim != 5 or tensor.shape[3] != tensor.shape[4]:
            raise ValueError(f"tensor must have shape (M, K, N, p, p), got {tensor.shape}")
        m, k, n = tensor.shape[:3]
        if u_points is None:
            u_points = (np.arange(m) + 0.5) / m
        if omega_points is None:
            a, b = band
            omega_points = a + (np.arange(k) + 0.5) * (b - a) / k
        return cls(
            tensor=tensor,
            u_points=np.asarray(u_points, dtype=float),
            omega_points=np.asarray(omega_points, dtype=float),
            eta_points=np.arange(1, n + 1) / n,
            band=(float(band[0]), float(band[1])),
            kernel_name=kernel_name,
        )


def _validate_band(band: tuple[float, float]) -> tuple[float, float]:
    a, b = float(band[0]), float(band[1])
    if not (0.0 <= a < b <= math.pi + 1e-12):
        raise ConfigError(f"frequency band must satisfy 0 <= a < b <= pi, got ({a}, {b})")
    return a, min(b, math.pi)


def _default_k_omega(plan: BandwidthPlan, band: tuple[float, float]) -> int:
    a, b = band
    return max(1, math.ceil((b - a) / math.pi * plan.N**plan.kappa))


def _embedded(sample: TimeSeriesSample) -> np.ndarray:
    # Center per grid point, then apply the sqrt(p q) quadrature embedding.
    x = sample.data - sample.data.mean(axis=0)
    scale = np.sqrt(sample.p * sample.grid_weights)
    if not np.allclose(scale, 1.0, rtol=0.0, atol=1e-15):
        x = x * scale
    return x


def _lag_cumsums(w: np.ndarray, max_lag: int) -> np.ndarray:
    """S[h, k-1] = sum_{t=1}^{k-h} w_{t+h} w_t^T, zero where k <= h."""
    n, p = w.shape
    s = np.zeros((max_lag + 1, n, p, p))
    for h in range(max_lag + 1):
        prods = np.einsum("ti,tj->tij", w[h:], w[: n - h])
        s[h, h:] = np.cumsum(prods, axis=0)
    return s


def estimate_sequential_sdo(
    sample: TimeSeriesSample,
    plan: BandwidthPlan,
    kernel: Kernel = PARZEN,
    band: tuple[float, float] = (0.0, math.pi),
    k_omega: int | None = None,
) -> SequentialSDO:
    """Sequential spectral density estimator over the full (u, omega, eta) grid.

    For eta = k/N the value is the exact partial-sum estimate

        F_hat(eta) = (1/k) sum_{s,t <= k} w_tilde(omega, s, t) x_{o+s} x_{o+t}^T

    on the centered, quadrature-embedded window starting at offset
    o = floor(u T) - N/2. Every stored slice is exactly Hermitian; the
    eta = 1 slices are additionally PSD-projected.

    :param band: frequency band [a, b] inside [0, pi].
    :param k_omega: number of midpoint frequency cells; default
        ceil((b - a)/pi * N^kappa), matching frequency resolution to the
        smoothing bandwidth.
    :raises ConfigError: for invalid band, cell count, or plan/sample mismatch.
    """
    a, b = _validate_band(band)
    if plan.T != sample.T:
        raise ConfigError(f"plan built for T = {plan.T} but sample has T = {sample.T}")
    if k_omega is None:
        k_omega = _default_k_omega(plan, (a, b))
    if k_omega < 1:
        raise ConfigError(f"k_omega = {k_omega} must be at least 1")
    n, p = plan.N, sample.p
    x = _embedded(sample)
    starts = _window_starts(plan)
    omegas = a + (np.arange(k_omega) + 0.5) * (b - a) / k_omega
    max_lag = min(n - 1, int(math.floor(1.0 / plan.b_f + 1e-12)))
    lags = np.arange(max_lag + 1)
    kernel_w = kernel(plan.b_f * lags)
    ks = np.arange(1, n + 1, dtype=float)[:, None, None]

    tensor = np.empty((plan.M, k_omega, n, p, p), dtype=complex)
    clip_max = 0.0
    for i, off in enumerate(starts):
        s_cum = _lag_cumsums(x[off : off + n], max_lag)
        for j, omega in enumerate(omegas):
            coef = kernel_w * np.exp(1j * omega * lags) / TWO_PI
            f = coef[0].real * s_cum[0] + 0j
            if max_lag >= 1:
                upper = np.tensordot(coef[1:], s_cum[1:], axes=(0, 0))
                f += upper + upper.conj().transpose(0, 2, 1)
            f /= ks
            f = (f + f.conj().transpose(0, 2, 1)) / 2.0
            # PSD projection of the full-window slice; slices at eta < 1 stay raw.
            vals, vecs = np.linalg.eigh(f[-1])
            if vals[0] < 0:
                clip_max = max(clip_max, -float(vals[0]))
                f[-1] = (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T
                f[-1] = (f[-1] + f[-1].conj().T) / 2.0
            tensor[i, j] = f
    return SequentialSDO(
        tensor=tensor,
        u_points=midpoint_grid(plan),
        omega_points=omegas,
        eta_points=plan.eta_points,
        band=(a, b),
        plan=plan,
        kernel_name=kernel.name,
        grid_weights=sample.grid_weights,
        diagnostics={"psd_clip_max": clip_max},
    )


def sequential_estimate_at(
    sample: TimeSeriesSample,
    plan: BandwidthPlan,
    eta: float,
    kernel: Kernel = PARZEN,
    band: tuple[float, float] = (0.0, math.pi),
    k_omega: int | None = None,
) -> np.ndarray:
    """Sequential estimate at a single, possibly off-grid fraction eta.

    Off the grid {k/N} the estimator interpolates with the residue
    f = eta*N - k, adding the boundary cross terms that involve observation
    k + 1; on the grid those terms vanish and the result matches the stored
    tensor slice. Returns a raw (M, K, p, p) array (no PSD projection).
    """
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"eta = {eta} outside [0, 1]")
    a, b = _validate_band(band)
    if k_omega is None:
        k_omega = _default_k_omega(plan, (a, b))
    n, p = plan.N, sample.p
    x = _embedded(sample)
    starts = _window_starts(plan)
    omegas = a + (np.arange(k_omega) + 0.5) * (b - a) / k_omega
    k = int(math.floor(eta * n + 1e-9))
    frac = eta * n - k
    if frac < 1e-9:
        frac = 0.0
    out = np.zeros((plan.M, k_omega, p, p), dtype=complex)
    if k == 0:
        return out
    for i, off in enumerate(starts):
        w = x[off : off + n]
        idx = np.arange(1, k + 1)
        diff = idx[:, None] - idx[None, :]
        kw = kernel(plan.b_f * diff) / TWO_PI
        for j, omega in enumerate(omegas):
            kmat = kw * np.exp(1j * omega * diff)
            f = w[:k].T @ kmat @ w[:k] + 0j
            if frac > 0.0 and k < n:
                nxt = w[k]
                cw = kernel(plan.b_f * (idx - (k + 1))) / TWO_PI * np.exp(
                    1j * omega * (idx - (k + 1))
                )
                v = cw @ w[:k]
                f += frac * (
                    np.outer(v, nxt)
                    + np.outer(nxt, v.conj())
                    + kernel(0.0) / TWO_PI * np.outer(nxt, nxt)
                )
            f /= k
            out[i, j] = (f + f.conj().T) / 2.0
    return out
