"""Deviation-from-structure measures of spectral density operators.

Four functionals of a sequential spectral density tensor, each evaluated on
the whole fraction grid eta in {1/N, ..., 1}:

* ``tvdfpca_sequential``: share of total spectral mass carried by the d
  leading eigenvalues (band and time averaged).
* ``tvdpsca_sequential``: share of squared Hilbert-Schmidt mass carried by
  the d leading separable components, via the Kronecker rearrangement whose
  singular values are the component scores.
* ``coherence_sequential``: band average of the d-th order canonical
  coherence between two direct-sum blocks.
* ``stationarity_sequential``: band average of the dispersion of matrix
  square roots around their time average, the squared square-root distance
  from the best time-constant approximation.

Values are stored unscaled; each functional carries the analytic exponent
pair (f, g) of its self-normalization law, and the inference layer applies
the eta^{x_f} factor when integrating. Frequency integrals are band
averages (midpoint rule divided by band length), so ratio measures are
unaffected, perfect coherence reads 1, and the stationarity measure is
reported per unit band.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalError
from .estimator import SequentialSDO
from .hermitian import TIE_TOL, ProductStructure, eigh_descending

__all__ = [
    "SequentialFunctional",
    "DeviationResult",
    "as_result",
    "tvdfpca_sequential",
    "tvdpsca_sequential",
    "coherence_sequential",
    "stationarity_sequential",
    "rank_restrict",
    "measure_population",
    "SCALING_EXPONENTS",
]

# (f, g) exponent pairs of the pivot law per measure kind.
SCALING_EXPONENTS = {
    "tvdfpca": (3, 2),
    "tvdpsca": (3, 2),
    "coherence": (4, 3),
    "stationarity": (2, 1),
}


@dataclass(frozen=True)
class SequentialFunctional:
    """A scalar deviation-measure path over the fraction grid.

    ``values[k-1]`` is the unscaled measure computed from the first k window
    observations; ``valid`` marks fractions where the measure is well defined
    (rank-deficient partial estimates can make coherence undefined for small
    k). The pair (f_exponent, g_exponent) identifies the pivot law of the
    self-normalized statistic built from this path.
    """

    kind: str
    d: int
    eta: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    f_exponent: int
    g_exponent: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def point_estimate(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class DeviationResult:
    """Point estimate (the path value at eta = 1) plus its sequential path."""

    point_estimate: float
    sequential: SequentialFunctional
    diagnostics: dict


def as_result(seq: SequentialFunctional) -> DeviationResult:
    return DeviationResult(
        point_estimate=seq.point_estimate,
        sequential=seq,
        diagnostics=dict(seq.diagnostics),
    )


def _eigvals_descending(tensor: np.ndarray) -> np.ndarray:
    """Batched Hermitian eigenvalues, descending along the last axis."""
    return np.linalg.eigvalsh(tensor)[..., ::-1]


def _available(sdo: SequentialSDO) -> np.ndarray:
    """Fractions with at least p window observations; earlier partial
    estimates have rank too low for spectral functionals and are marked
    unavailable (they contribute zero to the self-normalizer)."""
    avail = np.arange(1, sdo.n_window + 1) >= sdo.p
    if not avail[-1]:
        raise ConfigError(
            f"window length N = {sdo.n_window} is smaller than the dimension p = {sdo.p}"
        )
    return avail


def _tie_count(desc_vals: np.ndarray, d: int) -> int:
    """Number of slices with a numerically tied eigenvalue pair at the d boundary."""
    if d >= desc_vals.shape[-1]:
        return 0
    gap = desc_vals[..., d - 1] - desc_vals[..., d]
    scale = np.maximum(1.0, desc_vals[..., 0])
    return int(np.count_nonzero(gap < TIE_TOL * scale))


def tvdfpca_sequential(sdo: SequentialSDO, d: int) -> SequentialFunctional:
    """Fraction of spectral mass explained by the d leading eigenvalues.

    s_hat_d(eta) is the ratio of the time/band average of the d largest
    eigenvalues to the time/band average of the trace, both taken on the
    PSD-projected slices (negative noise eigenvalues clamped to zero, which
    is the spectrum of the Frobenius PSD projection).

    :raises NumericalError: if the full-window estimate carries no spectral
        mass at all.
    """
    p = sdo.p
    if not 1 <= d <= p:
        raise ValueError(f"d = {d} must lie in [1, {p}]")
    raw = _eigvals_descending(sdo.tensor)
    vals = np.maximum(raw, 0.0)
    num = vals[..., :d].sum(axis=-1).mean(axis=(0, 1))
    den = vals.sum(axis=-1).mean(axis=(0, 1))
    valid = (den > 0) & _available(sdo)
    if not den[-1] > 0:
        raise NumericalError("degenerate spectral mass: the estimate at eta = 1 is zero")
    values = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    diag = {
        "psd_clip_max": max(0.0, -float(raw.min())),
        "near_tie_count": _tie_count(vals, d),
    }
    return SequentialFunctional(
        kind="tvdfpca", d=d, eta=sdo.eta_points, values=values, valid=valid,
        f_exponent=3, g_exponent=2, diagnostics=diag,
    )


def _rearranged(tensor: np.ndarray, ps: ProductStructure) -> np.ndarray:
    """Batched Kronecker rearrangement of (..., p1 p2, p1 p2) to (..., p1^2, p2^2)."""
    p1, p2 = ps.p1, ps.p2
    lead = tensor.shape[:-2]
    if tensor.shape[-1] != p1 * p2 or tensor.shape[-2] != p1 * p2:
        raise ValueError(
            f"product structure ({p1}, {p2}) incompatible with operator dimension {tensor.shape[-1]}"
        )
    r = tensor.reshape(*lead, p1, p2, p1, p2)
    order = tuple(range(len(lead))) + tuple(len(lead) + i for i in (0, 2, 1, 3))
    return r.transpose(order).reshape(*lead, p1 * p1, p2 * p2)


def tvdpsca_sequential(
    sdo: SequentialSDO, d: int, ps: ProductStructure
) -> SequentialFunctional:
    """Fraction of squared Hilbert-Schmidt mass in the d leading separable terms.

    Each slice is rearranged so Kronecker products become rank one; the
    singular values of the rearrangement are the separable component scores,
    and the denominator is computed directly as ||F_hat||_F^2, which equals
    the full sum of squared scores because the rearrangement is a Frobenius
    isometry.
    """
    p = sdo.p
    if ps.p1 * ps.p2 != p:
        raise ValueError(f"product structure ({ps.p1}, {ps.p2}) does not factor p = {p}")
    d_cap = min(ps.p1**2, ps.p2**2)
    if not 1 <= d <= d_cap:
        raise ValueError(f"d = {d} must lie in [1, min(p1^2, p2^2) = {d_cap}]")
    scores = np.linalg.svd(_rearranged(sdo.tensor, ps), compute_uv=False)
    num = (scores[..., :d] ** 2).sum(axis=-1).mean(axis=(0, 1))
    den = (np.abs(sdo.tensor) ** 2).sum(axis=(-2, -1)).mean(axis=(0, 1))
    valid = (den > 0) & _available(sdo)
    if not den[-1] > 0:
        raise NumericalError("degenerate spectral mass: the estimate at eta = 1 is zero")
    values = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    total = (scores**2).sum(axis=-1).mean(axis=(0, 1))
    diag = {
        "isometry_defect_max": float(np.max(np.abs(total - den))),
        "near_tie_count": _tie_count(scores, d),
    }
    return SequentialFunctional(
        kind="tvdpsca", d=d, eta=sdo.eta_points, values=values, valid=valid,
        f_exponent=3, g_exponent=2, diagnostics=diag,
    )


def _psd_projected(tensor: np.ndarray) -> tuple[np.ndarray, float]:
    """Batched PSD projection; returns the projected tensor and max clamp size."""
    vals, vecs = np.linalg.eigh(tensor)
    clip = max(0.0, -float(vals.min()))
    if clip == 0.0:
        return tensor, 0.0
    clamped = np.maximum(vals, 0.0)
    proj = np.einsum("...ij,...j,...kj->...ik", vecs, clamped, vecs.conj())
    return proj, clip


def coherence_sequential(
    sdo: SequentialSDO, d: int, ps: ProductStructure
) -> SequentialFunctional:
    """Band average of the d-th order canonical coherence between two blocks.

    The operator dimension splits as p = p1 + p2 (direct sum). Per cell,
    R_hat_d = sigma_d(F12) / sqrt(lambda_d(F11) lambda_d(F22)) on the
    PSD-projected slice. Cells whose d-th marginal eigenvalue is numerically
    zero (below 1e-12 of the marginal trace) are undefined: at eta = 1 that
    is an error, at interior eta the cell is skipped with a warning and the
    average runs over the remaining cells.
    """
    p = sdo.p
    if ps.p1 + ps.p2 != p:
        raise ValueError(f"direct-sum structure ({ps.p1}, {ps.p2}) does not add up to p = {p}")
    if not 1 <= d <= min(ps.p1, ps.p2):
        raise ValueError(f"d = {d} must lie in [1, min(p1, p2) = {min(ps.p1, ps.p2)}]")
    p1 = ps.p1
    proj, clip = _psd_projected(sdo.tensor)
    f11 = proj[..., :p1, :p1]
    f22 = proj[..., p1:, p1:]
    f12 = proj[..., :p1, p1:]
    lam1 = np.maximum(_eigvals_descending(f11)[..., d - 1], 0.0)
    lam2 = np.maximum(_eigvals_descending(f22)[..., d - 1], 0.0)
    sig = np.linalg.svd(f12, compute_uv=False)[..., d - 1]
    tr1 = np.einsum("...ii->...", f11).real
    tr2 = np.einsum("...ii->...", f22).real
    defined = (lam1 > 1e-12 * tr1) & (lam2 > 1e-12 * tr2)
    if not bool(defined[..., -1].all()):
        raise NumericalError(f"rank-deficient marginal spectrum at order d = {d}")
    avail = _available(sdo)
    ratio = np.where(defined, sig / np.sqrt(np.where(defined, lam1 * lam2, 1.0)), 0.0)
    count = defined.sum(axis=(0, 1))
    values = np.where(count > 0, ratio.sum(axis=(0, 1)) / np.maximum(count, 1), 0.0)
    cells = sdo.m * sdo.k_omega
    valid = (count == cells) & avail
    skipped = int(cells * int(avail.sum()) - int(count[avail].sum()))
    if skipped:
        warnings.warn(
            f"coherence undefined in {skipped} partial-sum cells (rank-deficient marginals); "
            "those cells were skipped",
            stacklevel=2,
        )
    diag = {"psd_clip_max": clip, "skipped_cells": skipped}
    return SequentialFunctional(
        kind="coherence", d=d, eta=sdo.eta_points, values=values, valid=valid,
        f_exponent=4, g_exponent=3, diagnostics=diag,
    )


def stationarity_sequential(sdo: SequentialSDO, d: int) -> SequentialFunctional:
    """Dispersion of d-restricted square roots around their time average.

    Per frequency, each window slice is rank-restricted to its d leading
    components, PSD-clamped, and replaced by its matrix square root S_u; the
    path value is the band average of mean_u ||S_u - mean_v S_v||_F^2. The
    eta scaling factors out of the square root analytically (sqrt(eta A) =
    sqrt(eta) sqrt(A)), so the stored path q_hat satisfies r_hat(eta) =
    eta * q_hat(eta); in particular the point estimate is q_hat(1) = r_hat(1).
    """
    p = sdo.p
    if not 1 <= d <= p:
        raise ValueError(f"d = {d} must lie in [1, {p}]")
    a, b = sdo.band
    if abs(a) > 1e-12 or abs(b - math.pi) > 1e-9:
        warnings.warn(
            f"stationarity measure expects the full band [0, pi], got ({a:.6g}, {b:.6g})",
            stacklevel=2,
        )
    vals, vecs = np.linalg.eigh(sdo.tensor)
    clip = max(0.0, -float(vals.min()))
    roots = np.sqrt(np.maximum(vals, 0.0))
    if d < p:
        roots[..., : p - d] = 0.0  # ascending order: drop the p - d smallest
    s = np.einsum("...ij,...j,...kj->...ik", vecs, roots, vecs.conj())
    centered = s - s.mean(axis=0, keepdims=True)
    q = (np.abs(centered) ** 2).sum(axis=(-2, -1)).mean(axis=(0, 1))
    desc = np.maximum(vals[..., ::-1], 0.0)
    diag = {"psd_clip_max": clip, "near_tie_count": _tie_count(desc, d)}
    return SequentialFunctional(
        kind="stationarity", d=d, eta=sdo.eta_points, values=q,
        valid=_available(sdo),
        f_exponent=2, g_exponent=1, diagnostics=diag,
    )


def rank_restrict(a: np.ndarray, d: int) -> np.ndarray:
    """Restriction to the span of the d leading eigenvectors.

    Returns sum_{j<=d} lambda_j v_j v_j†. A numerically tied pair at the
    d/(d+1) boundary makes the restriction ill-conditioned; that case is
    reported as a warning and the computation proceeds.
    """
    es = eigh_descending(a)
    p = es.values.shape[0]
    if not 1 <= d <= p:
        raise ValueError(f"d = {d} must lie in [1, {p}]")
    if d == p:
        return np.asarray(a)
    if bool(es.near_tie_flags[d - 1]):
        warnings.warn(
            f"eigenvalue near-tie at the rank boundary d = {d}; restriction is ill-conditioned",
            stacklevel=2,
        )
    v = es.vectors[:, :d]
    return (v * es.values[:d]) @ v.conj().T


def _truth_tensor(
    truth: Callable[[float, float], np.ndarray],
    us: np.ndarray,
    k_omega: int,
    band: tuple[float, float],
) -> np.ndarray:
    a, b = band
    m_u = us.size
    oms = a + (np.arange(k_omega) + 0.5) * (b - a) / k_omega
    first = np.asarray(truth(float(us[0]), float(oms[0])), dtype=complex)
    p = first.shape[0]
    out = np.empty((m_u, k_omega, p, p), dtype=complex)
    for i, u in enumerate(us):
        for j, om in enumerate(oms):
            out[i, j] = truth(float(u), float(om))
    return (out + out.conj().swapaxes(-1, -2)) / 2.0


def measure_population(
    truth: Callable[[float, float], np.ndarray],
    kind: str,
    d: int,
    ps: ProductStructure | None = None,
    m_u: int = 400,
    k_omega: int = 400,
    band: tuple[float, float] = (0.0, math.pi),
) -> float:
    """Population value of a deviation measure by numerical quadrature.

    ``truth`` maps (u, omega) to the exact spectral density matrix; the
    measure is evaluated with the same conventions as the sequential
    estimators (band averages, rank restriction for stationarity). The time
    integral uses Gauss-Legendre nodes (matrix square roots are not smooth
    at a vanishing spectrum, where midpoint rules lose accuracy); the
    frequency band average uses a midpoint rule. Used as the oracle in
    simulation and coverage studies.
    """
    nodes, gl_w = np.polynomial.legendre.leggauss(m_u)
    us = (nodes + 1.0) / 2.0
    w_u = gl_w / 2.0
    tensor = _truth_tensor(truth, us, k_omega, band)
    if kind == "tvdfpca":
        vals = np.maximum(_eigvals_descending(tensor), 0.0)
        num = (w_u @ vals[..., :d].sum(-1)).mean()
        return float(num / (w_u @ vals.sum(-1)).mean())
    if kind == "tvdpsca":
        if ps is None:
            raise ValueError("tvdpsca requires a product structure")
        scores = np.linalg.svd(_rearranged(tensor, ps), compute_uv=False)
        den = (w_u @ (np.abs(tensor) ** 2).sum(axis=(-2, -1))).mean()
        return float((w_u @ (scores[..., :d] ** 2).sum(-1)).mean() / den)
    if kind == "coherence":
        if ps is None:
            raise ValueError("coherence requires a direct-sum structure")
        p1 = ps.p1
        lam1 = np.maximum(_eigvals_descending(tensor[..., :p1, :p1])[..., d - 1], 0.0)
        lam2 = np.maximum(_eigvals_descending(tensor[..., p1:, p1:])[..., d - 1], 0.0)
        sig = np.linalg.svd(tensor[..., :p1, p1:], compute_uv=False)[..., d - 1]
        if not bool(np.all(lam1 > 0) and np.all(lam2 > 0)):
            raise NumericalError(f"rank-deficient marginal spectrum at order d = {d}")
        return float((w_u @ (sig / np.sqrt(lam1 * lam2))).mean())
    if kind == "stationarity":
        vals, vecs = np.linalg.eigh(tensor)
        roots = np.sqrt(np.maximum(vals, 0.0))
        p = tensor.shape[-1]
        if d < p:
            roots[..., : p - d] = 0.0
        s = np.einsum("...ij,...j,...kj->...ik", vecs, roots, vecs.conj())
        mean_s = np.tensordot(w_u, s, axes=(0, 0))[None]
        dev_sq = (np.abs(s - mean_s) ** 2).sum(axis=(-2, -1))
        return float((w_u @ dev_sq).mean())
    raise ValueError(f"unknown measure kind {kind!r}")
