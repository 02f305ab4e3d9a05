"""Beamforming optimality, SNR asymptotics, and covariance approximations.

The beamforming tests decide whether rank-one transmission on the strongest
transmit eigenvector achieves capacity for zero-mean Kronecker channels with
``tr(T) = t`` and ``tr(R) = r``. Two routes are provided: a Monte Carlo
evaluation of the defining expectation over a length-r Gaussian vector, and
the closed form built from exponential-integral terms; they must agree in
sign whenever the Monte Carlo margin is resolved.

Also here: the first-order low-SNR covariance (uniform power on the top
eigenspace of E[H^H H]), the high-SNR capacity expansion, the central-Wishart
covariance approximation for non-zero-mean channels, and the mean/noise
interpolation study tracking how the optimal eigenvectors rotate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channels import (
    ChannelLaw,
    Interpolated,
    KroneckerGaussian,
    PointMass,
    expected_gram,
    sample_batch,
)
from .covopt import CovOptResult, OptimizerOptions, fixed_point_diag, iterate_general
from .linalg import as_hermitian, herm_eig, psd_sqrt, scaled_expint_gamma0
from .montecarlo import (
    DEFAULT_SAMPLES_INNER,
    McEstimate,
    SeededStream,
    as_stream,
    ergodic_mi,
)

__all__ = [
    "BeamformVerdict",
    "beamform_opt_mc",
    "beamform_opt_closed",
    "beamform_boundary",
    "low_snr_cov",
    "HighSnrResult",
    "high_snr_capacity",
    "wishart_approx",
    "wishart_approx_covariance",
    "interp_study",
]


@dataclass(frozen=True)
class BeamformVerdict:
    """Outcome of a beamforming optimality test; optimal iff margin > 0."""

    optimal: bool
    margin: float
    method: str
    se: float = 0.0


def _check_normalization(r_corr: np.ndarray, t_corr: np.ndarray) -> None:
    r, t = r_corr.shape[0], t_corr.shape[0]
    if abs(np.trace(r_corr).real - r) > 1e-6 * r:
        raise ValueError("beamforming test requires tr(R) = r")
    if abs(np.trace(t_corr).real - t) > 1e-6 * t:
        raise ValueError("beamforming test requires tr(T) = t")


def beamform_opt_mc(r_corr, t_corr, gamma: float,
                    samples: int = DEFAULT_SAMPLES_INNER,
                    rng: SeededStream | int = 0) -> BeamformVerdict:
    """Monte Carlo beamforming test for a zero-mean Kronecker channel.

    Evaluates E[(u^H R u + gamma*tau2*u^H R^2 u) / (1 + gamma*tau1*u^H R u)]
    against r*tau2/tau1, with u a length-r circular complex Gaussian vector.
    Only the largest non-leading transmit eigenvalue tau2 is tested: the
    condition is linear in tau_k on one side, so it is tightest there.
    """
    r_corr = as_hermitian(r_corr)
    t_corr = as_hermitian(t_corr)
    _check_normalization(r_corr, t_corr)
    r = r_corr.shape[0]
    taus = np.sort(np.linalg.eigvalsh(t_corr))[::-1]
    if taus.size < 2:
        raise ValueError("beamforming needs at least two transmit modes")
    tau1, tau2 = taus[0], taus[1]
    gen = as_stream(rng).generator()
    u = (gen.standard_normal((samples, r)) + 1j * gen.standard_normal((samples, r)))
    u /= np.sqrt(2)
    w1 = np.einsum("si,ij,sj->s", u.conj(), r_corr, u).real
    w2 = np.einsum("si,ij,sj->s", u.conj(), r_corr @ r_corr, u).real
    x = (w1 + gamma * tau2 * w2) / (1.0 + gamma * tau1 * w1)
    margin = float(x.mean() - r * tau2 / tau1)
    se = float(x.std(ddof=1) / np.sqrt(samples))
    return BeamformVerdict(margin > 0, margin, "monte-carlo", se)


def _f_expint(x):
    """f(x) = exp(1/x) * Gamma(0, 1/x), computed in its overflow-safe form."""
    return scaled_expint_gamma0(1.0 / np.asarray(x, dtype=float))


def beamform_opt_closed(rho, tau1: float, tau2: float, gamma: float) -> BeamformVerdict:
    """Closed-form beamforming test from the exponential-integral expansion.

    ``rho`` are the receive-correlation eigenvalues (all positive); nearly
    equal values are separated by a relative 1e-9 jitter rather than taking
    confluent limits, except the exactly-diagonal term which uses its stated
    limit. Optimal iff

        sum_{ij} rho_i (1 + gamma tau2 rho_i) rho_j^{r-1}
                 / prod_{k != j}(rho_j - rho_k) * zeta_ij  >  r gamma tau2.
    """
    rho = np.asarray(rho, dtype=float).copy()
    if np.any(rho <= 0):
        raise ValueError("receive eigenvalues must be positive")
    r = rho.size
    # Deterministic jitter for repeated eigenvalues; the ii limit is exact.
    scale = rho.max()
    for i in range(r):
        for j in range(i):
            if abs(rho[i] - rho[j]) < 1e-12 * scale:
                rho[i] *= 1.0 + 1e-9 * (i + 1)
    a = gamma * tau1 * rho
    f = _f_expint(a)
    lhs = 0.0
    for i in range(r):
        for j in range(r):
            if i == j:
                zeta = (1.0 - f[i] / a[i]) / rho[i]
            else:
                zeta = (f[i] - f[j]) / (rho[i] - rho[j])
            denom = np.prod([rho[j] - rho[k] for k in range(r) if k != j])
            lhs += rho[i] * (1.0 + gamma * tau2 * rho[i]) * rho[j] ** (r - 1) / denom * zeta
    margin = float(lhs - r * gamma * tau2)
    return BeamformVerdict(margin > 0, margin, "closed-form")


def beamform_boundary(gamma: float, rho_grid, tau_lo: float = 1.0,
                      tau_hi: float = 2.0, tol: float = 1e-6) -> np.ndarray:
    """Beamforming transition curve for the 2x2 diagonal parameterization.

    For each rho, with R = diag(rho, 2 - rho) and T = diag(tau, 2 - tau),
    returns the smallest tau in (tau_lo, tau_hi) where beamforming becomes
    optimal (bisection on the closed-form margin; nan when it never does).
    Output rows are (rho, tau_star).
    """
    import scipy.optimize

    rho_grid = np.asarray(rho_grid, dtype=float)
    out = np.empty((rho_grid.size, 2))
    for idx, rho in enumerate(rho_grid):
        rvec = [rho, 2.0 - rho]

        def margin(tau):
            return beamform_opt_closed(rvec, tau, 2.0 - tau, gamma).margin

        lo, hi = tau_lo + 1e-9, tau_hi - 1e-9
        m_lo, m_hi = margin(lo), margin(hi)
        if m_lo > 0:
            out[idx] = (rho, lo)
        elif m_hi < 0:
            out[idx] = (rho, np.nan)
        else:
            tau_star = scipy.optimize.brentq(margin, lo, hi, xtol=tol)
            out[idx] = (rho, tau_star)
    return out


def low_snr_cov(law: ChannelLaw) -> tuple[np.ndarray, float]:
    """First-order optimal covariance: uniform power on the top eigenspace
    of E[H^H H].

    Returns (Q, slope) with C ~ slope * gamma as gamma -> 0. With trace-one
    Q spread over a k-fold top eigenvalue lam1, the first-order rate is
    gamma * lam1 regardless of k, so the slope reported is lam1.
    """
    g = expected_gram(law)
    u, lam = herm_eig(g)
    if lam[0] <= 0:
        raise ValueError("expected Gram matrix has no positive eigenvalue")
    rel = (lam[0] - lam) / lam[0]
    k = int(np.sum(rel <= 1e-8))
    if k < lam.size and rel[k] < 1e-4:
        warnings.warn(
            f"top eigenvalue nearly degenerate (relative gap {rel[k]:.2e}); "
            f"reporting multiplicity k={k}", stacklevel=2)
    uk = u[:, :k]
    q = (uk @ uk.conj().T) / k
    return 0.5 * (q + q.conj().T), float(lam[0])


@dataclass(frozen=True)
class HighSnrResult:
    q: np.ndarray
    approx: McEstimate
    exact: McEstimate
    excluded: int


def high_snr_capacity(law: ChannelLaw, gamma: float,
                      samples: int = DEFAULT_SAMPLES_INNER,
                      rng: SeededStream | int = 0) -> HighSnrResult:
    """High-SNR expansion C -> t log(gamma/t) + E[log det(H H^H)] with Q = I/t.

    Valid when draws are full rank and the received SNR dominates every mode.
    Draws with numerically non-positive determinant are excluded and counted.
    Also evaluates the exact ergodic MI at Q = I/t for gap reporting.
    """
    t = law.tx
    stream = as_stream(rng)
    h = sample_batch(law, samples, stream.child(0).generator())
    r = law.rx
    if r <= t:
        gram = np.einsum("sik,sjk->sij", h, h.conj())
    else:
        gram = np.einsum("ski,skj->sij", h.conj(), h)
    sign, logdet = np.linalg.slogdet(gram)
    good = (sign.real > 0) & np.isfinite(logdet)
    excluded = int(samples - good.sum())
    if excluded:
        warnings.warn(f"excluded {excluded} singular draws", stacklevel=2)
    vals = logdet[good].real
    mean = t * np.log(gamma / t) + vals.mean()
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    approx = McEstimate(float(mean), se, int(vals.size))
    q = np.eye(t) / t
    exact = ergodic_mi(q, law, gamma, samples, stream.child(1))
    return HighSnrResult(q, approx, exact, excluded)


def wishart_approx(mean, tx_corr, q) -> np.ndarray:
    """Central-Wishart scale matrix T^{1/2} Q T^{1/2} + M^H M / t.

    Approximates the non-central quadratic form H Q H^H (H with mean M and
    transmit correlation T) by a central Wishart with this scale.
    """
    mean = np.asarray(mean, dtype=complex)
    t = mean.shape[1]
    th = psd_sqrt(as_hermitian(tx_corr))
    sigma = th @ as_hermitian(q) @ th + mean.conj().T @ mean / t
    return 0.5 * (sigma + sigma.conj().T)


def wishart_approx_covariance(mean, tx_corr, gamma: float,
                              opts: OptimizerOptions | dict | None = None
                              ) -> tuple[np.ndarray, ChannelLaw]:
    """Input covariance that is optimal under the central-Wishart stand-in.

    Folds Q = I/t into the scale recipe, builds the zero-mean Kronecker law
    with that transmit correlation, and optimizes the power allocation in its
    eigenbasis. The returned covariance is meant to be judged under the true
    law (the approximation only picks the input, never the yardstick).
    """
    mean = np.asarray(mean, dtype=complex)
    r, t = mean.shape
    sigma = wishart_approx(mean, tx_corr, np.eye(t) / t)
    approx_law = KroneckerGaussian(np.zeros((r, t)), np.eye(r), sigma)
    basis, _ = herm_eig(sigma)
    res = fixed_point_diag(approx_law, gamma, basis, opts)
    return res.q, approx_law


@dataclass(frozen=True)
class InterpPoint:
    """One interpolation step: optimal covariance and how its axes sit."""

    kappa: float
    result: CovOptResult
    eigvecs: np.ndarray
    powers: np.ndarray
    angle_vs_gram: float


def _principal_angle(u, v) -> float:
    """Angle between two unit vectors modulo phase."""
    c = np.clip(np.abs(np.vdot(u, v)), 0.0, 1.0)
    return float(np.arccos(c))


def interp_study(m0, noise_cov, kappa_grid, gamma: float,
                 opts: OptimizerOptions | dict | None = None) -> list[InterpPoint]:
    """Track the optimal covariance as the channel slides from noise to mean.

    For each kappa runs the general optimizer on H = kappa*M0 + (1-kappa)*X
    and records the eigen-structure of the optimum plus the angle between its
    top eigenvector and that of E[H^H H] (they differ: the optimum is not a
    straight interpolation of the mean and noise axes).
    """
    m0 = np.asarray(m0, dtype=complex)
    out = []
    for i, kappa in enumerate(np.asarray(kappa_grid, dtype=float)):
        law: ChannelLaw = (PointMass(m0) if kappa == 1.0
                           else Interpolated(float(kappa), m0, noise_cov))
        o = _with_seed_offset(opts, i)
        res = iterate_general(law, gamma, o)
        u, lam = herm_eig(res.q)
        gu, _ = herm_eig(expected_gram(law))
        out.append(InterpPoint(float(kappa), res, u, lam,
                               _principal_angle(u[:, 0], gu[:, 0])))
    return out


def _with_seed_offset(opts, offset: int) -> OptimizerOptions:
    base = opts if isinstance(opts, OptimizerOptions) else OptimizerOptions(
        **(dict(opts) if opts else {}))
    return OptimizerOptions(**{**base.__dict__, "seed": base.seed + 7919 * offset})
