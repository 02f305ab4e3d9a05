"""Water-filling power allocation: per-realization, and jointly over space and time.

Two regimes live here. ``waterfill_det`` solves the classical single-matrix
problem: a common water level mu over the eigenvalues of H H^H, with the
budget spent at every symbol. ``st_water_level``/``st_capacity`` solve the
ergodic problem where one level xi is chosen once so that the *long-term
average* power meets the budget; each symbol then allocates (xi - 1/lam)+ on
its instantaneous eigenmodes, which is causal and memoryless.

Also here: the naive per-symbol baseline (water-fill each draw with the full
budget, then average), the peak-to-average power ratio and its bound, the
density of the per-eigenvector transmit power, and the rate after truncating
the allocation at a peak-power cap.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.optimize

from .channels import (
    ChannelLaw,
    EigDensity,
    EmpiricalDensity,
    FiniteMixture,
    PointMass,
    PointMassDensity,
    WishartDensity,
    sample_batch,
    gram_eigs,
)
from .linalg import svd
from .montecarlo import SeededStream, as_stream

__all__ = [
    "WaterfillSolution",
    "InfeasibleError",
    "waterfill_det",
    "st_water_level",
    "st_capacity",
    "instantaneous_covariance",
    "naive_avg_rate",
    "papr",
    "papr_bound",
    "PowerDensity",
    "power_density",
    "peak_limited_rate",
]


class InfeasibleError(ValueError):
    """Raised when a power budget cannot be met under the stated constraints."""


@dataclass(frozen=True)
class WaterfillSolution:
    """Water level, per-mode powers, achieved rate (nats/symbol), active modes."""

    level: float
    powers: np.ndarray
    rate: float
    active: int


def waterfill_det(eigs, budget: float) -> WaterfillSolution:
    """Water-filling over fixed eigenvalues with a hard power budget.

    Solves for mu with sum_{i active} (mu - 1/lam_i) = budget, active set
    maximal, and returns the rate sum log(mu * lam_i) over active modes.
    """
    lam = np.asarray(eigs, dtype=float)
    if lam.ndim != 1 or np.any(lam < 0):
        raise ValueError("eigenvalues must be a non-negative vector")
    if budget <= 0:
        raise ValueError("budget must be positive")
    pos = np.sort(lam[lam > 0])[::-1]
    if pos.size == 0:
        raise ValueError("cannot water-fill: all eigenvalues are zero")
    inv = 1.0 / pos
    # Largest k with mu = (budget + sum inv[:k]) / k above the k-th threshold.
    mu = None
    k_active = 0
    for k in range(pos.size, 0, -1):
        cand = (budget + inv[:k].sum()) / k
        if cand >= inv[k - 1]:
            mu, k_active = cand, k
            break
    assert mu is not None
    powers_sorted = np.maximum(mu - inv, 0.0)
    rate = float(np.sum(np.log(mu * pos[:k_active])))
    # Report powers in the caller's eigenvalue order.
    powers = np.zeros_like(lam)
    order = np.argsort(-lam, kind="stable")
    taken = 0
    for idx in order:
        if lam[idx] > 0:
            powers[idx] = powers_sorted[taken]
            taken += 1
    return WaterfillSolution(float(mu), powers, rate, k_active)


def _avg_power(density: EigDensity, xi: float) -> float:
    """Average per-eigenvalue power int_{1/xi}^inf (xi - 1/lam) f dlam."""
    return density.trunc_moment(lambda lam: xi - 1.0 / lam, 1.0 / xi)


def st_water_level(density: EigDensity, budget: float, m: int | None = None) -> float:
    """Water level xi of space-time water-filling over an eigenvalue density.

    xi solves average per-eigenvalue power = budget / m, where m is the
    number of eigenmodes per symbol (taken from the density by default).
    The map xi -> average power is monotone increasing, so the root is
    bracketed by doubling and polished to |residual| <= 1e-9 * (budget/m).
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    m = density.m if m is None else m
    target = budget / m
    if isinstance(density, EmpiricalDensity) and density.pool < 10_000:
        warnings.warn(f"water-level solving on a pool of {density.pool} "
                      "draws; 10^4 or more is recommended", stacklevel=2)
    if density.trunc_moment(lambda lam: np.ones_like(lam), 0.0) <= 0:
        raise InfeasibleError("eigenvalue density has no mass above zero")

    def residual(xi):
        return _avg_power(density, xi) - target

    lo = 1e-12
    hi = target + 10.0
    tries = 0
    while residual(hi) < 0:
        hi *= 2.0
        tries += 1
        if tries > 200:
            raise InfeasibleError("failed to bracket the water level")
    xi = scipy.optimize.brentq(residual, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    res = residual(xi)
    if abs(res) > 1e-9 * target:
        # Piecewise-constant pool integrals can leave brentq at a kink; nudge.
        xi = scipy.optimize.brentq(residual, xi * (1 - 1e-6), xi * (1 + 1e-6) + 1e-12,
                                   xtol=1e-16, rtol=8.9e-16, maxiter=200)
    return float(xi)


def st_capacity(density: EigDensity, xi: float, m: int | None = None) -> float:
    """Capacity in nats for a given space-time water level xi."""
    m = density.m if m is None else m
    val = density.trunc_moment(lambda lam: np.log(xi * lam), 1.0 / xi)
    return float(m * val)


def instantaneous_covariance(h, xi: float) -> np.ndarray:
    """Per-symbol transmit covariance V^H (xi I - S^{-2})+ V from H's SVD.

    Uses only the current realization: eigenvalues of the result are
    (xi - 1/lam_i)+ on the right-singular directions of H.
    """
    if xi <= 0:
        raise ValueError("water level must be positive")
    u, s, vh = svd(h)
    lam = s**2
    powers = np.where(lam > 0, np.maximum(xi - np.divide(
        1.0, lam, out=np.full_like(lam, np.inf), where=lam > 0), 0.0), 0.0)
    return (vh.conj().T * powers) @ vh


def _mixture_naive(law: FiniteMixture, budget: float) -> float:
    total = 0.0
    for w, atom in zip(law.weights, law.atoms):
        eigs = gram_eigs(atom[None, :, :])[0]
        if np.all(eigs <= 0):
            continue  # no usable mode this draw; transmit nothing
        total += w * waterfill_det(eigs, budget).rate
    return total


def _independent_modes_naive(density: PointMassDensity, budget: float) -> float:
    vals = density.values
    wts = density.weights
    m = density.m
    if len(vals) ** m > 20_000:
        raise ValueError("mode enumeration too large; use a sampled law instead")
    total = 0.0
    for combo in itertools.product(range(len(vals)), repeat=m):
        w = float(np.prod(wts[list(combo)]))
        eigs = vals[list(combo)]
        if np.all(eigs <= 0):
            continue
        total += w * waterfill_det(eigs, budget).rate
    return total


def naive_avg_rate(source, budget: float, samples: int = 100_000,
                   rng: SeededStream | int = 0) -> float:
    """Per-symbol-budget baseline: water-fill every draw, then average.

    The joint structure of each draw's eigenvalues matters here, so the
    source must carry it: a channel law (drawn directly), an empirical
    density (per-draw rows of its pool), a Wishart density (fresh Gaussian
    draws), or a discrete density that is either the marginal of a fixed
    eigenvalue multiset or flagged as independent across modes.
    """
    if isinstance(source, PointMass):
        eigs = gram_eigs(source.h0[None, :, :])[0]
        return waterfill_det(eigs, budget).rate
    if isinstance(source, FiniteMixture):
        return _mixture_naive(source, budget)
    if isinstance(source, ChannelLaw):
        h = sample_batch(source, samples, as_stream(rng).generator())
        return _rows_naive(gram_eigs(h), budget)
    if isinstance(source, EmpiricalDensity):
        return _rows_naive(source.draws, budget)
    if isinstance(source, WishartDensity):
        eigs = source.sample_eigs(samples, as_stream(rng).generator())
        return _rows_naive(eigs, budget)
    if isinstance(source, PointMassDensity):
        if source.independent_modes:
            return _independent_modes_naive(source, budget)
        # Marginal of a fixed multiset: weights are counts / m.
        counts = source.weights * source.m
        if np.any(np.abs(counts - np.round(counts)) > 1e-9):
            raise ValueError(
                "discrete density is not a fixed-multiset marginal; "
                "set independent_modes or pass the channel law itself")
        eigs = np.repeat(source.values, np.round(counts).astype(int))
        return waterfill_det(eigs, budget).rate
    raise TypeError(f"cannot compute a per-draw baseline from {type(source).__name__}")


def _rows_naive(rows: np.ndarray, budget: float) -> float:
    rates = np.empty(rows.shape[0])
    for i, eigs in enumerate(rows):
        if np.all(eigs <= 1e-300):
            rates[i] = 0.0
        else:
            rates[i] = waterfill_det(eigs, budget).rate
    return float(rates.mean())


def papr(xi: float, budget: float, m: int) -> float:
    """Exact peak-to-average power ratio of space-time water-filling: m*xi/budget."""
    return m * xi / budget


def papr_bound(density: EigDensity, budget: float, m: int | None = None) -> float:
    """Upper bound 1 + (m/budget) E[1/lam]; +inf when E[1/lam] diverges."""
    m = density.m if m is None else m
    if isinstance(density, WishartDensity):
        # f ~ lam^(n-m) near zero: the inverse moment diverges for n = m.
        if density.n == density.m:
            return np.inf
        inv_moment = density.trunc_moment(lambda lam: 1.0 / lam, 0.0)
    elif isinstance(density, PointMassDensity):
        if np.any((density.values <= 0) & (density.weights > 0)):
            return np.inf
        inv_moment = density.trunc_moment(lambda lam: 1.0 / lam, 0.0)
    else:
        inv_moment = density.trunc_moment(lambda lam: 1.0 / lam, 0.0)
    return 1.0 + m / budget * inv_moment


@dataclass(frozen=True)
class PowerDensity:
    """Distribution of the per-eigenvector transmit power gamma = xi - 1/lam.

    ``atom0`` is the probability of transmitting nothing. ``pdf`` holds the
    continuous density on ``grid``; discrete source densities instead emit
    ``atoms`` as (power, weight) pairs.
    """

    xi: float
    atom0: float
    grid: np.ndarray
    pdf: np.ndarray
    atoms: tuple = ()
    _source: EigDensity | None = None

    def total_mass(self) -> float:
        mass = self.atom0 + sum(w for _, w in self.atoms)
        if self._source is not None and not isinstance(self._source, PointMassDensity):
            val, _ = scipy.integrate.quad(
                lambda g: self._source.pdf(1.0 / (self.xi - g)) / (self.xi - g) ** 2,
                0.0, self.xi, limit=300)
            mass += val
        return float(mass)


def power_density(density: EigDensity, xi: float, grid) -> PowerDensity:
    """Per-eigenvector transmit power density at water level xi.

    The continuous part is f((xi - g)^-1) / (xi - g)^2 on the grid, plus a
    point mass F(1/xi) at zero power. Grid points must lie in (0, xi); the
    allocated power never reaches xi.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid >= xi):
        raise ValueError("power grid must lie strictly inside (0, xi)")
    if isinstance(density, PointMassDensity):
        atom0 = 0.0
        atoms = []
        for v, w in zip(density.values, density.weights):
            if v <= 0 or v < 1.0 / xi or np.isclose(v, 1.0 / xi):
                atom0 += w
            else:
                atoms.append((xi - 1.0 / v, w))
        return PowerDensity(xi, float(atom0), grid, np.zeros_like(grid),
                            tuple(atoms), density)
    atom0 = float(density.cdf(1.0 / xi))
    lam = 1.0 / (xi - grid)
    pdf = density.pdf(lam) / (xi - grid) ** 2
    return PowerDensity(xi, atom0, grid, pdf, (), density)


def peak_limited_rate(density: EigDensity, budget: float, peak: float,
                      m: int | None = None) -> tuple[float, float]:
    """Rate after truncating the space-time allocation at a per-mode peak power.

    Both the power and rate integrals run over lam in [1/xi, 1/(xi - peak)];
    eigenvalues that would draw more than ``peak`` are dropped. If the budget
    cannot be spent under the cap, raises :class:`InfeasibleError`.
    """
    if peak <= 0:
        raise ValueError("peak power must be positive")
    m = density.m if m is None else m
    xi_unc = st_water_level(density, budget, m)
    if peak >= xi_unc:
        return xi_unc, st_capacity(density, xi_unc, m)
    target = budget / m

    def truncated_power(xi):
        full = _avg_power(density, xi)
        if xi <= peak:
            return full
        upper = 1.0 / (xi - peak)
        tail = density.trunc_moment(lambda lam: xi - 1.0 / lam, upper)
        return full - tail

    # Beyond xi_unc the truncated power is not monotone (the spendable window
    # both rises with xi and loses its top). The recovery hump can be very
    # narrow when the cap barely binds, so the bracket is expanded on a fine
    # geometric ladder of relative offsets and the smallest root is taken.
    p_lo = truncated_power(xi_unc)
    if p_lo >= target - 1e-15 * target:
        xi = xi_unc
    else:
        xi = None
        for delta in np.geomspace(1e-9, 1e4, 80):
            hi = xi_unc * (1.0 + delta)
            if truncated_power(hi) >= target:
                xi = scipy.optimize.brentq(lambda x: truncated_power(x) - target,
                                           xi_unc, hi, xtol=1e-13, maxiter=200)
                break
        if xi is None:
            raise InfeasibleError(
                f"budget {budget} unreachable with peak power {peak}")
    upper = 1.0 / (xi - peak) if xi > peak else np.inf
    rate_full = density.trunc_moment(lambda lam: np.log(xi * lam), 1.0 / xi)
    rate_tail = 0.0
    if np.isfinite(upper):
        rate_tail = density.trunc_moment(lambda lam: np.log(xi * lam), upper)
    return float(xi), float(m * (rate_full - rate_tail))
