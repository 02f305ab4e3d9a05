"""Channel-law descriptions, exact samplers, and eigenvalue densities.

A :class:`ChannelLaw` describes the distribution of the r x t gain matrix H.
Supported families: deterministic point mass, matrix Gaussian with a general
rt x rt covariance of the column-stacked vector, Kronecker-correlated Gaussian
(H = M + R^{1/2} G T^{1/2}), a mean/noise interpolation H = k*M0 + (1-k)*G*S^{1/2},
and finite mixtures of fixed matrices.

An :class:`EigDensity` is the unordered eigenvalue density of H H^H (equally,
the marginal law of one randomly chosen eigenvalue). Three concrete kinds:
the closed-form Laguerre-kernel density of a complex Wishart matrix, an
empirical pool of sampled eigenvalues, and discrete point masses. All three
answer pdf/cdf and truncated-moment queries, which is all the water-filling
solvers need.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.special

from .linalg import as_complex_matrix, as_hermitian, chol_upper, psd_sqrt

__all__ = [
    "ChannelLaw",
    "PointMass",
    "MatrixGaussian",
    "KroneckerGaussian",
    "Interpolated",
    "FiniteMixture",
    "sample",
    "sample_batch",
    "expected_gram",
    "EigDensity",
    "WishartDensity",
    "EmpiricalDensity",
    "PointMassDensity",
    "wishart_density",
    "empirical_density",
    "gram_eigs",
    "onoff_density",
    "law_from_json",
    "law_to_json",
]


# ---------------------------------------------------------------------------
# channel laws
# ---------------------------------------------------------------------------

class ChannelLaw:
    """Base class for distributions of the channel matrix H (r x t)."""

    @property
    def shape(self) -> tuple[int, int]:
        raise NotImplementedError

    @property
    def rx(self) -> int:
        return self.shape[0]

    @property
    def tx(self) -> int:
        return self.shape[1]


@dataclass(frozen=True)
class PointMass(ChannelLaw):
    """Deterministic channel: every draw returns the same matrix."""

    h0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h0", as_complex_matrix(self.h0))

    @property
    def shape(self):
        return self.h0.shape


@dataclass(frozen=True)
class MatrixGaussian(ChannelLaw):
    """Gaussian H with mean ``mean`` and rt x rt covariance ``cov`` of vec(H).

    ``vec`` stacks the columns of H; entry (c*r + i) of the vector is H[i, c].
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", as_complex_matrix(self.mean))
        object.__setattr__(self, "cov", as_hermitian(self.cov))
        r, t = self.mean.shape
        if self.cov.shape != (r * t, r * t):
            raise ValueError("covariance must be rt x rt for an r x t mean")

    @property
    def shape(self):
        return self.mean.shape


@dataclass(frozen=True)
class KroneckerGaussian(ChannelLaw):
    """Separable correlation: H = mean + R^{1/2} G T^{1/2}, G iid CN(0,1)."""

    mean: np.ndarray
    rx_corr: np.ndarray
    tx_corr: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mean", as_complex_matrix(self.mean))
        object.__setattr__(self, "rx_corr", as_hermitian(self.rx_corr))
        object.__setattr__(self, "tx_corr", as_hermitian(self.tx_corr))
        r, t = self.mean.shape
        if self.rx_corr.shape != (r, r) or self.tx_corr.shape != (t, t):
            raise ValueError("correlation shapes must match the mean")
        if self.normalized:
            # Normalization convention used by the beamforming tests.
            if abs(np.trace(self.rx_corr).real - r) > 1e-9 * r:
                raise ValueError("normalized law requires tr(R) = r")
            if abs(np.trace(self.tx_corr).real - t) > 1e-9 * t:
                raise ValueError("normalized law requires tr(T) = t")

    @property
    def shape(self):
        return self.mean.shape


@dataclass(frozen=True)
class Interpolated(ChannelLaw):
    """H = kappa * M0 + (1 - kappa) * X with X = G Sigma^{1/2}, G iid CN(0,1).

    At kappa = 1 the channel is the deterministic M0; at kappa = 0 it is
    zero-mean with transmit-side covariance Sigma.
    """

    kappa: float
    m0: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        object.__setattr__(self, "m0", as_complex_matrix(self.m0))
        object.__setattr__(self, "noise_cov", as_hermitian(self.noise_cov))
        if self.noise_cov.shape[0] != self.m0.shape[1]:
            raise ValueError("noise covariance must be t x t")

    @property
    def shape(self):
        return self.m0.shape


@dataclass(frozen=True)
class FiniteMixture(ChannelLaw):
    """Discrete law over a finite set of channel matrices."""

    weights: np.ndarray
    atoms: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        atoms = tuple(as_complex_matrix(a) for a in self.atoms)
        if w.ndim != 1 or len(atoms) != w.size:
            raise ValueError("need one weight per atom")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        if len({a.shape for a in atoms}) != 1:
            raise ValueError("all atoms must share one shape")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", atoms)

    @property
    def shape(self):
        return self.atoms[0].shape


def _circular_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    # Unit-variance circular complex entries: Re, Im iid N(0, 1/2).
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def sample_batch(law: ChannelLaw, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` iid channel matrices, returned as a (size, r, t) array."""
    r, t = law.shape
    if isinstance(law, PointMass):
        return np.broadcast_to(law.h0, (size, r, t)).copy()
    if isinstance(law, FiniteMixture):
        idx = rng.choice(len(law.atoms), size=size, p=law.weights)
        return np.stack([law.atoms[i] for i in idx])
    if isinstance(law, KroneckerGaussian):
        g = _circular_gaussian(rng, (size, r, t))
        rh = psd_sqrt(law.rx_corr)
        th = psd_sqrt(law.tx_corr)
        return law.mean + np.einsum("ij,sjk,kl->sil", rh, g, th)
    if isinstance(law, Interpolated):
        g = _circular_gaussian(rng, (size, r, t))
        sh = psd_sqrt(law.noise_cov)
        return law.kappa * law.m0 + (1.0 - law.kappa) * (g @ sh)
    if isinstance(law, MatrixGaussian):
        z = _circular_gaussian(rng, (size, r * t))
        l = chol_upper(law.cov).conj().T  # lower factor, cov = L L^H
        v = z @ l.T
        return law.mean + v.reshape(size, t, r).transpose(0, 2, 1)
    raise TypeError(f"unknown channel law {type(law).__name__}")


def sample(law: ChannelLaw, rng: np.random.Generator) -> np.ndarray:
    """Draw a single channel matrix."""
    return sample_batch(law, 1, rng)[0]


def expected_gram(law: ChannelLaw) -> np.ndarray:
    """The t x t matrix E[H^H H], in closed form for every law family.

    Note the transmit-side ordering: downstream covariance optimization acts
    on t x t objects, so the expected Gram matrix is taken as H^H H even where
    source formulas are written for H H^H (they coincide at t = r only).
    """
    if isinstance(law, PointMass):
        return law.h0.conj().T @ law.h0
    if isinstance(law, FiniteMixture):
        return sum(
            w * (a.conj().T @ a) for w, a in zip(law.weights, law.atoms)
        )
    if isinstance(law, KroneckerGaussian):
        m = law.mean
        return law.tx_corr * np.trace(law.rx_corr).real + m.conj().T @ m
    if isinstance(law, Interpolated):
        # M0 and the zero-mean part are independent; E[X^H X] = r * Sigma.
        r = law.rx
        k = law.kappa
        return k**2 * (law.m0.conj().T @ law.m0) + (1 - k) ** 2 * r * law.noise_cov
    if isinstance(law, MatrixGaussian):
        r, t = law.shape
        m = law.mean
        g = np.zeros((t, t), dtype=complex)
        # (E[X^H X])_{kl} = sum_i E[h_{lr+i} conj(h_{kr+i})] with h = vec(X),
        # i.e. the trace of the (l, k) block of the stacked-column covariance.
        for k in range(t):
            for l in range(t):
                g[k, l] = np.trace(law.cov[l * r:(l + 1) * r, k * r:(k + 1) * r])
        return g + m.conj().T @ m
    raise TypeError(f"unknown channel law {type(law).__name__}")


# ---------------------------------------------------------------------------
# eigenvalue densities
# ---------------------------------------------------------------------------

class EigDensity:
    """Unordered eigenvalue density of H H^H with pdf/cdf/moment queries."""

    #: number of eigenvalues per channel draw (min(r, t))
    m: int

    def pdf(self, lam):
        raise NotImplementedError

    def cdf(self, lam):
        raise NotImplementedError

    def trunc_moment(self, fn, a: float) -> float:
        """Integral of ``fn(lam) * f(lam)`` over ``lam > a``."""
        raise NotImplementedError

    def check_normalization(self) -> float:
        """Total probability mass (should be 1 within quadrature error)."""
        return self.trunc_moment(lambda lam: np.ones_like(lam), 0.0) + self.cdf(0.0)


@dataclass(frozen=True)
class WishartDensity(EigDensity):
    """Closed-form density of one eigenvalue of an m x m complex Wishart.

    The matrix is G G^H with G an m x n (m <= n) iid CN(0,1) matrix. The
    density is the standard Laguerre-kernel sum

        f(x) = (1/m) * sum_{k=0}^{m-1} k!/(k+d)! * [L_k^d(x)]^2 * x^d * e^{-x}

    with d = n - m. For (m, n) = (1, 1) this reduces to exp(-x) and for
    (2, 2) to (2 + (x - 2) x) / (2 exp(x)).
    """

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < self.m:
            raise ValueError("need 1 <= m <= n")

    def pdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        d = self.n - self.m
        out = np.zeros_like(lam)
        pos = lam >= 0
        x = lam[pos]
        acc = np.zeros_like(x)
        for k in range(self.m):
            coeff = math.factorial(k) / math.factorial(k + d)
            lk = scipy.special.eval_genlaguerre(k, d, x)
            acc += coeff * lk**2
        out[pos] = acc * x**d * np.exp(-x) / self.m
        return out if out.ndim else float(out)

    def cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        scalar = lam.ndim == 0
        vals = np.atleast_1d(lam)
        out = np.zeros_like(vals)
        for i, x in enumerate(vals):
            if x <= 0:
                out[i] = 0.0
            else:
                out[i], _ = scipy.integrate.quad(self.pdf, 0.0, x, limit=200)
        return float(out[0]) if scalar else out

    def trunc_moment(self, fn, a: float) -> float:
        val, _ = scipy.integrate.quad(
            lambda x: fn(x) * self.pdf(x), max(a, 0.0), np.inf, limit=300
        )
        return val

    def sample_eigs(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Eigenvalue draws of sampled Wishart matrices, shape (size, m)."""
        g = _circular_gaussian(rng, (size, self.m, self.n))
        gram = np.einsum("sik,sjk->sij", g, g.conj())
        return np.linalg.eigvalsh(gram)


@dataclass(frozen=True)
class EmpiricalDensity(EigDensity):
    """Empirical eigenvalue density backed by a pool of sampled draws.

    ``draws`` keeps the per-draw structure (pool, m); moment queries are
    answered exactly on the pool with no smoothing, so the water-level solver
    sees integrals that are monotone and consistent with the pool.
    """

    draws: np.ndarray  # (pool, m), rows are one channel draw's eigenvalues

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim != 2:
            raise ValueError("draws must be (pool, m)")
        object.__setattr__(self, "draws", d)
        flat = np.sort(d, axis=None)
        object.__setattr__(self, "_sorted", flat)

    @property
    def m(self) -> int:
        return self.draws.shape[1]

    @property
    def pool(self) -> int:
        return self.draws.shape[0]

    def pdf(self, lam):
        # Histogram estimate; only used for plotting-style queries, the
        # solvers go through trunc_moment which is exact on the pool.
        flat = self._sorted
        nbins = max(int(np.sqrt(flat.size)), 10)
        hist, edges = np.histogram(flat, bins=nbins, density=True)
        lam = np.asarray(lam, dtype=float)
        idx = np.clip(np.searchsorted(edges, lam, side="right") - 1, 0, nbins - 1)
        out = hist[idx]
        inside = (lam >= edges[0]) & (lam <= edges[-1])
        out = np.where(inside, out, 0.0)
        return out if out.ndim else float(out)

    def cdf(self, lam):
        flat = self._sorted
        pos = np.searchsorted(flat, np.asarray(lam, dtype=float), side="right")
        out = pos / flat.size
        return out if out.ndim else float(out)

    def trunc_moment(self, fn, a: float) -> float:
        flat = self._sorted
        sel = flat[flat > a]
        if sel.size == 0:
            return 0.0
        return float(np.sum(fn(sel)) / flat.size)


@dataclass(frozen=True)
class PointMassDensity(EigDensity):
    """Discrete eigenvalue density: weights on a finite set of values."""

    values: np.ndarray
    weights: np.ndarray
    m: int = 1
    #: whether the m per-draw eigenvalues are iid copies of this marginal
    independent_modes: bool = field(default=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be matching vectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        order = np.argsort(v)
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "weights", w[order])

    def pdf(self, lam):
        raise ValueError("a point-mass density has no continuous pdf")

    def cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.array(
            [self.weights[self.values <= x].sum() for x in np.atleast_1d(lam)]
        )
        return float(out[0]) if lam.ndim == 0 else out

    def trunc_moment(self, fn, a: float) -> float:
        sel = self.values > a
        if not np.any(sel):
            return 0.0
        return float(np.sum(self.weights[sel] * fn(self.values[sel])))


def wishart_density(m: int, n: int) -> WishartDensity:
    """Closed-form unordered eigenvalue density of an m x m complex Wishart
    with n degrees of freedom (unit-variance entries). Requires m <= n."""
    return WishartDensity(m, n)


def empirical_density(law: ChannelLaw, pool: int, rng: np.random.Generator) -> EigDensity:
    """Empirical eigenvalue density of H H^H from ``pool`` draws of the law.

    A point-mass law short-circuits to the exact discrete density of its
    fixed eigenvalues.
    """
    if pool < 1000:
        raise ValueError("pool must be at least 10^3")
    m = min(law.shape)
    if isinstance(law, PointMass):
        eigs = gram_eigs(law.h0[None, :, :])[0]
        vals, counts = np.unique(np.round(eigs, 12), return_counts=True)
        return PointMassDensity(vals, counts / m, m=m)
    if isinstance(law, FiniteMixture):
        vals = []
        wts = []
        for w, a in zip(law.weights, law.atoms):
            eigs = gram_eigs(a[None, :, :])[0]
            vals.extend(np.round(eigs, 12))
            wts.extend([w / m] * m)
        vals = np.asarray(vals)
        wts = np.asarray(wts)
        uniq = np.unique(vals)
        agg = np.array([wts[vals == u].sum() for u in uniq])
        return PointMassDensity(uniq, agg, m=m)
    h = sample_batch(law, pool, rng)
    return EmpiricalDensity(gram_eigs(h))


def gram_eigs(h: np.ndarray) -> np.ndarray:
    """Eigenvalues of H H^H per draw, via the smaller Gram matrix."""
    size, r, t = h.shape
    if r <= t:
        gram = np.einsum("sik,sjk->sij", h, h.conj())
    else:
        gram = np.einsum("ski,skj->sij", h.conj(), h)
    eigs = np.linalg.eigvalsh(gram)
    return np.maximum(eigs, 0.0)


def onoff_density(m: int, p: float) -> PointMassDensity:
    """Per-eigenvalue marginal of m parallel on-off channels.

    Each of the m channels is independently 'on' (gain 1) with probability p,
    so the marginal of one randomly chosen eigenvalue is Bernoulli. Rates
    computed from it follow the complex-channel convention used everywhere in
    this package (log, not the real-channel log/2).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    if p == 0.0:
        return PointMassDensity([0.0], [1.0], m=m, independent_modes=True)
    if p == 1.0:
        return PointMassDensity([1.0], [1.0], m=m, independent_modes=True)
    return PointMassDensity([0.0, 1.0], [1.0 - p, p], m=m, independent_modes=True)


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def _matrix_to_json(m: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrix JSON must be nested [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def law_to_json(law: ChannelLaw) -> dict:
    """Serialize a channel law to the JSON descriptor consumed by the CLI."""
    if isinstance(law, PointMass):
        return {"type": "point", "h": _matrix_to_json(law.h0)}
    if isinstance(law, MatrixGaussian):
        return {
            "type": "gaussian",
            "mean": _matrix_to_json(law.mean),
            "cov": _matrix_to_json(law.cov),
        }
    if isinstance(law, KroneckerGaussian):
        return {
            "type": "kronecker",
            "mean": _matrix_to_json(law.mean),
            "rx_corr": _matrix_to_json(law.rx_corr),
            "tx_corr": _matrix_to_json(law.tx_corr),
        }
    if isinstance(law, Interpolated):
        return {
            "type": "interp",
            "kappa": law.kappa,
            "m0": _matrix_to_json(law.m0),
            "noise_cov": _matrix_to_json(law.noise_cov),
        }
    if isinstance(law, FiniteMixture):
        return {
            "type": "mixture",
            "weights": [float(w) for w in law.weights],
            "atoms": [_matrix_to_json(a) for a in law.atoms],
        }
    raise TypeError(f"unknown channel law {type(law).__name__}")


def law_from_json(obj) -> ChannelLaw:
    """Parse a channel-law JSON descriptor (dict or JSON string)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("type")
    if kind == "point":
        return PointMass(_matrix_from_json(obj["h"]))
    if kind == "gaussian":
        return MatrixGaussian(_matrix_from_json(obj["mean"]), _matrix_from_json(obj["cov"]))
    if kind == "kronecker":
        return KroneckerGaussian(
            _matrix_from_json(obj["mean"]),
            _matrix_from_json(obj["rx_corr"]),
            _matrix_from_json(obj["tx_corr"]),
        )
    if kind == "interp":
        return Interpolated(
            float(obj["kappa"]),
            _matrix_from_json(obj["m0"]),
            _matrix_from_json(obj["noise_cov"]),
        )
    if kind == "mixture":
        return FiniteMixture(obj["weights"], [_matrix_from_json(a) for a in obj["atoms"]])
    raise ValueError(f"unknown channel descriptor type {kind!r}")
