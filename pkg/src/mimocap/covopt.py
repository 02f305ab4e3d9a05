"""Capacity-achieving transmit covariance under statistical channel knowledge.

Two optimizers:

* ``fixed_point_diag``: when a basis U diagonalizing the optimal covariance
  is known a priori (e.g. zero-mean Kronecker laws), the problem reduces to a
  power vector. The stationarity condition E[((I+S Q)^-1 S)_kk] = mu for
  active modes becomes a multiplicative fixed-point iteration on the powers.

* ``iterate_general``: no structural assumptions. The covariance is
  parameterized by its upper-triangular Cholesky factor T (Q = T^H T), which
  makes positive semidefiniteness implicit, and the factor is driven by the
  projected-gradient map T <- T (M + M^H) followed by rescaling to unit trace,
  where M = E[(I + S T^H T)^-1 S] and S = gamma * H^H H.

Both use common random numbers: within a convergence epoch the channel pool
is frozen, so the stochastic fixed point becomes a deterministic one per pool
and the stopping rule is well defined; the pool is refreshed only between
convergence checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelLaw, PointMass, sample_batch
from .linalg import chol_upper, ut_gram
from .montecarlo import (
    DEFAULT_SAMPLES_FINAL,
    DEFAULT_SAMPLES_INNER,
    McEstimate,
    SeededStream,
    as_stream,
    ergodic_mi,
)

__all__ = [
    "CovOptResult",
    "GradMatrix",
    "OptimizerOptions",
    "kkt_residual_diag",
    "fixed_point_diag",
    "powers_monotone",
    "monotonicity_check",
    "grad_matrix",
    "iterate_general",
    "kkt_residual_general",
]

#: power below which a mode is declared off in reported results
MODE_OFF = 1e-6
#: floor keeping the diagonal iteration's inverse well defined
MODE_FLOOR = 1e-12


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs shared by both optimizers; JSON-friendly."""

    tol: float = 1e-3
    max_iter: int = 500
    samples: int = DEFAULT_SAMPLES_INNER
    final_samples: int = DEFAULT_SAMPLES_FINAL
    damping: float = 0.5
    seed: int = 0
    inner_max: int = 80

    @classmethod
    def from_dict(cls, obj: dict) -> "OptimizerOptions":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(obj) - known
        if bad:
            raise ValueError(f"unknown optimizer options: {sorted(bad)}")
        return cls(**obj)


@dataclass(frozen=True)
class CovOptResult:
    """Optimal covariance with its factor, MI estimate and iteration traces.

    ``mi_trace`` and ``residual_trace`` are per-iteration values measured on
    the current sample pool; ``kkt_residual`` is the final fresh-pool check.
    """

    q: np.ndarray
    factor: np.ndarray
    mi: McEstimate
    kkt_residual: float
    mi_trace: np.ndarray
    residual_trace: np.ndarray
    iterations: int
    converged: bool
    qhat: np.ndarray | None = None
    basis: np.ndarray | None = None


@dataclass(frozen=True)
class GradMatrix:
    """Monte Carlo estimate of M = E[(I + S T^H T)^-1 S] with entrywise SE."""

    m: np.ndarray
    se: np.ndarray
    samples: int


def _s_pool(law: ChannelLaw, gamma: float, basis, samples: int,
            stream: SeededStream) -> np.ndarray:
    """Pool of S = gamma * (H U)^H (H U) draws, shape (pool, t, t)."""
    if isinstance(law, PointMass):
        h = law.h0[None, :, :]
    else:
        h = sample_batch(law, samples, stream.generator())
    if basis is not None:
        basis = np.asarray(basis, dtype=complex)
        if np.abs(basis.conj().T @ basis - np.eye(basis.shape[1])).max() > 1e-9:
            raise ValueError("diagonalizing basis must be unitary")
        h = h @ basis
    s = gamma * np.einsum("ski,skj->sij", h.conj(), h)
    return 0.5 * (s + np.conj(np.swapaxes(s, 1, 2)))


def _resolvent_gradient(s_pool: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-draw (I + S Q)^-1 S, shape (pool, t, t)."""
    t = q.shape[0]
    a = np.eye(t) + s_pool @ q
    return np.linalg.solve(a, s_pool)


def _pool_mi(s_pool: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Mean and SE of log det(I + S Q) over the pool."""
    t = q.shape[0]
    sign, logdet = np.linalg.slogdet(np.eye(t) + s_pool @ q)
    vals = logdet.real
    n = vals.size
    se = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(vals.mean()), se


# ---------------------------------------------------------------------------
# diagonalizable case
# ---------------------------------------------------------------------------

def _diag_condition(s_pool: np.ndarray, qvec: np.ndarray) -> np.ndarray:
    x = _resolvent_gradient(s_pool, np.diag(qvec).astype(complex))
    return np.mean(np.diagonal(x, axis1=1, axis2=2).real, axis=0)


def _diag_residual_from_d(d: np.ndarray, qvec: np.ndarray) -> float:
    active = qvec > MODE_OFF
    if not np.any(active):
        raise ValueError("no active modes")
    mu = d[active].mean()
    on = np.abs(d[active] - mu).max() / mu
    off = 0.0
    if np.any(~active):
        off = max(0.0, (d[~active] - mu).max()) / mu
    return float(on + off)


def kkt_residual_diag(qvec, law: ChannelLaw, gamma: float, basis,
                      samples: int = DEFAULT_SAMPLES_INNER,
                      rng: SeededStream | int = 0) -> float:
    """Violation of the diagonal stationarity conditions for powers ``qvec``.

    With d_k = E[((I + S Qhat)^-1 S)_kk], active modes must share a common
    value mu and inactive modes must sit below it. The residual is the
    worst relative deviation of active d_k from their mean plus the worst
    relative overshoot of inactive d_k.
    """
    qvec = np.asarray(qvec, dtype=float)
    if np.any(qvec < 0) or abs(qvec.sum() - 1.0) > 1e-9:
        raise ValueError("powers must be non-negative and sum to 1")
    pool = _s_pool(law, gamma, basis, samples, as_stream(rng))
    return _diag_residual_from_d(_diag_condition(pool, qvec), qvec)


def fixed_point_diag(law: ChannelLaw, gamma: float, basis=None,
                     opts: OptimizerOptions | dict | None = None) -> CovOptResult:
    """Optimal power allocation over a known basis via fixed-point iteration.

    Starting from uniform powers, applies q_k <- nu * q_k * d_k(q) (the
    trace-normalized form of the resolvent fixed point; the iteration needs
    strictly positive powers, so they are floored at 1e-12 and only declared
    zero in the output). Convergence is declared when the stationarity
    residual measured on a fresh pool drops below ``tol``.
    """
    opts = _as_opts(opts)
    t = law.tx
    basis = np.eye(t) if basis is None else np.asarray(basis, dtype=complex)
    stream = as_stream(opts.seed)
    qvec = np.full(t, 1.0 / t)
    trace = []
    res_trace = []
    iters = 0
    converged = False
    epoch = 0
    residual = np.inf
    while iters < opts.max_iter and not converged:
        pool = _s_pool(law, gamma, basis, opts.samples, stream.child(2 * epoch))
        for _ in range(opts.inner_max):
            if iters >= opts.max_iter:
                break
            d = _diag_condition(pool, qvec)
            res_trace.append(_diag_residual_from_d(d, qvec))
            step = qvec * d
            step /= step.sum()
            new = (1.0 - opts.damping) * qvec + opts.damping * step \
                if opts.damping < 1.0 else step
            new = np.maximum(new, MODE_FLOOR)
            new /= new.sum()
            delta = np.abs(new - qvec).max()
            qvec = new
            trace.append(_pool_mi(pool, np.diag(qvec).astype(complex))[0])
            iters += 1
            if delta < opts.tol * 1e-2:
                break
        check = _s_pool(law, gamma, basis, opts.samples, stream.child(2 * epoch + 1))
        residual = _diag_residual_from_d(_diag_condition(check, qvec), qvec)
        if residual <= opts.tol:
            converged = True
        epoch += 1

    qout = _declare_off(qvec, law, gamma, basis, opts, stream)
    q = (basis * qout) @ basis.conj().T
    q = 0.5 * (q + q.conj().T)
    mi = ergodic_mi(q, law, gamma, opts.final_samples, stream.child(999_983))
    return CovOptResult(
        q=q, factor=chol_upper(q), mi=mi, kkt_residual=float(residual),
        mi_trace=np.asarray(trace), residual_trace=np.asarray(res_trace),
        iterations=iters, converged=converged, qhat=qout, basis=basis)


def _declare_off(qvec, law, gamma, basis, opts, stream) -> np.ndarray:
    """Zero out powers below threshold when the off-mode inequality holds."""
    out = qvec.copy()
    small = out < MODE_OFF
    if np.any(small):
        pool = _s_pool(law, gamma, basis, opts.samples, stream.child(424_243))
        d = _diag_condition(pool, out)
        mu = d[~small].mean() if np.any(~small) else d.max()
        ok = small & (d <= mu * (1 + opts.tol))
        out[ok] = 0.0
        out /= out.sum()
    return out


def powers_monotone(gammas, power_vectors, tol: float = 0.01) -> bool:
    """True iff un-normalized powers gamma*q_k never decrease along the grid.

    ``tol`` is relative to the larger budget of each consecutive pair.
    """
    gammas = np.asarray(gammas, dtype=float)
    pv = np.asarray(power_vectors, dtype=float)
    for a in range(len(gammas) - 1):
        lo = gammas[a] * pv[a]
        hi = gammas[a + 1] * pv[a + 1]
        if np.any(hi < lo - tol * gammas[a + 1]):
            return False
    return True


def monotonicity_check(law: ChannelLaw, basis, gamma_grid,
                       opts: OptimizerOptions | dict | None = None) -> bool:
    """Check that optimal per-mode powers are non-decreasing in the SNR."""
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    if np.any(np.diff(gamma_grid) <= 0):
        raise ValueError("gamma grid must be ascending")
    qs = [fixed_point_diag(law, g, basis, opts).qhat for g in gamma_grid]
    return powers_monotone(gamma_grid, qs)


# ---------------------------------------------------------------------------
# general case (Cholesky factor)
# ---------------------------------------------------------------------------

def grad_matrix(tfac, law: ChannelLaw, gamma: float,
                samples: int = DEFAULT_SAMPLES_INNER,
                rng: SeededStream | int = 0) -> GradMatrix:
    """Monte Carlo estimate of M = E[(I + S T^H T)^-1 S], S = gamma H^H H."""
    tfac = np.asarray(tfac, dtype=complex)
    q = ut_gram(tfac)
    pool = _s_pool(law, gamma, None, samples, as_stream(rng))
    vals = _resolvent_gradient(pool, q)
    mean = vals.mean(axis=0)
    n = vals.shape[0]
    if n > 1:
        se = np.sqrt(vals.real.var(axis=0, ddof=1) + vals.imag.var(axis=0, ddof=1)) / np.sqrt(n)
    else:
        se = np.zeros(mean.shape)
    return GradMatrix(mean, se, n)


def _phase_fix_rows(t: np.ndarray) -> np.ndarray:
    """Left-multiply by a diagonal unitary so the diagonal is real >= 0.

    This is a pure gauge change: (P T)^H (P T) = T^H T, so the covariance is
    untouched while the factor regains Cholesky normal form.
    """
    d = np.diag(t).copy()
    phase = np.where(np.abs(d) > 0, d / np.abs(np.where(np.abs(d) > 0, d, 1)), 1.0)
    out = (t.T * np.conj(phase)).T
    # The rotation leaves ~1 ulp of imaginary residue on the diagonal.
    np.fill_diagonal(out, np.abs(np.diag(out)))
    return out


def _normalize_ut(t: np.ndarray) -> np.ndarray:
    t = np.triu(t)
    scale = np.sqrt(np.sum(np.abs(t) ** 2))
    if scale == 0:
        raise FloatingPointError("triangular factor collapsed to zero")
    return t / scale


def _general_residual(m: np.ndarray, tfac: np.ndarray) -> float:
    """Stationarity residual |G - 2 mu T| over the upper triangle.

    G = T (M + M^H). The multiplier mu is fit by least squares over entries
    with |T_ij| > 1e-8 since the source conditions leave it implicit. Zero
    diagonal entries contribute their positive overshoot (G_ii)+ instead of
    an absolute deviation: the off-mode condition is one-sided (reading the
    stated strict negativity as 'at most the multiplier term').
    """
    g = tfac @ (m + m.conj().T)
    t = tfac.shape[0]
    iu, ju = np.triu_indices(t)
    gv = g[iu, ju]
    tv = tfac[iu, ju]
    act = np.abs(tv) > 1e-8
    denom = 2.0 * np.sum(np.abs(tv[act]) ** 2)
    mu = float(np.real(np.vdot(tv[act], gv[act])) / denom) if denom > 0 else 0.0
    zero_diag = (iu == ju) & ~act
    keep = ~zero_diag
    term1 = np.abs(gv[keep] - 2.0 * mu * tv[keep]).max() if np.any(keep) else 0.0
    term2 = 0.0
    if np.any(zero_diag):
        term2 = max(0.0, np.real(gv[zero_diag]).max())
    return float(term1 + term2)


def kkt_residual_general(tfac, law: ChannelLaw, gamma: float,
                         samples: int = DEFAULT_SAMPLES_INNER,
                         rng: SeededStream | int = 0) -> float:
    """Stationarity residual of an upper-triangular factor with tr(T^H T)=1."""
    tfac = np.asarray(tfac, dtype=complex)
    if abs(np.sum(np.abs(np.triu(tfac)) ** 2) - 1.0) > 1e-8:
        raise ValueError("factor must satisfy tr(T^H T) = 1")
    gm = grad_matrix(tfac, law, gamma, samples, rng)
    return _general_residual(gm.m, np.triu(tfac))


def iterate_general(law: ChannelLaw, gamma: float,
                    opts: OptimizerOptions | dict | None = None,
                    init=None) -> CovOptResult:
    """Iterative power allocation over the Cholesky factor (no basis needed).

    Each step forms M on the current pool, updates T <- T (M + M^H), zeroes
    the strict lower triangle, restores the real-diagonal gauge and rescales
    to unit trace. The update is damped (convex combination with the previous
    factor); the damping is halved whenever the pool MI drops by more than
    twice its standard error. Non-convergence returns the best-MI iterate,
    flagged.
    """
    opts = _as_opts(opts)
    t = law.tx
    tfac = _normalize_ut(np.eye(t, dtype=complex) if init is None
                         else np.asarray(init, dtype=complex))
    stream = as_stream(opts.seed)
    alpha = opts.damping
    trace = []
    res_trace = []
    iters = 0
    converged = False
    epoch = 0
    residual = np.inf
    best = (-np.inf, tfac)
    while iters < opts.max_iter and not converged:
        pool = _s_pool(law, gamma, None, opts.samples, stream.child(2 * epoch))
        mi_prev, _ = _pool_mi(pool, ut_gram(tfac))
        flat = 0
        for _ in range(opts.inner_max):
            if iters >= opts.max_iter:
                break
            m = np.mean(_resolvent_gradient(pool, ut_gram(tfac)), axis=0)
            res_trace.append(_general_residual(m, tfac))
            step = _normalize_ut(_phase_fix_rows(np.triu(tfac @ (m + m.conj().T))))
            cand = _normalize_ut(_phase_fix_rows((1 - alpha) * tfac + alpha * step))
            mi_new, se_new = _pool_mi(pool, ut_gram(cand))
            iters += 1
            if mi_new < mi_prev - 2.0 * max(se_new, 1e-12):
                alpha = max(alpha / 2.0, 0.02)
                trace.append(mi_prev)
                continue
            tfac = cand
            trace.append(mi_new)
            if mi_new > best[0]:
                best = (mi_new, tfac)
            if abs(mi_new - mi_prev) < opts.tol / 10.0 * max(abs(mi_new), 1.0):
                flat += 1
            else:
                flat = 0
            mi_prev = mi_new
            if flat >= 5:
                break
        check = _s_pool(law, gamma, None, opts.samples, stream.child(2 * epoch + 1))
        mcheck = np.mean(_resolvent_gradient(check, ut_gram(tfac)), axis=0)
        residual = _general_residual(mcheck, tfac)
        if residual <= opts.tol or flat >= 5:
            converged = True
        epoch += 1

    if not converged and best[0] > -np.inf:
        tfac = best[1]
    if not np.all(np.isfinite(tfac)):
        raise FloatingPointError("factor update produced non-finite entries")
    q = ut_gram(tfac)
    mi = ergodic_mi(q, law, gamma, opts.final_samples, stream.child(999_983))
    return CovOptResult(
        q=q, factor=tfac, mi=mi, kkt_residual=float(residual),
        mi_trace=np.asarray(trace), residual_trace=np.asarray(res_trace),
        iterations=iters, converged=converged)


def _as_opts(opts) -> OptimizerOptions:
    if opts is None:
        return OptimizerOptions()
    if isinstance(opts, OptimizerOptions):
        return opts
    return OptimizerOptions.from_dict(dict(opts))
