"""Observability constants for the 1-D wave equation with sine modes.

Solutions of w_tt - w_xx + a w = 0 on (0, 1) with Dirichlet ends are
expanded in the orthonormal basis e_k(x) = sqrt(2) sin(k pi x); each
mode evolves exactly as cos(omega_k t), sin(omega_k t) with
omega_k = sqrt((k pi)^2 + a).  Initial data (w(0), w_t(0)) is encoded
in energy coordinates c = (alpha, beta) with alpha_k the position
coefficient and beta_k the velocity coefficient divided by omega_k, so
the squared L^2 x H^-1 energy norm is exactly |c|^2 (the H^-1 norm
taken spectrally through the same operator).

Observing the solution on a subinterval (x_lo, x_hi) over a horizon T
gives the quadratic form c^T Gram c = int_0^T int_obs w^2 dx dt; its
smallest eigenvalue lambda_min controls the best constant
C = 1/sqrt(lambda_min) in  |initial data|_energy <= C |w|_{L^2(obs x (0,T))}.
A sweep over mode counts decides whether C is bounded (observable) or
grows; dropping the worst-observed eigendirections gives the constants
on finite-codimension complements.
"""

import numpy as np

from .diagnostics import (EstimateReport, SweepReport, _HEURISTIC_NOTE,
                          _sweep_verdict)
from .spaces import RANK_RTOL

__all__ = [
    "WaveModel",
    "mode_overlap_matrix",
    "observation_gramian",
    "wave_observability_constant",
    "wave_sweep",
]


class WaveModel:
    """Sine-mode truncation of the 1-D Dirichlet wave equation.

    Parameters
    ----------
    modes : int
        Number of retained modes M.
    interval : tuple of float
        Observation subinterval (x_lo, x_hi) inside (0, 1).
    T : float
        Observation horizon.
    a : float
        Constant potential; must satisfy pi^2 + a > 0 so every mode
        frequency stays real.
    quad_step : float or None
        Time quadrature step; None picks 1/20 of the shortest mode
        period (twice the resolution the accuracy check requires).
    """

    def __init__(self, modes, interval=(0.4, 0.6), T=3.0, a=0.0,
                 quad_step=None, name="wave"):
        modes = int(modes)
        if modes < 1:
            raise ValueError("need at least one mode")
        lo, hi = float(interval[0]), float(interval[1])
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("observation interval must satisfy "
                             "0 <= lo < hi <= 1")
        if not (T > 0 and np.isfinite(T)):
            raise ValueError("horizon T must be positive and finite")
        mu = (np.arange(1, modes + 1) * np.pi) ** 2 + float(a)
        if mu[0] <= 0.0:
            raise ValueError("potential a = %g drives the lowest mode "
                             "frequency to zero or below" % a)
        self.modes = modes
        self.interval = (lo, hi)
        self.T = float(T)
        self.a = float(a)
        self.omega = np.sqrt(mu)
        self.shortest_period = 2.0 * np.pi / self.omega[-1]
        if quad_step is None:
            quad_step = self.shortest_period / 20.0
        quad_step = float(quad_step)
        if not (quad_step > 0 and np.isfinite(quad_step)):
            raise ValueError("quad_step must be positive and finite")
        self.quad_step = quad_step
        self.name = name

    def points_per_period(self):
        return self.shortest_period / self.quad_step

    def time_grid(self):
        """Uniform quadrature nodes covering [0, T]."""
        count = max(2, int(np.ceil(self.T / self.quad_step)) + 1)
        return np.linspace(0.0, self.T, count)

    def __repr__(self):
        return ("WaveModel(modes=%d, interval=(%g, %g), T=%g, a=%g)"
                % ((self.modes,) + self.interval + (self.T, self.a)))


def mode_overlap_matrix(model):
    """Overlaps S_kl = int_obs e_k e_l dx of the sine basis, closed form."""
    lo, hi = model.interval
    k = np.arange(1, model.modes + 1, dtype=float)
    diff = np.subtract.outer(k, k)
    summ = np.add.outer(k, k)

    def primitive_cos(n, x):
        # int cos(n pi x) dx, valid for n != 0
        return np.sin(n * np.pi * x) / (n * np.pi)

    S = np.empty((model.modes, model.modes))
    off = diff != 0
    S[off] = (primitive_cos(diff[off], hi) - primitive_cos(diff[off], lo)
              - primitive_cos(summ[off], hi) + primitive_cos(summ[off], lo))
    two_k = 2.0 * k
    diag = ((hi - lo)
            - (np.sin(two_k * np.pi * hi)
               - np.sin(two_k * np.pi * lo)) / (two_k * np.pi))
    S[~off] = 0.0
    S[np.arange(model.modes), np.arange(model.modes)] = diag
    return S


def observation_gramian(model):
    """Gramian of c -> w restricted to the observation patch and horizon.

    Entries are int_0^T int_obs w_k w_l dx dt for the 2M basis solutions
    (cosine and sine time factors per mode); assembled as spatial
    overlaps times trapezoidal time quadratures of the oscillation
    products.  Symmetric positive semidefinite by construction.
    """
    t = model.time_grid()
    w = np.full(t.size, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    phase = np.outer(t, model.omega)
    cos, sin = np.cos(phase), np.sin(phase)
    wc = w[:, None] * cos
    Icc = wc.T @ cos
    Ics = wc.T @ sin
    Iss = (w[:, None] * sin).T @ sin
    S = mode_overlap_matrix(model)
    G = np.block([[S * Icc, S * Ics],
                  [S * Ics.T, S * Iss]])
    return 0.5 * (G + G.T)


def wave_observability_constant(model, complement=0):
    """Best constant C with |initial data|_energy <= C |observed w|.

    Diagonalizes the observation Gramian and returns
    C = 1/sqrt(lambda_min); the report's sigma profile holds the square
    roots of the eigenvalues (the singular values of the observation
    map), the extras hold the worst-observed eigenvector and the
    constants obtained after removing the worst j <= complement
    eigendirections -- the finite-codimension fallback when the full
    estimate degenerates.

    Raises if the model's quadrature step resolves the fastest mode
    with fewer than 10 points per period.
    """
    complement = int(complement)
    if complement < 0 or complement >= 2 * model.modes:
        raise ValueError("complement must lie in [0, 2*modes)")
    if model.points_per_period() < 10.0 - 1e-12:
        raise ValueError(
            "quadrature step %.3e is too coarse for mode frequency %.3e: "
            "need at least 10 points per shortest period"
            % (model.quad_step, model.omega[-1]))
    G = observation_gramian(model)
    eigvals, eigvecs = np.linalg.eigh(G)
    eigvals = np.clip(eigvals, 0.0, None)
    sig = np.sqrt(eigvals)[::-1]
    smax = sig[0]
    kernel = int(np.sum(sig <= RANK_RTOL * smax)) if smax > 0 else sig.size
    with np.errstate(divide="ignore"):
        comp = 1.0 / np.sqrt(eigvals[:complement + 1])
    constant = comp[0]
    note = ""
    if kernel > 0:
        constant = np.inf
        note = ("observation Gramian is numerically rank deficient; "
                "only the complement constants are meaningful")
    return EstimateReport(
        constant=constant,
        kernel_dim=kernel,
        sigma_profile=sig,
        verdict="inconclusive",
        note=note,
        extras={"eigenvalues": eigvals,
                "worst_mode": eigvecs[:, 0],
                "complement_constants": comp,
                "quad_step": model.quad_step,
                "points_per_period": model.points_per_period(),
                "interval": model.interval,
                "T": model.T})


def wave_sweep(mode_counts, interval=(0.4, 0.6), T=3.0, a=0.0,
               quad_step=None, growth_factor=2.0):
    """Observability constants over increasing mode counts plus verdict.

    Parameters
    ----------
    mode_counts : sequence of int
        Strictly increasing, at least 3 entries.
    interval, T, a, quad_step
        Forwarded to WaveModel (quad_step None adapts per mode count).

    Returns
    -------
    SweepReport
        Levels keyed by the coordinate dimension 2M; "bounded" when the
        constants stay within growth_factor overall, "growing" when
        they climb at least geometrically with the mode count.
    """
    mode_counts = [int(M) for M in mode_counts]
    if len(mode_counts) < 3:
        raise ValueError("growth verdict needs at least 3 mode counts")
    if any(M2 <= M1 for M1, M2 in zip(mode_counts, mode_counts[1:])):
        raise ValueError("mode counts must be strictly increasing")
    reports = []
    for M in mode_counts:
        model = WaveModel(M, interval=interval, T=T, a=a,
                          quad_step=quad_step)
        reports.append((2 * M, wave_observability_constant(model)))
    ns = np.array([n for n, _ in reports], dtype=float)
    consts = np.array([rep.constant for _, rep in reports])
    kdims = np.array([rep.kernel_dim for _, rep in reports], dtype=float)
    verdict = _sweep_verdict(ns, consts, kdims, growth_factor)
    swept = SweepReport(reports, verdict)
    for _, rep in reports:
        rep.verdict = verdict
        rep.note = rep.note or _HEURISTIC_NOTE
    return swept
