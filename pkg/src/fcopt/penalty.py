"""Penalty-functional extraction of approximate multiplier pairs.

Given a smooth constrained minimization problem

    minimize f0(u)  subject to  f(u) in E,

with a reference local solution u_bar, the penalty

    Phi_eps(u) = sqrt( dist(f(u), E)^2 + ((f0(u) - f0(u_bar) + eps)^+)^2 )

has value eps at u_bar, so near-minimizers u_eps with Phi_eps(u_eps) <= eps
exist inside the ball of radius sqrt(eps) around u_bar.  At such a point the
normalized coefficient pair

    a_eps = (f0(u_eps) - f0(u_bar) + eps)^+ / Phi_eps(u_eps)
    b_eps = dist(f(u_eps), E) * psi_eps / Phi_eps(u_eps)

(with psi_eps a distance subgradient, in dual coordinates) satisfies
a_eps^2 + |b_eps|^2 = 1 and an approximate first-order inequality over
admissible variations.  Driving eps -> 0 along a schedule and taking the
final record yields a nonzero pair (z0, z) of Fritz John type; when z0 is
bounded away from 0 the pair rescales to a KKT multiplier z/z0.

Phi_eps itself is not differentiable, but Phi_eps^2 is C^1 (squared
distance to a convex set and squared positive part both are), so the inner
solver minimizes Phi_eps^2 by damped Newton / quasi-Newton descent and the
Ekeland-type inequalities are verified a posteriori on probe points.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .convex import WholeSpace, dist_subgradient, project, tangent_cone_sample
from .convex import VariationSample
from .spaces import Element, dual_norm, norm, pairing, LinearMap, singular_triplets

__all__ = [
    "ConstrainedProblem",
    "MultiplierPair",
    "TraceRecord",
    "PenaltyTrace",
    "PenaltyConfig",
    "DegeneratePenaltyError",
    "InnerConvergenceError",
    "InapplicableBranchError",
    "default_schedule",
    "penalty_value",
    "minimize_penalty",
    "multiplier_at",
    "extract_multiplier",
    "fritz_john_residual",
    "kkt_check",
    "enhanced_sequence_report",
]


class DegeneratePenaltyError(ValueError):
    """Raised when Phi_eps vanishes, i.e. a feasible point beats f0(u_bar) - eps."""


class InnerConvergenceError(RuntimeError):
    """Inner minimization failed; carries the best iterate found.

    Attributes
    ----------
    best : ndarray or None
        Coordinates of the best iterate seen before giving up.
    info : dict or None
        Partial diagnostic metadata for the failed run.
    """

    def __init__(self, message, best=None, info=None):
        super().__init__(message)
        self.best = best
        self.info = info


class InapplicableBranchError(ValueError):
    """Raised when the degenerate-branch report is requested but z = 0."""


def _coords(u):
    if isinstance(u, Element):
        return np.asarray(u.coords, dtype=float)
    return np.asarray(u, dtype=float)


class ConstrainedProblem:
    """Data of a smooth constrained problem: spaces, evaluators, target set.

    Parameters
    ----------
    V, X : SpaceDescriptor
        Control space (domain of the evaluators) and constraint space.
    f0, f0_grad : callable
        Objective u -> float and its gradient u -> (V.dim,) array.
    f, f_jac : callable
        Constraint map u -> (X.dim,) array and its Jacobian
        u -> (X.dim, V.dim) array.
    E : ConvexSet
        Target set in X.
    domain : ConvexSet or None
        Admissible set in V; None means the whole space.
    f0_hess : callable or None
        Objective Hessian u -> (V.dim, V.dim); enables Newton steps.
    f_hess_combo : callable or None
        (u, w) -> sum_i w_i * Hess f_i(u), the second-order term of the
        constraint map weighted by a dual vector w; 0 for affine maps.
    variation_sampler : callable or None
        (problem, u, count, seed) -> list of VariationSample; overrides the
        default linearized-direction sampler.
    feasible_sampler : callable or None
        (u_bar, count, seed) -> (count, V.dim) array of feasible points near
        u_bar, used to spot-check local optimality of the reference point.
    name : str
        Display name.
    """

    def __init__(self, V, X, f0, f0_grad, f, f_jac, E, domain=None,
                 f0_hess=None, f_hess_combo=None, variation_sampler=None,
                 feasible_sampler=None, name="problem"):
        self.V = V
        self.X = X
        self._f0 = f0
        self._f0_grad = f0_grad
        self._f = f
        self._f_jac = f_jac
        self.E = E
        self.domain = domain
        self.f0_hess = f0_hess
        self.f_hess_combo = f_hess_combo
        self.variation_sampler = variation_sampler
        self.feasible_sampler = feasible_sampler
        self.name = name

    def objective(self, u):
        """Evaluate f0 at u (Element or coordinate array)."""
        return float(self._f0(_coords(u)))

    def gradient(self, u):
        """Gradient of f0 at u as a (V.dim,) array."""
        return np.asarray(self._f0_grad(_coords(u)), dtype=float)

    def constraint(self, u):
        """Evaluate f at u as an (X.dim,) array."""
        return np.asarray(self._f(_coords(u)), dtype=float)

    def jacobian(self, u):
        """Jacobian of f at u as an (X.dim, V.dim) array."""
        return np.asarray(self._f_jac(_coords(u)), dtype=float)

    def jacobian_map(self, u):
        """Jacobian of f at u wrapped as a LinearMap from V to X."""
        return LinearMap(self.jacobian(u), domain=self.V, codomain=self.X)

    def jacobian_fd_error(self, u, h=1e-6):
        """Max relative error of the analytic Jacobian vs central differences."""
        u = _coords(u)
        jac = self.jacobian(u)
        fd = np.empty_like(jac)
        for j in range(self.V.dim):
            step = np.zeros(self.V.dim)
            step[j] = h
            fd[:, j] = (self.constraint(u + step) - self.constraint(u - step)) / (2.0 * h)
        scale = max(1.0, float(np.abs(jac).max()))
        return float(np.abs(fd - jac).max()) / scale

    def check_reference(self, u_bar, tol=1e-5, h=1e-6):
        """Raise ValueError if the Jacobian fails the difference check at u_bar."""
        err = self.jacobian_fd_error(u_bar, h=h)
        if err > tol:
            raise ValueError(
                "jacobian check failed at the reference point: "
                "relative error %.3e > %.1e" % (err, tol))
        return err

    def variations(self, u, count, seed=0):
        """Sample admissible variations (xi0, xi) of (f0, f) at u.

        Uses the plug-in sampler when provided; otherwise draws radial-cone
        directions v of the admissible set at u (unit ball when the whole
        space is admissible) and linearizes: xi0 = grad f0(u).v, xi = f'(u)v.
        """
        u = _coords(u)
        if self.variation_sampler is not None:
            return self.variation_sampler(self, u, count, seed)
        dom = self.domain if self.domain is not None else WholeSpace(self.V)
        dirs = tangent_cone_sample(dom, Element(u, self.V), count, seed=seed)
        g = self.gradient(u)
        jac = self.jacobian(u)
        out = []
        for d in dirs:
            v = d.coords
            out.append(VariationSample(float(g @ v), Element(jac @ v, self.X)))
        return out

    def __repr__(self):
        return "ConstrainedProblem(%r, V dim %d, X dim %d)" % (
            self.name, self.V.dim, self.X.dim)


class PenaltyConfig:
    """Tunable knobs of the penalty pipeline (all defaults are sensible).

    Parameters
    ----------
    inner_scale, inner_floor : float
        Inner stationarity tolerance on the dual norm of grad Phi_eps^2 is
        max(inner_floor, inner_scale * eps^2).
    max_iters : int
        Inner iteration cap per eps.
    ball_slack : float
        Allowed overshoot of |u_eps - u_bar| beyond sqrt(eps).
    ekeland_tol, ekeland_probes : float, int
        A-posteriori tolerance and probe count for the variational
        inequality Phi(u_eps) - Phi(u) <= sqrt(eps) d(u_eps, u).
    solution_slack, solution_samples : float, int
        Local-optimality spot check of u_bar over sampled feasible points.
    limit_tol : float
        Cauchy-gap threshold over the final trace records; larger gaps
        raise a non-convergence warning.
    z0_tol, z_tol : float
        Thresholds declaring z0 (resp. |z|) nonzero in the branch reports.
    mono_slack : float
        Slack for the monotone-decay checks of the tail report.
    tail_len : int
        Number of final records examined by enhanced_sequence_report.
    seed : int
        Base seed for all samplers (probes, variations).
    method : str
        "auto" (Newton when curvature callables exist, else L-BFGS),
        "newton", or "lbfgs".
    parallel, threads : bool, int or None
        Cold-start parallel schedule mode; threads defaults to the
        FCOPT_THREADS environment variable.
    verify_solution : bool
        Whether minimize_penalty spot-checks local optimality of u_bar.
    """

    def __init__(self, inner_scale=1e-2, inner_floor=1e-13, max_iters=200,
                 ball_slack=1e-6, ekeland_tol=1e-8, ekeland_probes=16,
                 solution_slack=1e-8, solution_samples=64, limit_tol=1e-2,
                 z0_tol=1e-6, z_tol=1e-6, mono_slack=1e-12, tail_len=5,
                 seed=0, method="auto", parallel=False, threads=None,
                 verify_solution=True):
        self.inner_scale = float(inner_scale)
        self.inner_floor = float(inner_floor)
        self.max_iters = int(max_iters)
        self.ball_slack = float(ball_slack)
        self.ekeland_tol = float(ekeland_tol)
        self.ekeland_probes = int(ekeland_probes)
        self.solution_slack = float(solution_slack)
        self.solution_samples = int(solution_samples)
        self.limit_tol = float(limit_tol)
        self.z0_tol = float(z0_tol)
        self.z_tol = float(z_tol)
        self.mono_slack = float(mono_slack)
        self.tail_len = int(tail_len)
        self.seed = int(seed)
        if method not in ("auto", "newton", "lbfgs"):
            raise ValueError("method must be auto, newton or lbfgs")
        self.method = method
        self.parallel = bool(parallel)
        self.threads = threads
        self.verify_solution = bool(verify_solution)


def default_schedule(eps0=0.1, steps=14):
    """Halving schedule eps0 * 2^-k, k = 0..steps-1."""
    if not 0.0 < eps0 < 1.0:
        raise ValueError("eps0 must lie in (0, 1)")
    if steps < 1:
        raise ValueError("need at least one step")
    return [eps0 * 2.0 ** (-k) for k in range(steps)]


class MultiplierPair:
    """Extracted pair (z0, z): z0 >= 0 real, z a dual vector on X.

    The pair is nonzero (z0 + |z| >= 1e-6) unless flagged degenerate.
    """

    def __init__(self, z0, z, cauchy_gap=0.0, converged=True):
        if z0 < 0:
            raise ValueError("z0 must be nonnegative")
        self.z0 = float(z0)
        self.z = z
        self.cauchy_gap = float(cauchy_gap)
        self.converged = bool(converged)
        self.degenerate = (self.z0 + self.z_norm()) < 1e-6

    def z_norm(self):
        """Dual norm |z| on the constraint space."""
        return dual_norm(self.z.space, self.z)

    def total_norm(self):
        """sqrt(z0^2 + |z|^2); 1 up to the Cauchy gap for extracted pairs."""
        return float(np.sqrt(self.z0 ** 2 + self.z_norm() ** 2))

    def __repr__(self):
        return "MultiplierPair(z0=%.6g, |z|=%.6g, gap=%.2g)" % (
            self.z0, self.z_norm(), self.cauchy_gap)


class TraceRecord:
    """One schedule step: eps, the near-minimizer, and its coefficient pair."""

    def __init__(self, eps, u_eps, phi, a, b, dist_val, f0_gap, inner_iters,
                 grad_norm=np.nan, ekeland_residual=np.nan):
        self.eps = float(eps)
        self.u_eps = u_eps
        self.phi = float(phi)
        self.a = float(a)
        self.b = b
        self.dist_val = float(dist_val)
        self.f0_gap = float(f0_gap)
        self.inner_iters = int(inner_iters)
        self.grad_norm = float(grad_norm)
        self.ekeland_residual = float(ekeland_residual)

    def b_norm(self):
        """Dual norm of the b coefficient."""
        return dual_norm(self.b.space, self.b)

    def __repr__(self):
        return "TraceRecord(eps=%.3g, a=%.4g, |b|=%.4g, dist=%.3g)" % (
            self.eps, self.a, self.b_norm(), self.dist_val)


class PenaltyTrace:
    """Ordered schedule records with strictly decreasing eps."""

    _COLUMNS = ("eps", "a", "b_norm", "dist", "gap", "phi", "inner_iters")

    def __init__(self):
        self.records = []

    def append(self, rec):
        if self.records and rec.eps >= self.records[-1].eps:
            raise ValueError("trace eps values must be strictly decreasing")
        self.records.append(rec)

    def column(self, name):
        """Array view of one column: eps, a, b_norm, dist, gap, phi, inner_iters."""
        if name == "eps":
            return np.array([r.eps for r in self.records])
        if name == "a":
            return np.array([r.a for r in self.records])
        if name == "b_norm":
            return np.array([r.b_norm() for r in self.records])
        if name == "dist":
            return np.array([r.dist_val for r in self.records])
        if name == "gap":
            return np.array([r.f0_gap for r in self.records])
        if name == "phi":
            return np.array([r.phi for r in self.records])
        if name == "inner_iters":
            return np.array([r.inner_iters for r in self.records])
        raise KeyError(name)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]

    def __iter__(self):
        return iter(self.records)

    def __repr__(self):
        return "PenaltyTrace(%d records)" % len(self.records)


def _phi_parts(p, u, f0_bar, eps):
    """Values entering Phi_eps at coordinates u: (phi2, dist, gap+, f, Pf)."""
    fx = p.constraint(u)
    pe = p.E._project(fx)
    diff = fx - pe
    d2 = max(float(diff @ p.X.apply_gram(diff)), 0.0)
    gap = p.objective(u) - f0_bar + eps
    gp = max(gap, 0.0)
    return d2 + gp * gp, np.sqrt(d2), gp, fx, pe


def penalty_value(p, u_bar, eps, u):
    """Phi_eps(u) = sqrt(dist(f(u), E)^2 + ((f0(u) - f0(u_bar) + eps)^+)^2).

    Raises DegeneratePenaltyError when the value is 0 (a feasible point
    improves f0(u_bar) by at least eps, contradicting local optimality),
    and ValueError when eps is outside (0, 1) or u leaves the domain.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    ucoords = _coords(u)
    if p.domain is not None and not p.domain.contains(Element(ucoords, p.V)):
        raise ValueError("penalty_value: point outside the admissible domain")
    phi2, _, _, _, _ = _phi_parts(p, ucoords, p.objective(u_bar), eps)
    val = float(np.sqrt(phi2))
    if val == 0.0:
        raise DegeneratePenaltyError(
            "penalty value vanished: found feasible u with "
            "f0(u) <= f0(u_bar) - eps; u_bar is not locally optimal at this eps")
    return val


def _grad_phi2(p, u, f0_bar, eps):
    phi2, dist, gp, fx, pe = _phi_parts(p, u, f0_bar, eps)
    jac = p.jacobian(u)
    g = 2.0 * (jac.T @ p.X.apply_gram(fx - pe))
    if gp > 0.0:
        g = g + 2.0 * gp * p.gradient(u)
    return phi2, g, (dist, gp, fx, pe, jac)


def _hess_phi2(p, u, aux):
    dist, gp, fx, pe, jac = aux
    gx_j = p.X.apply_gram(jac)
    h = 2.0 * (jac.T @ gx_j)
    if gp > 0.0:
        g0 = p.gradient(u)
        h = h + 2.0 * np.outer(g0, g0)
        if p.f0_hess is not None:
            h = h + 2.0 * gp * np.asarray(p.f0_hess(u), dtype=float)
    if p.f_hess_combo is not None:
        w = p.X.apply_gram(fx - pe)
        h = h + 2.0 * np.asarray(p.f_hess_combo(u, w), dtype=float)
    return h


def _newton_minimize(p, u0, f0_bar, eps, cfg, tol):
    u = u0.copy()
    nd = u.size
    mu = 0.0
    phi2, g, aux = _grad_phi2(p, u, f0_bar, eps)
    gnorm = dual_norm(p.V, Element(g, p.V))
    iters = 0
    while gnorm > tol and iters < cfg.max_iters:
        h = _hess_phi2(p, u, aux)
        step = None
        for _ in range(40):
            try:
                cand = np.linalg.solve(h + mu * np.eye(nd), -g)
            except np.linalg.LinAlgError:
                cand = None
            if cand is not None and float(g @ cand) < 0.0:
                step = cand
                break
            mu = max(10.0 * mu, 1e-12)
        if step is None:
            raise InnerConvergenceError(
                "could not produce a descent direction", best=u)
        slope = float(g @ step)
        t = 1.0
        moved = False
        for _ in range(60):
            cand = u + t * step
            cand_phi2 = _phi_parts(p, cand, f0_bar, eps)[0]
            if cand_phi2 <= phi2 + 1e-4 * t * slope:
                u = cand
                moved = True
                break
            t *= 0.5
        if not moved:
            mu = max(10.0 * mu, 1e-10)
        else:
            mu = mu * 0.25 if mu > 1e-14 else 0.0
        iters += 1
        phi2, g, aux = _grad_phi2(p, u, f0_bar, eps)
        gnorm = dual_norm(p.V, Element(g, p.V))
    if gnorm > tol:
        raise InnerConvergenceError(
            "no stationary point of Phi_eps^2 within %d iterations "
            "(grad %.3e > tol %.3e)" % (cfg.max_iters, gnorm, tol),
            best=u, info={"grad_norm": gnorm, "iters": iters})
    return u, iters, gnorm, phi2


def _lbfgs_minimize(p, u0, f0_bar, eps, cfg, tol):
    def fun(u):
        phi2, g, _ = _grad_phi2(p, u, f0_bar, eps)
        return phi2, g

    res = scipy_minimize(fun, u0, jac=True, method="L-BFGS-B",
                         options={"maxiter": cfg.max_iters, "ftol": 1e-18,
                                  "gtol": 0.1 * tol, "maxcor": 20})
    u = np.asarray(res.x, dtype=float)
    phi2, g, _ = _grad_phi2(p, u, f0_bar, eps)
    gnorm = dual_norm(p.V, Element(g, p.V))
    if gnorm > tol:
        raise InnerConvergenceError(
            "quasi-Newton inner solve left grad %.3e > tol %.3e" % (gnorm, tol),
            best=u, info={"iters": int(res.nit)})
    return u, int(res.nit), gnorm, phi2


def _ekeland_residual(p, u, f0_bar, eps, cfg):
    """Max over probes of Phi(u) - Phi(probe) - sqrt(eps) d(u, probe); <= 0 ideally."""
    rng = np.random.default_rng([cfg.seed, 1009, int(round(1.0 / eps))])
    se = np.sqrt(eps)
    phi_u = np.sqrt(_phi_parts(p, u, f0_bar, eps)[0])
    dirs = list(rng.standard_normal((cfg.ekeland_probes, u.size)))
    worst = -np.inf
    for d in dirs:
        dn = norm(p.V, Element(d, p.V))
        if dn <= 0.0:
            continue
        d = d / dn
        for t in (0.25 * se, 0.05 * se, 0.01 * se):
            probe = u + t * d
            phi_probe = np.sqrt(_phi_parts(p, probe, f0_bar, eps)[0])
            worst = max(worst, phi_u - phi_probe - se * t)
    return worst


def _verify_local_solution(p, ub, cfg):
    if p.feasible_sampler is None:
        return
    pts = np.atleast_2d(np.asarray(
        p.feasible_sampler(ub, cfg.solution_samples, cfg.seed), dtype=float))
    f0_bar = p.objective(ub)
    for q in pts:
        if p.objective(q) < f0_bar - cfg.solution_slack:
            raise ValueError(
                "reference point failed the local-optimality spot check: "
                "a sampled feasible neighbor improves f0 by more than %.1e"
                % cfg.solution_slack)


def minimize_penalty(p, u_bar, eps, cfg=None, warm_start=None,
                     return_info=False, verify=None):
    """Near-minimizer u_eps of Phi_eps with Phi_eps(u_eps) <= eps.

    Minimizes Phi_eps^2 (smooth) from u_bar, or from warm_start when given,
    by damped Newton (falling back to L-BFGS when no curvature callables
    are available), then verifies a posteriori that Phi_eps(u_eps) <= eps,
    that u_eps stays within sqrt(eps) + ball_slack of u_bar, and that the
    Ekeland-type inequality holds on probe points up to ekeland_tol.
    A warm start that ends above eps triggers one cold restart from u_bar.

    With return_info=True returns (element, info dict) where info carries
    phi, dist, gap_plus, inner_iters, grad_norm, ekeland_residual, ball.

    Raises InnerConvergenceError (carrying the best iterate) when the inner
    solver stalls or any a-posteriori check fails.
    """
    if cfg is None:
        cfg = PenaltyConfig()
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    ub = _coords(u_bar)
    f0_bar = p.objective(ub)
    if verify is None:
        verify = cfg.verify_solution
    if verify:
        _verify_local_solution(p, ub, cfg)

    tol = max(cfg.inner_floor, cfg.inner_scale * eps * eps)
    use_newton = cfg.method == "newton" or (
        cfg.method == "auto" and p.f0_hess is not None)
    solver = _newton_minimize if use_newton else _lbfgs_minimize

    start = ub if warm_start is None else _coords(warm_start)
    cold = warm_start is None
    while True:
        try:
            u, iters, gnorm, phi2 = solver(p, start, f0_bar, eps, cfg, tol)
            phi = float(np.sqrt(phi2))
            if phi > eps * (1.0 + 1e-9) + 1e-15:
                raise InnerConvergenceError(
                    "inner solve stalled at Phi = %.6e > eps = %.6e" % (phi, eps),
                    best=u)
        except InnerConvergenceError:
            if cold:
                raise
            start = ub
            cold = True
            continue
        break

    ball = norm(p.V, Element(u - ub, p.V))
    if ball > np.sqrt(eps) + cfg.ball_slack:
        raise InnerConvergenceError(
            "minimizer left the sqrt(eps) ball: |u_eps - u_bar| = %.3e" % ball,
            best=u)
    res = _ekeland_residual(p, u, f0_bar, eps, cfg)
    if res > cfg.ekeland_tol:
        raise InnerConvergenceError(
            "a-posteriori variational inequality violated by %.3e" % res,
            best=u)

    el = Element(u, p.V)
    if not return_info:
        return el
    _, dist, gp, _, _ = _phi_parts(p, u, f0_bar, eps)
    info = {"phi": phi, "dist": dist, "gap_plus": gp, "inner_iters": iters,
            "grad_norm": gnorm, "ekeland_residual": res, "ball": ball,
            "cold_start": cold, "eps": eps}
    return el, info


def multiplier_at(p, u_bar, eps, u_eps):
    """Normalized coefficient pair (a, b) at u_eps.

    a = (f0 gap)^+ / Phi_eps(u_eps), b = dist * psi / Phi_eps(u_eps) with
    psi the distance subgradient at f(u_eps) in dual coordinates; satisfies
    a^2 + |b|^2 = 1.  Raises DegeneratePenaltyError when Phi_eps(u_eps) = 0.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    u = _coords(u_eps)
    phi2, dist, gp, fx, _ = _phi_parts(p, u, p.objective(u_bar), eps)
    phi = float(np.sqrt(phi2))
    if phi == 0.0:
        raise DegeneratePenaltyError("Phi_eps(u_eps) = 0: pair undefined")
    a = gp / phi
    psi = dist_subgradient(p.E, Element(fx, p.X))
    b = Element((dist / phi) * psi.coords, p.X)
    return a, b


def _thread_count(cfg):
    if cfg.threads is not None:
        return int(cfg.threads)
    env = os.environ.get("FCOPT_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _cauchy_gap(trace):
    recs = trace.records[-3:]
    gap = 0.0
    for r0, r1 in zip(recs, recs[1:]):
        gap = max(gap, abs(r1.a - r0.a))
        gap = max(gap, dual_norm(r1.b.space,
                                 Element(r1.b.coords - r0.b.coords, r1.b.space)))
    return gap


def extract_multiplier(p, u_bar, schedule, cfg=None):
    """Run the schedule and return (MultiplierPair, PenaltyTrace).

    Sequentially minimizes Phi_eps along the strictly decreasing schedule,
    warm-starting each step from the previous near-minimizer (or cold in
    parallel mode), records (eps, u_eps, phi, a, b, dist, f0 gap, iteration
    count) per step, and reads the pair (z0, z) off the final record.  The
    Cauchy gap max(|a_k - a_{k-1}|, |b_k - b_{k-1}|) over the final three
    records is reported on the pair; a gap above cfg.limit_tol raises a
    non-convergence warning but still returns the result.
    """
    if cfg is None:
        cfg = PenaltyConfig()
    sched = [float(e) for e in schedule]
    if not sched:
        raise ValueError("schedule must be nonempty")
    if any(not 0.0 < e < 1.0 for e in sched):
        raise ValueError("schedule values must lie in (0, 1)")
    if any(e1 >= e0 for e0, e1 in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly decreasing")

    ub = _coords(u_bar)
    f0_bar = p.objective(ub)
    if cfg.verify_solution:
        _verify_local_solution(p, ub, cfg)

    results = []
    if cfg.parallel:
        def run(e):
            return minimize_penalty(p, ub, e, cfg, return_info=True,
                                    verify=False)
        with ThreadPoolExecutor(max_workers=_thread_count(cfg)) as pool:
            results = list(pool.map(run, sched))
    else:
        prev = None
        for e in sched:
            el, info = minimize_penalty(p, ub, e, cfg, warm_start=prev,
                                        return_info=True, verify=False)
            prev = el
            results.append((el, info))

    trace = PenaltyTrace()
    for e, (el, info) in zip(sched, results):
        a, b = multiplier_at(p, ub, e, el)
        trace.append(TraceRecord(
            eps=e, u_eps=el, phi=info["phi"], a=a, b=b,
            dist_val=info["dist"], f0_gap=p.objective(el) - f0_bar,
            inner_iters=info["inner_iters"], grad_norm=info["grad_norm"],
            ekeland_residual=info["ekeland_residual"]))

    last = trace[-1]
    gap = _cauchy_gap(trace)
    converged = gap <= cfg.limit_tol
    if not converged:
        warnings.warn(
            "multiplier sequence not Cauchy over the final records "
            "(gap %.3e > %.1e); returning the last pair anyway"
            % (gap, cfg.limit_tol), RuntimeWarning)
    pair = MultiplierPair(last.a, last.b.copy(), cauchy_gap=gap,
                          converged=converged)
    return pair, trace


def fritz_john_residual(p, u_bar, pair, variations):
    """min over variation samples of z0 * xi0 + <z, xi>.

    A residual >= -tol certifies the first-order (Fritz John type)
    inequality on the sample.  Raises ValueError on an empty sample list.
    """
    if not variations:
        raise ValueError("fritz_john_residual needs at least one variation")
    vals = [pair.z0 * s.xi0 + pairing(pair.z, s.xi) for s in variations]
    return float(min(vals))


def kkt_check(p, u_bar, pair, cfg=None):
    """Normality report {normal, z_tilde, surjectivity_sigma}.

    normal is z0 > cfg.z0_tol; when normal, z_tilde = z / z0 is the KKT
    multiplier.  surjectivity_sigma is the smallest singular value of the
    constraint Jacobian at u_bar (gram geometry); a positive value is the
    computable surjectivity surrogate for the constraint qualification when
    the target set is a single point.
    """
    if cfg is None:
        cfg = PenaltyConfig()
    normal = pair.z0 > cfg.z0_tol
    z_tilde = None
    if normal:
        z_tilde = Element(pair.z.coords / pair.z0, pair.z.space)
    trips = singular_triplets(p.jacobian_map(u_bar))
    sigma = trips[-1][0] if trips else 0.0
    return {"normal": normal, "z_tilde": z_tilde,
            "surjectivity_sigma": float(sigma)}


def _decays(vals, slack):
    """Nonincreasing up to slack, and the tail at most half the head."""
    mono = all(v1 <= v0 + slack for v0, v1 in zip(vals, vals[1:]))
    head = vals[0]
    settled = head <= slack or vals[-1] <= 0.5 * head + slack
    return mono and settled


def enhanced_sequence_report(p, u_bar, trace, cfg=None):
    """Tail checks for the degenerate branch (the z != 0 conclusions).

    Requires |z| > cfg.z_tol on the final record, else raises
    InapplicableBranchError.  Over the last cfg.tail_len records verifies:

    1. infeasibility: dist(f(u_eps), E) > 0;
    2. dist decays monotonically (up to mono_slack) toward 0;
    3. f0(u_eps) returns to f0(u_bar);
    4. the projections P_E(f(u_eps)) return to f(u_bar);
    5. <z_hat, f(u_eps) - P_E(f(u_eps))> > 0 with z_hat = z/|z|.

    Returns a dict with per-check booleans, the list of violations, the
    pairing values, and whether the normal branch applies as well (both
    branches are reported when z0 and |z| are both above tolerance).
    """
    if cfg is None:
        cfg = PenaltyConfig()
    if len(trace) == 0:
        raise ValueError("empty trace")
    last = trace[-1]
    zn = last.b_norm()
    if zn <= cfg.z_tol:
        raise InapplicableBranchError(
            "|z| = %.3e <= %.1e: the z != 0 branch does not apply" % (zn, cfg.z_tol))
    zhat = last.b.coords / zn
    tail = trace.records[-cfg.tail_len:]
    ub = _coords(u_bar)
    f_bar = p.constraint(ub)

    dists = [r.dist_val for r in tail]
    gaps = [abs(r.f0_gap) for r in tail]
    projs = []
    pairings = []
    for r in tail:
        fx = p.constraint(r.u_eps)
        pe = p.E._project(fx)
        projs.append(norm(p.X, Element(pe - f_bar, p.X)))
        pairings.append(float(zhat @ (fx - pe)))

    checks = {
        "dist_positive": all(d > 0.0 for d in dists),
        "dist_to_zero": _decays(dists, cfg.mono_slack),
        "objective_to_reference": _decays(gaps, cfg.mono_slack),
        "projection_to_reference": _decays(projs, cfg.mono_slack),
        "positive_pairing": all(v > 0.0 for v in pairings),
    }
    violations = [name for name, ok in checks.items() if not ok]
    return {"applicable": True, "checks": checks, "violations": violations,
            "passed": not violations, "tail_len": len(tail), "z_norm": zn,
            "pairings": pairings,
            "normal_branch_too": last.a > cfg.z0_tol}
