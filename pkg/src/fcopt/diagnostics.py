"""Estimate-constant diagnostics for operator families.

Computable surrogates for the closed-range / finite-codimension estimates:
kernel dimensions of adjoints, best constants C in |phi| <= C |F* phi| on
the complement of the kernel, compact-perturbed variants with an auxiliary
map G (|phi|^2 <= C^2 (|F* phi|^2 + |G phi|^2)), and growth verdicts across
refinement families.

All constants are 1/sigma computations in the gram-induced geometry; the
numerical rank cutoff is sigma <= tol * sigma_max (default RANK_RTOL).
A verdict produced by a sweep is a diagnostic heuristic over finitely many
levels, never a proof about the underlying infinite-dimensional operator.
"""

import numpy as np

from .spaces import (
    RANK_RTOL,
    SpaceDescriptor,
    LinearMap,
    adjoint,
    singular_triplets,
)

__all__ = [
    "OperatorFamily",
    "EstimateReport",
    "SweepReport",
    "kernel_dimension",
    "restricted_estimate_constant",
    "compact_perturbed_constant",
    "closed_range_constant",
    "codim_growth_verdict",
]

_HEURISTIC_NOTE = ("verdict is a finite-level diagnostic heuristic, "
                   "not a proof about the limit operator")


class OperatorFamily:
    """An ordered refinement family of linear maps.

    Parameters
    ----------
    levels : sequence of (n, LinearMap)
        Pairs of level size and operator, ordered by strictly increasing n.
    description : str
        Free-text description used in reports.
    """

    def __init__(self, levels, description=""):
        levels = [(int(n), f) for n, f in levels]
        if any(b <= a for (a, _), (b, _) in zip(levels, levels[1:])):
            raise ValueError("family levels must be ordered by increasing n")
        self.levels = levels
        self.description = str(description)

    def __iter__(self):
        return iter(self.levels)

    def __len__(self):
        return len(self.levels)


class EstimateReport:
    """Result of an estimate-constant computation.

    Attributes
    ----------
    constant : float
        The best constant C, or ``inf`` when the restricted operator is
        numerically rank deficient.
    kernel_dim : int
        Numerical kernel dimension of the adjoint (or stacked) operator.
    sigma_profile : ndarray
        Singular values, descending.
    verdict : str
        One of "bounded", "growing", "inconclusive"; single-operator
        reports carry "inconclusive" (a verdict needs a sweep).
    note : str
    extras : dict
        Operation-specific extra outputs.
    """

    def __init__(self, constant, kernel_dim, sigma_profile,
                 verdict="inconclusive", note="", extras=None):
        self.constant = float(constant)
        self.kernel_dim = int(kernel_dim)
        self.sigma_profile = np.asarray(sigma_profile, dtype=float)
        self.verdict = verdict
        self.note = note
        self.extras = dict(extras or {})

    @property
    def infinite(self):
        return not np.isfinite(self.constant)

    def __repr__(self):
        return ("EstimateReport(constant=%s, kernel_dim=%d, verdict=%r)"
                % (self.constant, self.kernel_dim, self.verdict))


class SweepReport:
    """Per-level estimate reports plus a growth verdict."""

    def __init__(self, levels, verdict, note=_HEURISTIC_NOTE):
        self.levels = list(levels)          # list of (n, EstimateReport)
        self.verdict = verdict
        self.note = note

    @property
    def constants(self):
        return [rep.constant for _, rep in self.levels]

    @property
    def kernel_dims(self):
        return [rep.kernel_dim for _, rep in self.levels]

    def __repr__(self):
        return "SweepReport(verdict=%r, constants=%r)" % (self.verdict, self.constants)


def _sigmas(F):
    return np.array([t[0] for t in singular_triplets(F)])


def kernel_dimension(F, tol=RANK_RTOL):
    """Numerical dimension of ker(F*) = codomain dim minus numerical rank."""
    s = _sigmas(F)
    smax = s.max(initial=0.0)
    rank = int(np.sum(s > tol * smax)) if smax > 0.0 else 0
    return F.codomain.dim - rank


def restricted_estimate_constant(F, tol=RANK_RTOL):
    """Best C with |phi| <= C |F* phi| on the complement of ker(F*).

    The complement of the numerical kernel is the finite-codimensional
    subspace on which the estimate holds; C is 1/sigma for the smallest
    singular value above the rank cutoff.  A numerically zero operator
    yields the infinity flag with full kernel dimension.
    """
    s = np.sort(_sigmas(F))[::-1]
    smax = s.max(initial=0.0)
    kdim = kernel_dimension(F, tol)
    above = s[s > tol * smax] if smax > 0.0 else np.array([])
    if above.size == 0:
        return EstimateReport(np.inf, F.codomain.dim, s,
                              note="operator numerically zero")
    return EstimateReport(1.0 / above.min(), kdim, s)


def _stacked_with(F, G):
    """Stacked operator phi -> (F* phi, G phi) with block-diagonal gram."""
    fstar = adjoint(F)
    if G.domain.dim != F.codomain.dim:
        raise ValueError("G must act on the codomain of F")
    vdim, wdim = fstar.codomain.dim, G.codomain.dim
    gram = np.zeros((vdim + wdim, vdim + wdim))
    gram[:vdim, :vdim] = fstar.codomain.gram
    gram[vdim:, vdim:] = G.codomain.gram
    stacked_cod = SpaceDescriptor("stacked(%s+%s)"
                                  % (fstar.codomain.name, G.codomain.name),
                                  vdim + wdim, gram)
    mat = np.vstack([fstar.matrix, G.matrix])
    return LinearMap(mat, F.codomain, stacked_cod)


def compact_perturbed_constant(F, G, tol=RANK_RTOL):
    """Best C with |phi|^2 <= C^2 (|F* phi|^2 + |G phi|^2).

    G must be declared compact (compact_flag True) — finite dimensions
    cannot distinguish compactness, so the flag records the modelling
    intent and the sweep semantics carry the content.  Computed as
    1/sigma_min of the stacked operator [F*; G]; a rank-deficient stack
    yields the infinity flag.
    """
    if not G.compact_flag:
        raise ValueError("compact_perturbed_constant requires G.compact_flag")
    stacked = _stacked_with(F, G)
    s = np.sort(_sigmas(stacked))[::-1]
    smax = s.max(initial=0.0)
    rank = int(np.sum(s > tol * smax)) if smax > 0.0 else 0
    kdim = stacked.domain.dim - rank  # phi-side null space of the stack
    if kdim > 0:
        return EstimateReport(np.inf, kdim, s,
                              note="stacked operator rank deficient")
    return EstimateReport(1.0 / s.min(), 0, s)


def closed_range_constant(F, tol=RANK_RTOL):
    """Closed-range constants: on the range's dual, and via the projector.

    Returns a report whose ``constant`` is the projected-form value (the
    estimate |phi| <= C (|F* phi| + |Pi phi|) with Pi the gram-orthogonal
    projector onto the complement of the numerical range); extras carry
    the range-restricted constant and the agreement factor between the
    two formulations.
    """
    trips = singular_triplets(F)
    s = np.array([t[0] for t in trips])
    smax = s.max(initial=0.0)
    mask_above = s > tol * smax if smax > 0.0 else np.zeros(s.size, dtype=bool)
    above = s[mask_above]
    range_constant = float(1.0 / above.min()) if above.size else np.inf
    # gram-orthogonal projector onto the orthocomplement of the range
    x = F.codomain
    cols = [t[1].coords for t, keep in zip(trips, mask_above) if keep]
    if cols:
        basis = np.array(cols).T
        proj_range = basis @ (basis.T @ x.gram)
    else:
        proj_range = np.zeros((x.dim, x.dim))
    pi = np.eye(x.dim) - proj_range
    pimap = LinearMap(pi, x, x, compact_flag=True)
    stacked = _stacked_with(F, pimap)
    s2 = np.sort(_sigmas(stacked))[::-1]
    projected_constant = float(1.0 / s2.min()) if s2.min() > 0 else np.inf
    kdim = kernel_dimension(F, tol)
    if np.isfinite(range_constant) and np.isfinite(projected_constant):
        factor = max(range_constant, projected_constant) / max(
            min(range_constant, projected_constant), 1e-300)
    else:
        factor = np.inf
    return EstimateReport(
        projected_constant, kdim, s2,
        extras={
            "range_constant": range_constant,
            "projected_constant": projected_constant,
            "agreement_factor": factor,
        },
    )


def _finite_growth_verdict(values, ns, growth_factor):
    """bounded / growing / inconclusive for a finite positive sequence."""
    values = np.asarray(values, dtype=float)
    if values.max() / values.min() <= growth_factor:
        return "bounded"
    monotone = np.all(np.diff(values) >= -1e-9 * values[:-1])
    if monotone:
        ok = True
        for i in range(len(values) - 1):
            per_doubling = growth_factor ** np.log2(ns[i + 1] / ns[i])
            if values[i + 1] < values[i] * per_doubling * (1.0 - 1e-9):
                ok = False
                break
        if ok:
            return "growing"
    return "inconclusive"


def _sweep_verdict(ns, consts, kdims, growth_factor):
    """Verdict for a sweep of estimate reports over increasing levels.

    A stable kernel dimension lets the constants decide; a kernel that
    inflates with the level means the estimate fails on an expanding
    subspace and the kernel dimensions play the role of the growth
    quantity.
    """
    ns = np.asarray(ns, dtype=float)
    consts = np.asarray(consts, dtype=float)
    kdims = np.asarray(kdims, dtype=float)
    if kdims.max() == kdims.min():
        if np.all(np.isfinite(consts)):
            return _finite_growth_verdict(consts, ns, growth_factor)
        return "inconclusive"
    if np.all(np.diff(kdims) >= 0):
        pos = kdims > 0
        if pos.sum() >= 2 and np.all(pos[np.argmax(pos):]):
            verdict = _finite_growth_verdict(kdims[pos], ns[pos], growth_factor)
            return "inconclusive" if verdict == "bounded" else verdict
        # a kernel that only just appeared: let the finite prefix of the
        # constants decide whether the estimate was already degrading
        finite = np.isfinite(consts)
        head = int(finite.sum())
        if head >= 2 and np.all(finite[:head]) and not np.any(finite[head:]):
            verdict = _finite_growth_verdict(consts[:head], ns[:head],
                                             growth_factor)
            if verdict == "growing":
                return "growing"
        return "inconclusive"
    return "inconclusive"


def codim_growth_verdict(fam, G_builder=None, growth_factor=2.0, tol=RANK_RTOL):
    """Estimate constants per family level plus a growth verdict.

    For each level the restricted constant is computed, or the
    compact-perturbed constant when ``G_builder(level_index)`` supplies an
    auxiliary map.  Verdict: with a stable kernel dimension across levels,
    "bounded" when max/min of the constants <= growth_factor and "growing"
    when they increase monotonically by at least growth_factor per doubling
    of n; when the kernel dimension itself grows with the level, the
    unrestricted estimate fails on an expanding subspace and the kernel
    dimensions play the role of the growth quantity.  The verdict is a
    heuristic over the computed levels, not a proof.
    """
    if len(fam) < 3:
        raise ValueError("growth verdict needs at least 3 levels")
    reports = []
    for idx, (n, F) in enumerate(fam):
        if G_builder is not None:
            rep = compact_perturbed_constant(F, G_builder(idx), tol)
        else:
            rep = restricted_estimate_constant(F, tol)
        reports.append((n, rep))
    ns = np.array([n for n, _ in reports], dtype=float)
    consts = np.array([rep.constant for _, rep in reports])
    kdims = np.array([rep.kernel_dim for _, rep in reports], dtype=float)
    verdict = _sweep_verdict(ns, consts, kdims, growth_factor)
    swept = SweepReport(reports, verdict)
    for _, rep in reports:
        rep.verdict = verdict
        rep.note = rep.note or _HEURISTIC_NOTE
    return swept
