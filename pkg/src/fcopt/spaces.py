"""Finite-dimensional inner-product spaces with explicit gram forms.

A ``SpaceDescriptor`` carries a symmetric positive definite gram matrix G
defining the norm |x| = sqrt(x' G x).  Dual vectors are kept in the same
coordinate system with the pairing <phi, x> = phi' x, so the dual norm is
|phi|_* = sqrt(phi' G^-1 phi) and the Riesz map is an application of G
(or its inverse), never an implicit identification.

``LinearMap`` objects know their domain and codomain descriptors; adjoints
and singular values are always taken in the gram-induced geometry.
"""

import re

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

__all__ = [
    "RANK_RTOL",
    "SpaceDescriptor",
    "Element",
    "LinearMap",
    "norm",
    "dual_norm",
    "pairing",
    "riesz_to_dual",
    "riesz_to_primal",
    "apply_map",
    "adjoint",
    "singular_triplets",
    "gram_from_config",
    "space_from_config",
]

# numerical rank cutoff: singular values <= RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-10


class SpaceDescriptor:
    """A finite-dimensional space with a gram form.

    Parameters
    ----------
    name : str
        Identifier used in reports and error messages.
    dim : int
        Dimension, must be positive.
    gram : array_like or None
        dim x dim symmetric positive definite matrix; None means identity.
    """

    def __init__(self, name, dim, gram=None):
        if dim <= 0:
            raise ValueError("space dimension must be positive, got %r" % dim)
        self.name = str(name)
        self.dim = int(dim)
        if gram is None:
            gram = np.eye(self.dim)
        gram = np.asarray(gram, dtype=float)
        if gram.shape != (self.dim, self.dim):
            raise ValueError(
                "gram of space %r must be %d x %d, got %r"
                % (self.name, self.dim, self.dim, gram.shape)
            )
        scale = np.abs(gram).max()
        if scale == 0.0 or np.abs(gram - gram.T).max() > 1e-12 * max(scale, 1.0):
            raise ValueError("gram of space %r is not symmetric" % self.name)
        self.gram = 0.5 * (gram + gram.T)
        try:
            # lower Cholesky factor; existence certifies positive definiteness
            self._chol = np.linalg.cholesky(self.gram)
        except np.linalg.LinAlgError:
            raise ValueError(
                "gram of space %r is not positive definite" % self.name
            ) from None

    @property
    def chol_lower(self):
        """Lower Cholesky factor L with G = L L'."""
        return self._chol

    def norm_factor(self):
        """Upper factor L' such that |x| = |L' x|_2."""
        return self._chol.T

    def apply_gram(self, coords):
        """Return G x for a coordinate array."""
        return self.gram @ np.asarray(coords, dtype=float)

    def apply_gram_inverse(self, coords):
        """Return G^-1 phi for a coordinate array."""
        return cho_solve((self._chol, True), np.asarray(coords, dtype=float))

    def element(self, coords):
        """Wrap a coordinate array as an Element of this space."""
        return Element(coords, self)

    def zero(self):
        """The zero element."""
        return Element(np.zeros(self.dim), self)

    def __repr__(self):
        return "SpaceDescriptor(%r, dim=%d)" % (self.name, self.dim)


class Element:
    """A point of a space (or of its dual, in shared coordinates).

    Parameters
    ----------
    coords : array_like
        Coordinates, length must match ``space.dim``.
    space : SpaceDescriptor
        The space the coordinates refer to.
    """

    def __init__(self, coords, space):
        coords = np.atleast_1d(np.asarray(coords, dtype=float))
        if coords.shape != (space.dim,):
            raise ValueError(
                "coords of length %d do not fit space %r of dim %d"
                % (coords.size, space.name, space.dim)
            )
        self.coords = coords
        self.space = space

    def copy(self):
        return Element(self.coords.copy(), self.space)

    def __repr__(self):
        return "Element(%s, space=%r)" % (np.array2string(self.coords), self.space.name)


class LinearMap:
    """A linear operator between two described spaces.

    Parameters
    ----------
    matrix : array_like
        codomain.dim x domain.dim coefficient matrix.
    domain, codomain : SpaceDescriptor
        Source and target spaces.
    compact_flag : bool
        Marker consumed by the diagnostics module (perturbation bookkeeping);
        it does not change any computation here.
    """

    def __init__(self, matrix, domain, codomain, compact_flag=False):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape != (codomain.dim, domain.dim):
            raise ValueError(
                "matrix shape %r does not map %r (dim %d) into %r (dim %d)"
                % (matrix.shape, domain.name, domain.dim, codomain.name, codomain.dim)
            )
        self.matrix = matrix
        self.domain = domain
        self.codomain = codomain
        self.compact_flag = bool(compact_flag)

    def __call__(self, u):
        return apply_map(self, u)

    def __repr__(self):
        return "LinearMap(%r -> %r, shape=%r)" % (
            self.domain.name,
            self.codomain.name,
            self.matrix.shape,
        )


def _check_space(space, x, what):
    if x.space is not space and x.space.dim != space.dim:
        raise ValueError("%s: element of %r passed where %r expected"
                         % (what, x.space.name, space.name))


def norm(space, x):
    """Gram norm sqrt(x' G x) of an element."""
    _check_space(space, x, "norm")
    val = float(x.coords @ space.apply_gram(x.coords))
    return np.sqrt(max(val, 0.0))


def dual_norm(space, phi):
    """Dual norm sqrt(phi' G^-1 phi) of a dual vector in shared coordinates.

    Equals sup{ <phi, x> : |x| <= 1 } for the pairing <phi, x> = phi' x.
    """
    _check_space(space, phi, "dual_norm")
    val = float(phi.coords @ space.apply_gram_inverse(phi.coords))
    return np.sqrt(max(val, 0.0))


def pairing(phi, x):
    """Duality pairing <phi, x> = phi' x (shared coordinates)."""
    return float(np.asarray(phi.coords if isinstance(phi, Element) else phi)
                 @ np.asarray(x.coords if isinstance(x, Element) else x))


def riesz_to_dual(space, x):
    """Riesz map: primal x to the dual vector G x representing <x, .>."""
    _check_space(space, x, "riesz_to_dual")
    return Element(space.apply_gram(x.coords), space)


def riesz_to_primal(space, phi):
    """Inverse Riesz map: dual phi to the primal vector G^-1 phi."""
    _check_space(space, phi, "riesz_to_primal")
    return Element(space.apply_gram_inverse(phi.coords), space)


def apply_map(F, u):
    """Apply a LinearMap to a domain element."""
    _check_space(F.domain, u, "apply_map")
    return Element(F.matrix @ u.coords, F.codomain)


def adjoint(F):
    """Gram-aware adjoint of a LinearMap.

    Returns the map with matrix G_dom^-1 M' G_cod, so that the pairing
    identity <F* phi, u> = <phi, F u> holds with both pairings read as
    plain coordinate dot products against gram-weighted representers;
    equivalently (F* phi, u)_dom = (phi, F u)_cod for the gram inner
    products, for all u and phi.
    """
    m = F.domain.apply_gram_inverse(F.matrix.T @ F.codomain.gram)
    return LinearMap(m, domain=F.codomain, codomain=F.domain,
                     compact_flag=F.compact_flag)


def singular_triplets(F):
    """Singular value decomposition in the gram-induced geometry.

    Computes the SVD of C = L_cod' M L_dom'^-1 where G = L L' are the
    Cholesky factorizations of the two grams.  Returns a list of triplets
    (sigma, left, right) sorted by descending sigma with

        F(right) = sigma * left,   |right|_dom = |left|_cod = 1.

    The list has min(domain.dim, codomain.dim) entries.
    """
    lv = F.domain.chol_lower
    lx = F.codomain.chol_lower
    # M L_dom'^-1  ==  solve (L_dom X' = M') transposed
    tmp = solve_triangular(lv, F.matrix.T, lower=True).T
    c = lx.T @ tmp
    u, s, wt = np.linalg.svd(c, full_matrices=False)
    triplets = []
    for i in range(s.size):
        left = solve_triangular(lx.T, u[:, i], lower=False)
        right = solve_triangular(lv.T, wt[i, :], lower=False)
        triplets.append((float(s[i]),
                         Element(left, F.codomain),
                         Element(right, F.domain)))
    return triplets


_STIFF_RE = re.compile(r"^stiffness1d\(\s*([0-9.eE+-]+)\s*\)$")


def stiffness1d(dim, h):
    """Tridiagonal second-difference matrix tridiag(-1, 2, -1)/h."""
    k = 2.0 * np.eye(dim) - np.eye(dim, k=1) - np.eye(dim, k=-1)
    return k / float(h)


def gram_from_config(value, dim):
    """Build a gram matrix from its config representation.

    Accepted values: the string "identity", the string "stiffness1d(h)"
    with a numeric step h, or an explicit row list (nested sequence).
    """
    if value is None:
        return np.eye(dim)
    if isinstance(value, str):
        text = value.strip()
        if text == "identity":
            return np.eye(dim)
        m = _STIFF_RE.match(text)
        if m:
            return stiffness1d(dim, float(m.group(1)))
        raise ValueError("unknown gram spec %r" % value)
    return np.asarray(value, dtype=float)


def space_from_config(cfg):
    """Build a SpaceDescriptor from a mapping with keys name, dim, gram."""
    name = cfg.get("name", "space")
    dim = int(cfg["dim"])
    gram = gram_from_config(cfg.get("gram", "identity"), dim)
    return SpaceDescriptor(name, dim, gram)
