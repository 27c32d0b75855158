"""B-spline bases on equally spaced knots with grid quadrature.

Builds clamped B-spline systems, evaluates basis functions and their
second derivatives with the Cox-de Boor recursion, and assembles the
Gram and roughness matrices used by the penalized estimators.
"""

import dataclasses

import numpy as np

__all__ = [
    "BasisSystem",
    "EvalGrid",
    "make_basis",
    "make_grid",
    "eval_basis",
    "eval_basis_d2",
    "basis_matrix",
    "basis_matrix_d2",
    "quadrature_weights",
    "integrate",
    "gram_matrix",
    "roughness_matrix",
]


@dataclasses.dataclass(frozen=True)
class BasisSystem:
    """Clamped B-spline basis on equally spaced knots.

    Attributes
    ----------
    domain_start, domain_end : float
        Endpoints of the (nondegenerate) domain.
    M_n : int
        Number of equal subintervals between interior-boundary knots.
    d : int
        Polynomial degree.
    knots : ndarray
        Full padded knot vector: the M_n + 1 equally spaced knots with the
        boundary knots repeated d extra times at each end.
    delta_n : float
        Knot spacing (domain length / M_n).
    """

    domain_start: float
    domain_end: float
    M_n: int
    d: int
    knots: np.ndarray
    delta_n: float

    @property
    def n_basis(self):
        """Number of basis functions K = M_n + d."""
        return self.M_n + self.d

    @property
    def interior_knots(self):
        """The M_n + 1 equally spaced knots without padding."""
        return self.knots[self.d : self.d + self.M_n + 1]


@dataclasses.dataclass(frozen=True)
class EvalGrid:
    """Uniform evaluation grid covering a closed domain."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.max(np.abs(steps - self.spacing)) > 1e-9 * self.spacing:
            raise ValueError("grid points must be equally spaced")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self):
        return self.points.size


def make_grid(start, end, n_points):
    """Uniform grid of n_points covering [start, end]."""
    if not end > start:
        raise ValueError("grid domain must be nondegenerate")
    if n_points < 2:
        raise ValueError("grid needs at least two points")
    pts = np.linspace(start, end, n_points)
    return EvalGrid(points=pts, spacing=(end - start) / (n_points - 1))


def make_basis(domain, M_n, d=3):
    """Construct a clamped B-spline system.

    Parameters
    ----------
    domain : (float, float)
        Domain endpoints (start, end) with end > start.
    M_n : int
        Number of equal subintervals, at least 1.
    d : int
        Polynomial degree, at least 1. Default cubic.

    Returns
    -------
    BasisSystem with M_n + d basis functions.
    """
    start, end = float(domain[0]), float(domain[1])
    if not end > start:
        raise ValueError("domain must be a nondegenerate interval")
    if int(M_n) != M_n or M_n < 1:
        raise ValueError("M_n must be an integer >= 1")
    if int(d) != d or d < 1:
        raise ValueError("degree d must be an integer >= 1")
    M_n, d = int(M_n), int(d)
    inner = np.linspace(start, end, M_n + 1)
    knots = np.concatenate([np.full(d, start), inner, np.full(d, end)])
    return BasisSystem(
        domain_start=start,
        domain_end=end,
        M_n=M_n,
        d=d,
        knots=knots,
        delta_n=(end - start) / M_n,
    )


def _check_in_domain(basis, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < basis.domain_start) or np.any(t > basis.domain_end):
        raise ValueError("evaluation point outside the basis domain")
    return t


def _degree_zero(basis, t):
    # Indicator functions of the padded knot intervals; the last
    # nonzero-length interval is right-closed so t = domain_end is covered.
    tau = basis.knots
    left, right = tau[:-1], tau[1:]
    inside = (t[:, None] >= left[None, :]) & (t[:, None] < right[None, :])
    at_end = t == basis.domain_end
    if np.any(at_end):
        inside[at_end, :] = False
        inside[at_end, basis.d + basis.M_n - 1] = True
    return inside.astype(float)


def _cox_de_boor(basis, t, up_to_degree):
    """Dense triangular recursion; returns the degree-`up_to_degree` matrix."""
    tau = basis.knots
    B = _degree_zero(basis, t)
    for p in range(1, up_to_degree + 1):
        m = tau.size - 1 - p
        den1 = tau[p : p + m] - tau[:m]
        den2 = tau[p + 1 : p + 1 + m] - tau[1 : 1 + m]
        inv1 = np.where(den1 > 0, 1.0 / np.where(den1 > 0, den1, 1.0), 0.0)
        inv2 = np.where(den2 > 0, 1.0 / np.where(den2 > 0, den2, 1.0), 0.0)
        left = (t[:, None] - tau[:m]) * inv1 * B[:, :m]
        right = (tau[p + 1 : p + 1 + m] - t[:, None]) * inv2 * B[:, 1 : m + 1]
        B = left + right
    return B


def basis_matrix(basis, points):
    """Evaluate all basis functions at an array of points.

    Returns an (n_points, K) matrix of B-spline values.
    """
    t = _check_in_domain(basis, np.atleast_1d(points))
    return _cox_de_boor(basis, t, basis.d)


def eval_basis(basis, t):
    """Basis values at a single point, a length-K nonnegative vector summing to 1."""
    return basis_matrix(basis, [float(t)])[0]


def basis_matrix_d2(basis, points):
    """Second derivatives of all basis functions at an array of points.

    Uses the B-spline derivative recurrence applied twice to the
    degree d - 2 values. Requires d >= 2.
    """
    if basis.d < 2:
        raise ValueError("second derivatives require degree d >= 2")
    t = _check_in_domain(basis, np.atleast_1d(points))
    tau = basis.knots
    d = basis.d
    low = _cox_de_boor(basis, t, d - 2)

    def diff_step(values, degree):
        # values holds degree-(degree-1) functions; returns derivatives of
        # the degree-`degree` functions scaled by the recurrence factor.
        m = values.shape[1] - 1
        den = tau[degree : degree + m] - tau[:m]
        inv = np.where(den > 0, 1.0 / np.where(den > 0, den, 1.0), 0.0)
        den_next = tau[degree + 1 : degree + 1 + m] - tau[1 : 1 + m]
        inv_next = np.where(den_next > 0, 1.0 / np.where(den_next > 0, den_next, 1.0), 0.0)
        return degree * (values[:, :m] * inv - values[:, 1 : m + 1] * inv_next)

    first = diff_step(low, d - 1)
    return diff_step(first, d)


def eval_basis_d2(basis, t):
    """Second-derivative values at a single point; entries sum to zero."""
    return basis_matrix_d2(basis, [float(t)])[0]


def quadrature_weights(grid):
    """Left-endpoint Riemann weights: grid spacing per point, none for the last."""
    w = np.full(grid.n_points, grid.spacing)
    w[-1] = 0.0
    return w


def integrate(values, grid):
    """Left-endpoint Riemann integral of values sampled on the grid rows."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.n_points:
        raise ValueError("values and grid sizes do not match")
    return values[..., :-1].sum(axis=-1) * grid.spacing


def _check_grid_covers(basis, grid):
    span = basis.domain_end - basis.domain_start
    if (
        abs(grid.points[0] - basis.domain_start) > 1e-9 * span
        or abs(grid.points[-1] - basis.domain_end) > 1e-9 * span
    ):
        raise ValueError("grid must cover the basis domain")


def gram_matrix(basis, grid):
    """Quadrature Gram matrix of basis products.

    Symmetric, positive semidefinite, and banded: entries with
    |p - q| > d vanish by compact support.
    """
    _check_grid_covers(basis, grid)
    if grid.n_points < basis.n_basis:
        raise ValueError("grid too coarse: fewer points than basis functions")
    B = basis_matrix(basis, grid.points)
    w = quadrature_weights(grid)
    phi = (B * w[:, None]).T @ B
    return (phi + phi.T) / 2.0


def roughness_matrix(basis, grid):
    """Quadrature matrix of second-derivative products; requires d >= 2."""
    if basis.d < 2:
        raise ValueError("roughness matrix requires degree d >= 2")
    _check_grid_covers(basis, grid)
    if grid.n_points < basis.n_basis:
        raise ValueError("grid too coarse: fewer points than basis functions")
    B2 = basis_matrix_d2(basis, grid.points)
    w = quadrature_weights(grid)
    omega = (B2 * w[:, None]).T @ B2
    return (omega + omega.T) / 2.0
