"""
Models of hyperbolic n-space
Points live canonically on the hyperboloid of the standard form
x0^2 - x1^2 - ... - xn^2 = 1; a HyperbolicFrame transports lattice vectors
of an arbitrary QuadraticForm into those standard coordinates. The ball,
upper half-space and Klein charts are derived from the hyperboloid.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import null_space

from .errors import DegenerateSegment, DimensionMismatch, InvalidPoint
from .forms import QuadraticForm, RationalCone, primitive

LOGGER = logging.getLogger(__name__)

TAU_MODEL = 1e-9


class Model(Enum):
    HYPERBOLOID = "hyperboloid"
    BALL = "ball"
    HALFSPACE = "halfspace"
    KLEIN = "klein"

    @classmethod
    def parse(cls, name):
        aliases = {"poincare": cls.BALL, "halfplane": cls.HALFSPACE, "upper": cls.HALFSPACE}
        key = str(name).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


def minkowski(u, v):
    """Standard pairing u0 v0 - u1 v1 - ... over the last axis"""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 0] - np.sum(u[..., 1:] * v[..., 1:], axis=-1)


@dataclass(frozen=True)
class ModelPoint:
    model: Model
    coords: Tuple[float, ...]

    @classmethod
    def of(cls, model, coords):
        return cls(Model.parse(model) if not isinstance(model, Model) else model,
                   tuple(float(c) for c in coords))

    @property
    def array(self):
        return np.array(self.coords, dtype=float)

    @property
    def ambient_dim(self):
        """Dimension n of the hyperbolic space the point lives in"""
        return len(self.coords) - 1 if self.model is Model.HYPERBOLOID else len(self.coords)

    def validate(self, tol=TAU_MODEL):
        x = self.array
        if not np.all(np.isfinite(x)):
            raise InvalidPoint(f"non-finite coordinates {self.coords}")
        if self.model is Model.HYPERBOLOID:
            if x[0] <= 0 or abs(minkowski(x, x) - 1.0) > tol * max(1.0, x[0] ** 2):
                raise InvalidPoint(f"{self.coords} is not on the upper sheet of the hyperboloid")
        elif self.model in (Model.BALL, Model.KLEIN):
            if np.dot(x, x) >= 1.0:
                raise InvalidPoint(f"{self.coords} is not inside the unit ball")
        elif x[-1] <= 0:
            raise InvalidPoint(f"{self.coords} is not in the upper half-space")
        return self

    def to_json(self):
        return {"model": self.model.value, "coords": list(self.coords)}


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of the sphere at infinity

    `coords` is the null ray normalized to x0 = 1, so coords[1:] is the
    matching unit vector of the ball model. `exact` keeps the primitive
    lattice null vector when one is known.
    """
    coords: Tuple[float, ...]
    exact: Optional[Tuple[int, ...]] = None

    @classmethod
    def from_null(cls, x, exact=None):
        x = np.asarray(x, dtype=float)
        if x[0] < 0:
            x = -x
        if x[0] <= 0:
            raise InvalidPoint("null vector must have a nonzero time coordinate")
        unit = x[1:] / np.linalg.norm(x[1:])
        return cls(tuple([1.0] + [float(c) for c in unit]), exact)

    @classmethod
    def from_unit(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(tuple([1.0] + [float(c) for c in u / np.linalg.norm(u)]))

    @property
    def null(self):
        return np.array(self.coords, dtype=float)

    @property
    def direction(self):
        """Unit vector of the ball model"""
        return np.array(self.coords[1:], dtype=float)

    def angle_to(self, other):
        return float(np.arccos(np.clip(np.dot(self.direction, other.direction), -1.0, 1.0)))

    def to_json(self):
        data = {"ball": list(self.coords[1:])}
        if self.exact is not None:
            data["exact"] = list(self.exact)
        return data


class HyperbolicFrame:
    """Real change of basis P with P^T G P = diag(1, -1, ..., -1)

    Lattice vectors v map to standard coordinates P^-1 v; an isometry g
    of the form acts in standard coordinates by P^-1 g P. The first column
    is oriented so the form's witness lands on the upper sheet.
    """

    def __init__(self, form: QuadraticForm):
        form.require_hyperbolic()
        self.form = form
        gram = form.float_gram
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = [int(np.argmax(eigvals))] + [i for i in range(len(eigvals)) if i != int(np.argmax(eigvals))]
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
        self.P = eigvecs / np.sqrt(np.abs(eigvals))
        self.P_inv = np.linalg.inv(self.P)
        witness = np.array([float(c) for c in form.witness])
        if (self.P_inv @ witness)[0] < 0:
            self.P[:, 0] = -self.P[:, 0]
            self.P_inv = np.linalg.inv(self.P)

    @property
    def n(self):
        return self.form.n

    def to_frame(self, v):
        return self.P_inv @ np.asarray([float(c) for c in v], dtype=float)

    def to_lattice(self, x):
        return self.P @ np.asarray(x, dtype=float)

    def matrix(self, g):
        """Standard-coordinate matrix of a FormIsometry (or raw integer matrix)"""
        rows = g.matrix if hasattr(g, "matrix") else g
        return self.P_inv @ np.array([[float(e) for e in row] for row in rows], dtype=float) @ self.P

    def point(self, v):
        """Hyperboloid point on the ray of a timelike lattice vector"""
        x = self.to_frame(v)
        norm = minkowski(x, x)
        if norm <= 0:
            raise InvalidPoint(f"lattice vector {tuple(v)} is not timelike")
        if x[0] < 0:
            x = -x
        return ModelPoint(Model.HYPERBOLOID, tuple(x / np.sqrt(norm)))

    def boundary(self, v, exact=True):
        """Boundary point of a null lattice vector"""
        exact_key = None
        if exact:
            exact_key = primitive(v)
        return BoundaryPoint.from_null(self.to_frame(v), exact_key)

    def origin(self):
        return ModelPoint(Model.HYPERBOLOID, tuple([1.0] + [0.0] * self.n))


def _as_hyperboloid(x):
    x = np.asarray(x, dtype=float)
    # Re-project onto the sheet to absorb rounding
    spatial = x[1:]
    return np.concatenate([[np.sqrt(1.0 + np.dot(spatial, spatial))], spatial])


def to_hyperboloid(p: ModelPoint) -> np.ndarray:
    """Standard hyperboloid coordinates of a point in any model"""
    x = p.array
    if p.model is Model.HYPERBOLOID:
        return x
    if p.model is Model.BALL:
        r2 = np.dot(x, x)
        if r2 >= 1.0:
            raise InvalidPoint(f"{p.coords} is not inside the unit ball")
        return np.concatenate([[(1.0 + r2) / (1.0 - r2)], 2.0 * x / (1.0 - r2)])
    if p.model is Model.KLEIN:
        r2 = np.dot(x, x)
        if r2 >= 1.0:
            raise InvalidPoint(f"{p.coords} is not inside the unit ball")
        return np.concatenate([[1.0], x]) / np.sqrt(1.0 - r2)
    return DEFAULT_CHART.to_hyperboloid(x[:-1], x[-1])


def from_hyperboloid(x, model: Model) -> ModelPoint:
    x = np.asarray(x, dtype=float)
    if model is Model.HYPERBOLOID:
        return ModelPoint(model, tuple(x))
    if model is Model.BALL:
        return ModelPoint(model, tuple(x[1:] / (1.0 + x[0])))
    if model is Model.KLEIN:
        return ModelPoint(model, tuple(x[1:] / x[0]))
    w, y = DEFAULT_CHART.coords(x)
    return ModelPoint(model, tuple(list(w) + [y]))


def convert(p: ModelPoint, target) -> ModelPoint:
    """Change model; the point is validated first"""
    target = Model.parse(target) if not isinstance(target, Model) else target
    p.validate()
    if p.model is target:
        return p
    return from_hyperboloid(to_hyperboloid(p), target)


class HalfSpaceChart:
    """Upper half-space chart sending the null vector p to infinity

    A point x of the hyperboloid gets height y = 1 / <x, p> and horizontal
    coordinates w_i = -<x, e_i> y, where q is the null vector with <p, q> = 1
    opposite to p and e_i is an orthonormal basis of the spacelike vectors
    orthogonal to both. Horospheres centred at p are the planes y = const,
    with flat intrinsic metric |dw| / y.
    """

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        if p[0] <= 0 or abs(minkowski(p, p)) > 1e-8 * p[0] ** 2:
            raise InvalidPoint("chart base must be a future null vector")
        self.p = p
        reflected = np.concatenate([[p[0]], -p[1:]])
        self.q = reflected / minkowski(p, reflected)
        spatial = null_space(p[1:].reshape(1, -1))
        self.basis = np.vstack([np.zeros((1, spatial.shape[1])), spatial]).T

    @property
    def n(self):
        return len(self.p) - 1

    def height(self, x):
        return 1.0 / minkowski(x, self.p)

    def coords(self, x):
        x = np.asarray(x, dtype=float)
        y = self.height(x)
        w = -minkowski(x[None, :], self.basis) * y if len(self.basis) else np.zeros(0)
        return np.asarray(w, dtype=float), float(y)

    def to_hyperboloid(self, w, y):
        w = np.asarray(w, dtype=float)
        if y <= 0:
            raise InvalidPoint("half-space height must be positive")
        a = (y * y + np.dot(w, w)) / (2.0 * y)
        x = a * self.p + self.q / y
        if len(self.basis):
            x = x + (self.basis.T @ w) / y
        return _as_hyperboloid(x)

    def boundary(self, w):
        """Boundary point at horizontal position w (height 0)"""
        w = np.asarray(w, dtype=float)
        x = 0.5 * np.dot(w, w) * self.p + self.q
        if len(self.basis):
            x = x + self.basis.T @ w
        return BoundaryPoint.from_null(x)


def _default_chart(n):
    p = np.zeros(n + 1)
    p[0] = 1.0
    p[-1] = 1.0
    return HalfSpaceChart(p)


class _DefaultChart:
    """Half-space chart sending the ball point e_n to infinity, per dimension"""

    def __init__(self):
        self._charts = {}

    def _chart(self, n):
        if n not in self._charts:
            self._charts[n] = _default_chart(n)
        return self._charts[n]

    def coords(self, x):
        return self._chart(len(x) - 1).coords(x)

    def to_hyperboloid(self, w, y):
        return self._chart(len(w) + 1).to_hyperboloid(w, y)


DEFAULT_CHART = _DefaultChart()


def dist(u: ModelPoint, v: ModelPoint) -> float:
    """Hyperbolic distance, evaluated on the hyperboloid"""
    if u.ambient_dim != v.ambient_dim:
        raise DimensionMismatch("points live in different dimensions")
    x = to_hyperboloid(u.validate())
    y = to_hyperboloid(v.validate())
    return hyperboloid_distance(x, y)


def hyperboloid_distance(x, y):
    """arccosh<x, y>; 2 asinh(|x - y| / 2) while <x, y> <= 2, where arccosh is ill-conditioned"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pairing = minkowski(x, y)
    if pairing > 2.0:
        return float(np.arccosh(pairing))
    diff = x - y
    spacelike = -minkowski(diff, diff)
    return float(2.0 * np.arcsinh(np.sqrt(max(spacelike, 0.0)) / 2.0))


def geodesic_point(u: ModelPoint, v: ModelPoint, t: float) -> ModelPoint:
    """Point at arc-length fraction t along [u, v], in u's model"""
    x = to_hyperboloid(u.validate())
    y = to_hyperboloid(v.validate())
    length = hyperboloid_distance(x, y)
    if length <= TAU_MODEL:
        raise DegenerateSegment("endpoints coincide")
    return from_hyperboloid(hyperboloid_lerp(x, y, t, length), u.model)


def hyperboloid_lerp(x, y, t, length=None):
    if length is None:
        length = hyperboloid_distance(x, y)
    if length <= 0:
        return np.asarray(x, dtype=float)
    s = np.sinh(length)
    point = (np.sinh((1.0 - t) * length) * np.asarray(x) + np.sinh(t * length) * np.asarray(y)) / s
    return _as_hyperboloid(point)


def project_cone(frame: HyperbolicFrame, cone: RationalCone, p: ModelPoint, tol=TAU_MODEL):
    """Membership of p in D = pr(C cap H) and the q-normalized representative"""
    x = to_hyperboloid(p.validate())
    if cone.full_positive:
        return True, ModelPoint(Model.HYPERBOLOID, tuple(x))
    lattice = frame.to_lattice(x)
    scale = max(1.0, float(np.max(np.abs(lattice))))
    inside = all(float(np.dot([float(c) for c in ell], lattice)) >= -tol * scale for ell in cone.halfspaces)
    return inside, ModelPoint(Model.HYPERBOLOID, tuple(x))


def klein_collinearity_residual(points):
    """Largest distance of Klein-chart points from the line through the first and last"""
    k = np.array([np.asarray(from_hyperboloid(x, Model.KLEIN).coords) for x in points])
    start, end = k[0], k[-1]
    direction = end - start
    direction = direction / np.linalg.norm(direction)
    offsets = k - start
    residual = offsets - np.outer(offsets @ direction, direction)
    return float(np.max(np.linalg.norm(residual, axis=1)))


def rationalize(x, max_denominator=10 ** 6):
    """Rational approximation of a float vector"""
    return tuple(Fraction(float(c)).limit_denominator(max_denominator) for c in x)


def busemann(x, p):
    """Busemann level log<x, p> of a hyperboloid point relative to a future null vector"""
    return float(np.log(minkowski(x, p)))


def horosphere_height(x, p):
    """Height 1 / <x, p> in any half-space chart sending p to infinity"""
    return float(1.0 / minkowski(x, p))


def min_pairing(alpha, beta, lo=-np.inf, hi=np.inf):
    """Minimum of alpha cosh s + beta sinh s over [lo, hi] and its argument

    With alpha = <u, p>, beta = <v, p> this is the pairing with p along the
    geodesic s -> cosh(s) u + sinh(s) v, so it measures closest approach to
    a point (p timelike) or deepest penetration into horoballs (p null).
    """
    if alpha > abs(beta):
        s = float(np.arctanh(-beta / alpha))
    else:
        s = lo if beta > 0 else hi
    s = float(np.clip(s, lo, hi))
    return float(alpha * np.cosh(s) + beta * np.sinh(s)), s


def boost_from_origin(x):
    """Standard boost taking the origin (1, 0, ..., 0) to the hyperboloid point x"""
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    boost = np.identity(n + 1)
    spatial = x[1:]
    boost[0, 0] = x[0]
    boost[0, 1:] = spatial
    boost[1:, 0] = spatial
    boost[1:, 1:] += np.outer(spatial, spatial) / (1.0 + x[0])
    return boost


def unit_directions(n, count):
    """Deterministic, roughly uniform unit vectors in R^n"""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if n == 3:
        golden = np.pi * (3.0 - np.sqrt(5.0))
        i = np.arange(count)
        z = 1.0 - 2.0 * (i + 0.5) / count
        r = np.sqrt(1.0 - z * z)
        return np.column_stack([r * np.cos(golden * i), r * np.sin(golden * i), z])
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(count, n))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
