"""Positive finite-rank operators T f = Σ_k α_k(f) e_k on C[0, 1] / L^p[0, 1].

The four classical instances are built here: Bernstein, Kantorovič,
Schoenberg's variation diminishing spline operator and the integral
Schoenberg operator.  Range elements are exact descriptors (Bernstein
polynomials or splines), so derivatives of T f are computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import comb

from .errors import CapabilityError, InvalidInputError
from .funcspace import INF, SampledFunction, as_p, lp_norm, uniform_grid
from .splines import (
    KnotSequence,
    SplineCoefficients,
    basis_integrals,
    basis_matrix,
    greville_nodes,
    min_mesh_gauge,
)


# --------------------------------------------------------------------------
# Bernstein polynomials


def bernstein_matrix(n: int, x) -> np.ndarray:
    """b_{k,n}(x) = C(n,k) x^k (1-x)^(n-k); shape (len(x), n+1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
    k = np.arange(n + 1)
    return comb(n, k) * x**k * (1.0 - x) ** (n - k)


class BernsteinPolynomial:
    """Polynomial Σ c_k b_{k,n} given by its Bernstein coefficients."""

    breakpoints: tuple = ()
    extends_domain = True

    def __init__(self, coef: Sequence[float], label: str | None = None):
        self.coef = np.atleast_1d(np.asarray(coef, dtype=float))
        self.label = label or f"bernstein-poly(deg={self.degree})"

    @property
    def degree(self) -> int:
        return self.coef.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (bernstein_matrix(self.degree, x.reshape(-1)) @ self.coef).reshape(x.shape)

    def derivative(self, r: int = 1) -> "BernsteinPolynomial":
        c = self.coef
        for _ in range(r):
            n = c.size - 1
            c = n * np.diff(c) if n > 0 else np.zeros(1)
        return BernsteinPolynomial(c, f"D^{r}[{self.label}]" if r else self.label)

    def integrate(self, a: float, b: float) -> float:
        gx, gw = np.polynomial.legendre.leggauss(self.degree // 2 + 2)
        half, mid = (b - a) / 2.0, (b + a) / 2.0
        return float(half * gw @ self(mid + half * gx))

    def __repr__(self):
        return f"BernsteinPolynomial(deg={self.degree})"


class BernsteinBasis:
    kind = "bernstein"
    breakpoints: tuple = ()

    def __init__(self, n: int):
        self.n = n

    @property
    def rank(self) -> int:
        return self.n + 1

    @property
    def polynomial_degree(self) -> int:
        return self.n

    def evaluate(self, x) -> np.ndarray:
        return bernstein_matrix(self.n, x)

    def element(self, coef) -> BernsteinPolynomial:
        return BernsteinPolynomial(coef)

    def integrals(self, a: float, b: float) -> np.ndarray:
        gx, gw = np.polynomial.legendre.leggauss(self.n // 2 + 2)
        half, mid = (b - a) / 2.0, (b + a) / 2.0
        return half * gw @ self.evaluate(mid + half * gx)


class BSplineBasis:
    kind = "bspline"

    def __init__(self, knots: KnotSequence):
        self.knots = knots

    @property
    def rank(self) -> int:
        return self.knots.dimension

    @property
    def polynomial_degree(self) -> int:
        return self.knots.degree

    @property
    def breakpoints(self) -> tuple:
        return tuple(self.knots.interior)

    def evaluate(self, x) -> np.ndarray:
        return basis_matrix(self.knots, x)

    def element(self, coef) -> SplineCoefficients:
        return SplineCoefficients(self.knots, coef)

    def integrals(self, a: float, b: float) -> np.ndarray:
        return basis_integrals(self.knots, a, b)


# --------------------------------------------------------------------------
# functionals and operators


@dataclass(frozen=True)
class Functional:
    """Point evaluation at ``node`` or the average over [a, b]."""

    kind: str
    node: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point", "average"):
            raise InvalidInputError(f"unknown functional kind {self.kind!r}")
        if self.kind == "average" and not (0.0 <= self.a < self.b <= 1.0):
            raise InvalidInputError("average functional needs 0 <= a < b <= 1")
        if self.kind == "point" and not 0.0 <= self.node <= 1.0:
            raise InvalidInputError("point functional outside [0, 1]")

    @classmethod
    def point(cls, node: float) -> "Functional":
        return cls("point", node=float(node))

    @classmethod
    def average(cls, a: float, b: float) -> "Functional":
        return cls("average", a=float(a), b=float(b))

    def __call__(self, f: SampledFunction) -> float:
        if self.kind == "point":
            return float(np.asarray(f(np.array([self.node])))[0])
        return f.integral(self.a, self.b) / (self.b - self.a)


@dataclass(eq=False)
class FiniteRankOperator:
    name: str
    basis: BernsteinBasis | BSplineBasis
    functionals: tuple[Functional, ...]
    descriptor: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.functionals) != self.basis.rank:
            raise InvalidInputError("number of functionals must equal the basis rank")

    @property
    def rank(self) -> int:
        return self.basis.rank

    @property
    def knots(self) -> KnotSequence | None:
        return getattr(self.basis, "knots", None)

    def coefficients(self, f: SampledFunction) -> np.ndarray:
        fun = self.functionals
        if all(a.kind == "point" for a in fun):
            nodes = np.array([a.node for a in fun])
            return np.asarray(f(nodes), dtype=float)
        return np.array([a(f) for a in fun])

    def element(self, coef):
        return self.basis.element(coef)

    def apply(self, f: SampledFunction):
        """Return (range element, T f sampled on f's grid)."""
        elem = self.element(self.coefficients(f))
        return elem, SampledFunction.from_exact(elem, f.grid, label=f"{self.name}[{f.label}]")

    def __call__(self, f: SampledFunction) -> SampledFunction:
        return self.apply(f)[1]

    def __repr__(self):
        return f"FiniteRankOperator({self.descriptor})"


def apply(T: FiniteRankOperator, f: SampledFunction):
    return T.apply(f)


def collocation_matrix(T: FiniteRankOperator) -> np.ndarray:
    """A[i, j] = α_i(e_j); T acts on range coefficients as c -> A c."""
    fun = T.functionals
    if all(a.kind == "point" for a in fun):
        return T.basis.evaluate(np.array([a.node for a in fun]))
    rows = []
    for a in fun:
        if a.kind == "point":
            rows.append(T.basis.evaluate(np.array([a.node]))[0])
        else:
            rows.append(T.basis.integrals(a.a, a.b) / (a.b - a.a))
    return np.array(rows)


def make_bernstein(n: int) -> FiniteRankOperator:
    if int(n) != n or n < 1:
        raise InvalidInputError("Bernstein order must be a positive integer")
    n = int(n)
    fun = tuple(Functional.point(k / n) for k in range(n + 1))
    return FiniteRankOperator("bernstein", BernsteinBasis(n), fun, f"bernstein:n={n}", {"n": n})


def bernstein_eigenvalues_exact(n: int) -> np.ndarray:
    """λ_{k,n} = n!/((n-k)! n^k) = Π_{i<k} (n-i)/n, k = 0..n."""
    if n < 1:
        raise InvalidInputError("n must be positive")
    factors = np.concatenate(([1.0], (n - np.arange(n)) / n))
    return np.cumprod(factors)


def make_kantorovich(n: int) -> FiniteRankOperator:
    if int(n) != n or n < 0:
        raise InvalidInputError("Kantorovič order must be a non-negative integer")
    n = int(n)
    fun = tuple(Functional.average(k / (n + 1), (k + 1) / (n + 1)) for k in range(n + 1))
    return FiniteRankOperator("kantorovich", BernsteinBasis(n), fun, f"kantorovich:n={n}", {"n": n})


def _knots_tag(knots: KnotSequence) -> str:
    if np.allclose(knots.interior, np.arange(1, knots.n) / knots.n, rtol=0, atol=1e-15):
        return f"uniform:{knots.n}"
    return "[" + ",".join(f"{v:.17g}" for v in knots.interior) + "]"


def make_schoenberg(knots: KnotSequence, descriptor: str | None = None) -> FiniteRankOperator:
    if knots.degree < 1:
        raise InvalidInputError("Schoenberg operator needs degree >= 1")
    xi = greville_nodes(knots)
    fun = tuple(Functional.point(v) for v in xi)
    desc = descriptor or f"schoenberg:k={knots.degree},knots={_knots_tag(knots)}"
    return FiniteRankOperator(
        "schoenberg", BSplineBasis(knots), fun, desc, {"k": knots.degree, "n": knots.n}
    )


def make_integral_schoenberg(knots: KnotSequence, descriptor: str | None = None) -> FiniteRankOperator:
    if knots.degree < 1:
        raise InvalidInputError("integral Schoenberg operator needs degree >= 1")
    xi = greville_nodes(knots.with_degree(knots.degree + 1))
    fun = tuple(Functional.average(a, b) for a, b in zip(xi[:-1], xi[1:]))
    desc = descriptor or f"integral-schoenberg:k={knots.degree},knots={_knots_tag(knots)}"
    return FiniteRankOperator(
        "integral-schoenberg", BSplineBasis(knots), fun, desc, {"k": knots.degree, "n": knots.n}
    )


def integral_schoenberg_mspline_matrix(knots: KnotSequence) -> np.ndarray:
    """(∫_{ξ_{i-1,k+1}}^{ξ_{i,k+1}} M_{j,k})_{ij} with unit-integral B-splines M."""
    xi = greville_nodes(knots.with_degree(knots.degree + 1))
    scale = np.diff(xi)
    rows = [basis_integrals(knots, a, b) / scale for a, b in zip(xi[:-1], xi[1:])]
    return np.array(rows)


# --------------------------------------------------------------------------
# operator norm of D^r restricted to the range


@dataclass(frozen=True)
class RangeDerivativeNorm:
    numeric: float
    analytic: float | None
    method: str

    def value(self, provenance: str = "analytic") -> tuple[float, str]:
        """The number to use in bounds and its provenance tag."""
        if provenance == "analytic" and self.analytic is not None:
            return self.analytic, "analytic"
        return self.numeric, "numeric"


def analytic_range_derivative_bound(T: FiniteRankOperator, r: int, d_const: float | None = None) -> float | None:
    """Closed-form bounds available for the operator, else None."""
    if T.name == "bernstein":
        n = T.params["n"]
        if r > n:
            return 0.0
        return 2.0**r * math.factorial(n) / math.factorial(n - r)
    if T.name == "kantorovich" and r == 1:
        n = T.params["n"]
        return 4.0 * (n * n + n)
    if T.name == "integral-schoenberg" and r == 1 and d_const is not None:
        k = T.params["k"]
        return (2.0 * (k + 1) / min_mesh_gauge(T.knots)) ** 2 * float(d_const)
    return None


def _derivative_columns(T: FiniteRankOperator, r: int, x: np.ndarray) -> np.ndarray:
    eye = np.eye(T.rank)
    return np.column_stack([T.element(e).derivative(r)(x) for e in eye])


def _lp_candidates(T: FiniteRankOperator, r: int) -> np.ndarray:
    deg = T.basis.polynomial_degree - r
    if T.basis.kind == "bernstein":
        inner = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, 17))
        return np.unique(np.concatenate(([0.0, 1.0], inner)))
    breaks = np.concatenate(([0.0], T.basis.breakpoints, [1.0]))
    if deg <= 1:
        return breaks
    per = np.linspace(0.0, 1.0, 6)[1:-1]
    inner = (breaks[:-1, None] + np.diff(breaks)[:, None] * per).reshape(-1)
    return np.unique(np.concatenate((breaks, inner)))


def range_derivative_norm(
    T: FiniteRankOperator,
    r: int,
    p=INF,
    *,
    d_const: float | None = None,
    grid_size: int = 2049,
    n_random: int = 64,
    seed: int = 0,
) -> RangeDerivativeNorm:
    """Estimate sup ||D^r s||_p / ||s||_p over s in im(T).

    Search: random, coordinate and alternating-sign coefficient vectors, then a
    Powell (coordinate-direction) refinement of the best one.  For p = inf an
    additional linear-programming stage maximises D^r s(x0) subject to
    |s| <= 1 on the check grid, for candidate points x0.  The result is the
    largest ratio found.
    """
    p = as_p(p)
    if r < 1:
        raise InvalidInputError("derivative order must be positive")
    analytic = analytic_range_derivative_bound(T, r, d_const)
    if r > T.basis.polynomial_degree:
        return RangeDerivativeNorm(0.0, analytic, "annihilated")
    key = (T.descriptor, tuple(getattr(T.knots, "breaks", ()) if T.knots is not None else ()), r, p, grid_size, n_random, seed)
    numeric, method = _numeric_range_norm_cached(key, T, r, p, grid_size, n_random, seed)
    return RangeDerivativeNorm(numeric, analytic, method)


_RANGE_CACHE: dict = {}


def _numeric_range_norm_cached(key, T, r, p, grid_size, n_random, seed):
    if key not in _RANGE_CACHE:
        _RANGE_CACHE[key] = _numeric_range_norm(T, r, p, grid_size, n_random, seed)
    return _RANGE_CACHE[key]


def _numeric_range_norm(T, r, p, grid_size, n_random, seed):
    x = np.unique(np.concatenate((np.linspace(0.0, 1.0, grid_size), T.basis.breakpoints)))
    B = T.basis.evaluate(x)
    D = _derivative_columns(T, r, x)
    m = T.rank

    def ratio(c):
        den = lp_norm(B @ c, x, p)
        if den <= 1e-300:
            return 0.0
        return lp_norm(D @ c, x, p) / den

    rng = np.random.default_rng(seed)
    starts = list(np.eye(m))
    starts.append((-1.0) ** np.arange(m))
    starts.extend(rng.standard_normal((n_random, m)))
    scores = [ratio(c) for c in starts]
    best_i = int(np.argmax(scores))
    best, best_c = scores[best_i], starts[best_i]
    res = minimize(lambda c: -ratio(c), best_c, method="Powell", options={"maxiter": 20 * m, "xtol": 1e-6, "ftol": 1e-10})
    best = max(best, -float(res.fun))
    method = "search"
    if p == INF:
        A_ub = np.vstack((B, -B))
        b_ub = np.ones(2 * x.size)
        bounds = [(None, None)] * m
        for x0 in _lp_candidates(T, r):
            a = _derivative_columns(T, r, np.array([x0]))[0]
            sol = linprog(-a, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
            if sol.status == 0:
                best = max(best, -float(sol.fun))
        method = "search+lp"
    return float(best), method


# --------------------------------------------------------------------------
# commutation relations


def check_kantorovich_commutation(n: int, f: SampledFunction) -> float:
    """||K_n(Df) - D(B_{n+1} f)||_inf on f's grid."""
    if not f.has_derivatives:
        raise CapabilityError("commutation check needs an exactly differentiable function")
    df = SampledFunction.from_exact(f.exact.derivative(1), f.grid)
    left, _ = make_kantorovich(n).apply(df)
    right = make_bernstein(n + 1).apply(f)[0].derivative(1)
    x = f.grid.nodes
    return float(np.max(np.abs(left(x) - right(x))))


def check_schoenberg_commutation(knots: KnotSequence, f: SampledFunction) -> float:
    """||D(S_{Δ,k} f) - V_{Δ,k-1}(Df)||_inf on f's grid."""
    if knots.degree < 2:
        raise CapabilityError("needs degree k >= 2 so that V of degree k-1 exists")
    if not f.has_derivatives:
        raise CapabilityError("commutation check needs an exactly differentiable function")
    df = SampledFunction.from_exact(f.exact.derivative(1), f.grid)
    left = make_schoenberg(knots).apply(f)[0].derivative(1)
    right, _ = make_integral_schoenberg(knots.with_degree(knots.degree - 1)).apply(df)
    x = f.grid.nodes
    return float(np.max(np.abs(left(x) - right(x))))


# --------------------------------------------------------------------------
# descriptor strings: bernstein:n=8, kantorovich:n=8,
# schoenberg:k=3,knots=uniform:8, integral-schoenberg:k=3,knots=<file>

OPERATOR_NAMES = ("bernstein", "kantorovich", "schoenberg", "integral-schoenberg")


def parse_operator(descriptor: str) -> FiniteRankOperator:
    from .generators import generate_knots  # knot specs live with the generators

    name, _, rest = descriptor.strip().partition(":")
    if name not in OPERATOR_NAMES:
        raise InvalidInputError(f"unknown operator {name!r}")
    params: dict[str, str] = {}
    for part in filter(None, rest.split(",")):
        if "=" not in part:
            raise InvalidInputError(f"malformed operator parameter {part!r}")
        key, value = part.split("=", 1)
        params[key.strip()] = value.strip()
    try:
        if name in ("bernstein", "kantorovich"):
            n = int(params["n"])
            return make_bernstein(n) if name == "bernstein" else make_kantorovich(n)
        k = int(params["k"])
        knots = generate_knots(params["knots"], k)
    except KeyError as exc:
        raise InvalidInputError(f"operator {name!r} needs parameter {exc.args[0]!r}") from exc
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(str(exc)) from exc
    maker = make_schoenberg if name == "schoenberg" else make_integral_schoenberg
    return maker(knots, descriptor=descriptor.strip())
