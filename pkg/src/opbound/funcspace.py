"""Functions on [0, 1]: sampling, L^p norms, forward differences, moduli of
smoothness, semi-norms and K-functional upper estimates.

Functions are carried as values on a grid plus an optional exact descriptor.
A descriptor is any callable ``x -> ndarray`` that may additionally provide

* ``derivative(r)`` returning another descriptor (raise ``CapabilityError``
  when the derivative does not exist as a function),
* ``integrate(a, b)`` for exact integrals,
* ``breakpoints``: interior points where smoothness drops,
* ``extends_domain``: True when evaluation outside [0, 1] is meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy.special import comb

from .errors import CapabilityError, DomainViolationError, InvalidInputError

DEFAULT_GRID_SIZE = 4097
INF = math.inf
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def as_p(p) -> float:
    """Normalise a p-norm index; accepts numbers >= 1, ``inf`` or the string ``"inf"``."""
    if isinstance(p, str):
        if p.strip().lower() in {"inf", "infinity", "∞"}:
            return INF
        p = float(p)
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise InvalidInputError(f"p must be >= 1 or inf, got {p!r}")
    return p


@dataclass(frozen=True)
class DomainDescriptor:
    d: int = 1
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.d != 1 or not (self.a < self.b) or (self.a, self.b) != (0.0, 1.0):
            raise InvalidInputError("only the unit interval [0, 1] with d = 1 is supported")


UNIT_INTERVAL = DomainDescriptor()


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidInputError("a grid needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise InvalidInputError("grid must start at 0 and end at 1")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidInputError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, size: int = DEFAULT_GRID_SIZE) -> "Grid":
        if size < 2:
            raise InvalidInputError("a grid needs at least two nodes")
        nodes = np.linspace(0.0, 1.0, size)
        return cls(nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.nodes)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    @property
    def spacing(self) -> float:
        if not self.is_uniform:
            raise InvalidInputError("grid is not uniform")
        return 1.0 / (self.size - 1)


_GRID_CACHE: dict[int, Grid] = {}


def uniform_grid(size: int = DEFAULT_GRID_SIZE) -> Grid:
    """Shared uniform grid instance (grids are immutable)."""
    if size not in _GRID_CACHE:
        _GRID_CACHE[size] = Grid.uniform(size)
    return _GRID_CACHE[size]


# --------------------------------------------------------------------------
# exact descriptors


class Polynomial:
    """Polynomial in the power basis, ``coef[i]`` multiplies ``x**i``."""

    breakpoints: tuple = ()
    extends_domain = True

    def __init__(self, coef: Sequence[float], label: str | None = None):
        coef = np.atleast_1d(np.asarray(coef, dtype=float))
        if coef.size == 0:
            coef = np.zeros(1)
        self.coef = coef
        self.label = label or _poly_label(coef)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coef)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coef)
        return int(nz[-1]) if nz.size else 0

    def derivative(self, r: int = 1) -> "Polynomial":
        if r == 0:
            return self
        return Polynomial(np.polynomial.polynomial.polyder(self.coef, r))

    def integrate(self, a: float, b: float) -> float:
        anti = np.polynomial.polynomial.polyint(self.coef)
        pv = np.polynomial.polynomial.polyval
        return float(pv(b, anti) - pv(a, anti))

    def __repr__(self):
        return f"Polynomial({self.label})"


def _poly_label(coef) -> str:
    terms = []
    for i, c in enumerate(coef):
        if c == 0:
            continue
        mono = "1" if i == 0 else ("x" if i == 1 else f"x^{i}")
        terms.append(mono if c == 1 and i else f"{c:g}*{mono}" if i else f"{c:g}")
    return " + ".join(terms) or "0"


class Analytic:
    """Named closed-form function with a finite list of known derivatives."""

    def __init__(
        self,
        label: str,
        fn: Callable,
        derivatives: Sequence[Callable] = (),
        breakpoints: Sequence[float] = (),
        extends_domain: bool = True,
        antiderivative: Callable | None = None,
    ):
        self.label = label
        self._fn = fn
        self._derivatives = tuple(derivatives)
        self.breakpoints = tuple(breakpoints)
        self.extends_domain = extends_domain
        self._antiderivative = antiderivative

    def __call__(self, x):
        return np.asarray(self._fn(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, r: int = 1) -> "Analytic":
        if r == 0:
            return self
        if r > len(self._derivatives):
            raise CapabilityError(f"{self.label} has no classical derivative of order {r}")
        return Analytic(
            f"D^{r}[{self.label}]",
            self._derivatives[r - 1],
            self._derivatives[r:],
            self.breakpoints,
            self.extends_domain,
            antiderivative=None,
        )

    def integrate(self, a: float, b: float) -> float:
        if self._antiderivative is not None:
            F = self._antiderivative
            return float(F(b) - F(a))
        return quad_integral(self, a, b)

    def __repr__(self):
        return f"Analytic({self.label})"


class LinearCombination:
    """Finite linear combination of descriptors."""

    def __init__(self, terms: Sequence[tuple[float, Callable]]):
        self.terms = tuple((float(c), d) for c, d in terms)
        bps = set()
        for _, d in self.terms:
            bps.update(getattr(d, "breakpoints", ()))
        self.breakpoints = tuple(sorted(bps))
        self.extends_domain = all(getattr(d, "extends_domain", False) for _, d in self.terms)
        self.label = " + ".join(f"{c:g}*({getattr(d, 'label', '?')})" for c, d in self.terms)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for c, d in self.terms:
            out = out + c * np.asarray(d(x), dtype=float)
        return out

    def derivative(self, r: int = 1) -> "LinearCombination":
        if r == 0:
            return self
        parts = []
        for c, d in self.terms:
            if not hasattr(d, "derivative"):
                raise CapabilityError("component without derivative")
            parts.append((c, d.derivative(r)))
        return LinearCombination(parts)

    def integrate(self, a: float, b: float) -> float:
        return sum(c * integrate_descriptor(d, a, b) for c, d in self.terms)


def quad_integral(fn: Callable, a: float, b: float) -> float:
    """Adaptive quadrature split at the descriptor's breakpoints."""
    if b <= a:
        return 0.0
    pts = [a] + [q for q in getattr(fn, "breakpoints", ()) if a < q < b] + [b]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = _integrate.quad(
            lambda s: float(fn(np.array([s]))[0]), lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200
        )
        total += val
    return total


def integrate_descriptor(fn: Callable, a: float, b: float) -> float:
    if hasattr(fn, "integrate"):
        return float(fn.integrate(a, b))
    return quad_integral(fn, a, b)


# --------------------------------------------------------------------------
# sampled functions


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray
    exact: Callable | None = None
    label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise InvalidInputError(
                f"values have shape {values.shape}, grid has {self.grid.size} nodes"
            )
        if self.exact is not None:
            ref = np.asarray(self.exact(self.grid.nodes), dtype=float)
            tol = 1e-12 * max(1.0, float(np.max(np.abs(ref))))
            if np.max(np.abs(ref - values)) > tol:
                raise InvalidInputError("samples disagree with the exact descriptor")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.label and self.exact is not None:
            object.__setattr__(self, "label", getattr(self.exact, "label", ""))

    @classmethod
    def from_exact(cls, exact: Callable, grid: Grid | None = None, label: str = "") -> "SampledFunction":
        grid = grid or uniform_grid()
        values = np.array(np.broadcast_to(exact(grid.nodes), (grid.size,)), dtype=float)
        values.setflags(write=False)
        # samples come from the descriptor itself, so the consistency check is skipped
        obj = object.__new__(cls)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", values)
        object.__setattr__(obj, "exact", exact)
        object.__setattr__(obj, "label", label or getattr(exact, "label", ""))
        return obj

    @classmethod
    def from_values(cls, values, grid: Grid | None = None, label: str = "") -> "SampledFunction":
        values = np.asarray(values, dtype=float)
        grid = grid or uniform_grid(values.size)
        return cls(grid, values, None, label)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.exact is not None:
            return np.asarray(self.exact(x), dtype=float)
        if np.any((x < 0.0) | (x > 1.0)):
            raise DomainViolationError("sampled function evaluated outside [0, 1]")
        return np.interp(x, self.grid.nodes, self.values)

    def integral(self, a: float, b: float) -> float:
        """Integral over [a, b] (exact descriptor when present, else trapezoid on the grid)."""
        if not 0.0 <= a <= b <= 1.0:
            raise DomainViolationError(f"interval [{a}, {b}] not inside [0, 1]")
        if self.exact is not None:
            return integrate_descriptor(self.exact, a, b)
        nodes = self.grid.nodes
        inside = (nodes > a) & (nodes < b)
        xs = np.concatenate(([a], nodes[inside], [b]))
        return float(np.trapezoid(self(xs), xs))

    @property
    def has_derivatives(self) -> bool:
        return self.exact is not None and hasattr(self.exact, "derivative")

    def _combine(self, other: "SampledFunction", sign: float) -> "SampledFunction":
        if other.grid is not self.grid and not np.array_equal(other.grid.nodes, self.grid.nodes):
            raise InvalidInputError("functions live on different grids")
        exact = None
        if self.exact is not None and other.exact is not None:
            exact = LinearCombination([(1.0, self.exact), (sign, other.exact)])
        values = self.values + sign * other.values
        if exact is not None:
            # keep the consistency invariant exact to rounding
            values = np.asarray(exact(self.grid.nodes), dtype=float)
        return SampledFunction(self.grid, values, exact, "")

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __mul__(self, c: float) -> "SampledFunction":
        c = float(c)
        exact = None if self.exact is None else LinearCombination([(c, self.exact)])
        values = c * self.values if exact is None else np.asarray(exact(self.grid.nodes), dtype=float)
        return SampledFunction(self.grid, values, exact, f"{c:g}*{self.label}")

    __rmul__ = __mul__


def zero_function(grid: Grid | None = None) -> SampledFunction:
    return SampledFunction.from_exact(Polynomial([0.0], label="0"), grid)


# --------------------------------------------------------------------------
# norms and differences


def lp_norm(values: np.ndarray, nodes: np.ndarray, p) -> float:
    """Max-norm or composite trapezoid (∫|v|^p)^(1/p) on the given nodes."""
    p = as_p(p)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InvalidInputError("empty sample set")
    a = np.abs(values)
    if p == INF:
        return float(np.max(a))
    if values.size == 1:
        return 0.0
    if p == 1.0:
        return float(np.trapezoid(a, nodes))
    return float(np.trapezoid(a**p, nodes) ** (1.0 / p))


def norm(f: SampledFunction, p=INF) -> float:
    if f.values.size == 0:
        raise InvalidInputError("empty grid")
    return lp_norm(f.values, f.grid.nodes, p)


def _difference_weights(r: int) -> np.ndarray:
    l = np.arange(r + 1)
    return ((-1.0) ** (r - l)) * comb(r, l)


def forward_difference(f: SampledFunction, h: float, r: int, x) -> np.ndarray | float:
    """r-th forward difference with step h at x (scalar or array)."""
    if r < 0:
        raise InvalidInputError("difference order must be non-negative")
    if h <= 0:
        raise InvalidInputError("step must be positive")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs + r * h > 1.0 + 1e-14):
        raise DomainViolationError("x + r*h leaves [0, 1]")
    w = _difference_weights(r)
    pts = np.clip(xs[..., None] + h * np.arange(r + 1), 0.0, 1.0)
    out = np.asarray(f(pts.reshape(-1)), dtype=float).reshape(pts.shape) @ w
    return float(out) if np.ndim(x) == 0 else out


def _aligned_difference_norm(values: np.ndarray, j: int, r: int, dx: float, p: float) -> float:
    n = values.size
    m = n - r * j
    if m <= 0:
        return 0.0
    w = _difference_weights(r)
    diff = np.zeros(m)
    for l in range(r + 1):
        diff += w[l] * values[l * j : l * j + m]
    a = np.abs(diff)
    if p == INF:
        return float(a.max())
    if m == 1:
        return 0.0
    return float(np.trapezoid(a**p, dx=dx) ** (1.0 / p))


def _difference_norm(f: SampledFunction, h: float, r: int, p: float) -> float:
    """p-norm of x -> Δ_h^r f(x) over Ω(rh) = [0, 1 - rh], arbitrary h."""
    right = 1.0 - r * h
    if right < 0.0:
        return 0.0
    nodes = f.grid.nodes
    xs = nodes[nodes < right - 1e-15]
    xs = np.append(xs, right)
    w = _difference_weights(r)
    pts = np.minimum(xs[:, None] + h * np.arange(r + 1), 1.0)
    vals = np.asarray(f(pts.reshape(-1)), dtype=float).reshape(pts.shape) @ w
    return lp_norm(vals, xs, p)


def _golden_max(phi: Callable[[float], float], lo: float, hi: float, iters: int = 40) -> float:
    if hi <= lo:
        return phi(hi)
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    best = max(fc, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = phi(d)
        best = max(best, fc, fd)
        if b - a < 1e-14:
            break
    return best


def modulus_of_smoothness(f: SampledFunction, r: int, t: float, p=INF, refine: bool = True) -> float:
    """r-th modulus of smoothness ω_{r,p}(f, t) on [0, 1].

    Steps h are the grid multiples j*Δx <= t (exact on grid-aligned data);
    when t is not a grid multiple the end step h = t is added, and with an exact
    descriptor the best cell is refined by golden-section search.
    """
    p = as_p(p)
    if not t > 0:
        raise InvalidInputError("t must be positive")
    if r < 0:
        raise InvalidInputError("order must be non-negative")
    if r == 0:
        return norm(f, p)
    h_max = min(t, 1.0 / r)
    grid = f.grid
    best = 0.0
    best_h = 0.0
    jmax = 0
    if grid.is_uniform:
        dx = grid.spacing
        jmax = min(int(math.floor(h_max / dx * (1 + 1e-12))), (grid.size - 1) // r)
        for j in range(1, jmax + 1):
            v = _aligned_difference_norm(f.values, j, r, dx, p)
            if v > best:
                best, best_h = v, j * dx
        h_lo = jmax * dx
    else:
        # non-uniform grids: a fixed ladder of steps
        for h in np.linspace(h_max / 64, h_max, 64):
            v = _difference_norm(f, h, r, p)
            if v > best:
                best, best_h = v, h
        h_lo = h_max
        dx = h_max / 64

    def phi(h: float) -> float:
        return _difference_norm(f, h, r, p)

    if h_max - h_lo > 1e-12 * max(h_max, 1e-300):
        best = max(best, phi(h_max))
        if f.exact is not None and refine:
            best = max(best, _golden_max(phi, max(h_lo, h_max * 1e-6), h_max))
    if f.exact is not None and refine and best_h > 0.0:
        lo = max(best_h - dx, best_h * 0.5)
        hi = min(best_h + dx, h_max)
        best = max(best, _golden_max(phi, lo, hi))
    return best


# --------------------------------------------------------------------------
# derivatives and semi-norms


def _fd_derivative(fn: Callable, x: np.ndarray, r: int, extends: bool) -> np.ndarray:
    """Second-order central r-th difference quotient with step eps^(1/(r+2))."""
    h = np.finfo(float).eps ** (1.0 / (r + 2))
    centre = np.asarray(x, dtype=float)
    if not extends:
        centre = np.clip(centre, r * h / 2, 1.0 - r * h / 2)
    offsets = (r / 2.0 - np.arange(r + 1)) * h
    w = comb(r, np.arange(r + 1)) * (-1.0) ** np.arange(r + 1)
    vals = np.asarray(fn((centre[:, None] + offsets).reshape(-1)), dtype=float).reshape(-1, r + 1)
    return vals @ w / h**r


def derivative_samples(f: SampledFunction, r: int, allow_fd: bool = False) -> tuple[np.ndarray, str]:
    """Samples of D^r f on f's grid together with the method used ("exact" or "finite-difference")."""
    if r < 0:
        raise InvalidInputError("order must be non-negative")
    if r == 0:
        return f.values, "exact"
    if f.exact is not None and hasattr(f.exact, "derivative"):
        try:
            d = f.exact.derivative(r)
            return np.asarray(d(f.grid.nodes), dtype=float), "exact"
        except CapabilityError:
            if not allow_fd:
                raise
    elif not allow_fd:
        raise CapabilityError("no exact derivative available; pass allow_fd=True for finite differences")
    if f.exact is not None:
        ext = bool(getattr(f.exact, "extends_domain", False))
        return _fd_derivative(f.exact, f.grid.nodes, r, ext), "finite-difference"
    vals = f.values
    for _ in range(r):
        vals = np.gradient(vals, f.grid.nodes, edge_order=2)
    return vals, "finite-difference"


def seminorm(f: SampledFunction, r: int, p=INF, allow_fd: bool = False) -> float:
    """|f|_{p,r} = ||D^r f||_p."""
    if r < 1:
        raise InvalidInputError("semi-norm order must be positive")
    vals, _ = derivative_samples(f, r, allow_fd)
    return lp_norm(vals, f.grid.nodes, p)


def k_functional_upper(
    f: SampledFunction, r: int, t: float, p=INF, candidates: Sequence[SampledFunction] = ()
) -> tuple[float, int]:
    """Upper estimate of K_{r,p}(f, t^r) as a minimum over explicit candidates.

    Returns the value and the index of the minimising candidate.
    """
    if not candidates:
        raise InvalidInputError("candidate list is empty")
    if not t > 0:
        raise InvalidInputError("t must be positive")
    tr = t**r
    vals = [norm(f - g, p) + tr * seminorm(g, r, p) for g in candidates]
    idx = int(np.argmin(vals))
    return float(vals[idx]), idx


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    margin: float
    holds: bool


def check_mos_kfunc_inequality(
    f: SampledFunction, g: SampledFunction, r: int, t: float, p=INF, d: int = 1, slack: float = 1e-9
) -> BoundCheck:
    """ω_{r,p}(f,t) <= 2^r ||f-g||_p + d^{r/2} t^r |g|_{p,r}."""
    lhs = modulus_of_smoothness(f, r, t, p)
    rhs = 2.0**r * norm(f - g, p) + d ** (r / 2.0) * t**r * seminorm(g, r, p)
    margin = rhs - lhs
    return BoundCheck(lhs, rhs, margin, margin >= -slack)
