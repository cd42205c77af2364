"""Clamped knot sequences, B-spline bases and spline range elements on [0, 1].

Indexing follows the usual extended-knot convention: a sequence of degree k
with n subintervals has knots x_{-k} = ... = x_0 = 0 < x_1 < ... < x_{n-1} <
x_n = ... = x_{n+k} = 1, and n + k B-splines N_{j,k}, j = -k, ..., n-1.  In
the arrays below the B-spline N_{j,k} lives in column j + k.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapabilityError, InvalidInputError


class KnotSequence:
    """Extended clamped knot sequence Δ_n of degree k."""

    def __init__(self, degree: int, interior: Sequence[float]):
        if int(degree) != degree or degree < 0:
            raise InvalidInputError("degree must be a non-negative integer")
        interior = np.asarray(interior, dtype=float).reshape(-1)
        breaks = np.concatenate(([0.0], interior, [1.0]))
        if np.any(np.diff(breaks) <= 0):
            raise InvalidInputError("interior knots must be simple and strictly inside (0, 1)")
        self.degree = int(degree)
        self.n = breaks.size - 1
        self.breaks = breaks
        self.breaks.setflags(write=False)
        k = self.degree
        self.knots = np.concatenate((np.zeros(k), breaks, np.ones(k)))
        self.knots.setflags(write=False)

    @classmethod
    def uniform(cls, degree: int, n: int) -> "KnotSequence":
        if n < 1:
            raise InvalidInputError("need at least one subinterval")
        return cls(degree, np.arange(1, n) / n)

    @classmethod
    def from_full(cls, knots: Sequence[float], degree: int) -> "KnotSequence":
        """Build from the complete extended vector (length n + 2k + 1)."""
        knots = np.asarray(knots, dtype=float)
        k = degree
        if knots.size < 2 * k + 2:
            raise InvalidInputError("knot vector too short for the degree")
        if np.any(knots[: k + 1] != 0.0) or np.any(knots[-k - 1 :] != 1.0):
            raise InvalidInputError("knot vector must be clamped at 0 and 1")
        return cls(k, knots[k + 1 : knots.size - k - 1])

    @property
    def interior(self) -> np.ndarray:
        return self.breaks[1:-1]

    @property
    def dimension(self) -> int:
        """Number of B-splines, n + k."""
        return self.n + self.degree

    def x(self, j: int) -> float:
        """Knot x_j, j = -k, ..., n + k."""
        return float(self.knots[j + self.degree])

    def with_degree(self, degree: int) -> "KnotSequence":
        return KnotSequence(degree, self.interior)

    def __eq__(self, other):
        return (
            isinstance(other, KnotSequence)
            and other.degree == self.degree
            and np.array_equal(other.breaks, self.breaks)
        )

    def __hash__(self):
        return hash((self.degree, self.breaks.tobytes()))

    def __repr__(self):
        return f"KnotSequence(k={self.degree}, n={self.n})"


def greville_nodes(knots: KnotSequence) -> np.ndarray:
    """ξ_{j,k} = (x_{j+1} + ... + x_{j+k}) / k for j = -k, ..., n-1."""
    k = knots.degree
    if k < 1:
        raise InvalidInputError("Greville nodes need degree >= 1")
    t = knots.knots
    csum = np.concatenate(([0.0], np.cumsum(t)))
    i = np.arange(knots.dimension)
    xi = (csum[i + k + 1] - csum[i + 1]) / k
    xi[0], xi[-1] = 0.0, 1.0
    return xi


def _span_index(knots: KnotSequence, x: np.ndarray) -> np.ndarray:
    t = knots.knots
    k = knots.degree
    idx = np.searchsorted(t, x, side="right") - 1
    # the closed right end belongs to the last non-degenerate span
    return np.clip(idx, k, k + knots.n - 1)


def basis_matrix(knots: KnotSequence, x) -> np.ndarray:
    """All B-splines N_{j,k} at the points x; shape (len(x), n + k).

    Cox–de Boor recurrence; points outside [0, 1] give zero rows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = knots.knots
    k = knots.degree
    nspan = t.size - 1
    inside = (x >= 0.0) & (x <= 1.0)
    B = np.zeros((x.size, nspan))
    span = _span_index(knots, x)
    rows = np.flatnonzero(inside)
    B[rows, span[rows]] = 1.0
    xc = x[:, None]
    for p in range(1, k + 1):
        m = nspan - p
        i = np.arange(m)
        d1 = t[i + p] - t[i]
        d2 = t[i + p + 1] - t[i + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(d1 > 0, (xc - t[i]) / np.where(d1 > 0, d1, 1.0), 0.0)
            b = np.where(d2 > 0, (t[i + p + 1] - xc) / np.where(d2 > 0, d2, 1.0), 0.0)
        B = a * B[:, :m] + b * B[:, 1 : m + 1]
    return B


def bspline_eval(knots: KnotSequence, j: int, x):
    """N_{j,k}(x) for -k <= j <= n-1."""
    k = knots.degree
    if not -k <= j <= knots.n - 1:
        raise InvalidInputError(f"B-spline index {j} outside [-{k}, {knots.n - 1}]")
    out = basis_matrix(knots, x)[:, j + k]
    return float(out[0]) if np.ndim(x) == 0 else out


def mspline_scale(knots: KnotSequence) -> np.ndarray:
    """ξ_{j,k+1} - ξ_{j-1,k+1} = (x_{j+k+1} - x_j)/(k+1) for every j."""
    xi = greville_nodes(knots.with_degree(knots.degree + 1))
    return np.diff(xi)


def normalized_mspline_eval(knots: KnotSequence, j: int, x):
    """M_{j,k} = N_{j,k} / (ξ_{j,k+1} - ξ_{j-1,k+1}), which has unit integral."""
    vals = bspline_eval(knots, j, x)
    return vals / mspline_scale(knots)[j + knots.degree]


def min_mesh_gauge(knots: KnotSequence) -> float:
    """|Δ|_min: smallest gap between consecutive breakpoints x_0, ..., x_n."""
    return float(np.min(np.diff(knots.breaks)))


def _gauss_panels(knots: KnotSequence, a: float, b: float, order: int):
    """Gauss–Legendre nodes/weights on [a, b] with one panel per knot span."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    cuts = np.concatenate(([a], knots.breaks[(knots.breaks > a) & (knots.breaks < b)], [b]))
    lo, hi = cuts[:-1], cuts[1:]
    half = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0
    nodes = (mid[:, None] + half[:, None] * gx).reshape(-1)
    weights = (half[:, None] * gw).reshape(-1)
    return nodes, weights


def basis_integrals(knots: KnotSequence, a: float, b: float) -> np.ndarray:
    """∫_a^b N_{j,k} for every j, exact to rounding (panel Gauss–Legendre)."""
    if b <= a:
        return np.zeros(knots.dimension)
    nodes, weights = _gauss_panels(knots, a, b, knots.degree + 2)
    return weights @ basis_matrix(knots, nodes)


class SplineCoefficients:
    """Spline s = Σ_j c_j N_{j,k} over a knot sequence; an exact function descriptor."""

    extends_domain = False

    def __init__(self, knots: KnotSequence, coef: Sequence[float], label: str | None = None):
        coef = np.asarray(coef, dtype=float).reshape(-1)
        if coef.size != knots.dimension:
            raise InvalidInputError(f"expected {knots.dimension} coefficients, got {coef.size}")
        self.knots = knots
        self.coef = coef
        self.label = label or f"spline(k={knots.degree}, n={knots.n})"

    @property
    def breakpoints(self) -> tuple:
        return tuple(self.knots.interior)

    @property
    def degree(self) -> int:
        return self.knots.degree

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = basis_matrix(self.knots, x.reshape(-1)) @ self.coef
        return out.reshape(x.shape)

    def derivative(self, r: int = 1) -> "SplineCoefficients":
        s = self
        for _ in range(r):
            s = spline_derivative(s)
        return s

    def integrate(self, a: float, b: float) -> float:
        return float(basis_integrals(self.knots, a, b) @ self.coef)

    def __add__(self, other: "SplineCoefficients") -> "SplineCoefficients":
        if other.knots != self.knots:
            raise InvalidInputError("splines on different knot sequences")
        return SplineCoefficients(self.knots, self.coef + other.coef)

    def __mul__(self, c: float) -> "SplineCoefficients":
        return SplineCoefficients(self.knots, float(c) * self.coef)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SplineCoefficients(k={self.degree}, n={self.knots.n})"


def spline_derivative(s: SplineCoefficients) -> SplineCoefficients:
    """Exact derivative as a spline of degree k-1 on the same breakpoints."""
    k = s.knots.degree
    if k < 1:
        raise CapabilityError("derivative of a piecewise constant spline is a jump measure")
    t = s.knots.knots
    c = s.coef
    i = np.arange(1, c.size)
    d = k * (c[i] - c[i - 1]) / (t[i + k] - t[i])
    return SplineCoefficients(s.knots.with_degree(k - 1), d, f"D[{s.label}]")


# --------------------------------------------------------------------------
# text format: header "k=<degree> n=<interior count>", then one real per line


def format_knots(knots: KnotSequence, full: bool = False) -> str:
    lines = [f"k={knots.degree} n={knots.n}"]
    lines += [repr(float(v)) for v in (knots.knots if full else knots.interior)]
    return "\n".join(lines) + "\n"


def parse_knots(text: str) -> KnotSequence:
    """Parse the knot text format.

    The body lists either the n-1 interior knots or the full extended vector
    of n + 2k + 1 knots.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise InvalidInputError("empty knot file")
    header = dict(part.split("=", 1) for part in lines[0].split())
    try:
        k, n = int(header["k"]), int(header["n"])
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"bad knot header {lines[0]!r}") from exc
    values = np.array([float(v) for v in lines[1:]])
    if values.size == n - 1:
        knots = KnotSequence(k, values)
    elif values.size == n + 2 * k + 1:
        knots = KnotSequence.from_full(values, k)
    else:
        raise InvalidInputError(
            f"header says n={n}, k={k}: expected {n - 1} interior or {n + 2 * k + 1} knots, got {values.size}"
        )
    if knots.n != n:
        raise InvalidInputError("knot count does not match header")
    return knots


def read_knots(path) -> KnotSequence:
    return parse_knots(Path(path).read_text())


def write_knots(knots: KnotSequence, path, full: bool = False) -> None:
    Path(path).write_text(format_knots(knots, full))
