"""Test-function corpora and knot-sequence generators used by the CLI and tests."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .funcspace import Analytic, Grid, Polynomial, SampledFunction, uniform_grid
from .splines import KnotSequence, read_knots

CORPUS_SELECTORS = ("standard", "polynomials", "rough", "custom:<file>")


def _abs_half() -> Analytic:
    return Analytic(
        "|x-1/2|",
        lambda x: np.abs(x - 0.5),
        breakpoints=(0.5,),
        antiderivative=lambda x: 0.5 * (x - 0.5) * np.abs(x - 0.5),
    )


def _sin_pi() -> Analytic:
    pi = np.pi
    derivs = [
        lambda x: pi * np.cos(pi * x),
        lambda x: -(pi**2) * np.sin(pi * x),
        lambda x: -(pi**3) * np.cos(pi * x),
        lambda x: pi**4 * np.sin(pi * x),
        lambda x: pi**5 * np.cos(pi * x),
        lambda x: -(pi**6) * np.sin(pi * x),
    ]
    return Analytic("sin(pi x)", lambda x: np.sin(pi * x), derivs, antiderivative=lambda x: -np.cos(pi * x) / pi)


def _sqrt() -> Analytic:
    return Analytic(
        "sqrt(x)",
        lambda x: np.sqrt(np.clip(x, 0.0, None)),
        extends_domain=False,
        antiderivative=lambda x: (2.0 / 3.0) * np.clip(x, 0.0, None) ** 1.5,
    )


def _sawtooth(teeth: int = 4) -> Analytic:
    """Continuous piecewise-linear sawtooth with ``teeth`` peaks of height 1."""

    def fn(x):
        frac = np.mod(teeth * np.asarray(x, dtype=float), 1.0)
        return 1.0 - np.abs(1.0 - 2.0 * frac)

    def anti(x):
        # each tooth integrates to 1/(2*teeth)
        y = teeth * float(x)
        whole = np.floor(y)
        u = y - whole
        part = u * u if u <= 0.5 else 0.5 - (1.0 - u) ** 2
        return (whole * 0.5 + part) / teeth

    bps = tuple(j / (2 * teeth) for j in range(1, 2 * teeth))
    return Analytic("sawtooth", fn, breakpoints=bps, antiderivative=anti)


def _step_root() -> Analytic:
    return Analytic(
        "|x-1/3|^(1/2)",
        lambda x: np.sqrt(np.abs(x - 1.0 / 3.0)),
        breakpoints=(1.0 / 3.0,),
    )


def monomial(degree: int) -> Polynomial:
    coef = np.zeros(degree + 1)
    coef[degree] = 1.0
    return Polynomial(coef, label="1" if degree == 0 else ("x" if degree == 1 else f"x^{degree}"))


def standard_descriptors() -> list:
    return [
        monomial(0),
        monomial(1),
        monomial(2),
        monomial(3),
        _abs_half(),
        _sin_pi(),
        _sqrt(),
        _sawtooth(),
    ]


def generate_corpus(selector: str, grid: Grid | None = None) -> list[SampledFunction]:
    """standard | polynomials | rough | custom:<file>."""
    grid = grid or uniform_grid()
    if selector == "standard":
        descs = standard_descriptors()
    elif selector == "polynomials":
        descs = [monomial(d) for d in range(7)]
    elif selector == "rough":
        descs = [_abs_half(), _sqrt(), _sawtooth(), _sawtooth(8), _step_root()]
    elif selector.startswith("custom:"):
        return _custom_corpus(Path(selector.split(":", 1)[1]))
    else:
        raise InvalidInputError(f"unknown corpus selector {selector!r}")
    return [SampledFunction.from_exact(d, grid) for d in descs]


def _custom_corpus(path: Path) -> list[SampledFunction]:
    if not path.exists():
        raise InvalidInputError(f"corpus file {path} does not exist")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # loadtxt warns on empty input
            data = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)
    except ValueError as exc:
        raise InvalidInputError(f"cannot read corpus file {path}: {exc}") from exc
    if data.size == 0:
        raise InvalidInputError(f"empty corpus in {path}")
    if data.shape[0] < 2:
        raise InvalidInputError("a sampled column needs at least two values")
    grid = uniform_grid(data.shape[0])
    return [
        SampledFunction(grid, data[:, j], None, f"{path.name}[{j}]") for j in range(data.shape[1])
    ]


def generate_knots(spec: str, degree: int) -> KnotSequence:
    """uniform:<n> | chebyshev:<n> | random:<n>:<seed>:<min-gauge> | <file>."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "uniform":
            return KnotSequence.uniform(degree, int(rest))
        if kind == "chebyshev":
            n = int(rest)
            j = np.arange(1, n)
            return KnotSequence(degree, 0.5 - 0.5 * np.cos(j * np.pi / n))
        if kind == "random":
            n_s, seed_s, floor_s = rest.split(":")
            return random_knots(degree, int(n_s), int(seed_s), float(floor_s))
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed knot spec {spec!r}") from exc
    path = Path(spec)
    if path.exists():
        knots = read_knots(path)
        return knots if knots.degree == degree else knots.with_degree(degree)
    raise InvalidInputError(f"unknown knot spec {spec!r}")


def random_knots(degree: int, n: int, seed: int, min_gauge: float) -> KnotSequence:
    """n random subintervals of [0, 1], each at least ``min_gauge`` long.

    Uniform spacings conditioned on all gaps >= floor are distributed as
    floor + (1 - n*floor) * (uniform spacings), so no rejection loop is needed.
    """
    if n < 1:
        raise InvalidInputError("need at least one subinterval")
    if min_gauge < 0 or min_gauge * n > 1.0:
        raise InvalidInputError(f"min-gauge {min_gauge} infeasible for n={n}")
    rng = np.random.default_rng(seed)
    gaps = rng.dirichlet(np.ones(n))
    gaps = min_gauge + (1.0 - n * min_gauge) * gaps
    breaks = np.cumsum(gaps)[:-1]
    return KnotSequence(degree, breaks)
