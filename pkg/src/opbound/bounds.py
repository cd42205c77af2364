"""Certified lower estimates of approximation errors ||T f - f||.

Every check returns a :class:`BoundCertificate`.  The left- and right-hand
sides are recomputed from the stored intermediates by a fixed formula per
inequality, so a certificate can be re-verified from its JSON form alone.
The K-functional side always uses the explicit witness g = T f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidInputError, PreconditionError
from .funcspace import (
    INF,
    SampledFunction,
    as_p,
    lp_norm,
    modulus_of_smoothness,
    norm,
    seminorm,
    uniform_grid,
)
from .operators import (
    FiniteRankOperator,
    analytic_range_derivative_bound,
    collocation_matrix,
    make_bernstein,
    make_integral_schoenberg,
    make_kantorovich,
    make_schoenberg,
    range_derivative_norm,
)
from .spectral import eigendecompose, fixed_point_projection, spectral_location_check
from .splines import KnotSequence, min_mesh_gauge

SLACK = 1e-9


def _omega_bound_rhs(I):
    r, t, d = I["r"], I["t"], I["d"]
    return (2.0**r + d ** (r / 2.0) * t**r * I["N"] / (1.0 - I["gamma"])) * I["err_norm"]


# lhs(intermediates), rhs(intermediates) per inequality
FORMULAS: dict[str, tuple[Callable[[dict], float], Callable[[dict], float]]] = {
    "seminorm-lemma": (
        lambda I: I["seminorm_Tf"],
        lambda I: I["N"] / (1.0 - I["gamma"]) * I["err_norm"],
    ),
    "theorem-omega": (lambda I: I["omega"], _omega_bound_rhs),
    "theorem-k": (
        lambda I: I["err_norm"] + I["t"] ** I["r"] * I["seminorm_Tf"],
        lambda I: (1.0 + I["t"] ** I["r"] * I["N"] / (1.0 - I["gamma"])) * I["err_norm"],
    ),
    "corollary-omega": (
        lambda I: I["omega"],
        lambda I: (2.0 ** I["r"] + I["d"] ** (I["r"] / 2.0)) * I["err_norm"],
    ),
    "corollary-k": (
        lambda I: I["err_norm"] + I["t"] ** I["r"] * I["seminorm_Tf"],
        lambda I: 2.0 * I["err_norm"],
    ),
    "bernstein-cor": (lambda I: I["omega"] / 8.0, lambda I: I["err_norm"]),
    "kantorovich-cor": (lambda I: I["omega"] / 6.0, lambda I: I["err_norm"]),
    "schoenberg-cor": (lambda I: I["omega"] / 2.0 ** (I["r"] + 1), lambda I: I["err_norm"]),
    "integral-schoenberg-cor": (lambda I: I["omega"] / 6.0, lambda I: I["err_norm"]),
    "abstract-k": (lambda I: 0.5 * I["k_upper"], lambda I: I["err_norm"]),
    "mos-kfunc": (
        lambda I: I["omega"],
        lambda I: 2.0 ** I["r"] * I["dist"] + I["d"] ** (I["r"] / 2.0) * I["t"] ** I["r"] * I["seminorm_g"],
    ),
}

INEQUALITIES = tuple(FORMULAS)
_BASE_KEYS = ("omega", "seminorm_Tf", "err_norm", "gamma", "N", "N_provenance")


@dataclass(frozen=True)
class BoundCertificate:
    inequality_id: str
    operator: str
    function: str
    r: int
    p: float
    t_or_delta: float | None
    lhs: float
    rhs: float
    margin: float
    holds: bool
    status: str
    intermediates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "inequality_id": self.inequality_id,
            "operator": self.operator,
            "function": self.function,
            "r": self.r,
            "p": "inf" if self.p == INF else self.p,
            "t_or_delta": self.t_or_delta,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "holds": self.holds,
            "status": self.status,
            "intermediates": {k: _jsonable(v) for k, v in self.intermediates.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def recompute(cert: BoundCertificate) -> tuple[float, float, float]:
    """(lhs, rhs, margin) from the stored intermediates alone."""
    lhs_f, rhs_f = FORMULAS[cert.inequality_id]
    lhs, rhs = lhs_f(cert.intermediates), rhs_f(cert.intermediates)
    return lhs, rhs, rhs - lhs


def _certify(ineq: str, operator: str, function: str, r: int, p: float, t, inter: dict, slack: float = SLACK) -> BoundCertificate:
    I = {k: None for k in _BASE_KEYS}
    I.update(inter)
    I.setdefault("r", r)
    I.setdefault("t", t)
    I.setdefault("d", 1)
    lhs_f, rhs_f = FORMULAS[ineq]
    lhs, rhs = lhs_f(I), rhs_f(I)
    margin = rhs - lhs
    holds = margin >= -slack
    status = "holds" if margin >= 0 else ("holds-with-slack" if holds else "violated")
    return BoundCertificate(ineq, operator, function, r, p, t, lhs, rhs, margin, holds, status, I)


# --------------------------------------------------------------------------
# operator constants


@dataclass(frozen=True)
class OperatorConstants:
    gamma: float
    N: float
    N_provenance: str
    N_numeric: float | None
    N_analytic: float | None


_SPECTRAL_CACHE: dict = {}


def operator_gamma(T: FiniteRankOperator) -> float:
    """Spectral gap of T after checking σ ⊂ open unit ball ∪ {1}."""
    key = _op_key(T)
    if key not in _SPECTRAL_CACHE:
        A = collocation_matrix(T)
        spec = eigendecompose(A)
        if not spectral_location_check(spec):
            raise PreconditionError(f"{T.descriptor}: spectrum not inside the unit ball plus {{1}}")
        _SPECTRAL_CACHE[key] = (spec.gap, fixed_point_projection(A))
    return _SPECTRAL_CACHE[key][0]


def _op_key(T: FiniteRankOperator):
    knots = T.knots
    return (T.name, T.rank, knots.breaks.tobytes() if knots is not None else None, knots.degree if knots is not None else None)


def fixed_point_elements(T: FiniteRankOperator) -> list:
    """Range elements spanning ker(T - I), from the spectral projector."""
    operator_gamma(T)
    P = _SPECTRAL_CACHE[_op_key(T)][1]
    if P.rank == 0:
        return []
    u, s, _ = np.linalg.svd(P.matrix)
    return [T.element(u[:, i]) for i in range(P.rank)]


def check_annihilation(T: FiniteRankOperator, r: int, tol: float = 1e-8) -> None:
    """Raise PreconditionError unless D^r kills every fixed point of T."""
    x = np.linspace(0.0, 1.0, 513)
    for e in fixed_point_elements(T):
        val = float(np.max(np.abs(e.derivative(r)(x))))
        scale = float(np.max(np.abs(e(x)))) or 1.0
        if val > tol * scale * max(1.0, T.rank) ** r:
            raise PreconditionError(f"D^{r} does not annihilate the fixed points of {T.descriptor}")


def operator_constants(
    T: FiniteRankOperator,
    r: int,
    p=INF,
    range_norm: str = "analytic",
    d_const: float | None = None,
) -> OperatorConstants:
    if range_norm not in ("analytic", "numeric"):
        raise InvalidInputError("range_norm must be 'analytic' or 'numeric'")
    gamma = operator_gamma(T)
    check_annihilation(T, r)
    analytic = analytic_range_derivative_bound(T, r, d_const)
    if range_norm == "analytic" and analytic is not None and r <= T.basis.polynomial_degree:
        # the numeric search is only run when its value is actually used
        N, prov, numeric = analytic, "analytic", None
    else:
        rdn = range_derivative_norm(T, r, p, d_const=d_const)
        N, prov = rdn.value(range_norm)
        numeric = rdn.numeric
    if not N > 0:
        raise PreconditionError(f"D^{r} vanishes on the range of {T.descriptor}; no estimate to certify")
    return OperatorConstants(gamma, N, prov, numeric, analytic)


def compute_delta(gamma: float, N: float, r: int) -> float:
    """δ = ((1 - γ)/N)^(1/r)."""
    if not 0.0 <= gamma < 1.0:
        raise InvalidInputError("need 0 <= gamma < 1 (a spectral gap)")
    if not N > 0:
        raise InvalidInputError("N must be positive")
    if r < 1:
        raise InvalidInputError("r must be positive")
    return ((1.0 - gamma) / N) ** (1.0 / r)


def _range_data(T: FiniteRankOperator, f: SampledFunction, r: int, p: float):
    elem, Tf = T.apply(f)
    x = f.grid.nodes
    sem = lp_norm(elem.derivative(r)(x), x, p)
    err = norm(Tf - f, p)
    return Tf, sem, err


def _const_inter(c: OperatorConstants) -> dict:
    return {
        "gamma": c.gamma,
        "N": c.N,
        "N_provenance": c.N_provenance,
        "N_numeric": c.N_numeric,
        "N_analytic": c.N_analytic,
    }


# --------------------------------------------------------------------------
# general theorems


def verify_seminorm_lemma(
    T: FiniteRankOperator, f: SampledFunction, r: int, p=INF, range_norm: str = "analytic", d_const: float | None = None
) -> BoundCertificate:
    """|T f|_{p,r} <= N/(1-γ) ||T f - f||_p."""
    p = as_p(p)
    c = operator_constants(T, r, p, range_norm, d_const)
    _, sem, err = _range_data(T, f, r, p)
    inter = {"seminorm_Tf": sem, "err_norm": err, **_const_inter(c)}
    return _certify("seminorm-lemma", T.descriptor, f.label, r, p, None, inter)


def verify_main_theorem(
    T: FiniteRankOperator,
    f: SampledFunction,
    r: int,
    t: float,
    p=INF,
    range_norm: str = "analytic",
    d_const: float | None = None,
    d: int = 1,
) -> tuple[BoundCertificate, BoundCertificate]:
    """Modulus and K-functional bounds for a fixed t > 0; returns (omega-cert, K-cert)."""
    p = as_p(p)
    if not t > 0:
        raise InvalidInputError("t must be positive")
    c = operator_constants(T, r, p, range_norm, d_const)
    _, sem, err = _range_data(T, f, r, p)
    omega = modulus_of_smoothness(f, r, t, p)
    inter = {"omega": omega, "seminorm_Tf": sem, "err_norm": err, "d": d, **_const_inter(c)}
    return (
        _certify("theorem-omega", T.descriptor, f.label, r, p, t, inter),
        _certify("theorem-k", T.descriptor, f.label, r, p, t, inter),
    )


def verify_uniform_corollary(
    T: FiniteRankOperator,
    f: SampledFunction,
    r: int,
    p=INF,
    range_norm: str = "analytic",
    d_const: float | None = None,
    d: int = 1,
) -> tuple[BoundCertificate, BoundCertificate]:
    """ω(f, δ) <= (2^r + d^{r/2}) ||Tf - f|| and K-upper(f, δ^r) <= 2 ||Tf - f||."""
    p = as_p(p)
    c = operator_constants(T, r, p, range_norm, d_const)
    delta = compute_delta(c.gamma, c.N, r)
    _, sem, err = _range_data(T, f, r, p)
    omega = modulus_of_smoothness(f, r, delta, p)
    inter = {"omega": omega, "seminorm_Tf": sem, "err_norm": err, "d": d, "delta": delta, **_const_inter(c)}
    return (
        _certify("corollary-omega", T.descriptor, f.label, r, p, delta, inter),
        _certify("corollary-k", T.descriptor, f.label, r, p, delta, inter),
    )


# --------------------------------------------------------------------------
# operator-specific corollaries


def verify_bernstein_corollary(f: SampledFunction, n: int) -> BoundCertificate:
    """(1/8) ω_2(f, n^{-3/2}) <= ||B_n f - f||_∞."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    T = make_bernstein(n)
    t = n**-1.5
    Tf = T(f)
    inter = {
        "omega": modulus_of_smoothness(f, 2, t, INF),
        "err_norm": norm(Tf - f, INF),
        "gamma": (n - 1) / n,
        "N": 4.0 * n * (n - 1),
        "N_provenance": "analytic",
    }
    return _certify("bernstein-cor", T.descriptor, f.label, 2, INF, t, inter)


def verify_kantorovich_corollary(f: SampledFunction, n: int, p=INF) -> BoundCertificate:
    """(1/6) ω_{1,p}(f, 1/(n^3 + n^2)) <= ||K_n f - f||_p (same p on both sides)."""
    p = as_p(p)
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    T = make_kantorovich(n)
    t = 1.0 / (n**3 + n**2)
    Tf = T(f)
    inter = {
        "omega": modulus_of_smoothness(f, 1, t, p),
        "err_norm": norm(Tf - f, p),
        "gamma": operator_gamma(T),
        "N": 4.0 * (n * n + n),
        "N_provenance": "analytic",
    }
    return _certify("kantorovich-cor", T.descriptor, f.label, 1, p, t, inter)


def schoenberg_t(knots: KnotSequence, r: int, d_k: float, gamma: float | None = None) -> float:
    """t(Δ, k) = (|Δ|_min / k) ((1 - γ)/d_k)^(1/r)."""
    if gamma is None:
        gamma = operator_gamma(make_schoenberg(knots))
    return min_mesh_gauge(knots) / knots.degree * ((1.0 - gamma) / d_k) ** (1.0 / r)


def verify_schoenberg_corollary(f: SampledFunction, knots: KnotSequence, r: int, d_k: float) -> BoundCertificate:
    """(1/2^{r+1}) ω_r(f, t(Δ,k)) <= ||f - S_{Δ,k} f||_∞ with caller-supplied d_k."""
    k = knots.degree
    if not k > r >= 2:
        raise InvalidInputError("needs k > r >= 2")
    if not d_k > 0:
        raise InvalidInputError("d_k must be positive")
    T = make_schoenberg(knots)
    gamma = operator_gamma(T)
    t = schoenberg_t(knots, r, d_k, gamma)
    Tf = T(f)
    inter = {
        "omega": modulus_of_smoothness(f, r, t, INF),
        "err_norm": norm(Tf - f, INF),
        "gamma": gamma,
        "N": None,
        "N_provenance": None,
        "d_k": d_k,
        "mesh_gauge": min_mesh_gauge(knots),
    }
    return _certify("schoenberg-cor", T.descriptor, f.label, r, INF, t, inter)


def verify_integral_schoenberg_corollary(
    f: SampledFunction, knots: KnotSequence, p=INF, d_next: float | None = None
) -> BoundCertificate:
    """(1/6) ω_{1,p}(f, t(Δ,k)) <= ||V_{Δ,k} f - f||_p.

    t(Δ,k) = |Δ|_min^2/(k+1)^2 (1 - γ)/d_{k+1}.  Without d_{k+1} the constant
    is backed out of the numeric norm of D on im(V): N = (2(k+1)/|Δ|_min)^2 d_{k+1}.
    """
    p = as_p(p)
    k = knots.degree
    if k < 1:
        raise InvalidInputError("needs k >= 1")
    T = make_integral_schoenberg(knots)
    gamma = operator_gamma(T)
    h = min_mesh_gauge(knots)
    if d_next is None:
        N = range_derivative_norm(T, 1, p).numeric
        d_val, prov = N * h**2 / (2.0 * (k + 1)) ** 2, "numeric"
    else:
        d_val, prov = float(d_next), "caller"
        N = (2.0 * (k + 1) / h) ** 2 * d_val
    t = h**2 / (k + 1) ** 2 * (1.0 - gamma) / d_val
    Tf = T(f)
    inter = {
        "omega": modulus_of_smoothness(f, 1, t, p),
        "err_norm": norm(Tf - f, p),
        "gamma": gamma,
        "N": N,
        "N_provenance": prov,
        "d_k_plus_1": d_val,
        "mesh_gauge": h,
    }
    return _certify("integral-schoenberg-cor", T.descriptor, f.label, 1, p, t, inter)


def verify_mos_kfunc(f: SampledFunction, g: SampledFunction, r: int, t: float, p=INF, d: int = 1) -> BoundCertificate:
    """ω_{r,p}(f,t) <= 2^r ||f-g||_p + d^{r/2} t^r |g|_{p,r} as a certificate."""
    p = as_p(p)
    inter = {
        "omega": modulus_of_smoothness(f, r, t, p),
        "dist": norm(f - g, p),
        "seminorm_g": seminorm(g, r, p),
        "d": d,
        "g": g.label,
    }
    return _certify("mos-kfunc", "-", f.label, r, p, t, inter)


# --------------------------------------------------------------------------
# abstract K-functional bound with a user semi-norm


def _seminorm_sup_ratio(
    T: FiniteRankOperator,
    cb: Callable[[SampledFunction], float],
    p: float,
    grid,
    n_random: int,
    seed: int,
    search_size: int = 1025,
) -> float:
    """sup over im(T) of cb(s)/||s||_p: search on a coarse grid, report on ``grid``."""

    def make_ratio(g):
        x = g.nodes
        B = T.basis.evaluate(x)

        def ratio(c):
            den = lp_norm(B @ c, x, p)
            if den <= 1e-300:
                return 0.0
            return float(cb(SampledFunction.from_exact(T.element(c), g))) / den

        return ratio

    coarse = make_ratio(uniform_grid(min(grid.size, search_size)))
    fine = make_ratio(grid)
    m = T.rank
    rng = np.random.default_rng(seed)
    starts = list(np.eye(m)) + [(-1.0) ** np.arange(m)] + list(rng.standard_normal((n_random, m)))
    scores = [coarse(c) for c in starts]
    i = int(np.argmax(scores))
    res = minimize(lambda c: -coarse(c), starts[i], method="Powell", options={"maxiter": 3, "xtol": 1e-3, "ftol": 1e-6})
    return max(fine(starts[i]), fine(res.x))


def verify_abstract_k_bound(
    T: FiniteRankOperator,
    f: SampledFunction,
    seminorm_cb: Callable[[SampledFunction], float],
    r: int,
    p=INF,
    candidates: Sequence[SampledFunction] = (),
    n_random: int = 32,
    seed: int = 0,
    annihilation_tol: float = 1e-8,
) -> BoundCertificate:
    """(1/2) min_g (||f-g|| + δ^r |g|) <= ||T f - f|| for a user semi-norm.

    δ^r = (1-γ) / sup_{s in im T} |s|/||s||; the candidates always include T f.
    """
    p = as_p(p)
    gamma = operator_gamma(T)
    grid = f.grid
    for e in fixed_point_elements(T):
        s = SampledFunction.from_exact(e, grid)
        if abs(seminorm_cb(s)) > annihilation_tol * max(1.0, norm(s, p)):
            raise PreconditionError("semi-norm does not annihilate the fixed points of T")
    sup_ratio = _seminorm_sup_ratio(T, seminorm_cb, p, grid, n_random, seed)
    if not sup_ratio > 0:
        raise PreconditionError("semi-norm vanishes on the range of T")
    delta_r = (1.0 - gamma) / sup_ratio
    Tf = T(f)
    cands = [Tf, *candidates]
    values = [norm(f - g, p) + delta_r * float(seminorm_cb(g)) for g in cands]
    idx = int(np.argmin(values))
    inter = {
        "k_upper": values[idx],
        "witness": cands[idx].label or f"candidate[{idx}]",
        "err_norm": norm(Tf - f, p),
        "seminorm_Tf": float(seminorm_cb(Tf)),
        "gamma": gamma,
        "N": sup_ratio,
        "N_provenance": "numeric",
        "delta_r": delta_r,
    }
    return _certify("abstract-k", T.descriptor, f.label, r, p, delta_r ** (1.0 / r), inter)


def derivative_total_variation(s: SampledFunction) -> float:
    """Total variation of D s, from exact derivative samples."""
    d = s.exact.derivative(1)(s.grid.nodes)
    return float(np.sum(np.abs(np.diff(d))))
