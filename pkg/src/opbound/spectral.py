"""Spectra of collocation matrices, fixed-point projections, iterate decay and
total positivity / oscillatory classification."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidInputError

UNIT_TOL = 1e-8
DISTINCT_TOL = 1e-8
TP_TOL = 1e-10
EXHAUSTIVE_MAX = 10


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # complex, descending modulus
    unit_multiplicity: int
    gap: float
    eigenvectors: np.ndarray | None = None

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def rows(self):
        """(index, real, imag, modulus) tuples for CSV export."""
        return [
            (i, float(v.real), float(v.imag), float(abs(v))) for i, v in enumerate(self.eigenvalues)
        ]


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def eigendecompose(A, vectors: bool = False, unit_tol: float = UNIT_TOL) -> Spectrum:
    """All eigenvalues of A (LAPACK Hessenberg QR), sorted by descending modulus."""
    A = _square(A)
    if vectors:
        w, V = np.linalg.eig(A)
    else:
        w, V = np.linalg.eigvals(A), None
    w = w.astype(complex)
    # descending modulus, ties broken by real part then imaginary part
    order = np.lexsort((-w.imag, -w.real, -np.round(np.abs(w), 12)))
    w = w[order]
    if V is not None:
        V = V[:, order]
    unit = np.abs(w - 1.0) <= unit_tol
    rest = np.abs(w[~unit])
    gap = float(rest.max()) if rest.size else 0.0
    return Spectrum(w, int(unit.sum()), gap, V)


def spectral_location_check(spec: Spectrum, tol: float = UNIT_TOL) -> bool:
    """σ ⊂ open unit ball ∪ {1}."""
    w = spec.eigenvalues
    ok = (np.abs(w) < 1.0 - tol) | (np.abs(w - 1.0) <= tol)
    return bool(np.all(ok))


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    matrix: np.ndarray
    rank: int


def fixed_point_projection(A, unit_tol: float = UNIT_TOL) -> ProjectionMatrix:
    """Spectral projector onto ker(A - I) along the other invariant subspaces (= lim A^m)."""
    A = _square(A)
    spec = eigendecompose(A, unit_tol=unit_tol)
    if not spectral_location_check(spec, unit_tol):
        raise DivergenceError("spectrum is not inside the open unit ball plus {1}; iterates diverge")
    m = spec.unit_multiplicity
    size = A.shape[0]
    if m == 0:
        return ProjectionMatrix(np.zeros_like(A), 0)
    if m == size:
        return ProjectionMatrix(np.eye(size), size)
    I = np.eye(size)
    _, _, vh_r = np.linalg.svd(A - I)
    R = vh_r[-m:].T  # right null space
    _, _, vh_l = np.linalg.svd((A - I).T)
    L = vh_l[-m:].T  # left null space
    P = R @ np.linalg.solve(L.T @ R, L.T)
    return ProjectionMatrix(P, m)


@dataclass(frozen=True, eq=False)
class DecayTrace:
    m: np.ndarray
    rho: np.ndarray
    gamma: float
    fitted_rate: float
    c_fit: float
    c_empirical: float
    fit_window: tuple[int, int]
    fit_bound_margins: np.ndarray
    gamma_bound_holds: bool
    function_norms: np.ndarray | None = None

    def rows(self):
        """(m, rho_m, gamma^m, gamma^(m-1)) tuples for CSV export."""
        g = self.gamma
        return [(int(m), float(r), g**m, g ** (m - 1)) for m, r in zip(self.m, self.rho)]


def _inf_norm(M: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1)))


def iterate_decay(
    A,
    P: ProjectionMatrix | np.ndarray,
    m_max: int,
    gamma: float | None = None,
    fit_start: int = 5,
    floor: float = 1e-13,
    probes: np.ndarray | None = None,
) -> DecayTrace:
    """ρ_m = ||A^m - Π||_∞ for m = 1..m_max and a log-linear fit over m >= fit_start.

    ``probes`` (columns = coefficient vectors) adds the secondary column
    max_j ||(A^m - Π) probe_j||_∞.
    """
    A = _square(A)
    Pi = P.matrix if isinstance(P, ProjectionMatrix) else np.asarray(P, dtype=float)
    if m_max < 1:
        raise InvalidInputError("m_max must be positive")
    if gamma is None:
        gamma = eigendecompose(A).gap
    ms = np.arange(1, m_max + 1)
    rho = np.empty(m_max)
    fn = np.empty(m_max) if probes is not None else None
    Am = np.eye(A.shape[0])
    for i in range(m_max):
        Am = Am @ A
        if not np.all(np.isfinite(Am)):
            raise ArithmeticError(f"overflow in A^{i + 1}")
        E = Am - Pi
        rho[i] = _inf_norm(E)
        if probes is not None:
            fn[i] = float(np.max(np.abs(E @ probes)))
    window = (ms >= fit_start) & (rho > floor)
    if window.sum() >= 2:
        slope, intercept = np.polyfit(ms[window], np.log(rho[window]), 1)
        rate, c_fit = float(np.exp(slope)), float(np.exp(intercept))
    else:
        rate, c_fit = 0.0, 0.0
    if gamma > 0:
        with np.errstate(over="ignore"):
            c_emp = float(np.max(rho / gamma**ms))
        margins = c_fit * gamma**ms - rho
        gamma_ok = bool(np.all(rho <= gamma ** (ms - 1) * (1 + 1e-12) + floor))
    else:
        c_emp = 0.0 if np.all(rho <= floor) else math.inf
        margins = -rho
        gamma_ok = bool(np.all(rho <= floor))
    used = ms[window]
    fw = (int(used.min()), int(used.max())) if used.size else (0, 0)
    return DecayTrace(ms, rho, float(gamma), rate, c_fit, c_emp, fw, margins, gamma_ok, fn)


# --------------------------------------------------------------------------
# total positivity


@dataclass(frozen=True)
class TPVerdict:
    totally_positive: bool
    method: str  # "exhaustive" | "elimination"
    min_minor: float | None
    min_witness: float


def _all_minors_min(A: np.ndarray) -> float:
    n = A.shape[0]
    best = math.inf
    for s in range(1, n + 1):
        combos = np.array(list(itertools.combinations(range(n), s)))
        rows = combos[:, None, :, None]
        cols = combos[None, :, None, :]
        sub = A[rows, cols]  # (C, C, s, s)
        dets = np.linalg.det(sub.reshape(-1, s, s)) if s > 1 else sub.reshape(-1)
        best = min(best, float(np.min(dets)))
    return best


def _neville_pass(A: np.ndarray, tol: float) -> tuple[bool, float, list[float]]:
    """Neville elimination without row exchanges.

    Returns (feasible, min multiplier, diagonal pivots).  Elimination is
    infeasible when a zero pivot sits above a non-zero entry in its column.
    """
    U = A.astype(float).copy()
    n = U.shape[0]
    min_mult = math.inf
    scale = max(1.0, float(np.max(np.abs(A))))
    for k in range(n - 1):
        for i in range(n - 1, k, -1):
            piv = U[i - 1, k]
            if abs(piv) <= tol * scale:
                if abs(U[i, k]) > tol * scale:
                    return False, -math.inf, []
                mult = 0.0
            else:
                mult = U[i, k] / piv
            min_mult = min(min_mult, mult)
            U[i, k:] -= mult * U[i - 1, k:]
    return True, (min_mult if min_mult < math.inf else 0.0), list(np.diag(U))


def _tp_elimination(A: np.ndarray, tol: float) -> tuple[bool, float]:
    """Gasca–Peña criterion for nonsingular matrices: Neville elimination of A
    and A^T runs without row exchanges, multipliers >= 0, diagonal pivots > 0."""
    ok1, m1, piv = _neville_pass(A, tol)
    ok2, m2, _ = _neville_pass(A.T, tol)
    if not (ok1 and ok2):
        return False, -math.inf
    witness = min(m1, m2, min(piv))
    verdict = m1 >= -tol and m2 >= -tol and min(piv) > tol
    return bool(verdict), float(witness)


def is_totally_positive(A, tol: float = TP_TOL, method: str = "auto") -> TPVerdict:
    """All minors non-negative (down to -tol).

    Exhaustive enumeration up to size 10, Neville elimination beyond (or on request).
    """
    A = _square(A)
    n = A.shape[0]
    if method == "auto":
        method = "exhaustive" if n <= EXHAUSTIVE_MAX else "elimination"
    if method == "exhaustive":
        mm = _all_minors_min(A)
        return TPVerdict(mm >= -tol, "exhaustive", mm, mm)
    if method == "elimination":
        ok, w = _tp_elimination(A, tol)
        return TPVerdict(ok, "elimination", None, w)
    raise InvalidInputError(f"unknown TP method {method!r}")


@dataclass(frozen=True)
class TPReport:
    nonsingular: bool
    superdiagonal_positive: bool
    subdiagonal_positive: bool
    totally_positive: bool
    minor_method: str
    oscillatory: bool
    min_minor: float | None

    def to_dict(self) -> dict:
        return {
            "nonsingular": self.nonsingular,
            "superdiagonal_positive": self.superdiagonal_positive,
            "subdiagonal_positive": self.subdiagonal_positive,
            "totally_positive": self.totally_positive,
            "minor_method": self.minor_method,
            "oscillatory": self.oscillatory,
            "min_minor": self.min_minor,
        }


def is_oscillatory(A, tol: float = TP_TOL) -> TPReport:
    """Gantmacher–Krein: TP, nonsingular and a_{i,i+1}, a_{i+1,i} > 0."""
    A = _square(A)
    tp = is_totally_positive(A, tol)
    sv = np.linalg.svd(A, compute_uv=False)
    nonsingular = bool(sv[-1] > tol * max(1.0, sv[0]))
    sup = bool(np.all(np.diag(A, 1) > tol))
    sub = bool(np.all(np.diag(A, -1) > tol))
    osc = nonsingular and sup and sub and tp.totally_positive
    return TPReport(nonsingular, sup, sub, tp.totally_positive, tp.method, osc, tp.min_minor)


def distinct_positive_real(eigs: np.ndarray, imag_tol: float = 1e-8, rel_gap: float = DISTINCT_TOL) -> dict:
    """Are the eigenvalues real (to imag_tol), positive and pairwise distinct?"""
    eigs = np.asarray(eigs, dtype=complex)
    real = bool(np.all(np.abs(eigs.imag) <= imag_tol))
    vals = np.sort(eigs.real)[::-1]
    positive = bool(np.all(vals > 0))
    if vals.size > 1:
        gaps = (vals[:-1] - vals[1:]) / np.maximum(np.abs(vals[:-1]), 1e-300)
        min_gap = float(gaps.min())
    else:
        min_gap = math.inf
    return {
        "real": real,
        "positive": positive,
        "distinct": bool(min_gap > rel_gap),
        "min_relative_gap": min_gap,
        "eigenvalues": [float(v) for v in vals],
    }


@dataclass
class PatternReport:
    k: int
    n: int
    eigenvalues: list = field(default_factory=list)
    unit_count: int = 0
    rest_real: bool = False
    rest_positive: bool = False
    rest_strictly_decreasing: bool = False
    min_relative_gap: float = math.inf
    matrix_has_zero_eigenvalue: bool = False
    operator_has_zero_eigenvalue: bool = True
    zero_discrepancy: bool = False
    matches_integral_schoenberg: bool | None = None
    holds: bool = False
    mismatches: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_schoenberg_eigen_pattern(knots, unit_tol: float = UNIT_TOL, gap_tol: float = DISTINCT_TOL) -> PatternReport:
    """Compare the Schoenberg collocation spectrum with 1 = λ0 = λ1 > λ2 > ... > 0.

    The operator also has the eigenvalue 0 (its kernel on C[0,1]); the
    (n+k)-square collocation matrix only carries the non-zero spectrum, so a
    missing zero there is reported as a bookkeeping discrepancy, not a failure.
    For k >= 2 the non-unit eigenvalues are compared with those of the
    integral Schoenberg operator of degree k-1 on the same breakpoints.
    """
    from .operators import collocation_matrix, make_integral_schoenberg, make_schoenberg

    A = collocation_matrix(make_schoenberg(knots))
    spec = eigendecompose(A, unit_tol=unit_tol)
    w = spec.eigenvalues
    unit = np.abs(w - 1.0) <= unit_tol
    rest = w[~unit]
    rep = PatternReport(knots.degree, knots.n)
    rep.eigenvalues = [[float(v.real), float(v.imag)] for v in w]
    rep.unit_count = int(unit.sum())
    rep.rest_real = bool(np.all(np.abs(rest.imag) <= 1e-8))
    vals = np.sort(rest.real)[::-1]
    rep.rest_positive = bool(np.all(vals > 0))
    if vals.size > 1:
        gaps = (vals[:-1] - vals[1:]) / np.maximum(np.abs(vals[:-1]), 1e-300)
        rep.min_relative_gap = float(gaps.min())
        rep.rest_strictly_decreasing = bool(rep.min_relative_gap > gap_tol)
    else:
        rep.rest_strictly_decreasing = True
    sv = np.linalg.svd(A, compute_uv=False)
    rep.matrix_has_zero_eigenvalue = bool(sv[-1] <= unit_tol * sv[0])
    rep.zero_discrepancy = rep.operator_has_zero_eigenvalue and not rep.matrix_has_zero_eigenvalue
    if knots.degree >= 2:
        V = collocation_matrix(make_integral_schoenberg(knots.with_degree(knots.degree - 1)))
        wv = np.sort(np.linalg.eigvals(V).real)[::-1]
        ws = np.sort(w.real)[::-1][1:]  # drop one copy of the eigenvalue 1
        rep.matches_integral_schoenberg = bool(
            wv.size == ws.size and np.allclose(wv, ws, rtol=1e-8, atol=1e-10)
        )
    if rep.unit_count != 2:
        rep.mismatches.append(f"expected exactly two eigenvalues equal to 1, found {rep.unit_count}")
    if not rep.rest_real:
        rep.mismatches.append("non-unit eigenvalues are not all real")
    if not rep.rest_positive:
        rep.mismatches.append("non-unit eigenvalues are not all positive")
    if not rep.rest_strictly_decreasing:
        rep.mismatches.append(f"non-unit eigenvalues not distinct (min relative gap {rep.min_relative_gap:.3g})")
    if rep.matches_integral_schoenberg is False:
        rep.mismatches.append("non-unit spectrum differs from the integral Schoenberg operator of degree k-1")
    rep.holds = not rep.mismatches
    return rep
