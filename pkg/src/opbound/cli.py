"""opbound command line: spectrum, verify, tpcheck, iterates (plus corpus/knots helpers).

Exit codes: 0 = everything holds, 1 = at least one violation (reported in
full), 2 = usage or configuration error (nothing is written).
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds
from .errors import CapabilityError, DivergenceError, InvalidInputError, PreconditionError
from .funcspace import INF, as_p, seminorm, uniform_grid
from .generators import generate_corpus, generate_knots
from .operators import (
    bernstein_eigenvalues_exact,
    collocation_matrix,
    parse_operator,
)
from .reports import Report, validate_report, write_decay_csv, write_spectrum_csv
from .spectral import (
    DISTINCT_TOL,
    TP_TOL,
    UNIT_TOL,
    check_schoenberg_eigen_pattern,
    distinct_positive_real,
    eigendecompose,
    fixed_point_projection,
    is_oscillatory,
    iterate_decay,
    spectral_location_check,
)
from .splines import format_knots

DEFAULT_R = {"bernstein": 2, "kantorovich": 1, "schoenberg": 2, "integral-schoenberg": 1}
INEQ_FAMILIES = (
    "seminorm-lemma",
    "theorem",
    "corollary",
    "bernstein-cor",
    "kantorovich-cor",
    "schoenberg-cor",
    "integral-schoenberg-cor",
    "abstract-k",
    "mos-kfunc",
)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    operators: list = field(default_factory=list)
    ineq: str | None = None
    n: list = field(default_factory=list)
    k: int | None = None
    r: int | None = None
    p: list = field(default_factory=lambda: [INF])
    t: list = field(default_factory=lambda: [0.1])
    m_max: int = 60
    corpus: str = "standard"
    knots: list = field(default_factory=list)
    d_k: float | None = None
    range_norm: str = "analytic"
    grid: int = 4097
    out: str | None = None
    seed: int = 0
    sweep: int = 1
    matrix: str | None = None
    unit_tol: float = UNIT_TOL
    tp_tol: float = TP_TOL

    def echo(self) -> dict:
        d = dict(self.__dict__)
        d["p"] = ["inf" if v == INF else v for v in self.p]
        d.pop("out")
        return d


# --------------------------------------------------------------------------
# parsing helpers


def parse_int_list(text: str) -> list[int]:
    """'4..64' (inclusive), '4,8,16', or a mix of both."""
    out: list[int] = []
    for part in filter(None, (s.strip() for s in text.split(","))):
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", part)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if b < a:
                raise UsageError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise UsageError(f"not an integer list: {text!r}") from None
    if not out:
        raise UsageError("empty integer list")
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"not a number list: {text!r}") from None
    if not vals:
        raise UsageError("empty number list")
    return vals


def parse_p_list(text: str) -> list[float]:
    try:
        return [as_p(s.strip()) for s in text.split(",") if s.strip()]
    except (ValueError, InvalidInputError) as exc:
        raise UsageError(str(exc)) from None


def worker_count() -> int:
    raw = os.environ.get("OPBOUND_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise UsageError("OPBOUND_THREADS must be an integer") from None
    return cap


def ordered_map(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _load_corpus(cfg: RunConfig):
    corpus = generate_corpus(cfg.corpus, uniform_grid(cfg.grid))
    if not corpus:
        raise UsageError("empty corpus")
    return corpus


# --------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg: RunConfig) -> tuple[Report, dict]:
    if not cfg.operators:
        raise UsageError("spectrum needs --operator")
    ops = [parse_operator(d) for d in cfg.operators]
    rep = Report("spectrum", cfg.echo())
    csvs = {}
    for i, T in enumerate(ops):
        A = collocation_matrix(T)
        spec = eigendecompose(A, unit_tol=cfg.unit_tol)
        located = spectral_location_check(spec, cfg.unit_tol)
        payload = {
            "operator": T.descriptor,
            "eigenvalues": [[float(v.real), float(v.imag)] for v in spec.eigenvalues],
            "unit_multiplicity": spec.unit_multiplicity,
            "gamma": spec.gap,
            "spectral_location": located,
            "holds": located,
        }
        if T.name == "bernstein":
            exact = bernstein_eigenvalues_exact(T.rank - 1)
            got = np.sort(spec.eigenvalues.real)[::-1]
            payload["exact_eigenvalues"] = exact
            payload["max_relative_error"] = float(np.max(np.abs(got - exact) / exact))
        rep.add_payload("spectra", payload)
        if T.name == "schoenberg":
            rep.add_payload("patterns", {"operator": T.descriptor, **check_schoenberg_eigen_pattern(T.knots).to_dict()})
        name = "spectrum.csv" if len(ops) == 1 else f"spectrum_{i}.csv"
        csvs[name] = (write_spectrum_csv, spec.rows())
    return rep, csvs


def _sweep_seeds(desc: str, count: int) -> list[str]:
    if count <= 1:
        return [desc]
    m = re.search(r"random:(\d+):(\d+):", desc)
    if not m:
        raise UsageError("--sweep needs a random:<n>:<seed>:<min-gauge> knot spec")
    base = int(m.group(2))
    return [desc[: m.start(2)] + str(base + s) + desc[m.end(2) :] for s in range(count)]


def _tp_payload(label: str, A: np.ndarray, tol: float) -> dict:
    tp = is_oscillatory(A, tol)
    eig = distinct_positive_real(np.linalg.eigvals(A), rel_gap=DISTINCT_TOL)
    return {
        "operator": label,
        "size": int(A.shape[0]),
        "tp": tp.to_dict(),
        "eigenvalues": eig,
        "holds": bool(tp.oscillatory and eig["real"] and eig["positive"] and eig["distinct"]),
    }


def cmd_tpcheck(cfg: RunConfig) -> tuple[Report, dict]:
    rep = Report("tpcheck", cfg.echo())
    jobs = []
    if cfg.matrix:
        path = Path(cfg.matrix)
        if not path.exists():
            raise UsageError(f"matrix file {path} does not exist")
        try:
            A = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)
        except ValueError as exc:
            raise UsageError(f"cannot read matrix: {exc}") from None
        if A.shape[0] != A.shape[1] or A.size == 0:
            raise UsageError("matrix must be square and non-empty")
        jobs.append((path.name, A))
    for desc in cfg.operators:
        for d in _sweep_seeds(desc, cfg.sweep):
            T = parse_operator(d)
            jobs.append((T.descriptor, collocation_matrix(T)))
    if not jobs:
        raise UsageError("tpcheck needs --operator or --matrix")
    for payload in ordered_map(lambda job: _tp_payload(job[0], job[1], cfg.tp_tol), jobs):
        rep.add_payload("tp_reports", payload)
    return rep, {}


def cmd_iterates(cfg: RunConfig) -> tuple[Report, dict]:
    if cfg.m_max < 10:
        raise UsageError("--m-max must be at least 10")
    if not cfg.operators:
        raise UsageError("iterates needs --operator")
    ops = [parse_operator(d) for d in cfg.operators]
    corpus = _load_corpus(cfg)
    rep = Report("iterates", cfg.echo())
    csvs = {}
    for i, T in enumerate(ops):
        A = collocation_matrix(T)
        gamma = eigendecompose(A, unit_tol=cfg.unit_tol).gap
        P = fixed_point_projection(A, cfg.unit_tol)
        probes = np.column_stack([T.coefficients(f) for f in corpus])
        tr = iterate_decay(A, P, cfg.m_max, gamma=gamma, probes=probes)
        rel = abs(tr.fitted_rate - gamma) / gamma if gamma > 0 else (0.0 if tr.fitted_rate == 0 else INF)
        rep.add_payload(
            "decay_traces",
            {
                "operator": T.descriptor,
                "gamma": gamma,
                "fitted_rate": tr.fitted_rate,
                "rate_relative_error": rel,
                "rate_within_5pct": bool(rel <= 0.05),
                "fit_window": list(tr.fit_window),
                "c_fit": tr.c_fit,
                "c_empirical": tr.c_empirical,
                "gamma_bound_holds": tr.gamma_bound_holds,
                "rho": tr.rho,
                "function_norms": tr.function_norms,
                "holds": tr.gamma_bound_holds,
            },
        )
        name = "decay.csv" if len(ops) == 1 else f"decay_{i}.csv"
        csvs[name] = (write_decay_csv, tr.rows())
    return rep, csvs


def _verify_items(cfg: RunConfig, corpus) -> list:
    """Return a list of zero-argument callables, each producing certificates."""
    ineq = cfg.ineq
    items = []
    if ineq == "bernstein-cor":
        ns = cfg.n or [4, 8, 16, 32, 64]
        items = [lambda f=f, n=n: [bounds.verify_bernstein_corollary(f, n)] for n in ns for f in corpus]
    elif ineq == "kantorovich-cor":
        ns = cfg.n or [4, 8, 16, 32, 64]
        items = [
            lambda f=f, n=n, p=p: [bounds.verify_kantorovich_corollary(f, n, p)]
            for n in ns
            for p in cfg.p
            for f in corpus
        ]
    elif ineq in ("schoenberg-cor", "integral-schoenberg-cor"):
        k = cfg.k if cfg.k is not None else (3 if ineq == "schoenberg-cor" else 2)
        specs = cfg.knots or ["uniform:8"]
        knot_list = [generate_knots(s, k) for s in specs]
        if ineq == "schoenberg-cor":
            if cfg.d_k is None:
                raise UsageError("schoenberg-cor needs --d-k (the constant is not defined by the operator)")
            r = cfg.r if cfg.r is not None else 2
            items = [
                lambda f=f, kn=kn: [bounds.verify_schoenberg_corollary(f, kn, r, cfg.d_k)]
                for kn in knot_list
                for f in corpus
            ]
        else:
            items = [
                lambda f=f, kn=kn, p=p: [bounds.verify_integral_schoenberg_corollary(f, kn, p, cfg.d_k)]
                for kn in knot_list
                for p in cfg.p
                for f in corpus
            ]
    else:
        if not cfg.operators:
            raise UsageError(f"--ineq {ineq} needs --operator")
        ops = [parse_operator(d) for d in cfg.operators]
        for T in ops:
            r = cfg.r if cfg.r is not None else DEFAULT_R[T.name]
            for p in cfg.p:
                for f in corpus:
                    items.append(_general_item(cfg, ineq, T, f, r, p))
    return items


def _general_item(cfg: RunConfig, ineq: str, T, f, r: int, p: float):
    kw = {"range_norm": cfg.range_norm, "d_const": cfg.d_k}
    if ineq == "seminorm-lemma":
        return lambda: [bounds.verify_seminorm_lemma(T, f, r, p, **kw)]
    if ineq == "theorem":
        return lambda: [c for t in cfg.t for c in bounds.verify_main_theorem(T, f, r, t, p, **kw)]
    if ineq == "corollary":
        return lambda: list(bounds.verify_uniform_corollary(T, f, r, p, **kw))
    if ineq == "mos-kfunc":
        return lambda: [bounds.verify_mos_kfunc(f, T(f), r, t, p) for t in cfg.t]
    if ineq == "abstract-k":

        def cb(s, r=r, p=p):
            return seminorm(s, r, p)

        return lambda: [bounds.verify_abstract_k_bound(T, f, cb, r, p, seed=cfg.seed)]
    raise UsageError(f"unknown inequality family {ineq!r}")


def cmd_verify(cfg: RunConfig) -> tuple[Report, dict]:
    if cfg.ineq not in INEQ_FAMILIES:
        raise UsageError(f"--ineq must be one of {', '.join(INEQ_FAMILIES)}")
    corpus = _load_corpus(cfg)
    items = _verify_items(cfg, corpus)
    if not items:
        raise UsageError("nothing to verify")
    rep = Report("verify", cfg.echo())
    for certs in ordered_map(lambda job: job(), items):
        rep.certificates.extend(c.to_dict() for c in certs)
    return rep, {}


COMMANDS = {"spectrum": cmd_spectrum, "verify": cmd_verify, "tpcheck": cmd_tpcheck, "iterates": cmd_iterates}


# --------------------------------------------------------------------------
# argparse front end


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opbound", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--operator", action="append", default=[], help="e.g. bernstein:n=8, schoenberg:k=3,knots=uniform:8")
        p.add_argument("--out", help="output directory (report.json and CSVs); stdout if omitted")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--grid", type=int, default=4097, help="uniform evaluation grid size")
        p.add_argument("--corpus", default="standard", help="standard | polynomials | rough | custom:<file>")
        p.add_argument("--unit-tol", type=float, default=UNIT_TOL)

    p = sub.add_parser("spectrum", help="eigenvalues, gap and unit multiplicity of a collocation matrix")
    common(p)

    p = sub.add_parser("verify", help="certify an inequality family over operators x corpus x parameters")
    common(p)
    p.add_argument("--ineq", required=True, choices=INEQ_FAMILIES)
    p.add_argument("--n", help="n values: '4..64' or '4,8,16'")
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--p", default="inf", help="comma list of p values, 'inf' allowed")
    p.add_argument("--t", default="0.1", help="comma list of t values")
    p.add_argument("--knots", action="append", default=[], help="uniform:<n> | chebyshev:<n> | random:<n>:<seed>:<gauge> | <file>")
    p.add_argument("--d-k", type=float, dest="d_k", help="caller-supplied d_k (Schoenberg) or d_{k+1} (integral Schoenberg)")
    p.add_argument("--range-norm", choices=("analytic", "numeric"), default="analytic")

    p = sub.add_parser("tpcheck", help="total positivity / oscillation report for a collocation matrix")
    common(p)
    p.add_argument("--matrix", help="whitespace or CSV file holding a square matrix")
    p.add_argument("--sweep", type=int, default=1, help="repeat a random:<n>:<seed>:<gauge> spec over this many seeds")
    p.add_argument("--tp-tol", type=float, default=TP_TOL)

    p = sub.add_parser("iterates", help="decay of ||A^m - P|| against powers of the spectral gap")
    common(p)
    p.add_argument("--m-max", type=int, default=60, dest="m_max")

    p = sub.add_parser("corpus", help="list the functions of a corpus selector")
    p.add_argument("--corpus", default="standard")
    p.add_argument("--grid", type=int, default=4097)

    p = sub.add_parser("knots", help="print a knot sequence in the text format")
    p.add_argument("--knots", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--full", action="store_true", help="write the full clamped knot vector")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command, operators=list(ns.operator), out=ns.out, seed=ns.seed, grid=ns.grid, corpus=ns.corpus)
    cfg.unit_tol = ns.unit_tol
    if ns.grid < 3:
        raise UsageError("--grid must be at least 3")
    if ns.command == "verify":
        cfg.ineq = ns.ineq
        cfg.n = parse_int_list(ns.n) if ns.n else []
        cfg.k, cfg.r, cfg.d_k = ns.k, ns.r, ns.d_k
        cfg.p = parse_p_list(ns.p)
        cfg.t = parse_float_list(ns.t)
        cfg.knots = list(ns.knots)
        cfg.range_norm = ns.range_norm
        if any(t <= 0 for t in cfg.t):
            raise UsageError("t values must be positive")
    elif ns.command == "tpcheck":
        cfg.matrix, cfg.sweep, cfg.tp_tol = ns.matrix, ns.sweep, ns.tp_tol
        if cfg.tp_tol <= 0 or cfg.sweep < 1:
            raise UsageError("--tp-tol must be positive and --sweep at least 1")
    elif ns.command == "iterates":
        cfg.m_max = ns.m_max
    if cfg.unit_tol <= 0:
        raise UsageError("--unit-tol must be positive")
    return cfg


def _aux_command(ns) -> int:
    if ns.command == "corpus":
        for f in generate_corpus(ns.corpus, uniform_grid(ns.grid)):
            kind = "exact" if f.exact is not None else "sampled"
            print(f"{f.label}\t{kind}")
        return 0
    knots = generate_knots(ns.knots, ns.k)
    sys.stdout.write(format_knots(knots, full=ns.full))
    return 0


def run(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if ns.command in ("corpus", "knots"):
            return _aux_command(ns)
        cfg = config_from_args(ns)
        rep, csvs = COMMANDS[cfg.command](cfg)
    except (UsageError, InvalidInputError, CapabilityError, PreconditionError, DivergenceError) as exc:
        print(f"opbound: error: {exc}", file=sys.stderr)
        return 2
    data = rep.to_dict()
    validate_report(data)
    text = rep.to_json()
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        for name, (writer, rows) in csvs.items():
            writer(rows, out / name)
    else:
        sys.stdout.write(text)
    s = data["summary"]
    print(
        f"{cfg.command}: {s['total']} checked, {s['holds']} hold, "
        f"{s['holds_with_slack']} with slack, {s['violations']} violated",
        file=sys.stderr,
    )
    return rep.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
