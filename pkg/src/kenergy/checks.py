"""Verification suites: each suite returns a list of :class:`Record` objects.

A record compares two numbers (``lhs`` and ``rhs``) under an absolute or a
relative tolerance.  Suites are deterministic for a fixed :class:`SuiteOptions`
(random potentials come from a seeded generator).
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import donaldson, functionals, futaki
from .chern import bent_path, bott_chern, chern_form, linear_path, loop_path, reparametrized_path, smoothstep_path
from .forms import omega_power, wedge
from .geometry import Manifold, QuadratureGrid, build_grid, default_grid, integrate, metric_from_jet
from .oracles import cohomology_reference, finite_difference_jets
from .potentials import (
    FourierPotential,
    Potential,
    RadialPotential,
    random_potential,
    zonal_basis,
)


@dataclass
class Record:
    check: str
    anchor: str
    lhs: float
    rhs: float
    tolerance: float
    mode: str = "abs"  # "abs", "rel", or "above" (lhs must exceed rhs)
    grid: dict = field(default_factory=dict)
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def abs_err(self) -> float:
        return float(abs(self.lhs - self.rhs))

    @property
    def rel_err(self) -> float:
        return self.abs_err / max(abs(self.lhs), abs(self.rhs), 1e-12)

    @property
    def passed(self) -> bool:
        if self.mode == "above":
            return bool(self.lhs > self.rhs)
        err = self.rel_err if self.mode == "rel" else self.abs_err
        return bool(np.isfinite(err) and err <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "anchor": self.anchor,
            "lhs": _num(self.lhs),
            "rhs": _num(self.rhs),
            "abs_err": self.abs_err,
            "rel_err": self.rel_err,
            "tolerance": self.tolerance,
            "mode": self.mode,
            "pass": self.passed,
            "grid": self.grid,
            "wall_time": self.wall_time,
            "details": {k: _num(v) for k, v in self.details.items()},
        }


def _num(v):
    if isinstance(v, complex):
        return v.real if v.imag == 0 else {"re": v.real, "im": v.imag}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.complexfloating):
        return _num(complex(v))
    return v


@dataclass
class SuiteOptions:
    """Knobs shared by the suites; ``tol`` overrides every default tolerance."""

    manifold: str = "CP1"
    resolution: tuple = ()
    symmetry: str = "none"
    ks: tuple = ()
    samples: int = 3
    seed: int = 0
    scale: float = 0.1
    n_t: int = 16
    tol: float | None = None

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol

    def grid(self, kind: str | None = None, symmetry: str | None = None) -> QuadratureGrid:
        kind = kind or self.manifold
        symmetry = symmetry or (self.symmetry if kind == self.manifold else "none")
        if kind == "T2" and symmetry != "none":
            symmetry = "none"
        if self.resolution and kind == self.manifold and symmetry == self.symmetry:
            return build_grid(Manifold(kind), self.resolution, symmetry)
        return default_grid(Manifold(kind), 1, symmetry)

    def k_values(self, n: int) -> tuple:
        ks = tuple(k for k in (self.ks or range(1, n + 1)) if 1 <= k <= n)
        return ks or (1,)

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def family(self, grid: QuadratureGrid) -> str | None:
        return "radial" if grid.symmetry == "radial" else None


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _potentials(opts: SuiteOptions, grid: QuadratureGrid, count: int, salt: int) -> list[Potential]:
    rng = opts.rng(salt)
    return [random_potential(grid.manifold.kind, rng, opts.scale, opts.family(grid)) for _ in range(count)]


# ---------------------------------------------------------------------------
# suites


def suite_theorem1(opts: SuiteOptions) -> list[Record]:
    """Pairwise agreement of M_k along linear, reparametrised and bent paths."""
    grid = opts.grid()
    ks = opts.k_values(grid.manifold.n)
    tol = opts.tolerance(1e-6 if grid.manifold.n == 1 else 1e-5)
    out = []
    phis = _potentials(opts, grid, opts.samples, 1)
    bends = _potentials(opts, grid, opts.samples, 2)
    for i, (phi, psi) in enumerate(zip(phis, bends)):
        paths = [linear_path(phi, opts.n_t), reparametrized_path(phi, 2.0, n_t=opts.n_t),
                 bent_path(phi, psi, opts.n_t)]
        values, times = {}, {}
        for p in paths:
            with _Timer() as tm:
                values[p.kind] = functionals.k_energy_path_multi(ks, p, grid)
            times[p.kind] = tm.elapsed
        for k in ks:
            for a, b in itertools.combinations(values, 2):
                out.append(Record(f"theorem1/k{k}/phi{i}/{a}-{b}", "path independence",
                                  values[a][k].value, values[b][k].value, tol, "rel",
                                  grid.describe(), times[a] + times[b], {"n_t": opts.n_t}))
    return out


def suite_euler(opts: SuiteOptions) -> list[Record]:
    """int c_n = chi for the reference metric and three perturbations."""
    grid = opts.grid()
    kind, n = grid.manifold.kind, grid.manifold.n
    chi = cohomology_reference(kind).euler
    tol = opts.tolerance(1e-6)
    out = []
    phis = [None] + _potentials(opts, grid, 3, 3)
    for i, phi in enumerate(phis):
        with _Timer() as tm:
            K = grid.base_jet() if phi is None else grid.base_jet() + grid.jet(phi)
            value = integrate(grid, chern_form(n, metric_from_jet(K, nodes=grid.points)))
        label = "reference" if phi is None else f"phi{i}"
        out.append(Record(f"euler/{label}", "Euler characteristic", value, float(chi), tol,
                          "abs", grid.describe(), tm.elapsed))
    return out


def suite_reference(opts: SuiteOptions) -> list[Record]:
    """V, mu_k and lambda against the cohomological reference table."""
    grid = opts.grid()
    kind, n = grid.manifold.kind, grid.manifold.n
    ref = cohomology_reference(kind)
    tol = opts.tolerance(1e-8)
    out = []
    with _Timer() as tm:
        V = integrate(grid, omega_power(metric_from_jet(grid.base_jet()), n))
    out.append(Record("reference/volume", "plumbing", V, ref.volume, tol, "rel", grid.describe(), tm.elapsed))
    for k in range(1, n + 1):
        with _Timer() as tm:
            mu = functionals.mu_k(k, grid)
        out.append(Record(f"reference/mu{k}", "intersection numbers", mu, ref.mu[k], tol, "abs",
                          grid.describe(), tm.elapsed))
    with _Timer() as tm:
        lam = donaldson.lambda_const(grid)
    out.append(Record("reference/lambda", "lambda = 2 pi mu_1", lam, 2 * math.pi * ref.mu[1], tol,
                      "abs", grid.describe(), tm.elapsed))
    return out


def suite_formulas(opts: SuiteOptions) -> list[Record]:
    """Path integral against both closed formulas, and the path-free M_1 on curves."""
    grid = opts.grid()
    n = grid.manifold.n
    tol = opts.tolerance(1e-6)
    out = []
    for i, phi in enumerate(_potentials(opts, grid, opts.samples, 4)):
        for k in opts.k_values(n):
            vals = {}
            with _Timer() as tm:
                for method in ("path", "lemma51", "cor52"):
                    vals[method] = functionals.k_energy(k, phi, grid, method, n_t=opts.n_t).value
            for m in ("lemma51", "cor52"):
                out.append(Record(f"formulas/k{k}/phi{i}/path-{m}", "closed formulas", vals["path"],
                                  vals[m], tol, "rel", grid.describe(), tm.elapsed))
            if k == 1 and n == 1:
                with _Timer() as tm:
                    nop = functionals.k_energy_nopath(phi, grid).value
                out.append(Record(f"formulas/k1/phi{i}/path-nopath", "path-free K-energy",
                                  vals["path"], nop, opts.tolerance(1e-8), "rel", grid.describe(),
                                  tm.elapsed))
    return out


def suite_cocycle(opts: SuiteOptions) -> list[Record]:
    grid = opts.grid()
    tol = opts.tolerance(1e-6)
    phis = _potentials(opts, grid, opts.samples, 5)
    psis = _potentials(opts, grid, opts.samples, 6)
    out = []
    for i, (phi, psi) in enumerate(zip(phis, psis)):
        for k in opts.k_values(grid.manifold.n):
            with _Timer() as tm:
                d = functionals.cocycle_defect(k, phi, psi, grid, "lemma51", opts.n_t)
            out.append(Record(f"cocycle/k{k}/pair{i}", "cocycle", d, 0.0, tol, "abs",
                              grid.describe(), tm.elapsed))
    return out


def suite_loops(opts: SuiteOptions) -> list[Record]:
    """Around closed loops: the K-energy, the fixed-form integral and int d/dt BC_k ^ omega_t vanish."""
    grid = opts.grid()
    tol = opts.tolerance(1e-6)
    out = []
    pots = _potentials(opts, grid, 3 * opts.samples, 7)
    ts = tuple(np.linspace(0.1, 0.9, 5))
    for i in range(opts.samples):
        base, a, b = pots[3 * i], pots[3 * i + 1], pots[3 * i + 2]
        loop = loop_path(base * 0.5, a * 0.5, b * 0.5, n_t=max(32, opts.n_t))
        for k in opts.k_values(grid.manifold.n):
            with _Timer() as tm:
                rep = functionals.loop_defect(k, loop, grid, ts)
            g = grid.describe()
            out.append(Record(f"loops/k{k}/loop{i}/k-energy", "loop vanishing", rep.loop_integral,
                              0.0, tol, "abs", g, tm.elapsed))
            out.append(Record(f"loops/k{k}/loop{i}/fixed-form", "loop vanishing",
                              rep.fixed_form_integral, 0.0, tol, "abs", g, 0.0))
            for t, q in rep.bc_derivative.items():
                out.append(Record(f"loops/k{k}/loop{i}/bc-derivative@{t:.2f}", "Bott-Chern derivative",
                                  abs(q), 0.0, tol, "abs", g, 0.0))
    return out


def suite_theorem2(opts: SuiteOptions) -> list[Record]:
    """Along the z d/dz flow on CP^1: dM_1/dt and F_1 vanish, F_1 is metric independent."""
    grid = opts.grid("CP1")
    out = []
    bases = [None, RadialPotential(1, (0.0, 0.0, 0.2)), RadialPotential(1, (0.0, 0.15, -0.1, 0.05))]
    X = futaki.euler_field(1)
    for i, psi in enumerate(bases):
        with _Timer() as tm:
            rep = futaki.theorem2_check(1, X, 1.0, grid, psi)
        label = "fs" if psi is None else f"psi{i}"
        g = grid.describe()
        det = {"sup_phi": rep.sup_phi, "lie_residual": rep.lie_residual}
        out.append(Record(f"theorem2/{label}/sup-phi", "flow invariance", rep.sup_phi, 0.1,
                          0.0, "above", g, 0.0))
        out.append(Record(f"theorem2/{label}/dMdt", "flow invariance", rep.max_abs_dMdt, 0.0,
                          opts.tolerance(1e-5), "abs", g, tm.elapsed, det))
        Fmax = max(abs(F) for F in rep.futaki_values)
        out.append(Record(f"theorem2/{label}/futaki", "Futaki invariant", Fmax, 0.0,
                          opts.tolerance(1e-6), "abs", g, 0.0))
        out.append(Record(f"theorem2/{label}/metric-dependence", "Futaki invariant",
                          rep.max_metric_dependence, 0.0, opts.tolerance(1e-6), "abs", g, 0.0))
    return out


def suite_futaki(opts: SuiteOptions) -> list[Record]:
    """Futaki invariant from theta_X against the radial f_1 route on CP^1."""
    grid = opts.grid("CP1")
    tol = opts.tolerance(1e-6)
    metrics = [None, RadialPotential(1, (0.0, 0.0, 0.2)), RadialPotential(1, (0.0, 0.3, -0.2)),
               RadialPotential(1, (0.0, -0.1, 0.1, 0.1))]
    out = []
    for i, phi in enumerate(metrics):
        for name in ("euler", "rotation"):
            X = futaki.field_library("CP1")[name]
            with _Timer() as tm:
                a = futaki.futaki(1, X, phi, grid)
                b = futaki.futaki_via_fk(1, X, phi, grid)
            out.append(Record(f"futaki/{name}/metric{i}", "Futaki defining formula", abs(a - b), 0.0,
                              tol, "abs", grid.describe(), tm.elapsed,
                              {"theta_route": complex(a), "fk_route": complex(b)}))
    return out


def theorem3_battery(n: int = 2) -> list[Potential]:
    """Radial CP^2 potentials; constants are included so the mu_2 readings differ."""
    return [RadialPotential(n, (0.0, 0.0, 0.2)),
            RadialPotential(n, (0.5, 0.0, 0.2)),
            RadialPotential(n, (-0.3, 0.1, -0.15)),
            RadialPotential(n, (0.2, -0.2, 0.1, 0.1)),
            RadialPotential(n, (1.0, 0.15, 0.05, -0.1))]


def suite_theorem3(opts: SuiteOptions) -> list[Record]:
    """Second K-energy via Donaldson's Lagrangian, with the mu_2 coefficient adjudicated."""
    grid = opts.grid("CP2", "radial")
    tol = opts.tolerance(1e-5)
    out = []
    with _Timer() as tm:
        lam = donaldson.lambda_const(grid)
        mu1 = functionals.mu_k(1, grid)
    out.append(Record("theorem3/lambda", "lambda = 2 pi mu_1", lam, 2 * math.pi * mu1,
                      opts.tolerance(1e-8), "abs", grid.describe(), tm.elapsed))
    for i, phi in enumerate(theorem3_battery()):
        with _Timer() as tm:
            rep = donaldson.theorem3_check(phi, grid, opts.n_t)
        det = {"adjudicated": rep.adjudicated,
               "rhs_printed": rep.rhs["printed"], "rhs_derived": rep.rhs["derived"],
               "diff_printed": rep.differences["printed"], "diff_derived": rep.differences["derived"],
               "lhs_cor52": rep.lhs_cor52}
        out.append(Record(f"theorem3/phi{i}", "second K-energy formula", rep.lhs_path,
                          rep.rhs[rep.adjudicated], tol, "rel", grid.describe(), tm.elapsed, det))
    return out


def suite_donaldson(opts: SuiteOptions) -> list[Record]:
    """Path independence of L, the trace formulas for BC_1, BC_2 and the decomposition of L."""
    grid = opts.grid("CP2", "radial") if opts.manifold != "CP1" else opts.grid("CP1")
    n = grid.manifold.n
    m0 = metric_from_jet(grid.base_jet(), nodes=grid.points)
    out = []
    g = grid.describe()
    pots = theorem3_battery(n)[:max(1, min(opts.samples, 5))]
    for i, phi in enumerate(pots):
        with _Timer() as tm:
            Ls = {mk.__name__: donaldson.donaldson_lagrangian(phi, mk(phi, n_t=opts.n_t), grid).L
                  for mk in (linear_path, reparametrized_path, smoothstep_path)}
        for a, b in itertools.combinations(Ls, 2):
            out.append(Record(f"donaldson/phi{i}/{a}-{b}", "Lagrangian path independence", Ls[a],
                              Ls[b], opts.tolerance(1e-6), "rel", g, tm.elapsed))
        path = linear_path(phi, opts.n_t)
        with _Timer() as tm:
            bc1, bc2 = donaldson.bc_trace_forms(phi, path, grid)
            ref1 = bott_chern(1, path, grid)
        out.append(Record(f"donaldson/phi{i}/bc1", "Bott-Chern trace formula",
                          float(np.max(np.abs(bc1.c - ref1.c))), 0.0, opts.tolerance(1e-9), "abs", g,
                          tm.elapsed))
        if n >= 2:
            with _Timer() as tm:
                ref2 = bott_chern(2, path, grid)
                a = integrate(grid, wedge(bc2, omega_power(m0, n - 1)))
                b = integrate(grid, wedge(ref2, omega_power(m0, n - 1)))
            out.append(Record(f"donaldson/phi{i}/bc2", "Bott-Chern trace formula", a, b,
                              opts.tolerance(1e-7), "abs", g, tm.elapsed))
            with _Timer() as tm:
                dec = donaldson.decomposition(phi, grid, opts.n_t)
            out.append(Record(f"donaldson/phi{i}/decomposition", "Lagrangian decomposition",
                              dec["L"], dec["recombined"], opts.tolerance(1e-6), "rel", g, tm.elapsed,
                              {k: v for k, v in dec.items() if k not in ("L", "recombined")}))
            out.append(Record(f"donaldson/phi{i}/cross-term", "trace cross term", dec["cross_term"],
                              dec["cross_term_closed"], opts.tolerance(1e-6), "rel", g, 0.0))
    return out


def suite_critical(opts: SuiteOptions) -> list[Record]:
    """The reference metric is critical; the coefficient gradient matches finite differences."""
    grid = opts.grid()
    if grid.manifold.kind == "T2":
        raise ValueError("critical suite is defined for projective spaces")
    n = grid.manifold.n
    out = []
    basis = zonal_basis(n, (2, 3, 4))
    zgrid = zonal_grid(opts, grid)
    rng = opts.rng(8)
    for k in opts.k_values(n):
        with _Timer() as tm:
            r = functionals.critical_residual(k, None, grid)
        out.append(Record(f"critical/k{k}/fubini-study", "critical points", r, 0.0,
                          opts.tolerance(1e-8), "abs", grid.describe(), tm.elapsed))
        c = rng.normal(size=len(basis)) * 0.03
        with _Timer() as tm:
            ga = functionals.coefficient_gradient(k, basis, c, zgrid)
            gf = functionals.finite_difference_gradient(k, basis, c, zgrid, n_t=max(24, opts.n_t))
        # relative error of the whole vector: |ga - gf| / |gf|
        scale = max(float(np.linalg.norm(gf)), 1e-12)
        out.append(Record(f"critical/k{k}/gradient", "first variation",
                          float(np.linalg.norm(ga - gf)) / scale, 0.0, opts.tolerance(1e-5), "abs",
                          zgrid.describe(), tm.elapsed, {"gradient_norm": scale}))
    return out


def zonal_grid(opts: SuiteOptions, grid: QuadratureGrid) -> QuadratureGrid:
    """Grid for the zonal (radial) families: the radial reduction when n >= 2.

    Degree-4 zonal modes are under-resolved by the default full CP^2 grid
    (gradient error ~1e-4 there, ~1e-8 on (24, 12, 16)); the radial grid
    integrates them to round-off at a fraction of the cost.
    """
    if grid.manifold.n >= 2 and grid.symmetry == "none":
        return opts.grid(grid.manifold.kind, "radial")
    return grid


def normalized_mode(grid: QuadratureGrid, pot: Potential) -> Potential:
    """``pot`` scaled so that the eigenvalues of g^{-1} i ddbar(pot) reach +-1 on the grid."""
    from .chern import ddbar

    mp = metric_from_jet(grid.base_jet(), nodes=grid.points)
    eig = np.linalg.eigvals(mp.g_inv @ ddbar(grid.jet(pot)))
    return pot * (1.0 / float(np.max(np.abs(eig))))


def descent_setup(grid: QuadratureGrid, epsilon: float = 0.2, degrees=(2, 3, 4)):
    """Zonal basis (degrees >= 2) and a start whose metric differs from omega by epsilon in sup norm.

    Degree-1 modes are excluded: they are tangent to the automorphism orbit
    of the Fubini-Study metric, along which M_k is constant.
    """
    basis = [normalized_mode(grid, b) for b in zonal_basis(grid.manifold.n, tuple(degrees))]
    initial = np.zeros(len(basis))
    initial[0] = epsilon
    return basis, initial


def suite_descent(opts: SuiteOptions, steps: int = 200, epsilon: float = 0.2) -> list[Record]:
    grid = opts.grid()
    if grid.manifold.kind == "T2":
        raise ValueError("descent suite is defined for projective spaces")
    grid = zonal_grid(opts, grid)
    basis, init = descent_setup(grid, epsilon)
    out = []
    for k in opts.k_values(grid.manifold.n):
        with _Timer() as tm:
            traj = functionals.descend(k, basis, init, grid, steps=steps, n_t=opts.n_t)
        E = traj.energies
        rise = float(np.max(np.diff(E))) if len(E) > 1 else 0.0
        g = grid.describe()
        out.append(Record(f"descent/k{k}/monotone", "descent", max(rise, 0.0), 0.0, 1e-12, "abs", g,
                          tm.elapsed, {"steps": len(E) - 1, "message": traj.message}))
        out.append(Record(f"descent/k{k}/residual", "descent", float(traj.residuals[-1]), 0.0,
                          opts.tolerance(1e-4), "abs", g, 0.0,
                          {"initial_energy": float(E[0]), "final_energy": float(E[-1])}))
    return out


def jet_families(kind: str) -> dict:
    """name -> (jet evaluator, pointwise evaluator, finite-difference step).

    The step shrinks with the highest frequency present in the family.
    """
    if kind == "T2":
        pot = FourierPotential(1, ((1, 0, 0.3 + 0.1j), (1, 1, -0.2j), (0, 2, 0.05)))
        return {"fourier": (pot.jet, pot, 0.02)}
    manifold = Manifold(kind)
    n = manifold.n
    radial = RadialPotential(n, (0.0, 0.3, -0.2, 0.1))
    harmonic = random_potential(kind, np.random.default_rng(11), 0.2)
    return {
        "fubini-study": (manifold.base_potential, manifold.base_potential_value, 0.05),
        "radial": (radial.jet, radial, 0.05),
        "harmonic": (harmonic.jet, harmonic, 0.05),
    }


def suite_oracles(opts: SuiteOptions) -> list[Record]:
    """Analytic jets against central-difference jets at random nodes."""
    kind = opts.manifold
    n = 2 if kind == "CP2" else 1
    rng = opts.rng(9)
    out = []
    tol = opts.tolerance(1e-6)
    for name, (jet, value, h) in jet_families(kind).items():
        worst = 0.0
        with _Timer() as tm:
            for _ in range(20):
                z = rng.uniform(-0.8, 0.8, n) + 1j * rng.uniform(-0.8, 0.8, n)
                analytic = jet(z[None, :]).take(0)
                fd = finite_difference_jets(lambda zz: np.real(value(zz)), z, h)
                err = np.abs(analytic.c - fd.jet.c) / np.maximum(1.0, np.abs(analytic.c))
                worst = max(worst, float(err.max()))
        out.append(Record(f"oracles/{name}", "jet oracle", worst, 0.0, tol, "abs", {"manifold": kind},
                          tm.elapsed, {"nodes": 20, "h": h}))
    return out


SUITES: dict[str, Callable[[SuiteOptions], list[Record]]] = {
    "reference": suite_reference,
    "euler": suite_euler,
    "theorem1": suite_theorem1,
    "formulas": suite_formulas,
    "cocycle": suite_cocycle,
    "loops": suite_loops,
    "theorem2": suite_theorem2,
    "futaki": suite_futaki,
    "theorem3": suite_theorem3,
    "donaldson": suite_donaldson,
    "critical": suite_critical,
    "descent": suite_descent,
    "oracles": suite_oracles,
}


def run_suites(names, opts: SuiteOptions) -> list[Record]:
    names = list(names)
    if not names:
        raise ValueError("no checks selected")
    if "all" in names:
        names = list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; available: {sorted(SUITES)}")
    out = []
    for s in names:
        out.extend(SUITES[s](opts))
    return out
