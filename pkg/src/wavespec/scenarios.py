"""Scenario runners behind the command-line subcommands.

Each runner takes a validated config and an output directory, performs its
checks, writes the requested artifacts and returns a ``RunReport``.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import continuum as c1d
from .config import ConfigError, ModelSection, ScenarioConfig
from .dynamics import (
    cnsa_oracle,
    defect_subspace,
    is_controllable,
    prop1_check,
    reachable_fn,
    total_reachable,
)
from .lattice import complement, fn_leq, leq, subspace_distance, subspace_to_rows
from .operator import (
    OperatorModel,
    corrupt_k,
    gamma1,
    gamma2,
    green_terms,
    make_block_model,
    make_custom_model,
    make_interval_model,
    random_vishik,
)
from .report import RunReport, csv_text, heatmap_svg, scatter_svg, sha256_file, write_text
from .spectrum import LatticeBudget, compute_spectrum, interval_reconstruction_score, is_closed

CLOSURE_CHECK_LIMIT = 300


def build_model(section: ModelSection) -> OperatorModel:
    if section.kind == "interval":
        return make_interval_model(section.N)
    if section.kind == "block":
        return make_block_model(build_model(section.blocks[0]), build_model(section.blocks[1]))
    try:
        L = np.loadtxt(section.matrix_file, delimiter=",", ndmin=2)
        K = np.loadtxt(section.k_file, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load custom matrix: {exc}") from None
    try:
        return make_custom_model(L, K, label=Path(section.matrix_file).name)
    except ValueError as exc:
        raise ConfigError(f"custom matrix rejected: {exc}") from None


def apply_quick(cfg: ScenarioConfig) -> ScenarioConfig:
    """Desk-speed variant: interval models shrink to N = 16 on a coarse grid."""
    cfg = cfg.model_copy(deep=True)
    if cfg.model.kind == "interval":
        cfg.model.N = min(cfg.model.N, 16)
    cfg.time.T_max, cfg.time.steps = 1.0, 100
    cfg.budget.max_elements = min(cfg.budget.max_elements, 500)
    cfg.checks.reconstruct_threshold = min(cfg.checks.reconstruct_threshold, 0.8)
    cfg.checks.triples = min(cfg.checks.triples, 20)
    return cfg


class _Run:
    def __init__(self, command: str, cfg: ScenarioConfig, out: Path):
        self.cfg = cfg
        self.out = Path(out)
        self.report = RunReport(command, cfg.echo())
        self.formats = set(cfg.outputs.formats)
        self._t = 0.0

    @contextmanager
    def timed(self):
        t0 = time.perf_counter()
        yield
        self._t = time.perf_counter() - t0

    def check(self, name, passed, measured=None, tolerance=None, warn=False):
        self.report.add(name, passed, measured, tolerance, self._t, warn)

    def artifact(self, name: str, text: str, kind: str):
        if kind not in self.formats:
            return
        path = write_text(self.out / name, text)
        self.report.artifacts.append({"path": name, "sha256": sha256_file(path)})

    def finish(self) -> RunReport:
        if "report" in self.formats:
            write_text(self.out / f"{self.report.command}_report.json", self.report.to_json())
        return self.report


# --- green-check ---------------------------------------------------------------


def continuum_rows(M: int):
    lib = c1d.library(M)
    rows = []
    for a, b in c1d.LIBRARY_PAIRS:
        s = c1d.green_formula_sides(lib[a], lib[b])
        rows.append((a, b, s["lhs"], s["rhs"], s["defect"]))
    return rows


def continuum_slopes():
    lib = c1d.library()
    return {f"{a}|{b}": c1d.convergence_slope(lib[a], lib[b])
            for a, b in (("exp(x)", "sin(3x)"), ("cos(2x)", "x*exp(x)"))}


def run_green_check(cfg: ScenarioConfig, out: Path) -> RunReport:
    run = _Run("green-check", cfg, out)
    model = build_model(cfg.model)
    rng = np.random.default_rng(cfg.seed)
    probe = model
    if cfg.fault.corrupt_k > 0:
        probe = corrupt_k(model, cfg.fault.corrupt_k, np.random.default_rng(cfg.seed + 1))
        run.report.notes.append(f"fault injection: K tilted by {cfg.fault.corrupt_k}")
    rows, worst, gam = [], 0.0, 0.0
    with run.timed():
        for i in range(cfg.checks.triples):
            u, v = random_vishik(model, rng), random_vishik(model, rng)
            t = green_terms(probe, u, v, check=False)
            d = abs((t[0] - t[1]) - (t[2] - t[3])) / max(map(abs, t))
            worst = max(worst, d)
            rows.append((i, *t, d))
            gam = max(gam, float(np.linalg.norm(gamma1(probe, u, check=False) + u.h)),
                      float(np.linalg.norm(gamma2(probe, u, check=False) - u.g)))
    run.check("green_identity", worst < cfg.tolerances.green_tol,
              {"max_relative_defect": worst, "triples": cfg.checks.triples, "model": model.label},
              {"relative": cfg.tolerances.green_tol})
    run.check("boundary_operators", gam < 1e-8, {"max_gamma_error": gam}, {"absolute": 1e-8})
    run.artifact("green_defects.csv", csv_text(
        ["trial", "adjoint_u_v", "u_adjoint_v", "g1u_g2v", "g2u_g1v", "relative_defect"], rows), "csv")
    _continuum_checks(run, cfg)
    return run.finish()


def _continuum_checks(run: _Run, cfg: ScenarioConfig):
    tol = cfg.tolerances.continuum_tol
    with run.timed():
        rows = continuum_rows(cfg.checks.continuum_M)
        slopes = continuum_slopes()
    x23 = next(r for r in rows if r[:2] == ("x^2", "x^3"))
    run.check("continuum_x2_x3", abs(x23[2] - 1) < tol and abs(x23[3] - 1) < tol,
              {"lhs": x23[2], "rhs": x23[3], "M": cfg.checks.continuum_M}, {"absolute": tol})
    run.check("continuum_defects", max(r[4] for r in rows) < tol,
              {"max_defect": max(r[4] for r in rows)}, {"absolute": tol})
    smin = min(s["min_slope"] for s in slopes.values())
    run.check("continuum_slope", smin >= cfg.checks.slope_min, {"min_slope": smin, "pairs": slopes},
              {"min": cfg.checks.slope_min})
    run.artifact("continuum_green.csv", csv_text(["u", "v", "lhs", "rhs", "defect"], rows), "csv")


# --- continuum -----------------------------------------------------------------


def run_continuum(cfg: ScenarioConfig, out: Path) -> RunReport:
    run = _Run("continuum", cfg, out)
    _continuum_checks(run, cfg)
    M = cfg.checks.continuum_M
    tol = cfg.tolerances.continuum_tol
    lib = c1d.library(M)
    rows, worst_g, worst_end, worst_re = [], 0.0, 0.0, 0.0
    x = np.linspace(0.0, 1.0, 41)
    with run.timed():
        for name, y in lib.items():
            comp = c1d.vishik_components(y)
            proj = c1d.linear_projection(c1d.minus_second(y))
            ends = comp.y0(np.array([0.0, 1.0]))
            recomposed = comp.y0(x) + c1d.green_apply(comp.g)(x) + comp.h(x)
            gap = float(np.max(np.abs(comp.g_coeffs - proj)))
            worst_g = max(worst_g, gap)
            worst_end = max(worst_end, float(np.max(np.abs(ends))))
            worst_re = max(worst_re, float(np.max(np.abs(recomposed - y(x)))))
            rows.append((name, comp.h_trace.at0, comp.h_trace.at1, *comp.g_coeffs, *proj, *ends, gap))
        pi_gamma = max(
            float(np.max(np.abs(c1d.gamma2(c1d.harmonic_continuation(c1d.BoundaryPair(a, b), M)).as_array())))
            for a, b in ((1.0, 1.0), (0.0, 1.0), (2.0, -3.0))
        )
    run.check("g_formulas_agree", worst_g < tol, {"max_coefficient_gap": worst_g}, {"absolute": tol})
    run.check("y0_vanishes_on_boundary", worst_end < tol, {"max_endpoint_value": worst_end}, {"absolute": tol})
    run.check("recomposition", worst_re < tol, {"max_error": worst_re}, {"absolute": tol})
    run.check("gamma2_of_harmonic", pi_gamma < 1e-12, {"max": pi_gamma}, {"absolute": 1e-12})
    run.artifact("continuum_components.csv", csv_text(
        ["y", "h_at0", "h_at1", "g_a", "g_b", "proj_a", "proj_b", "y0_at0", "y0_at1", "g_gap"], rows), "csv")
    slopes = continuum_slopes()
    srows = [(k, M, d) for k, s in slopes.items() for M, d in zip(s["grids"], s["defects"])]
    run.artifact("continuum_slopes.csv", csv_text(["pair", "M", "defect"], srows), "csv")
    return run.finish()


# --- controllability -------------------------------------------------------------


def run_controllability(cfg: ScenarioConfig, out: Path) -> RunReport:
    run = _Run("controllability", cfg, out)
    model = build_model(cfg.model)
    rng = np.random.default_rng(cfg.seed)
    with run.timed():
        ic = is_controllable(model)
        co = cnsa_oracle(model)
        D = defect_subspace(model)
        dist = subspace_distance(D, co["max_selfadjoint_part"])
    agree = ic["verdict"] == co["is_cnsa"]
    run.check("defect_matches_oracle", agree and dist < 1e-8,
              {"controllable": ic["verdict"], "is_cnsa": co["is_cnsa"], "defect_dim": ic["defect_dim"],
               "selfadjoint_dim": co["max_selfadjoint_part"].dim, "subspace_distance": dist,
               "model": model.label},
              {"subspace_distance": 1e-8})
    grid = cfg.time_grid
    with run.timed():
        u = reachable_fn(model, grid)
        total = total_reachable(model)
        mono = u.is_monotone(cfg.tolerances.leq_tol)
        inside = all(leq(v, total, cfg.tolerances.leq_tol) for v in dict.fromkeys(u.values))
    run.check("reachable_monotone", mono and inside,
              {"monotone": mono, "inside_total": inside, "final_dim": u.values[-1].dim, "total_dim": total.dim},
              {"leq": cfg.tolerances.leq_tol})
    rows, member, outside = [], [], []
    n = cfg.checks.prop1_samples
    with run.timed():
        comp = complement(D)
        for kind, S, bucket in (("defect", D, member), ("complement", comp, outside)):
            if S.is_zero:
                continue
            for i in range(n):
                y = S.basis @ rng.standard_normal(S.dim)
                y /= np.linalg.norm(y)
                r = prop1_check(model, y, grid, cfg.tolerances.prop1_tol)
                bucket.append(r["max_violation"])
                rows.append((kind, i, r["max_violation"], r["is_member"], r["is_member"] == (kind == "defect")))
    wrong = sum(1 for r in rows if not r[4])
    m_max = max(member, default=0.0)
    o_min = min(outside, default=float("inf"))
    margin_ok = (not member or m_max < 1e-10) and (not member or not outside or o_min >= 10 * m_max)
    run.check("prop1_sweep", wrong == 0 and margin_ok,
              {"samples": len(rows), "disagreements": wrong, "max_member_violation": m_max,
               "min_nonmember_violation": o_min},
              {"membership": cfg.tolerances.prop1_tol, "member_max": 1e-10, "margin": 10})
    run.artifact("prop1.csv", csv_text(["set", "sample", "max_violation", "is_member", "correct"], rows), "csv")
    run.artifact("defect_basis.csv", csv_text([f"x{i}" for i in range(model.dim)], subspace_to_rows(D)), "csv")
    return run.finish()


# --- spectrum and reconstruction ---------------------------------------------------


def _spectrum(cfg: ScenarioConfig, model: OperatorModel):
    budget = LatticeBudget(cfg.budget.max_elements, cfg.budget.max_rounds, cfg.time_grid, cfg.tolerances.dedup_tol)
    return compute_spectrum(model, budget, cfg.tolerances.leq_tol)


def _block_of(model_cfg: ModelSection, atom) -> int | None:
    if model_cfg.kind != "block":
        return None
    n1 = _dim_of(model_cfg.blocks[0])
    i = atom.first_nonzero()
    d = atom.values[i].diagonal
    return 0 if np.all(d[n1:] < 1e-12) else 1 if np.all(d[:n1] < 1e-12) else -1


def _dim_of(section: ModelSection) -> int:
    if section.kind == "interval":
        return section.N
    if section.kind == "block":
        return _dim_of(section.blocks[0]) + _dim_of(section.blocks[1])
    return build_model(section).dim


def _spectrum_checks(run: _Run, cfg: ScenarioConfig, model: OperatorModel, res):
    tol = cfg.tolerances.leq_tol
    run.check("completeness", True, {"complete": res.complete, "lattice_size": len(res.lattice),
                                     "rounds": res.rounds, "functions": len(res.functions)},
              {"max_elements": cfg.budget.max_elements, "max_rounds": cfg.budget.max_rounds},
              warn=not res.complete)
    pairs_bad = sum(1 for i, a in enumerate(res.atoms) for j, b in enumerate(res.atoms)
                    if i != j and fn_leq(a, b, tol))
    run.check("atoms_incomparable", len(res.atoms) > 0 and pairs_bad == 0,
              {"atoms": len(res.atoms), "comparable_pairs": pairs_bad})
    run.check("ball_base", bool(res.base_check.get("passed")), res.base_check)
    if res.complete and len(res.lattice) <= CLOSURE_CHECK_LIMIT:
        with run.timed():
            closed = is_closed(res.lattice, cfg.tolerances.dedup_tol)
        run.check("lattice_closure", closed["closed"], closed, {"dedup": cfg.tolerances.dedup_tol})
    else:
        run.check("lattice_closure", None, {"reason": "incomplete or above exhaustive-check size"})


def run_spectrum(cfg: ScenarioConfig, out: Path) -> RunReport:
    run = _Run("spectrum", cfg, out)
    model = build_model(cfg.model)
    with run.timed():
        res = _spectrum(cfg, model)
    _spectrum_checks(run, cfg, model, res)
    n = model.dim
    if cfg.model.kind == "interval" and res.atoms:
        ends = {0: False, n - 1: False}
        for a, flag in zip(res.atoms, res.boundary_flags):
            if flag:
                d = a.values[a.first_nonzero()].diagonal
                for e in ends:
                    ends[e] |= bool(d[e] > 1e-12)
        run.check("boundary_each_end", all(ends.values()),
                  {"flagged": int(sum(res.boundary_flags)), "left_end": ends[0], "right_end": ends[n - 1]})
    if cfg.model.kind == "block" and res.atoms:
        blocks = [_block_of(cfg.model, a) for a in res.atoms]
        D = res.distances
        bad = sum(1 for i in range(len(blocks)) for j in range(len(blocks))
                  if (blocks[i] != blocks[j]) != bool(np.isinf(D[i, j])))
        run.check("cross_block_unreachable", bad == 0 and -1 not in blocks,
                  {"mismatched_pairs": bad, "atoms_per_block": [blocks.count(0), blocks.count(1)]})
    grid = res.time_grid
    rows = []
    for i, a in enumerate(res.atoms):
        k = a.first_nonzero()
        rows.append((i, a.activation_time(), res.centers[i], (res.centers[i] + 1) / (n + 1),
                     res.boundary_flags[i], a.values[k].dim))
    run.artifact("atoms.csv", csv_text(["atom", "activation_time", "center", "position", "boundary", "dim"], rows),
                 "csv")
    if res.atoms:
        D = res.distances
        run.artifact("distances.csv", csv_text(["atom"] + [str(j) for j in range(len(D))],
                                               [(i, *D[i]) for i in range(len(D))]), "csv")
        run.artifact("distances.svg", heatmap_svg(D, f"atom distances ({model.label})"), "svg")
        run.report.notes.append(f"grid step {grid[1] - grid[0]!r}; distance asymmetry {res.asymmetry!r}")
    return run.finish()


def run_reconstruct(cfg: ScenarioConfig, out: Path) -> RunReport:
    if cfg.model.kind != "interval":
        raise ConfigError("reconstruct needs model.kind = interval")
    run = _Run("reconstruct", cfg, out)
    model = build_model(cfg.model)
    N = cfg.model.N
    with run.timed():
        res = _spectrum(cfg, model)
    _spectrum_checks(run, cfg, model, res)
    if not res.atoms:
        run.check("reconstruction", False, {"reason": "no atoms"})
        return run.finish()
    score = interval_reconstruction_score(res, N)
    thr = cfg.checks.reconstruct_threshold
    run.check("reconstruction", score["fraction"] >= thr,
              {k: v for k, v in score.items() if k != "truth"},
              {"fraction_min": thr, "grid_steps": 2, "spatial_step": 1 / (N + 1)})
    dt = float(cfg.time_grid[1])
    run.check("self_distance", score["diagonal_max"] <= dt * (1 + 1e-12),
              {"max_self_distance": score["diagonal_max"]}, {"first_grid_step": dt})
    D, truth = res.distances, score["truth"]
    tol = 2 / (N + 1) + 1e-12
    rows, xs, ys = [], [], []
    for i in range(len(D)):
        for j in range(len(D)):
            if i == j:
                continue
            err = abs(D[i, j] - truth[i, j])
            rows.append((i, j, res.centers[i], res.centers[j], truth[i, j], D[i, j], err, err <= tol))
            if np.isfinite(D[i, j]):
                xs.append(truth[i, j])
                ys.append(D[i, j])
    run.artifact("reconstruct.csv", csv_text(
        ["i", "j", "center_i", "center_j", "true", "reconstructed", "error", "within_2_steps"], rows), "csv")
    run.artifact("reconstruct.svg", scatter_svg(xs, ys, f"reconstructed vs true distance, N={N}"), "svg")
    return run.finish()


RUNNERS = {
    "green-check": run_green_check,
    "controllability": run_controllability,
    "spectrum": run_spectrum,
    "reconstruct": run_reconstruct,
    "continuum": run_continuum,
}


def default_config(command: str) -> ScenarioConfig:
    """Built-in scenario used when no config file is given."""
    base = {"seed": 0}
    if command == "spectrum":
        base.update(model={"kind": "interval", "N": 16}, time={"T_max": 1.0, "steps": 100},
                    budget={"max_elements": 500, "max_rounds": 20})
    elif command == "reconstruct":
        base.update(model={"kind": "interval", "N": 64}, time={"T_max": 1.5, "steps": 600},
                    budget={"max_elements": 300, "max_rounds": 20})
    elif command == "controllability":
        base.update(model={"kind": "interval", "N": 20}, time={"T_max": 2.0, "steps": 200})
    else:
        base.update(model={"kind": "interval", "N": 20})
    return ScenarioConfig.model_validate(base)
