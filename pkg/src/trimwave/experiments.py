"""Experiment runners used by the command line.

Each runner takes an :class:`~trimwave.config.ExperimentConfig` and returns
a :class:`RunResult` holding the artifact texts and the assertion outcomes.
Nothing is written to disk here.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .diagnostics import (EXTENDED, LOCALIZED, mobility_csv, mobility_scan, nonempty_gap_check,
                          scan_energies, ucp_check, wegner_experiment, default_source)
from .disorder import EnsembleSpec, potential_csv, sample_potential
from .errors import FitRangeError
from .geometry import build_box, build_trim_mask
from .green import ZetaFloorWarning, decay_fit, sweep_csv, zeta_sweep
from .hamiltonian import assemble_h
from .spectral import (DEFAULT_DENSE_CAP, admissible_containment, cell_ground_state, cell_operator,
                       eigen_sym, energy_region, hellmann_feynman, sigma0_reference,
                       spectrum_endpoints)
from .states import (all_modes, build_extended_state, check_extended_preconditions,
                     invariant_subspace_check, phi_L, residual)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunResult:
    artifacts: dict[str, str] = field(default_factory=dict)
    assertions: list[Assertion] = field(default_factory=list)

    def check(self, name: str, passed: bool, detail: str = ""):
        self.assertions.append(Assertion(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)


def clean_json(obj):
    """Make ``obj`` strict-JSON safe: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dump_json(obj) -> str:
    return json.dumps(clean_json(obj), indent=2, sort_keys=True) + "\n"


def _setup(cfg: ExperimentConfig):
    box = build_box(cfg.geometry, cfg.bc)
    mask = build_trim_mask(box, cfg.gamma0)
    return box, mask


def _summary(cfg: ExperimentConfig, box, **extra) -> dict:
    spec = cfg.geometry
    free = box.shape[spec.d1:]
    out = {
        "schema": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "box_shape": list(box.shape),
        "bc": list(box.bc),
        "truncation": (f"free directions truncated to a periodic torus of sides {list(free)}; "
                       "infinite-volume statements are approximated on this torus"),
    }
    out.update(extra)
    return out


def _ensemble(cfg, mask, realizations):
    return EnsembleSpec(cfg.seed, realizations, cfg.distribution, mask)


# --------------------------------------------------------------------------- spectrum


def run_spectrum(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    box, mask = _setup(cfg)
    res = RunResult()
    dist = cfg.distribution
    sigma0 = sigma0_reference(mask)
    spec = cfg.geometry
    region = energy_region(spec.periods, spec.d1, spec.d2)
    ends = (spectrum_endpoints(mask, dist.a)[0], spectrum_endpoints(mask, dist.b)[1])
    ens = _ensemble(cfg, mask, p.get("realizations", 1))
    lines = ["realization,n,E"]
    margins = []
    for r in range(ens.realizations):
        v = sample_potential(ens, r)
        h = assemble_h(box, v)
        vals = eigen_sym(h).values
        lines += [f"{r},{n},{float(e)!r}" for n, e in enumerate(vals)]
        rep = admissible_containment(mask, dist, v, endpoints=ends)
        margins.append(min(rep.lower_margin, rep.upper_margin))
        res.check(f"containment[r={r}]", rep.contained,
                  f"margins ({rep.lower_margin!r}, {rep.upper_margin!r})")
        if p.get("dump_potential", False):
            res.artifacts[f"potential_r{r}.csv"] = potential_csv(v)
        if p.get("dump_operator", False):
            res.artifacts[f"operator_r{r}.txt"] = h.to_coo_text()
    res.artifacts["spectrum.csv"] = "\n".join(lines) + "\n"
    res.artifacts["summary.json"] = dump_json(_summary(
        cfg, box, sigma0=sigma0.to_dict(), energy_region=region.to_dict(),
        e_min_a=ends[0], e_max_b=ends[1], min_margin=min(margins)))
    return res


# --------------------------------------------------------------------------- endpoints


def _top_weight(periods, gamma0, a):
    """Top eigenvalue of the cell operator and its eigenvector's weight on the active sites."""
    op = cell_operator(periods, gamma0, a)
    dec = eigen_sym(op, want_vectors=True)
    cell_mask = build_trim_mask(op.box, gamma0, periods)
    return float(dec.values[-1]), float(np.sum(dec.vectors[cell_mask.active, -1] ** 2))


def run_endpoints(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    h_step = p.get("fd_step", 1e-4)
    box, mask = _setup(cfg)
    res = RunResult()
    dist = cfg.distribution
    periods = cfg.geometry.periods
    rows = {}
    for label, a in (("a", dist.a), ("b", dist.b)):
        e0, _, gap = cell_ground_state(periods, cfg.gamma0, a)
        hf = hellmann_feynman(periods, cfg.gamma0, a)
        fd = (cell_ground_state(periods, cfg.gamma0, a + h_step)[0]
              - cell_ground_state(periods, cfg.gamma0, a - h_step)[0]) / (2 * h_step)
        top, top_hf = _top_weight(periods, cfg.gamma0, a)
        fd_top = (_top_weight(periods, cfg.gamma0, a + h_step)[0]
                  - _top_weight(periods, cfg.gamma0, a - h_step)[0]) / (2 * h_step)
        lo, hi = spectrum_endpoints(mask, a)
        rows[label] = {"value": a, "E_min": lo, "E_max": hi, "cell_ground": e0, "cell_gap": gap,
                       "dEmin_da": hf, "dEmin_da_fd": fd, "cell_top": top,
                       "dEmax_da": top_hf, "dEmax_da_fd": fd_top}
        res.check(f"hellmann_feynman_positive[{label}]", hf > 0, repr(hf))
        res.check(f"hellmann_feynman_fd[{label}]", abs(hf - fd) <= 1e-6, f"|{hf!r} - {fd!r}|")
        res.check(f"hellmann_feynman_top_fd[{label}]", abs(top_hf - fd_top) <= 1e-6,
                  f"|{top_hf!r} - {fd_top!r}|")
    if dist.b > dist.a:
        res.check("E_min_increasing", rows["a"]["E_min"] < rows["b"]["E_min"],
                  f"{rows['a']['E_min']!r} < {rows['b']['E_min']!r}")
    gap = nonempty_gap_check(mask, dist, threshold=p.get("gap_threshold", 0.0))
    res.check("edge_gap_low", gap.eta_low > gap.threshold, repr(gap.eta_low))
    res.check("edge_gap_high", gap.eta_high > gap.threshold, repr(gap.eta_high))
    res.artifacts["endpoints.json"] = dump_json(_summary(
        cfg, box, endpoints=rows, sigma0_inf=gap.sigma0_inf, sigma0_sup=gap.sigma0_sup,
        eta_low=gap.eta_low, eta_high=gap.eta_high, spectrum=[gap.e_min, gap.e_max]))
    return res


# --------------------------------------------------------------------------- extended states


def _mode_label(t) -> str:
    return ";".join(str(v) for v in t)


def run_extended_check(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    box, mask = _setup(cfg)
    res = RunResult()
    allow_odd = p.get("allow_odd", False)
    verified = check_extended_preconditions(box, mask, allow_odd)
    states = [build_extended_state(box, m, mask, allow_odd) for m in all_modes(box)]
    ens = _ensemble(cfg, mask, p.get("realizations", 20))
    lines = ["realization,L,m,E,residual"]
    worst = 0.0
    h_first = None
    for r in range(ens.realizations):
        h = assemble_h(box, sample_potential(ens, r))
        h_first = h if h_first is None else h_first
        for st in states:
            val = residual(h, st)
            worst = max(worst, val)
            lines.append(f"{r},{_mode_label(st.mode.L)},{_mode_label(st.mode.m)},"
                         f"{st.energy!r},{val!r}")
    res.artifacts["extended.csv"] = "\n".join(lines) + "\n"
    if verified:
        res.check("residual<=1e-12", worst <= 1e-12, repr(worst))
    invariance = {}
    for L in sorted({st.mode.L for st in states}):
        rep = invariant_subspace_check(h_first, box, L, mask, allow_odd=allow_odd)
        invariance[_mode_label(L)] = rep.max_off_residual
        if verified:
            res.check(f"invariant_subspace[L={_mode_label(L)}]", rep.invariant,
                      repr(rep.max_off_residual))
    if p.get("dump_states", False):
        out = ["L,m,site_index,re,im"]
        for st in states:
            head = f"{_mode_label(st.mode.L)},{_mode_label(st.mode.m)}"
            out += [f"{head},{i},{float(v.real)!r},{float(v.imag)!r}"
                    for i, v in enumerate(st.values)]
        res.artifacts["states.csv"] = "\n".join(out) + "\n"
    res.artifacts["summary.json"] = dump_json(_summary(
        cfg, box, verified=verified, modes=len(states), realizations=ens.realizations,
        max_residual=worst, invariance=invariance))
    return res


# --------------------------------------------------------------------------- Green's function


def run_green(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    box, mask = _setup(cfg)
    res = RunResult()
    spec = cfg.geometry
    sigma0 = sigma0_reference(mask)
    region = energy_region(spec.periods, spec.d1, spec.d2)
    energies = p.get("energies") or [sigma0.inf - 2.0, 0.5 * (region.inf + region.sup)]
    x = box.index(box.wrap(p["source"])) if "source" in p else default_source(mask)
    r = p.get("realization", 0)
    ens = _ensemble(cfg, mask, r + 1)
    h = assemble_h(box, sample_potential(ens, r))
    spectrum = eigen_sym(h).values if h.n <= DEFAULT_DENSE_CAP else None
    zeta = (p.get("zeta_max", 1e-1), p.get("zeta_min", 1e-4), p.get("zeta_points", 9))
    sweeps, table, notes = [], [], []
    psi_x = abs(phi_L(box.coords[x, : spec.d1], spec.periods, (1,) * spec.d1))
    for e in energies:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ZetaFloorWarning)
            sweep, cols = zeta_sweep(h, e, x, *zeta, spectrum=spectrum, keep_columns=True)
        notes += [str(w.message) for w in caught if issubclass(w.category, ZetaFloorWarning)]
        sweeps.append(sweep)
        try:
            fit = decay_fit(cols[-1], box)
            mass, r2 = fit.mass, fit.r2
        except FitRangeError:
            mass, r2 = float("nan"), float("nan")
        table.append({"E": float(e), "gamma": sigma0.distance_to(e), "in_E": region.contains(e),
                      "m": mass, "R2": r2, "alpha": sweep.alpha, "S_ratio": sweep.l1_ratio,
                      "min_zeta_S": sweep.min_zeta_l1})
        finite = bool(np.all(np.isfinite(sweep.l1)) and np.all(sweep.l1 > 0))
        res.check(f"finite_S[E={float(e)!r}]", finite)
    res.artifacts["sweep.csv"] = sweep_csv(sweeps)
    res.artifacts["green.json"] = dump_json(_summary(
        cfg, box, source=int(x), source_coords=box.coord(x), psi_at_source=psi_x,
        realization=r, rows=table, warnings=sorted(set(notes))))
    return res


# --------------------------------------------------------------------------- Wegner


def run_wegner(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    res = RunResult()
    base = cfg.geometry
    sizes = p.get("boxes") or [{}, {"k": [2 * k for k in base.k]}]
    specs = []
    for s in sizes:
        changes = {key: (tuple(v) if isinstance(v, list) else v) for key, v in s.items()}
        specs.append(base.replace(**changes))
    first = build_box(specs[0], cfg.bc)
    sigma0 = sigma0_reference(build_trim_mask(first, cfg.gamma0))
    rep = wegner_experiment(specs, cfg.gamma0, cfg.distribution, p["energy"],
                            p.get("eps", [0.01, 0.02, 0.04]), p.get("realizations", 200), cfg.seed,
                            p.get("gamma_floor", 0.5), sigma0, threads)
    for label, slope in rep.slopes.items():
        res.check(f"slope[{label}]", 0.85 <= slope <= 1.15, repr(slope))
    spread = rep.c_spread() if len(rep.c_fit) > 1 else 0.0
    if len(rep.c_fit) > 1:
        res.check("C_hat_spread<=0.3", spread <= 0.3, repr(spread))
    res.artifacts["wegner.csv"] = rep.csv()
    res.artifacts["wegner.json"] = dump_json(_summary(
        cfg, first, energy=rep.energy, gamma=rep.gamma, rho_max=rep.rho_max,
        realizations=rep.realizations, eps=list(rep.eps), c_fit=rep.c_fit, slopes=rep.slopes,
        pooled_slope=rep.pooled_slope, c_spread=spread))
    return res


# --------------------------------------------------------------------------- mobility scan


def run_mobility_scan(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    box, mask = _setup(cfg)
    res = RunResult()
    spec = cfg.geometry
    dist = cfg.distribution
    region = energy_region(spec.periods, spec.d1, spec.d2)
    centre = 0.5 * (region.inf + region.sup)
    if "energies" in p:
        energies = np.array(sorted(p["energies"]), dtype=float)
    else:
        energies = scan_energies(mask, dist, p.get("energy_count", 41), p.get("energy_margin", 1.0))
    source = box.index(box.wrap(p["source"])) if "source" in p else None
    rows = mobility_scan(mask, dist, energies, p.get("realizations", 5), cfg.seed, source,
                         p.get("zeta_max", 1e-1), p.get("zeta_min", 1e-4), p.get("zeta_points", 9),
                         threads=threads)
    far = [r for r in rows if r.gamma >= 1.0]
    bad_ext = [r.energy for r in far if r.tag == EXTENDED]
    res.check("no_extended_with_gamma>=1", not bad_ext, repr(bad_ext))
    not_loc = [r.energy for r in far if r.tag != LOCALIZED]
    res.check("localized_for_gamma>=1", not not_loc, repr(not_loc))
    centre_rows = [r for r in rows if r.energy == centre]
    if centre_rows:
        res.check("centre_extended", centre_rows[0].tag == EXTENDED, centre_rows[0].tag)
    counts = {}
    for r in rows:
        counts[r.tag] = counts.get(r.tag, 0) + 1
    res.artifacts["mobility.csv"] = mobility_csv(rows)
    res.artifacts["mobility.json"] = dump_json(_summary(
        cfg, box, rows=len(rows), classes=counts, energy_region=region.to_dict(),
        realizations=p.get("realizations", 5)))
    return res


# --------------------------------------------------------------------------- unique continuation


def run_ucp(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    p = cfg.params
    box, mask = _setup(cfg)
    res = RunResult()
    sigma0 = sigma0_reference(mask)
    ens = _ensemble(cfg, mask, p.get("realizations", 20))
    floor = p.get("gamma_floor", 0.5)
    # one block of rows per realization, in order; ucp.json records the block sizes
    lines = ["n,E,gamma,lhs,rhs,pass"]
    total = passed = 0
    per_realization = []
    for r in range(ens.realizations):
        rep = ucp_check(assemble_h(box, sample_potential(ens, r)), mask, sigma0, floor)
        lines += rep.csv().splitlines()[1:]
        per_realization.append(rep.qualifying)
        total += rep.qualifying
        passed += sum(row.passed for row in rep.rows)
    res.check("qualifying_pairs>0", total > 0, str(total))
    res.check("all_pass", passed == total, f"{passed}/{total}")
    res.artifacts["ucp.csv"] = "\n".join(lines) + "\n"
    res.artifacts["ucp.json"] = dump_json(_summary(
        cfg, box, sigma0=sigma0.to_dict(), gamma_floor=floor, qualifying=total, passed=passed,
        rows_per_realization=per_realization))
    return res


RUNNERS = {
    "spectrum": run_spectrum,
    "endpoints": run_endpoints,
    "extended-check": run_extended_check,
    "green": run_green,
    "wegner": run_wegner,
    "mobility-scan": run_mobility_scan,
    "ucp": run_ucp,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    return RUNNERS[cfg.experiment](cfg, threads)
