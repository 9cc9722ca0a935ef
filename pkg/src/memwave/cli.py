"""Command-line front end: verification suites, control pipeline, report emission.

Every command writes a machine-readable JSON report (one check per verified
invariant, with measured value and threshold) plus CSV sidecars with the plot
data; the process exits 0 only if every asserted check passed, 2 if the run
completed with warnings, 1 otherwise.  All randomness derives from the single
--seed flag, so identical configurations reproduce identical report bytes up
to the isolated timestamp header field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# thread-count control must precede the first numerical-library import
if "MEMWAVE_THREADS" in os.environ:
    _t = os.environ["MEMWAVE_THREADS"]
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _t)

import numpy as np

from .model import FourierField, InvalidParameterError, ModelParams

DEFAULTS = {"M": 1.0, "c": 2.0, "T": 12.0, "omega0": [[0.0, float(np.pi) / 2.0]],
            "N": 6, "sigma": 0.0}
EPS_SWEEP_DEFAULT = (0.05, 0.02, 0.01, 0.005)

PASS, WARN, FAIL = "pass", "warning", "fail"


class Report:
    """Accumulates checks; `passed=None` marks report-only entries."""

    def __init__(self, command: str, params: ModelParams, seed: int):
        self.command = command
        self.params = params
        self.seed = seed
        self.checks: list[dict] = []
        self.artifacts: list[str] = []
        self.warnings: list[str] = []

    def check(self, name: str, passed: bool | None, value, threshold=None, note: str = ""):
        entry = {"name": name, "passed": None if passed is None else bool(passed),
                 "value": _jsonable(value)}
        if threshold is not None:
            entry["threshold"] = _jsonable(threshold)
        if note:
            entry["note"] = note
        self.checks.append(entry)
        flag = {True: "PASS", False: "FAIL", None: "info"}[passed]
        print(f"  [{flag}] {name}: {entry['value']}"
              + (f" (threshold {entry.get('threshold')})" if threshold is not None else ""))

    def warn(self, message: str):
        self.warnings.append(message)
        print(f"  [warn] {message}")

    @property
    def status(self) -> str:
        if any(c["passed"] is False for c in self.checks):
            return FAIL
        return WARN if self.warnings else PASS

    def write(self, out_dir: str) -> str:
        import datetime

        payload = {
            "command": self.command,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "seed": self.seed,
            "params": json.loads(self.params.to_json()),
            "status": self.status,
            "checks": self.checks,
            "warnings": self.warnings,
            "artifacts": self.artifacts,
        }
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"report_{self.command}.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"  report -> {path}")
        return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _artifact(report: Report, out_dir: str, name: str, writer) -> None:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        writer(fh)
    report.artifacts.append(name)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def cmd_spectrum(params: ModelParams, args, report: Report) -> None:
    from . import spectrum as sp
    from .beam import fit_loglog_slope

    n_sweep = 2000
    M = params.M
    n = np.arange(1, n_sweep + 1)
    nf = n.astype(float)
    mu1 = sp.mu1_array(n, M)
    beta = np.sqrt(3 * (mu1 / 2) ** 2 + nf**2)
    mu2 = -mu1 / 2 + 1j * beta
    s1 = np.abs(mu1 + mu2 + np.conj(mu2))
    s2 = np.abs(mu1 * mu2 + mu1 * np.conj(mu2) + np.abs(mu2) ** 2 - nf**2) / nf**2
    s3 = np.abs(mu1 * np.abs(mu2) ** 2 - M * nf**2) / np.abs(M * nf**2)
    vieta = float(max(s1.max(), s2.max(), s3.max()))
    report.check("vieta_max_residual", vieta <= 1e-9, vieta, 1e-9)
    lo_ok = np.all(np.abs(mu1) >= abs(M) / (M * M + 1) - 1e-12)
    hi_ok = np.all(np.abs(mu1) < abs(M))
    report.check("real_branch_bounds", bool(lo_ok and hi_ok),
                 [float(np.abs(mu1).min()), float(np.abs(mu1).max())])
    report.check("mu1_increasing", bool(np.all(np.diff(np.abs(mu1)) > 0)), n_sweep)
    report.check("mu1_over_n_decreasing", bool(np.all(np.diff(np.abs(mu1) / n) < 0)), n_sweep)
    ns = np.unique(np.geomspace(100, n_sweep, 25).astype(int))
    dev = np.abs(mu1[ns - 1] - sp.asymptotic_mu1(ns, M))
    slope = fit_loglog_slope(ns, dev)
    report.check("asymptotic_remainder_slope", slope <= -3.5, slope, -3.5)
    # cancellation-free form: Im(mu2) - n = (3 mu1^2/4)/(Im(mu2) + n)
    dev2 = np.abs(3 * mu1[ns - 1] ** 2 / (4 * (beta[ns - 1] + ns)) - 3 * M * M / (8 * ns))
    slope2 = fit_loglog_slope(ns, dev2)
    report.check("branch2_imag_remainder_slope", slope2 <= -2.5, slope2, -2.5)
    acc = np.abs(mu1 - M) <= 2 * abs(M) ** 3 / nf**2
    n0 = int(n[np.argmax(acc)]) if acc.any() else -1
    report.check("accumulation_envelope_from_n0", bool(acc.any() and np.all(acc[n0 - 1:])), n0)
    report.check("essential_accumulation_point", None, M,
                 note="limit of the real branch; reported, not an eigenvalue object")
    worst = max(sp.eigenvector_residual(n_, j, params)
                for n_ in list(range(-params.N, 0)) + list(range(1, params.N + 1))
                for j in (1, 2, 3))
    report.check("eigenvector_symbol_residual", worst <= 1e-9, worst, 1e-9)
    _artifact(report, args.out, "spectrum.csv",
              lambda fh: sp.write_spectrum_csv(fh, params, params.N))


def cmd_gaps(params: ModelParams, args, report: Report) -> None:
    from . import gaps, spectrum as sp

    N = max(params.N, 50)
    rep = gaps.gap_report(params, N)
    for w in rep.warnings:
        report.warn(w)
    M = params.M
    report.check("branch1_cross_gap", rep.min_gap_branch1_cross >= abs(M) / (M * M + 1) - 1e-12,
                 rep.min_gap_branch1_cross, abs(M) / (M * M + 1))
    report.check("branch1_self_gap", rep.min_gap_branch1_self >= abs(params.c) - 1e-12,
                 rep.min_gap_branch1_self, abs(params.c))
    report.check("close_pair_scaled_floor", rep.gamma_fit > 0.0, rep.gamma_fit, 0.0)
    report.check("imaginary_ladders", rep.ladder_ok, rep.ladder_margins["regime"])
    resonant = sp.detect_resonance(params, N) is not None
    expected = 1 if resonant else 0
    report.check("coincidence_census", len(rep.coincidences) == expected,
                 len(rep.coincidences), expected)
    report.check("ladder_threshold", None, rep.N_epsilon, note=f"epsilon={rep.epsilon_used}")
    _artifact(report, args.out, "close_pairs.csv",
              lambda fh: gaps.write_close_pairs_csv(fh, rep))
    _artifact(report, args.out, "gap_report.json", lambda fh: fh.write(rep.to_json() + "\n"))


def cmd_riesz(params: ModelParams, args, report: Report) -> None:
    from . import spectrum as sp

    lo, hi = sp.singular_value_envelope(params, 1000)
    report.check("singular_value_interval_positive", lo > 0.0, [lo, hi])
    Bt = sp.limit_gram_matrix(params)
    evals = np.linalg.eigvalsh(Bt)
    report.check("limit_matrix_positive_definite", bool(evals.min() > 0.0),
                 [float(evals.min()), float(evals.max())])
    det_bt = float(np.linalg.det(Bt))
    report.check("limit_matrix_det_times_M2", abs(det_bt * params.M**2 - 4.0) <= 1e-10,
                 det_bt * params.M**2, 4.0)
    n_far = 10_000
    H = sp.riesz_matrix(n_far, params)
    det_consistency = abs(abs(np.linalg.det(H.B)) ** 2 - det_bt)
    report.check("gram_det_matches_limit", det_consistency <= 1e-5, det_consistency, 1e-5)
    dev = float(np.abs(H.B.conj().T @ H.B - Bt).max())
    report.check("entrywise_limit_deviation_at_1e4", None, dev,
                 note="O(1/n) imaginary corrections; below 1e-4 only when "
                      "3|c M|/2 + |M| + 1/|M| < 1")


def cmd_biorth(params: ModelParams, args, report: Report) -> None:
    from . import biorthogonal as bio
    from .beam import fit_loglog_slope
    from .model import minimal_control_time

    fam = bio.dual_family_gram(params, params.N, regularization=args.reg)
    report.check("gram_condition_number", None, fam.condition_number)
    pairing = bio.verify_biorthogonality(fam)
    report.check("biorthogonality_quadrature", pairing <= 1e-8, pairing, 1e-8)
    ms = np.arange(1, params.N + 1)
    peak = np.array([max(a.norm for a in fam.atoms if abs(a.m) == m) for m in ms])
    growth = fit_loglog_slope(ms, peak) if params.N >= 3 else 0.0
    report.check("atom_norm_growth_exponent", growth <= 2.3, growth, 2.3)
    rng = np.random.default_rng(report.seed)
    ratios = []
    for _ in range(100):
        a = rng.standard_normal(len(fam.index)) + 1j * rng.standard_normal(len(fam.index))
        a /= np.linalg.norm(a)
        lhs, rhs, ratio = bio.summation_inequality_check(a, fam)
        ratios.append(ratio)
    report.check("coefficient_mass_ratio_finite", bool(np.isfinite(ratios).all()),
                 float(np.max(ratios)))

    n_prod = args.n_prod
    ev = bio.ProductEvaluator(params, n_prod)
    zs = rng.uniform(-50, 50, 100) + 1j * rng.uniform(-1, 1, 100)
    devs = [abs(ev.evaluate(z).value - ev.evaluate_factored(z))
            / max(abs(ev.evaluate(z).value), 1e-300) for z in zs]
    report.check("product_factorization_consistency", max(devs) <= 1e-8, max(devs), 1e-8)

    labels = [(m, j) for m in (1, 2, 3, 5, 8, min(20, n_prod), min(200, n_prod))
              for j in (1, 2, 3)][:20]
    worst_ratio = 0.0
    for m, j in labels:
        z0 = ev.zero_location(m, j)
        ring = max(abs(ev.evaluate(z0 + 0.25 * np.exp(2j * np.pi * k / 8)).value)
                   for k in range(8))
        worst_ratio = max(worst_ratio, abs(ev.evaluate(z0).value) / ring)
    report.check("zero_depth_relative", worst_ratio <= 1e-6, worst_ratio, 1e-6)

    target = minimal_control_time(params.c) / 2.0
    probes = [ev.evaluate(1j * y).log_abs / abs(y) for y in (1e3, -1e3)]
    ok = all(abs(p - target) <= 0.15 * target for p in probes)
    report.check("exponential_type_probe", ok, probes, target)

    msweep = np.arange(1, min(50, params.N * 6) + 1)
    d23 = [m * m * abs(ev.derivative_at_zero(int(m), j)) for m in msweep for j in (2, 3)]
    d1 = [abs(ev.derivative_at_zero(int(m), 1)) for m in msweep]
    report.check("derivative_floor_osc_branches", min(d23) > 0.0, min(d23), 0.0)
    report.check("derivative_floor_real_branch", min(d1) > 0.0, min(d1), 0.0)

    slopes = []
    for j in (1, 2, 3):
        nu = bio.NuSequence.from_params(params, j, n_prod)
        pos = nu.modes > 0
        nvals = nu.modes[pos].astype(float)
        devn = np.abs(nu.values[pos] - 1j * nvals - bio.branch_limit_constant(params, j))
        sel = nvals >= 50
        slopes.append(fit_loglog_slope(nvals[sel], devn[sel]))
    report.check("rescaled_sequence_constant_slope", max(slopes) <= -0.8,
                 slopes, -0.8)
    _artifact(report, args.out, "atoms.csv", lambda fh: bio.write_atoms_csv(fh, fam))


def _default_data(params: ModelParams) -> tuple[FourierField, FourierField]:
    y0 = FourierField.from_coeffs(
        {1: 0.1, -1: 0.1, 2: 0.05, -2: 0.05}, params.N)
    return y0, FourierField.zero(params.N)


def cmd_control(params: ModelParams, args, report: Report) -> None:
    from . import moment_control as mc, simulator as sim

    import dataclasses
    import warnings as _w

    y0, y1 = _default_data(params)
    supercritical = params.supercritical_time
    if not supercritical:
        report.warn(
            f"T = {params.T} below the synthesis threshold {params.minimal_time:.6f}; "
            "recording the conditioning/norm trend instead of certifying")
        norms = []
        for T in (params.minimal_time * 1.05, params.minimal_time * 1.02,
                  params.minimal_time * 1.005):
            pT = dataclasses.replace(params, T=T)
            mdT = mc.moment_rhs(y0, y1, pT, pT.N)
            norms.append(mc.synthesize_least_norm(pT, mdT).l2_norm())
        report.check("norm_trend_toward_threshold", None, norms,
                     note="minimum-norm control size as T decreases to the threshold")

    md = mc.moment_rhs(y0, y1, params, params.N)
    reg = args.reg
    try:
        with _w.catch_warnings():
            _w.simplefilter("ignore")
            u_hat = mc.synthesize_least_norm(params, md, regularization=reg)
    except mc.SynthesisConditioningError as exc:
        if supercritical:
            raise
        report.warn(f"synthesis at T = {params.T}: {exc}")
        report.check("constraint_condition_number", None, exc.condition_number,
                     note="system numerically singular below the threshold")
        return
    u = mc.mean_zero_correction(u_hat)
    mx, rms, _ = mc.verify_moment_constraints(u, md, params)
    # the growing branch reaches e^{|M| T}, which bounds the absolute accuracy
    # any double-precision integration of the constraints can certify
    floor = 1e-15 * np.exp(abs(params.M) * params.T)
    thr = max(1e-8, 30.0 * floor)
    report.check("moment_residual_max", mx <= thr if supercritical else None, mx, thr,
                 note="" if thr == 1e-8 else
                 "threshold widened to the double-precision quadrature floor")
    report.check("moment_residual_rms", None, rms)
    report.check("control_norm", None, u.l2_norm())

    ts = np.linspace(0.01, params.T * 0.99, 9)
    xs = np.linspace(-np.pi, np.pi, 33, endpoint=False)
    vals = u.evaluate(ts[:, None], xs[None, :])
    scale = np.abs(vals).max()
    imag_rel = float(np.abs(vals.imag).max() / scale) if scale > 0 else 0.0
    report.check("control_real_for_real_data",
                 imag_rel <= 1e-9 if supercritical else None, imag_rel, 1e-9)

    if supercritical:
        up = mc.to_physical_frame(u)
        traj = sim.simulate_forward(params, y0, y1, up, args.n_steps)
        rep = sim.terminal_report(traj, y0, y1)
        report.check("terminal_relative_total", rep["relative_total"] <= 1e-3,
                     rep["relative_total"], 1e-3)
        _artifact(report, args.out, "terminal_report.json",
                  lambda fh: fh.write(sim.terminal_report_json(rep) + "\n"))
    _artifact(report, args.out, "control.json", lambda fh: fh.write(u.to_json() + "\n"))
    _artifact(report, args.out, "control_grid.csv",
              lambda fh: mc.write_control_grid_csv(fh, u))


def cmd_simulate(params: ModelParams, args, report: Report) -> None:
    from scipy.linalg import expm

    from .model import StateTriple
    from . import moment_control as mc, simulator as sim

    worst = 0.0
    span = min(params.N, 8)
    p5 = ModelParams(M=params.M, c=params.c, T=5.0, omega0=params.omega0, N=params.N)
    for n in list(range(-span, 0)) + list(range(1, span + 1)):
        y0 = FourierField.from_coeffs({n: 1.0}, params.N)
        traj = sim.simulate_forward(p5, y0, FourierField.zero(params.N), None,
                                    500, store_stride=100)
        A = np.array([[0, 1, 0], [-n * n, 0, -params.M], [-n * n, 0, 0]], dtype=complex)
        i = list(traj.modes).index(n)
        for k, t in enumerate(traj.times):
            oracle = expm(A * t) @ np.array([1.0, 0.0, 0.0], dtype=complex)
            worst = max(worst, float(np.abs(traj.states[i, :, k] - oracle).max()
                                     / max(np.abs(oracle).max(), 1.0)))
    report.check("free_mode_oracle_equivalence", worst <= 1e-8, worst, 1e-8)

    rng = np.random.default_rng(report.seed)

    def rnd_field(scale=1.0):
        return FourierField.from_coeffs(
            {n: scale * complex(rng.standard_normal(), rng.standard_normal())
             for n in range(-params.N, params.N + 1) if n != 0}, params.N)

    y0r, y1r = rnd_field(), rnd_field()
    atoms = tuple(
        mc.ControlAtom(mode=int(rng.integers(-params.N, params.N + 1)),
                       rate=complex(0.3 * rng.standard_normal(), 3.0 * rng.standard_normal()),
                       weight=complex(rng.standard_normal(), rng.standard_normal()))
        for _ in range(6))
    ur = mc.ControlField(frame="physical", atoms=atoms, support0=params.omega0,
                         velocity=params.c, T=params.T)
    term = StateTriple(rnd_field(), rnd_field(), rnd_field())
    out = sim.duality_residual(params, y0r, y1r, ur, term, args.n_steps // 2)
    report.check("duality_residual_exponential", out["residual"] <= 1e-6,
                 out["residual"], 1e-6)
    res = [sim.duality_residual(params, y0r, y1r, ur, term, nt, method="rk4")["residual"]
           for nt in (512, 2048)]
    order = float(np.log(res[0] / res[1]) / np.log(4.0))
    report.check("duality_residual_rk4_order", order >= 3.0, order, 3.0)

    dense = sim.simulate_forward(params, y0r, y1r, ur, 2048, store_stride=1)
    zres = sim.z_consistency_residual(dense)
    report.check("memory_component_consistency", zres <= 1e-6, zres, 1e-6)
    _artifact(report, args.out, "trajectory.csv",
              lambda fh: sim.write_trajectory_csv(
                  fh, sim.simulate_forward(params, y0r, y1r, ur, 2048)))


def cmd_beam(params: ModelParams, args, report: Report) -> None:
    from . import beam

    sweep = args.eps_sweep or EPS_SWEEP_DEFAULT
    diags = beam.beam_sweep(sweep, x0=1.0, M=params.M)
    report.check("h1_normalization_tail", abs(diags[-1].h1_norm - 1.0) <= 0.05,
                 diags[-1].h1_norm, 1.0)
    report.check("h1_monotone_approach",
                 bool(np.all(np.diff([d.h1_norm for d in diags]) < 0)),
                 [d.h1_norm for d in diags])
    off_ok = all(d.offray_ratio <= 3.0 * d.offray_bound for d in diags)
    report.check("offray_energy_bound", off_ok,
                 [d.offray_ratio / d.offray_bound for d in diags], 3.0)
    report.check("offray_monotone_localization",
                 bool(np.all(np.diff([d.offray_energy for d in diags]) < 0)),
                 [d.offray_energy for d in diags])
    slope = beam.fit_loglog_slope(sweep, [d.residual_norm for d in diags])
    report.check("residual_decay_slope", slope >= 0.4, slope, 0.4)
    lim, rate = beam.richardson_limit(sweep, [d.E0 for d in diags])
    diffs = [abs(d.E0 - lim) for d in diags]
    conv = beam.fit_loglog_slope(sweep, diffs)
    report.check("initial_energy_convergence_slope", conv >= 0.4, conv, 0.4)
    report.check("initial_energy_limit", None, lim)
    drift = abs(beam.energy_centroid(beam.BeamParams(epsilon=sweep[-1], M=params.M), 1.0)
                - beam.energy_centroid(beam.BeamParams(epsilon=sweep[-1], M=params.M), 0.0))
    report.check("energy_centroid_drift", drift <= sweep[-1] ** 0.125, drift,
                 sweep[-1] ** 0.125)
    _artifact(report, args.out, "beam_sweep.csv",
              lambda fh: beam.write_sweep_csv(fh, diags))


COMMANDS = {
    "spectrum": cmd_spectrum,
    "gaps": cmd_gaps,
    "riesz": cmd_riesz,
    "biorth": cmd_biorth,
    "control": cmd_control,
    "simulate": cmd_simulate,
    "beam": cmd_beam,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memwave",
        description="verification suites and control pipeline for the "
                    "memory wave model on the torus")
    parser.add_argument("command", choices=sorted(COMMANDS) + ["verify-all"])
    parser.add_argument("--config", help="JSON file with model parameters")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--M", type=float)
    parser.add_argument("--c", type=float)
    parser.add_argument("--T", type=float)
    parser.add_argument("--N", type=int)
    parser.add_argument("--Nt", dest="n_steps", type=int, default=8192)
    parser.add_argument("--reg", type=float, default=0.0)
    parser.add_argument("--n-prod", dest="n_prod", type=int, default=2000)
    parser.add_argument("--eps-sweep", dest="eps_sweep",
                        type=lambda s: tuple(float(v) for v in s.split(",")))
    return parser


def _resolve_params(args) -> ModelParams:
    raw = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            raw.update(json.load(fh))
    for key in ("M", "c", "T", "N"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    return ModelParams(
        M=float(raw["M"]), c=float(raw["c"]), T=float(raw["T"]),
        omega0=tuple(tuple(a) for a in raw["omega0"]),
        N=int(raw["N"]), sigma=float(raw.get("sigma", 0.0)),
    )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        params = _resolve_params(args)
    except InvalidParameterError as exc:
        print(f"parameter rejected: {exc}", file=sys.stderr)
        return 1
    names = sorted(COMMANDS) if args.command == "verify-all" else [args.command]
    statuses = []
    for name in names:
        print(f"[{name}] M={params.M} c={params.c} T={params.T} N={params.N}")
        report = Report(name, params, args.seed)
        try:
            COMMANDS[name](params, args, report)
        except RuntimeError as exc:
            # domain-level refusals (conditioning, degeneracy) become failed
            # checks with the diagnosis in the report, not tracebacks
            report.check("completed", False, type(exc).__name__, note=str(exc))
        report.write(args.out)
        statuses.append(report.status)
        print(f"  status: {report.status}")
    if FAIL in statuses:
        return 1
    if WARN in statuses:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
