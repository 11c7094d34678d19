"""Command-line front end: ``isacpulse {design,af-stats,tradeoff,experiments}``.

Every command reads a :class:`RunConfig` (defaults, optionally overridden by
a JSON file given with ``--config`` and then by explicit flags), writes CSV
and JSON files to the output directory and exits with status 0 only when all
postconditions hold.  The default output directory is ``$ISACPULSE_OUTPUT_DIR``
or ``./isacpulse-out``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .af_stats import af_moments, alpha0, first_sidelobe, normalized_sacf
from .design_problem import (
    build_general_problem,
    build_qp,
    eval_constraints,
    make_weights,
    range_to_delay_bins,
)
from .optimizers import AdmmConfig, ScaConfig, admm_solve, sca_solve
from .signal_core import FrameConfig, Pulse, esd_to_pulse, make_constellation, make_rrc_esd
from .simulator import (
    RangingSetup,
    Scenario,
    draw_frame,
    echo,
    add_awgn,
    empirical_saf,
    find_peaks,
    mainlobe_halfwidth,
    range_doppler_map,
    range_to_delay,
    ranging_rmse,
    resolved_targets,
    synthesize_frame,
)

OUTPUT_ENV = "ISACPULSE_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_POSTCONDITION = 0, 1, 2


@dataclass
class RunConfig:
    """Everything a command needs; round-trips through :meth:`to_dict`/:meth:`from_dict`."""

    command: str = "design"
    frame: FrameConfig = field(default_factory=FrameConfig)
    constellation: str = "16QAM"
    roi_m: tuple[float, float] = (8.0, 32.0)
    doppler_roi: tuple[float, float] = (0.0, 0.0)
    weights: str = "uniform"
    gamma: float = -5e7
    solver: str = "admm"
    sca: dict = field(default_factory=lambda: {"epsilon": 1e-2, "i_max": 50, "rho": None,
                                               "eps_oobe": 1e-3})
    admm: dict = field(default_factory=lambda: {"epsilon": 1e-10, "i_max": 5000,
                                                "dual_update": "standard"})
    pulse_file: str | None = None
    frames: int = 0
    doppler_slice: bool = False
    max_delay: int | None = None
    betas: tuple[float, ...] = (0.0, 0.1, 0.3, 0.6, 0.9)
    scenario: dict | None = None
    output_dir: str = ""
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frame"] = self.frame.to_dict()
        d["roi_m"] = list(self.roi_m)
        d["doppler_roi"] = list(self.doppler_roi)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        if "frame" in kw and isinstance(kw["frame"], dict):
            base = FrameConfig().to_dict()
            base.update(kw["frame"])
            kw["frame"] = FrameConfig.from_dict(base)
        for key in ("roi_m", "doppler_roi", "betas"):
            if key in kw:
                kw[key] = tuple(float(x) for x in kw[key])
        for key, default in (("sca", cls().sca), ("admm", cls().admm)):
            if key in kw:
                kw[key] = {**default, **kw[key]}
        return cls(**kw)

    def out(self) -> Path:
        p = Path(self.output_dir or os.environ.get(OUTPUT_ENV, "isacpulse-out"))
        p.mkdir(parents=True, exist_ok=True)
        return p


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _weights(rc: RunConfig, frame: FrameConfig, profile: str | None = None):
    u0, u1 = range_to_delay_bins(rc.roi_m[0], rc.roi_m[1], frame.f_s)
    # normalised Doppler nu*T maps to bin v = nu*T * K / N_T
    v0, v1 = (int(round(x * frame.M)) for x in rc.doppler_roi)
    return make_weights((u0, u1), (v0, v1), profile or rc.weights, rc.gamma, frame.f_s)


def _isl(pulse: Pulse, frame: FrameConfig, weights, const) -> float:
    from .design_problem import eval_general_wisl
    return eval_general_wisl(pulse, frame, weights, const) / alpha0(frame, const)


def _sidelobe(pulse: Pulse, frame: FrameConfig, const) -> tuple[int, float]:
    try:
        return first_sidelobe(normalized_sacf(pulse, frame, const))
    except ValueError:
        return -1, float("nan")


def _say(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_design(rc: RunConfig) -> int:
    frame, const = rc.frame, make_constellation(rc.constellation)
    out = rc.out()
    weights = _weights(rc, frame)
    rrc_esd = make_rrc_esd(frame)
    rrc = esd_to_pulse(rrc_esd)
    ok = True
    summary: dict = {"solver": rc.solver, "config": rc.to_dict()}
    if rc.solver == "admm":
        qp = build_qp(frame, weights, const)
        cfg = AdmmConfig(epsilon=float(rc.admm["epsilon"]), i_max=int(rc.admm["i_max"]),
                         dual_update=rc.admm["dual_update"])
        rep = admm_solve(qp, cfg, rrc_esd)
        esd = rep.solution
        resid = qp.residual(esd.omega)
        pulse = esd_to_pulse(esd)
        io.write_esd_csv(out / "esd.csv", esd)
        a0 = alpha0(frame, const)
        summary.update(nyquist_residual=resid, qp_objective_rrc=qp.objective(rrc_esd.omega) / a0,
                       qp_objective_opt=qp.objective(esd.omega) / a0)
        ok = rep.converged and resid < 1e-8 and float(np.min(esd.omega)) >= -1e-8
    elif rc.solver == "sca":
        prob = build_general_problem(frame, weights, const, eps_oobe=float(rc.sca["eps_oobe"]),
                                     rho=rc.sca.get("rho"))
        cfg = ScaConfig(epsilon=float(rc.sca["epsilon"]), i_max=int(rc.sca["i_max"]))
        rep = sca_solve(rrc, prob, cfg)
        pulse = rep.solution
        cons = eval_constraints(pulse, prob)
        summary["constraints"] = cons.to_dict()
        ok = rep.converged and cons.oobe_ok and cons.energy_ok
    else:
        raise ValueError(f"unknown solver {rc.solver!r}; expected 'admm' or 'sca'")
    io.write_pulse_csv(out / "pulse.csv", pulse, frame)
    before, after = _isl(rrc, frame, weights, const), _isl(pulse, frame, weights, const)
    sl_before, sl_after = _sidelobe(rrc, frame, const), _sidelobe(pulse, frame, const)
    summary.update(isl_rrc=before, isl_opt=after, first_sidelobe_rrc_db=sl_before[1],
                   first_sidelobe_opt_db=sl_after[1], report=rep.to_dict())
    io.write_json(out / "report.json", summary)
    label = "WISL" if rc.weights != "uniform" else "ISL"
    _say(f"normalized {label}: RRC {before:.6f} -> optimized {after:.6f} "
         f"({10 * math.log10(after / before):+.2f} dB)")
    _say(f"first SACF sidelobe: RRC {sl_before[1]:.2f} dB -> optimized {sl_after[1]:.2f} dB")
    _say(f"{rc.solver}: {rep.iterations} iterations, converged={rep.converged}; wrote {out}")
    return EXIT_OK if ok else EXIT_POSTCONDITION


def _load_pulse(rc: RunConfig) -> Pulse:
    if rc.pulse_file:
        p = Path(rc.pulse_file)
        if not p.is_file():
            raise FileNotFoundError(f"pulse file not found: {p}")
        return io.read_pulse_csv(p)
    return esd_to_pulse(make_rrc_esd(rc.frame))


def cmd_af_stats(rc: RunConfig) -> int:
    frame, const = rc.frame, make_constellation(rc.constellation)
    pulse = _load_pulse(rc)
    if len(pulse) != frame.L_g:
        raise ValueError(f"pulse length {len(pulse)} does not match L_g = {frame.L_g}")
    if rc.doppler_slice:
        delays, dopplers = np.array([0]), np.arange(frame.K)
    else:
        top = frame.L_g - 1 if rc.max_delay is None else int(rc.max_delay)
        delays, dopplers = np.arange(top + 1), np.array([0])
    mom = af_moments(pulse, frame, const, delays, dopplers)
    cols = list(mom.COLUMNS) + ["expected_saf_norm", "expected_saf_db"]
    norm = mom.normalized_saf()
    emp = None
    if rc.frames > 0:
        emp = empirical_saf(pulse, frame, const, rc.frames, delays, dopplers, seed=rc.seed)
        cols += ["empirical_saf_norm", "stderr_norm", "z_score"]
    rows = []
    zmax = 0.0
    for k, base in enumerate(mom.rows()):
        i, j = divmod(k, dopplers.size)
        val = norm[i, j]
        row = list(base) + [val, 10 * math.log10(val) if val > 0 else -math.inf]
        if emp is not None:
            se = emp.stderr[i, j]
            z = (emp.mean[i, j] - val) / se if se > 0 else 0.0
            zmax = max(zmax, abs(z))
            row += [emp.mean[i, j], se, z]
        rows.append(row)
    out = rc.out()
    name = "saf_doppler_slice.csv" if rc.doppler_slice else "saf.csv"
    io.write_table_csv(out / name, cols, rows)
    _say(f"wrote {out / name} ({len(rows)} bins, normalizer alpha0 = {mom.normalizer:.6g})")
    if emp is not None:
        _say(f"{rc.frames} frames: max |z| = {zmax:.3f}")
    return EXIT_OK


def tradeoff_rows(rc: RunConfig) -> tuple[list[str], list[list[float]]]:
    const = make_constellation(rc.constellation)
    cols = ["beta", "effective_beta", "bit_rate", "rrc_isl", "opt_isl", "rrc_wisl",
            "wisl_no_csi", "wisl_csi", "rrc_isl_pulse", "opt_isl_pulse"]
    rows = []
    for beta in rc.betas:
        frame = FrameConfig(**{**rc.frame.to_dict(), "beta": float(beta)})
        a0 = alpha0(frame, const)
        w_uni = _weights(rc, frame, "uniform")
        w_exp = _weights(rc, frame, "exponential")
        rrc_esd = make_rrc_esd(frame)
        q_uni, q_exp = build_qp(frame, w_uni, const), build_qp(frame, w_exp, const)
        cfg = AdmmConfig(epsilon=float(rc.admm["epsilon"]), i_max=int(rc.admm["i_max"]),
                         dual_update=rc.admm["dual_update"])
        opt = admm_solve(q_uni, cfg, rrc_esd)
        csi = admm_solve(q_exp, cfg, rrc_esd)
        if not (opt.converged and csi.converged):
            raise RuntimeError(f"ADMM did not converge at beta={beta}")
        w_opt, w_csi = opt.solution.omega, csi.solution.omega
        rows.append([
            float(beta), frame.effective_beta, const.bits_per_symbol / (1.0 + float(beta)),
            q_uni.objective(rrc_esd.omega) / a0, q_uni.objective(w_opt) / a0,
            q_exp.objective(rrc_esd.omega) / a0, q_exp.objective(w_opt) / a0,
            q_exp.objective(w_csi) / a0,
            _isl(esd_to_pulse(rrc_esd), frame, w_uni, const),
            _isl(esd_to_pulse(opt.solution), frame, w_uni, const),
        ])
    return cols, rows


def cmd_tradeoff(rc: RunConfig) -> int:
    if not rc.betas:
        raise ValueError("empty beta sweep")
    cols, rows = tradeoff_rows(rc)
    out = rc.out()
    io.write_table_csv(out / "tradeoff.csv", cols, rows)
    for r in rows:
        _say(f"beta={r[0]:.2f}  bit rate {r[2]:.4f} bps/Hz  ISL rrc {r[3]:.5f} opt {r[4]:.5f}  "
             f"WISL rrc {r[5]:.5f} no-CSI {r[6]:.5f} CSI {r[7]:.5f}")
    _say(f"wrote {out / 'tradeoff.csv'}")
    return EXIT_OK


DEFAULT_SCENARIO = {
    "rd_map": {"targets": [{"range_m": 22.0, "doppler_bin": 0, "amplitude": 1.0},
                           {"range_m": 32.0, "doppler_bin": 0, "amplitude": 0.8},
                           {"range_m": 63.0, "doppler_bin": 0, "amplitude": 0.5}],
               "snr_db": None, "max_delay": 199},
    "ranging": {"intervals": [[18.0, 27.0], [32.0, 41.0]], "amplitudes": [1.0, 0.8],
                "snr_db": [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0], "trials": 200},
}


def load_scenario(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"scenario file not found: {p}")
    return json.loads(p.read_text())


def _optimized_pulse(rc: RunConfig, frame: FrameConfig, const) -> Pulse:
    qp = build_qp(frame, _weights(rc, frame, "uniform"), const)
    rep = admm_solve(qp, AdmmConfig(), make_rrc_esd(frame))
    if not rep.converged:
        raise RuntimeError("ADMM did not converge for the optimized pulse")
    return esd_to_pulse(rep.solution)


def cmd_experiments(rc: RunConfig) -> int:
    frame, const = rc.frame, make_constellation(rc.constellation)
    scen = rc.scenario if rc.scenario is not None else DEFAULT_SCENARIO
    out = rc.out()
    pulses = {"rrc": esd_to_pulse(make_rrc_esd(frame)), "optimized": _optimized_pulse(rc, frame, const)}
    summary: dict = {}
    if "rd_map" in scen:
        sc = Scenario.from_dict(scen["rd_map"])
        sc.validate(frame)
        frm = draw_frame(const, frame.L, rc.seed)
        max_delay = int(scen["rd_map"].get("max_delay", 199))
        truth = [range_to_delay(t.range_m, frame) for t in sc.targets]
        for name, pulse, mode in (("rrc", pulses["rrc"], "full"),
                                  ("optimized", pulses["optimized"], "full"),
                                  ("symbol", pulses["optimized"], "symbol")):
            s = synthesize_frame(frm, pulse, frame)
            x = echo(s, sc.targets, frame)
            if not math.isinf(sc.snr_db):
                x = add_awgn(x, sc.snr_db, rc.seed + 1)
            if mode == "full":
                m = range_doppler_map(x, pulse, frm, frame, delays=np.arange(max_delay + 1))
                guard, tol = mainlobe_halfwidth(pulse, frame), frame.N_T / 2
            else:
                m = range_doppler_map(x, pulse, frm, frame, mode="symbol",
                                      delays=np.arange(0, max_delay + 1, frame.N_T))
                guard, tol = 0, frame.N_T
            peaks = find_peaks(m.power, len(sc.targets), guard, m.delays)
            ok = resolved_targets(peaks, truth, tol)
            io.write_table_csv(out / f"rd_{name}.csv", ["delay_sample", "doppler_bin", "power"], m.rows())
            summary[name] = {"peaks": [[p.position, int(m.dopplers[p.doppler_index]), p.value] for p in peaks],
                             "resolved": ok.tolist(), "tolerance_samples": tol}
            _say(f"RD {name:9s}: resolved {int(ok.sum())}/{ok.size} targets")
    if "ranging" in scen:
        cfg = scen["ranging"]
        trials = int(cfg.get("trials", 200))
        if trials < 1:
            raise ValueError("ranging needs at least one trial")
        setup = RangingSetup(tuple(tuple(map(float, iv)) for iv in cfg["intervals"]),
                             tuple(float(a) for a in cfg["amplitudes"]), rc.constellation)
        snrs = np.asarray(cfg["snr_db"], dtype=float)
        curves = {
            "rrc": ranging_rmse(pulses["rrc"], frame, snrs, trials, rc.seed, setup, "full"),
            "optimized": ranging_rmse(pulses["optimized"], frame, snrs, trials, rc.seed, setup, "full"),
            "symbol_only": ranging_rmse(pulses["optimized"], frame, snrs, trials, rc.seed, setup, "symbol"),
        }
        rows = [[s, curves["rrc"][i], curves["optimized"][i], curves["symbol_only"][i]]
                for i, s in enumerate(snrs)]
        io.write_table_csv(out / "rmse.csv", ["snr_db", "rrc", "optimized", "symbol_only"], rows)
        summary["rmse"] = {k: v.tolist() for k, v in curves.items()}
        for r in rows:
            _say(f"SNR {r[0]:6.1f} dB  RMSE rrc {r[1]:.3f} m  optimized {r[2]:.3f} m  symbol-only {r[3]:.3f} m")
    io.write_json(out / "experiments.json", summary)
    _say(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"design": cmd_design, "af-stats": cmd_af_stats, "tradeoff": cmd_tradeoff,
            "experiments": cmd_experiments}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _interval(text: str) -> tuple[float, float]:
    t = text.strip().lower().removesuffix("m")
    lo, sep, hi = t.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    return float(lo), float(hi)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("frame")
    g.add_argument("--config", help="JSON run configuration; explicit flags override it")
    g.add_argument("--save-config", help="write the effective configuration to this JSON file")
    g.add_argument("--L", type=int, help="symbols per frame")
    g.add_argument("--NT", type=int, dest="N_T", help="samples per symbol")
    g.add_argument("--Lg", type=int, dest="L_g", help="pulse length in samples")
    g.add_argument("--beta", type=float, help="roll-off factor")
    g.add_argument("--fs", type=float, dest="f_s", help="sample rate in Hz")
    g.add_argument("--constellation", choices=["QPSK", "16QAM", "64QAM"])
    g.add_argument("--roi", type=_interval, dest="roi_m", help="range region of interest, e.g. 8:32m")
    g.add_argument("--doppler-roi", type=_interval, dest="doppler_roi",
                   help="normalized Doppler (nu*T) interval, e.g. 0:0.5")
    g.add_argument("--weights", choices=["uniform", "exponential"])
    g.add_argument("--gamma", type=float, help="clutter decay factor in 1/s (negative decays)")
    g.add_argument("--out", dest="output_dir", help=f"output directory (default ${OUTPUT_ENV})")
    g.add_argument("--seed", type=int, help="master random seed")

    p = argparse.ArgumentParser(prog="isacpulse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("design", parents=[common], help="optimize a pulse (ADMM or SCA)")
    d.add_argument("--solver", choices=["admm", "sca"])
    d.add_argument("--iters", type=int, dest="i_max", help="iteration cap")
    d.add_argument("--rho", type=float, help="SCA ISI penalty factor")
    d.add_argument("--eps-oobe", type=float, dest="eps_oobe", help="SCA out-of-band energy budget")
    d.add_argument("--dual-update", choices=["standard", "paper"], dest="dual_update")
    a = sub.add_parser("af-stats", parents=[common], help="theoretical and empirical SAF grids")
    a.add_argument("--pulse", dest="pulse_file", help="pulse CSV (default: RRC at --beta)")
    a.add_argument("--frames", type=int, help="Monte-Carlo frames (0 = theory only)")
    a.add_argument("--doppler-slice", action="store_const", const=True, dest="doppler_slice",
                   help="zero-delay slice over all Doppler bins")
    a.add_argument("--max-delay", type=int, dest="max_delay")
    t = sub.add_parser("tradeoff", parents=[common], help="ISL/WISL versus bit rate over beta")
    t.add_argument("--betas", type=_floats, help="comma-separated roll-off factors")
    e = sub.add_parser("experiments", parents=[common], help="RD maps and ranging RMSE")
    e.add_argument("--scenario", help="scenario JSON file (default: built-in three-target layout)")
    e.add_argument("--trials", type=int, help="override the ranging trial count")
    return p


_FRAME_KEYS = ("L", "N_T", "L_g", "beta", "f_s")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if ns.config:
        base = json.loads(Path(ns.config).read_text())
    rc = RunConfig.from_dict({**base, "command": ns.command})
    d = rc.to_dict()
    args = vars(ns)
    frame = dict(d["frame"])
    for k in _FRAME_KEYS:
        if args.get(k) is not None:
            frame[k] = args[k]
    d["frame"] = frame
    for k in ("constellation", "roi_m", "doppler_roi", "weights", "gamma", "output_dir", "seed",
              "solver", "pulse_file", "frames", "doppler_slice", "max_delay", "betas"):
        if args.get(k) is not None:
            d[k] = args[k]
    for k in ("i_max",):
        if args.get(k) is not None:
            d["sca"][k] = args[k]
            d["admm"][k] = args[k]
    for k in ("rho", "eps_oobe"):
        if args.get(k) is not None:
            d["sca"][k] = args[k]
    if args.get("dual_update") is not None:
        d["admm"]["dual_update"] = args["dual_update"]
    if ns.command == "experiments":
        if args.get("scenario"):
            d["scenario"] = load_scenario(args["scenario"])
        if args.get("trials") is not None:
            scen = json.loads(json.dumps(d["scenario"] or DEFAULT_SCENARIO))
            scen.setdefault("ranging", dict(DEFAULT_SCENARIO["ranging"]))["trials"] = args["trials"]
            d["scenario"] = scen
    return RunConfig.from_dict(d)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        rc = config_from_args(ns)
        if ns.save_config:
            io.write_json(ns.save_config, rc.to_dict())
        return COMMANDS[rc.command](rc)
    except (ValueError, FileNotFoundError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"isacpulse {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
