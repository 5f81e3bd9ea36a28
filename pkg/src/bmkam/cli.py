"""Command-line front end.

    bmkam simulate   --config run.json --out out/
    bmkam kam        --config run.json --out out/ [--strict]
    bmkam resonances --config run.json --out out/ --seed 7
    bmkam desing     --config run.json --out out/

Every run is described by one JSON config.  Outputs are CSV/JSON written
atomically into ``--out``; failures print an error record to stderr, write
``error.json`` and exit with 2 (config/IO), 3 (hypothesis) or 4 (numerical).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import SCHEMA_VERSION, dumps, write_csv, write_json, write_jsonl
from .errors import EXIT_CODES, BmKamError, ConfigError, DegenerateMode
from .fourier import FourierTaylor

log = logging.getLogger("bmkam")

PRESETS = ("desk", "three_body")


# ---------------------------------------------------------------------------
# config handling


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    v = doc.get("schema_version", SCHEMA_VERSION)
    if v != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {v!r}")
    doc["_base"] = str(p.parent)
    return doc


def _num(cfg: dict, key: str, default=None, *, positive: bool = False, integer: bool = False):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing parameter {key!r}")
    try:
        v = int(v) if integer else float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"parameter {key!r} must be numeric") from exc
    if positive and not v > 0:
        raise ConfigError(f"parameter {key!r} must be positive")
    return v


def _system_doc(cfg: dict) -> dict:
    if "system_file" in cfg:
        p = Path(cfg["system_file"])
        if not p.is_absolute():
            p = Path(cfg.get("_base", ".")) / p
        try:
            return json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read system file {p}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"system file {p} is not valid JSON: {exc}") from exc
    if "system" in cfg:
        if not isinstance(cfg["system"], dict):
            raise ConfigError("'system' must be a JSON object")
        return cfg["system"]
    raise ConfigError("config needs 'system', 'system_file' or 'preset'")


def _parse_system(cfg: dict):
    from .singular import system_from_json

    doc = _system_doc(cfg)
    try:
        return system_from_json(doc)
    except BmKamError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed system document: {exc}") from exc


def _point(cfg: dict, n: int):
    p0 = cfg.get("p0")
    if not isinstance(p0, dict) or "I" not in p0:
        raise ConfigError("'p0' must be an object with 'I' (and optionally 'phi')")
    I = np.asarray(p0["I"], dtype=float)
    phi = np.asarray(p0.get("phi", [0.0] * n), dtype=float)
    if I.shape != (n,) or phi.shape != (n,):
        raise ConfigError(f"p0 must have {n} angles and {n} actions")
    return phi, I


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict, out: Path, args) -> dict:
    from .singular import integrate_flow

    t_end = _num(cfg, "t_end", positive=True)
    dt = _num(cfg, "dt", 0.01, positive=True)
    if cfg.get("preset") == "three_body":
        return _simulate_three_body(cfg, out, t_end, dt)
    if cfg.get("preset") == "desk":
        from .kam import desk_model

        dm = desk_model(_num(cfg, "eps", 1e-6, positive=True))
        form, H = dm["form"], dm["h"].add_smooth(dm["f"])
        n = form.n
        p0 = _point(cfg, n) if "p0" in cfg else (np.zeros(n), dm["I0"])
    else:
        form, H = _parse_system(cfg)
        n = form.n
        p0 = _point(cfg, n)
    tr = integrate_flow(H, form, p0, t_end, dt, floor=_num(cfg, "floor", 1e-8, positive=True),
                        drift_tol=_num(cfg, "drift_tol", 1e-6, positive=True),
                        record_every=_num(cfg, "record_every", 1, positive=True, integer=True))
    header = ["t"] + [f"phi_{i + 1}" for i in range(n)] + [f"I_{i + 1}" for i in range(n)] + ["H"]
    rows = (np.r_[t, ph, I, E] for t, ph, I, E in zip(tr.times, tr.phi, tr.I, tr.energy))
    write_csv(out / "trajectory.csv", header, rows)
    summary = {
        "command": "simulate", "seed": args.seed, "steps": len(tr.times) - 1,
        "energy_drift": float(np.max(np.abs(tr.energy - tr.energy[0]))),
        "min_abs_I1": float(np.min(np.abs(tr.I[:, 0]))), "halted": tr.halted, "reason": tr.reason,
    }
    write_json(out / "summary.json", summary)
    return summary


def _simulate_three_body(cfg, out, t_end, dt):
    from .mechanics import integrate_pulled_back, three_body_mcgehee

    pb, form, ham = three_body_mcgehee(_num(cfg, "mu", 0.1, positive=True))
    y0 = cfg.get("y0", {"x": 1.0, "P_r": 0.0, "alpha": 0.3, "P_alpha": 1.0})
    try:
        y = np.array([float(y0[k]) for k in ("x", "P_r", "alpha", "P_alpha")])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"y0 needs x, P_r, alpha, P_alpha: {exc}") from exc
    ts, ys, Es, halted = integrate_pulled_back(pb, ham, y, t_end, dt, floor=_num(cfg, "floor", 1e-8, positive=True))
    # action-angle labelling: I1 = x, phi1 = -P_r, I2 = alpha, phi2 = P_alpha
    header = ["t", "phi_1", "phi_2", "I_1", "I_2", "H"]
    rows = ([t, -Y[1], Y[3], Y[0], Y[2], E] for t, Y, E in zip(ts, ys, Es))
    write_csv(out / "trajectory.csv", header, rows)
    summary = {"command": "simulate", "preset": "three_body", "steps": len(ts) - 1,
               "energy_drift": float(np.max(np.abs(Es - Es[0]))), "min_abs_I1": float(np.min(np.abs(ys[:, 0]))),
               "halted": bool(halted), "reason": "|x| fell below floor" if halted else "",
               "form": {"m": form.m, "c": list(form.c)}}
    write_json(out / "summary.json", summary)
    return summary


def _kam_inputs(cfg: dict):
    from .kam import desk_model

    if cfg.get("preset") == "desk":
        dm = desk_model(_num(cfg, "eps", 1e-6, positive=True))
        sched = dict(dm["schedule"])
        sched.update(cfg.get("schedule", {}))
        early = bool(cfg.get("early_stop", False))
        return dm["form"], dm["h"], dm["f"], dm["box"], sched, early, dm["I0"]
    form, h = _parse_system(cfg)
    if h.smooth is None:
        raise ConfigError("the integrable part needs a smooth component")
    try:
        f = FourierTaylor.from_json(cfg["perturbation"]) if cfg.get("perturbation") else None
        box = cfg["box"]
        box = (tuple(float(v) for v in box[0]), tuple(float(v) for v in box[1]))
        sched = dict(cfg["schedule"])
    except BmKamError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"kam config needs 'box' and 'schedule' (and optional 'perturbation'): {exc}") from exc
    sched.setdefault("n", form.n)
    return form, h, f, box, sched, bool(cfg.get("early_stop", True)), np.asarray(h.smooth.I0)


def cmd_kam(cfg: dict, out: Path, args) -> dict:
    from .errors import HypothesisViolated
    from .kam import build_schedule, run_kam

    form, h, f, box, sched, early, I0 = _kam_inputs(cfg)
    q_max = _num(cfg, "q_max", 6, positive=True, integer=True)
    try:
        schedule = build_schedule(**{k: sched[k] for k in ("M", "L", "mu", "rho1", "rho2", "tau", "gamma", "nu", "n")},
                                  q_max=q_max, K=sched.get("K"))
    except KeyError as exc:
        raise ConfigError(f"schedule is missing {exc}") from exc
    records = []

    def cb(st):
        rec = st.record()
        rec["wall_time"] = st.diagnostics.get("wall_time", 0.0)
        records.append(rec)
        log.info("q=%d eps=%.3e modes=%d", st.q, st.eps, st.R.num_modes)

    strict = bool(args.strict or cfg.get("strict", False))
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            run = run_kam(h, f, form, schedule, box, q_max=q_max, strict=strict,
                          alpha_mode=cfg.get("alpha_mode", "schedule"), J=int(cfg.get("J", 6)),
                          early_stop=early, callback=cb)
    except BmKamError as err:
        write_jsonl(out / "iterations.jsonl", records)
        if isinstance(err, HypothesisViolated):
            err.reason = f"HypothesisViolated:{err.which}"
        raise
    write_jsonl(out / "iterations.jsonl", records)
    report = {
        "command": "kam", "seed": args.seed, "strict": strict, "stopped": run.stopped,
        "hypotheses": run.hypotheses, "relaxed": list(schedule.relaxed), "K_required": schedule.K_required,
        "warnings": [str(w.message) for w in caught],
        "iterations": [{"q": r["q"], "eps": r["eps"], "bound_ok": r.get("bound_ok"),
                        "W_bound_ok": r.get("W_bound_ok"), "divisor_min": r.get("divisor_min")} for r in records],
        "final_eps": records[-1]["eps"],
    }
    if cfg.get("torus", True) and len(run.states) > 1:
        from .errors import NotInSurvivingSet

        try:
            tm = run.torus(I0)
            report["tori"] = [{"I0": I0, "frequency": tm.omega, "I0_star": tm.I0_star,
                               "dio_margin": tm.dio_margin, "displacement": tm.displacement, "survives": True}]
        except NotInSurvivingSet as exc:
            report["tori"] = [{"I0": I0, "survives": False, "reason": str(exc)}]
    write_json(out / "report.json", report)
    return report


def cmd_resonances(cfg: dict, out: Path, args) -> dict:
    from .diophantine import DioParams, diophantine_sample, zone_measure_bound, zone_measure_mc
    from .homological import modes_up_to
    from .kam import desk_model
    if cfg.get("preset") == "desk":
        dm = desk_model()
        form, h = dm["form"], dm["h"]
    else:
        form, h = _parse_system(cfg)
    if h.smooth is None:
        raise ConfigError("the integrable part needs a smooth component")
    try:
        G = (np.asarray(cfg["G"][0], float), np.asarray(cfg["G"][1], float))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"'G' must be [lo, hi]: {exc}") from exc
    dio = DioParams(_num(cfg, "tau", 1.5), _num(cfg, "gamma", 0.01), _num(cfg, "K", 20, positive=True, integer=True))
    N = _num(cfg, "N", 10000, positive=True, integer=True)
    seed = args.seed
    s = diophantine_sample(G, form, h.sing, lambda I: _smooth_grad(h, I), dio, N, seed, mu=_num(cfg, "mu", 1.0, positive=True))
    n = form.n
    header = [f"I_{i + 1}" for i in range(n)] + ["kept", "worst_divisor"] + [f"worst_k_{i + 1}" for i in range(n)]
    rows = (list(p) + [int(k), d] + [int(v) for v in wk]
            for p, k, d, wk in zip(s.points, s.kept, s.worst_divisor, s.worst_k))
    write_csv(out / "samples.csv", header, rows)
    ctx = (float(s.shrunk_box[0][0]), float(s.shrunk_box[1][0]))
    bound_sum = 0.0
    F = (np.zeros(n), np.ones(n)) if "F_box" not in cfg else tuple(np.asarray(b, float) for b in cfg["F_box"])
    for k in modes_up_to(n, dio.K):
        a = dio.gamma / float(np.abs(k).sum()) ** dio.tau
        try:
            bound_sum += zone_measure_bound(F, k, a, ctx, form, h.sing)
        except DegenerateMode:
            bound_sum = math.inf
    summary = {"command": "resonances", "seed": seed, "N": N, "kept_fraction": s.kept_fraction,
               "sigma": s.sigma(), "bound_sum": bound_sum, "shrunk_box": s.shrunk_box, **s.extra}
    zones = cfg.get("zones")
    if zones:
        zrows = []
        for z in zones:
            try:
                k, a, I1 = z["k"], float(z["alpha"]), z.get("I1", ctx)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"zone entries need 'k' and 'alpha': {exc}") from exc
            I1 = tuple(I1) if isinstance(I1, list) else I1
            b = zone_measure_bound(F, k, a, I1, form, h.sing)
            I1v = 0.5 * (I1[0] + I1[1]) if isinstance(I1, tuple) else I1
            mc, sg = zone_measure_mc(F, k, a, I1v, form, h.sing, int(z.get("N", 100000)), seed)
            zrows.append(list(k) + [a, b, mc, sg, int(mc <= b + 3 * sg)])
        write_csv(out / "zones.csv", [f"k_{i + 1}" for i in range(n)] + ["alpha", "bound", "mc", "mc_sigma", "ok"], zrows)
        summary["zones"] = len(zrows)
    write_json(out / "summary.json", summary)
    return summary


def _smooth_grad(h, I):
    ev = h.smooth.evaluator()
    return np.asarray(ev.value_grad(np.zeros_like(I), I)[2], dtype=float)


def _desing_components(cfg: dict, m: int, n: int):
    from .desing import Component, simple_system
    from .singular import SingularPart

    extra = cfg.get("extra")
    if extra is None:
        return simple_system(m, n)
    if not isinstance(extra, list):
        raise ConfigError("'extra' must be a list of component objects")
    comps = []
    try:
        for c in extra:
            rest = FourierTaylor.from_json(c["rest"]) if c.get("rest") else None
            sing = SingularPart(m, float(c.get("q0", 0.0)), tuple(c["q"])) if "q" in c else None
            comps.append(Component(sing=sing, poly=tuple(c.get("poly", ())), rest=rest))
    except BmKamError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"malformed component: {exc}") from exc
    form, base = simple_system(m, n, extra=comps)
    return form, base


def cmd_desing(cfg: dict, out: Path, args) -> dict:
    from .desing import build_profile, desingularize_system, dynamics_equality_residual

    m = _num(cfg, "m", positive=True, integer=True)
    n = _num(cfg, "n", 2, positive=True, integer=True)
    eps_list = cfg.get("eps", [0.1])
    eps_list = eps_list if isinstance(eps_list, list) else [eps_list]
    N = _num(cfg, "samples", 1000, positive=True, integer=True)
    form, F = _desing_components(cfg, m, n)
    rng = np.random.Generator(np.random.Philox(args.seed))
    reports = []
    for eps in eps_list:
        eps = float(eps)
        prof = build_profile(m, eps, cfg.get("inner_spec"))
        sysd = desingularize_system(F, form, prof)
        side = rng.choice([-1.0, 1.0], N)
        I1 = side * eps * 10 ** rng.uniform(-3, 1, N)
        I = np.c_[I1, rng.uniform(-1, 1, (N, n - 1))]
        phi = rng.uniform(0, 2 * np.pi, (N, n))
        res = dynamics_equality_residual(sysd, form, prof, list(zip(phi, I)))
        rep = {"eps": eps, "residual": res, "folded_defect": sysd.folded_defect(),
               "symplectic": sysd.dform.symplectic, "agreement_outside": sysd.dform.agreement_defect(2 * eps, 10 * eps),
               "profile": prof.to_json(), "continuity_defect": prof.continuity_defect()}
        reports.append(rep)
        rows = []
        for x in np.linspace(-4 * eps, 4 * eps, int(cfg.get("field_points", 81))):
            if x == 0:
                continue
            p, q = np.zeros(n), np.r_[x, np.zeros(n - 1)]
            for j in range(len(sysd.components)):
                rows.append([j, x] + list(sysd.field_original(j, p, q)) + list(sysd.field_desing(j, p, q)))
        hdr = ["component", "I_1"] + [f"orig_{i}" for i in range(2 * n)] + [f"desing_{i}" for i in range(2 * n)]
        write_csv(out / f"fields_eps_{eps:g}.csv", hdr, rows)
        log.info("eps=%g residual=%.3e", eps, res)
    summary = {"command": "desing", "seed": args.seed, "m": m, "n": n, "reports": reports}
    write_json(out / "report.json", summary)
    return summary


COMMANDS = {"simulate": cmd_simulate, "kam": cmd_kam, "resonances": cmd_resonances, "desing": cmd_desing}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bmkam", description="b^m-symplectic dynamics experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment description")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        sp.add_argument("--strict", action="store_true", help="enforce theorem hypotheses")
        sp.add_argument("--quiet", action="store_true", help="only print errors")
    return ap


def _error_record(err: BaseException) -> tuple[int, dict]:
    if isinstance(err, BmKamError):
        code = EXIT_CODES.get(err.category, 4)
        kind = err.kind
    elif isinstance(err, (OSError, json.JSONDecodeError)):
        code, kind = 2, "ConfigError"
    else:
        code, kind = 4, type(err).__name__
    rec = {"kind": kind, "message": str(err), "exit_code": code}
    rec["reason"] = getattr(err, "reason", kind)
    return code, rec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr, force=True)
    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        if cfg.get("preset") not in (None,) + PRESETS:
            raise ConfigError(f"unknown preset {cfg.get('preset')!r}")
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, out, args)
    except (BmKamError, OSError) as err:
        code, rec = _error_record(err)
        sys.stderr.write(dumps(rec))
        try:
            write_json(out / "error.json", rec)
        except OSError:
            pass
        return code
    if not args.quiet:
        keys = [k for k in ("final_eps", "stopped", "kept_fraction", "energy_drift", "min_abs_I1") if k in result]
        msg = ", ".join(f"{k}={result[k]}" for k in keys)
        log.info("%s done in %.1f s%s", args.command, time.perf_counter() - t0, f" ({msg})" if msg else "")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
