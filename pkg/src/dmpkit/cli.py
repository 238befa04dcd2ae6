"""Command-line entry point: ``dmpkit <subcommand> ...``.

Exit codes: 0 success, 1 unreadable or malformed input file, 2 bad
configuration or arguments, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import control, correction, dmp as dmp_mod, rnn, sim, transients
from .config import merge_config, read_config_file, resolve_seed
from .errors import ConfigError, InputFileError, NumericError
from .trajectory import read_csv, write_csv

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputFileError(f"{path}: invalid JSON ({exc})") from exc


def _load_dmp(path) -> dmp_mod.Dmp:
    try:
        return dmp_mod.Dmp.from_dict(_read_json(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputFileError(f"{path}: not a DMP ({exc})") from exc


def _load_model(path) -> rnn.RnnModel:
    try:
        return rnn.RnnModel.from_dict(_read_json(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputFileError(f"{path}: not a detector model ({exc})") from exc


def _write_text(path, text: str):
    Path(path).write_text(text)


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite values in result")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(args, summary: dict, lines: list[str]):
    if args.json:
        print(json.dumps(_jsonable(summary), sort_keys=True))
    else:
        for line in lines:
            print(line)


def cmd_fit(args, cfg):
    demo, _ = read_csv(args.input)
    c = cfg["dmp"]
    tau = args.tau if args.tau is not None else c["tau"]
    d = dmp_mod.fit(demo, tau, args.n_basis or c["n_basis"], c["alpha_z"], c["alpha_x"])
    _finite(d.weights)
    _write_text(args.out, d.to_json())
    _emit(args, {"out": str(args.out), "tau": d.tau, "n_basis": d.n_basis, "n_channels": d.n_channels},
          [f"fitted {d.n_basis} basis functions x {d.n_channels} channels, tau={d.tau:g} s -> {args.out}"])


def cmd_rollout(args, cfg):
    d = _load_dmp(args.dmp)
    if args.goal is not None:
        d = d.with_goal([float(v) for v in args.goal.split(",")])
    dt = args.dt or cfg["sim"]["dt"]
    duration = args.duration if args.duration is not None else 3.0 * d.tau
    traj = dmp_mod.rollout(d, duration, dt)
    _finite(traj.samples)
    write_csv(traj, args.out)
    if args.plot:
        from .plotting import plot_trajectory
        plot_trajectory(traj, args.plot)
    final = traj.samples[-1].tolist()
    _emit(args, {"out": str(args.out), "samples": traj.n_samples, "final": final},
          [f"{traj.n_samples} samples -> {args.out}", f"final position {final}"])


def cmd_merge(args, cfg):
    y_d, _ = read_csv(args.deficient)
    y_cr, _ = read_csv(args.corrective)
    c = cfg["dmp"]
    inp = correction.CorrectionInput(y_d, y_cr, args.lam)
    tau = args.tau if args.tau is not None else c["tau"]
    result, new = correction.merge_and_refit(inp, tau, args.n_basis or c["n_basis"], c["alpha_z"], c["alpha_x"])
    _finite(result.merged.samples, new.weights)
    write_csv(result.merged, args.out)
    _write_text(args.dmp_out, new.to_json())
    if args.plot:
        from .plotting import plot_merge
        plot_merge(y_d, y_cr, result.merged, args.plot)
    _emit(args, {"out": str(args.out), "dmp_out": str(args.dmp_out), "split_index": result.split_index,
                 "merged_samples": result.merged.n_samples},
          [f"kept {result.split_index} deficient samples, merged {result.merged.n_samples} samples -> {args.out}",
           f"refitted DMP -> {args.dmp_out}"])


def _gains(cfg, controller: str) -> control.Gains:
    if controller == "legacy":
        # legacy keeps its own gains unless the config file sets them
        explicit = {k: v for k, v in cfg["_explicit"].get("controller", {}).items() if k != "velocity_cutoff"}
        return control.Gains.legacy(**explicit)
    return control.Gains(**{k: v for k, v in cfg["controller"].items() if k != "velocity_cutoff"})


def _scenario_jobs(args, cfg, seed):
    s = cfg["sim"]
    d = _load_dmp(args.dmp) if args.dmp else sim.default_dmp(s["dt"])
    if args.noise:
        noise = sim.NoiseConfig(s["pos_meas_std"], s["vel_proc_std"], s["kinematic_bias_std"], s["kinematic_bias_rate"], seed)
        cutoff = cfg["controller"]["velocity_cutoff"]
    else:
        noise, cutoff = sim.NoiseConfig.off(seed), None
    delay = args.delay_ms / 1000.0 if args.delay_ms is not None else s["delay"]
    duration = args.duration if args.duration is not None else s["duration"]
    gains = _gains(cfg, args.controller)
    kinds = ["none", "stop", "move"] if args.scenario == "all" else [args.scenario]
    jobs = []
    for kind in kinds:
        pert = sim.Perturbation(kind, s["t_start"], s["t_end"], s["move_amplitude"], s["move_channel"])
        jobs.append(dict(dmp=d, gains=gains, noise=noise, pert=pert, delay=delay, dt=s["dt"],
                         duration=duration, velocity_cutoff=cutoff))
    return kinds, jobs


def _out_path(base, kind, many):
    base = Path(base)
    return base if not many else base.with_name(f"{base.stem}_{kind}{base.suffix}")


def cmd_simulate(args, cfg):
    seed = resolve_seed(args.seed, cfg["sim"]["seed"])
    kinds, jobs = _scenario_jobs(args, cfg, seed)
    results = sim.run_batch(jobs, max_workers=args.workers)
    many = len(kinds) > 1
    summary, lines = {"controller": args.controller, "seed": seed, "scenarios": {}}, []
    for kind, res in zip(kinds, results):
        out = _out_path(args.out, kind, many)
        if not res.aborted:
            _finite(res.log_rows())
        np.savetxt(out, res.log_rows(), delimiter=",", header=",".join(res.log_header()), comments="", fmt="%.17g")
        if args.plot:
            from .plotting import plot_scenario
            plot_scenario(res, _out_path(args.plot, kind, many), f"{args.controller} controller, {kind}")
        m = dict(res.metrics)
        m["unstable"] = bool(res.diverged)
        m["log"] = str(out)
        summary["scenarios"][kind] = m
        state = "UNSTABLE (tracking error exceeded 10x range)" if res.diverged else "stable"
        lines.append(f"[{kind}] {state}; max|acc|={m['max_accel']:.3g} m/s^2, "
                     f"goal error={m['final_goal_error']:.3g} m, recovery={m['recovery_time']:.3g} s, "
                     f"slowdown={m['slowdown_ratio']:.3g} -> {out}")
    summary["unstable"] = any(r.diverged for r in results)
    _emit(args, summary, lines)


def cmd_gen_data(args, cfg):
    seed = resolve_seed(args.seed, cfg["detector"]["seed"])
    conf = transients.SynthConfig(
        n_recordings=args.n_recordings, duration=args.duration, noise_std=args.noise_std,
        transient_amp=args.amp, seed=seed, with_transient=not args.noise_only,
        signature_seed=args.signature_seed,
    )
    recs = transients.synth_transients(conf)
    paths = transients.write_recordings(recs, args.out_dir)
    _emit(args, {"out_dir": str(args.out_dir), "recordings": len(paths), "seed": seed},
          [f"wrote {len(paths)} recordings to {args.out_dir}"])


def _train_config(args, cfg, seed) -> rnn.TrainConfig:
    c = cfg["detector"]
    return rnn.TrainConfig(lr=args.lr if args.lr is not None else c["lr"],
                           steps=args.steps if args.steps is not None else c["steps"], seed=seed)


def cmd_train_detector(args, cfg):
    c = cfg["detector"]
    seed = resolve_seed(args.seed, c["seed"])
    recs = transients.read_recordings(args.data)
    r = args.r if args.r is not None else c["r"]
    train_recs, test_recs = transients.split_half(recs)
    model, m, ratio = transients.train_and_score(train_recs, test_recs, args.n_pre, args.n_post, r, _train_config(args, cfg, seed))
    _write_text(args.out, model.to_json())
    _emit(args, {"out": str(args.out), "n_pre": args.n_pre, "n_post": args.n_post, "r": ratio, **m.as_dict()},
          [f"(n_pre, n_post)=({args.n_pre}, {args.n_post}) r={ratio:g}: TP={m.TP} TN={m.TN} FP={m.FP} FN={m.FN} "
           f"P={m.precision:.2f} R={m.recall:.2f} F1={m.f1:.2f} -> {args.out}"])


def cmd_sweep(args, cfg):
    c = cfg["detector"]
    seed = resolve_seed(args.seed, c["seed"])
    recs = transients.read_recordings(args.data)
    res = transients.sweep_window(
        recs,
        r=args.r if args.r is not None else c["r"],
        final_r=args.final_r if args.final_r is not None else c["final_r"],
        max_window=args.max_window if args.max_window is not None else c["max_window"],
        config=_train_config(args, cfg, seed),
    )
    _write_text(args.out, res.model.to_json())
    rows = [row.as_dict() for row in res.rows]
    if args.report:
        cols = ["n_pre", "n_post", "r", "TP", "TN", "FP", "FN", "P", "R", "F1", "final"]
        text = ",".join(cols) + "\n" + "".join(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in cols) + "\n" for row in rows)
        _write_text(args.report, text)
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(res.rows, args.plot)
    lines = ["n_pre n_post     TP    TN   FP   FN     P     R    F1"]
    for row in rows:
        lines.append(f"{row['n_pre']:5d} {row['n_post']:6d} {row['TP']:6d} {row['TN']:5d} {row['FP']:4d} {row['FN']:4d} "
                     f"{row['P']:5.2f} {row['R']:5.2f} {row['F1']:5.2f}" + ("  (final)" if row["final"] else ""))
    flag = "" if res.perfect else " (F1 < 1 never reached 1; best pair kept)"
    lines.append(f"chosen (n_pre, n_post) = ({res.n_pre}, {res.n_post}){flag} -> {args.out}")
    _emit(args, {"out": str(args.out), "n_pre": res.n_pre, "n_post": res.n_post, "perfect": res.perfect, "rows": rows}, lines)


def cmd_detect(args, cfg):
    model = _load_model(args.model)
    stream, _ = read_csv(args.input)
    if stream.n_channels != model.n_ch:
        raise InputFileError(f"{args.input}: {stream.n_channels} channels, model expects {model.n_ch}")
    refractory = args.refractory if args.refractory is not None else cfg["detector"]["refractory"]
    hits = transients.detect_stream(model, stream, refractory)
    if args.plot:
        from .plotting import plot_detection
        plot_detection(stream, transients.window_probabilities(model, stream.samples), hits, args.plot)
    _emit(args, {"detections": hits, "count": len(hits)},
          [f"{len(hits)} detection(s)"] + [f"t={t:.3f} s" for t in hits])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON configuration file")
    common.add_argument("--json", action="store_true", help="print a JSON summary")
    common.add_argument("--seed", type=int, default=None, help=f"random seed (falls back to ${'{'}DMPKIT_SEED{'}'})")

    p = _Parser(prog="dmpkit", description="Movement primitives, corrective merging, coupled execution and transient detection.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fit", parents=[common], help="learn a DMP from a demonstration CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--tau", type=float)
    s.add_argument("--n-basis", type=int)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("rollout", parents=[common], help="integrate a DMP to a trajectory CSV")
    s.add_argument("--dmp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--duration", type=float, help="seconds (default 3 tau)")
    s.add_argument("--dt", type=float)
    s.add_argument("--goal", help="comma-separated replacement goal")
    s.add_argument("--plot", help="write a figure to this path")
    s.set_defaults(func=cmd_rollout)

    s = sub.add_parser("merge", parents=[common], help="merge a deficient trajectory with a correction and refit")
    s.add_argument("--deficient", required=True)
    s.add_argument("--corrective", required=True, help="retained part of the corrective demonstration")
    s.add_argument("--lambda", dest="lam", type=float, default=correction.DEFAULT_LAMBDA)
    s.add_argument("--out", required=True)
    s.add_argument("--dmp-out", required=True)
    s.add_argument("--tau", type=float)
    s.add_argument("--n-basis", type=int)
    s.add_argument("--plot")
    s.set_defaults(func=cmd_merge)

    s = sub.add_parser("simulate", parents=[common], help="run a perturbation scenario")
    s.add_argument("--scenario", choices=["stop", "move", "none", "all"], default="stop")
    s.add_argument("--controller", choices=["proposed", "legacy"], default="proposed")
    s.add_argument("--delay-ms", type=float)
    s.add_argument("--noise", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--duration", type=float)
    s.add_argument("--dmp", help="DMP JSON (default: built-in 0.8 m primitive)")
    s.add_argument("--out", default="log.csv")
    s.add_argument("--plot")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("gen-data", parents=[common], help="generate synthetic torque recordings")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--n-recordings", type=int, default=50)
    s.add_argument("--duration", type=float, default=6.0)
    s.add_argument("--noise-std", type=float, default=1.0)
    s.add_argument("--amp", type=float, default=10.0)
    s.add_argument("--noise-only", action="store_true", help="omit the transients")
    s.add_argument("--signature-seed", type=int, default=None)
    s.set_defaults(func=cmd_gen_data)

    for name, func, help_ in (("train-detector", cmd_train_detector, "train a detector for fixed window lengths"),
                              ("sweep", cmd_sweep, "search window lengths and train the final detector")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--data", required=True, help="directory of recordings")
        s.add_argument("--out", required=True)
        s.add_argument("--r", type=float)
        s.add_argument("--steps", type=int)
        s.add_argument("--lr", type=float)
        if name == "train-detector":
            s.add_argument("--n-pre", type=int, required=True)
            s.add_argument("--n-post", type=int, required=True)
        else:
            s.add_argument("--final-r", type=float)
            s.add_argument("--max-window", type=int)
            s.add_argument("--report", help="CSV of every configuration tried")
            s.add_argument("--plot")
        s.set_defaults(func=func)

    s = sub.add_parser("detect", parents=[common], help="report transients in a torque CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--refractory", type=float)
    s.add_argument("--plot")
    s.set_defaults(func=cmd_detect)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        explicit = read_config_file(args.config) if args.config else {}
        cfg = merge_config(explicit)
        cfg["_explicit"] = explicit
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            args.func(args, cfg)
    except InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
