"""Command line harness: ``csb run | analyze | export | plot``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .exceptions import CSBError
from .pencil import Signal
from .protocol import (
    FLAG_MESSAGES,
    ChannelSpectrumBenchmark,
    Design,
    eigensystem,
    generate_benchmark_suite,
    make_spec,
    run_repeated,
)
from .circuits import repeat_target
from .qasm import export_suite

log = logging.getLogger("csb")

SIGNALS_FILE = "signals.csv"
REPORT_FILE = "report.json"
PLOT_FILE = "infidelity.svg"
ANALYSIS_FILE = "analysis.json"
CSV_COLUMNS = ("experiment_id", "repetition", "spec_index", "L", "probability", "shots")
EXIT_FLAGGED = 3


def _point_seed(cfg: ExperimentConfig, index: int) -> list[int]:
    return [int(cfg.seed), int(index)]


def _experiment_id(cfg: ExperimentConfig, index: int) -> str:
    return f"{cfg.name}-{index}"


def _summary(result) -> dict:
    out = {
        "process_infidelity": 1.0 - result.process_fidelity,
        "process_infidelity_std": result.process_fidelity_std,
        "stochastic_infidelity": 1.0 - result.stochastic_fidelity,
        "stochastic_infidelity_std": result.stochastic_fidelity_std,
        "unitary_params": {k: {"mean": m, "std": s} for k, (m, s) in result.unitary_params().items()},
        "flags": result.flags,
    }
    return out


def _oracle_dict(gt) -> dict | None:
    if gt is None:
        return None
    return {
        "process_infidelity": gt.process_infidelity,
        "stochastic_infidelity": gt.stochastic_infidelity,
        "method": gt.method,
    }


def write_signals(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def _signal_rows(exp_id: str, result, design_specs_per_rep) -> list[tuple]:
    rows = []
    for r, (signals, specs) in enumerate(zip(result.signals, design_specs_per_rep)):
        groups: dict[int, list[int]] = {}
        for i, s in enumerate(specs):
            groups.setdefault(s["group"], []).append(i)
        for sig, g in zip(signals, [groups[k] for k in sorted(groups)]):
            comps = sig.components if sig.components is not None else sig.values[None, :]
            for spec_index, comp in zip(g, comps):
                for L, p in enumerate(comp):
                    rows.append((exp_id, r, spec_index, L, repr(float(p)), "" if sig.shots is None else sig.shots))
    return rows


def run_experiment(cfg: ExperimentConfig, out_dir: Path, workers: int = 1) -> dict:
    """Run every sweep point of ``cfg`` and write signals, report and plot to ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    target = cfg.build_target()
    params = cfg.estimator_params()
    points, rows = [], []
    total_shots = 0
    for pt in cfg.points():
        exp_id = _experiment_id(cfg, pt.index)
        log.info("%s: %s", exp_id, {k: v for k, v in pt.values.items() if v is not None})
        t0 = time.perf_counter()
        result = run_repeated(
            target, pt.noise, cfg.repetitions, seed=_point_seed(cfg, pt.index), workers=workers,
            L_max=pt.L_max, **params,
        )
        log.info("%s: done in %.1f s", exp_id, time.perf_counter() - t0)
        reps = [r.to_dict() for r in result.reports]
        rows.extend(_signal_rows(exp_id, result, [r["specs"] for r in reps]))
        n_circuits = len(reps[0]["specs"]) * (pt.L_max + 1)
        total_shots += n_circuits * cfg.shots * cfg.repetitions
        points.append({
            "experiment_id": exp_id,
            "index": pt.index,
            "parameters": pt.values,
            "L_max": pt.L_max,
            "estimate": _summary(result),
            "oracle": _oracle_dict(result.oracle),
            "flag_messages": {f: FLAG_MESSAGES[f] for f in result.flags},
            "repetitions": reps,
        })
    report = {
        "config": cfg.model_dump(mode="json"),
        "swept_parameter": cfg.swept_key(),
        "budget": {"total_shots": total_shots},
        "points": points,
    }
    write_signals(out_dir / SIGNALS_FILE, rows)
    (out_dir / REPORT_FILE).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    plot_report(report, out_dir / PLOT_FILE)
    return report


def plot_report(report: dict, path: Path) -> Path:
    """Infidelity against the swept parameter on log axes, error bars are sample standard deviations."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "csb"
    key = report.get("swept_parameter")
    pts = report["points"]
    x = np.array([abs(p["parameters"][key]) if key else p["index"] + 1 for p in pts], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.8))
    for name, marker in (("process", "o"), ("stochastic", "s")):
        y = np.array([p["estimate"][f"{name}_infidelity"] for p in pts])
        err = np.array([p["estimate"][f"{name}_infidelity_std"] for p in pts])
        ax.errorbar(x, y, yerr=err, marker=marker, capsize=3, label=f"{name} (estimate)")
        if all(p["oracle"] for p in pts):
            ax.plot(x, [p["oracle"][f"{name}_infidelity"] for p in pts], ls="--", marker="x", label=f"{name} (exact)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(f"|{key}|" if key else "sweep point")
    ax.set_ylabel("infidelity")
    ax.set_title(report["config"]["name"])
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _read_signals(path: Path) -> dict:
    data: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["experiment_id"], int(row["repetition"]))
            data.setdefault(key, {}).setdefault(int(row["spec_index"]), {})[int(row["L"])] = (
                float(row["probability"]),
                int(row["shots"]) if row["shots"] else None,
            )
    return data


def analyze_signals(directory: Path) -> dict:
    """Re-run mode extraction, matching and averaging on stored signals."""
    report = json.loads((directory / REPORT_FILE).read_text())
    cfg = ExperimentConfig.model_validate(report["config"])
    data = _read_signals(directory / SIGNALS_FILE)
    target = cfg.build_target()
    if cfg.n_rep > 1:
        target = repeat_target(target, cfg.n_rep)
    es = eigensystem(target)
    out_points = []
    for pt in report["points"]:
        est = ChannelSpectrumBenchmark(L_max=pt["L_max"], **cfg.estimator_params())
        reps = []
        for r, rep in enumerate(pt["repetitions"]):
            specs = tuple(make_spec(es, s["a"], s["b"], s["group"]) for s in rep["specs"])
            design = Design(target, es, specs)
            per_spec = data[(pt["experiment_id"], r)]
            signals = []
            for g in design.groups:
                comps = np.array([[per_spec[i][L][0] for L in range(pt["L_max"] + 1)] for i in g])
                shots = per_spec[g[0]][0][1]
                var = (comps * (1 - comps)).sum(axis=0) / shots if shots else None
                signals.append(Signal(np.clip(comps.sum(axis=0), 0, len(g)), shots, var, len(g), comps))
            reps.append(est.fit(signals, design=design).report_.to_dict())
        f = np.array([x["process_fidelity"] for x in reps])
        fs = np.array([x["stochastic_fidelity"] for x in reps])
        sd = (lambda v: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
        out_points.append({
            "experiment_id": pt["experiment_id"],
            "process_infidelity": float(1 - f.mean()),
            "process_infidelity_std": sd(f),
            "stochastic_infidelity": float(1 - fs.mean()),
            "stochastic_infidelity_std": sd(fs),
            "flags": sorted({fl for x in reps for fl in x["flags"]}),
            "repetitions": reps,
        })
    analysis = {"config": report["config"], "points": out_points}
    (directory / ANALYSIS_FILE).write_text(json.dumps(analysis, indent=1, sort_keys=True) + "\n")
    return analysis


def export_circuits(cfg: ExperimentConfig, out_dir: Path, L_max: int | None = None, point: int = 0) -> list[Path]:
    """Write the circuits of the first repetition of sweep point ``point`` as OpenQASM files."""
    pt = cfg.points()[point]
    L = pt.L_max if L_max is None else int(L_max)
    seq = np.random.SeedSequence(_point_seed(cfg, pt.index)).spawn(cfg.repetitions)[0]
    est = ChannelSpectrumBenchmark(**{**cfg.estimator_params(), "random_state": seq})
    design_seq, acquire_seq = est._seeds()
    design = est.design(cfg.build_target(), rng=np.random.default_rng(design_seq))
    suite = generate_benchmark_suite(
        design.specs, design.target, L, cfg.n_r if cfg.rc else None, seed=np.random.default_rng(acquire_seq)
    )
    return export_suite(suite, out_dir)


def _print_table(report: dict) -> None:
    key = report.get("swept_parameter") or "point"
    print(f"{'id':<16}{key:>14}{'1-F':>12}{'sigma':>10}{'1-F exact':>12}{'1-Fsto':>12}{'1-Fsto exact':>14}  flags")
    for p in report["points"]:
        e, o = p["estimate"], p["oracle"] or {}
        x = p["parameters"].get(key, p["index"]) if key != "point" else p["index"]
        print(
            f"{p['experiment_id']:<16}{x:>14.4g}{e['process_infidelity']:>12.4e}{e['process_infidelity_std']:>10.1e}"
            f"{o.get('process_infidelity', float('nan')):>12.4e}{e['stochastic_infidelity']:>12.4e}"
            f"{o.get('stochastic_infidelity', float('nan')):>14.4e}  {','.join(e['flags']) or '-'}"
        )
        for name, v in e["unitary_params"].items():
            print(f"{'':<16}{name:>14} = {v['mean']:+.5f} +/- {v['std']:.5f}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csb", description="Channel spectrum benchmarking experiments")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True, help="config file (bundled names such as tgate.cfg also work)")
    run.add_argument("--output", help="output directory (default: output_dir from the config)")
    run.add_argument("--workers", type=int, default=1, help="worker processes for repetitions")
    run.add_argument("--strict", action="store_true", help=f"exit with status {EXIT_FLAGGED} if any run is flagged")

    an = sub.add_parser("analyze", help="re-analyse stored signals")
    an.add_argument("--signals", required=True, help="directory holding signals.csv and report.json")

    ex = sub.add_parser("export", help="export benchmark circuits as OpenQASM 2.0")
    ex.add_argument("--config", required=True)
    ex.add_argument("--output", help="output directory (default: <output_dir>/qasm)")
    ex.add_argument("--L-max", type=int, dest="L_max", help="override the longest sequence")
    ex.add_argument("--point", type=int, default=0, help="sweep point to export")

    pl = sub.add_parser("plot", help="redraw the infidelity plot of a report")
    pl.add_argument("--report", required=True)
    pl.add_argument("--output", help="SVG path (default: next to the report)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            out = Path(args.output or cfg.output_dir)
            report = run_experiment(cfg, out, args.workers)
            _print_table(report)
            print(f"wrote {out / SIGNALS_FILE}, {out / REPORT_FILE}, {out / PLOT_FILE}")
            flagged = {f for p in report["points"] for f in p["estimate"]["flags"]}
            if args.strict and flagged:
                for f in sorted(flagged):
                    print(f"flagged: {f}: {FLAG_MESSAGES[f]}", file=sys.stderr)
                return EXIT_FLAGGED
        elif args.command == "analyze":
            d = Path(args.signals)
            analysis = analyze_signals(d)
            for p in analysis["points"]:
                print(
                    f"{p['experiment_id']:<16}1-F={p['process_infidelity']:.4e} +/- {p['process_infidelity_std']:.1e}"
                    f"  1-Fsto={p['stochastic_infidelity']:.4e}  flags={','.join(p['flags']) or '-'}"
                )
            print(f"wrote {d / ANALYSIS_FILE}")
        elif args.command == "export":
            cfg = load_config(args.config)
            out = Path(args.output or Path(cfg.output_dir) / "qasm")
            paths = export_circuits(cfg, out, args.L_max, args.point)
            print(f"wrote {len(paths)} files to {out}")
        elif args.command == "plot":
            rp = Path(args.report)
            report = json.loads(rp.read_text())
            out = Path(args.output) if args.output else rp.with_name(PLOT_FILE)
            plot_report(report, out)
            print(f"wrote {out}")
    except CSBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
