"""Command-line entry point tying the pipeline together.

    crossmodal graph {validate,conflicts,opportunities,dot} STRUCTURE
    crossmodal synth --experiment {1,2} --out DIR
    crossmodal simulate --experiment {1,2} --observers N --seed S --out LOG
    crossmodal fit LOG --out-dir DIR [--collapse lower|higher]
    crossmodal serve [--port P] [--designs-dir DIR] [--console-dir DIR]

Every command is deterministic given its flags and seeds. ``STRUCTURE`` is
a structure file path; the literal name ``slr`` selects the bundled SLR
camera fixture.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import (
    design_solver,
    kansei_graph,
    observer_sim,
    psychometrics,
    service as service_mod,
    session as session_mod,
    stimulus,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _resolve_structure(arg: str) -> kansei_graph.CognitiveStructure:
    if arg == "slr" and not Path(arg).exists():
        return kansei_graph.load_fixture()
    return kansei_graph.load_structure(arg)


def _format_conflict(structure: kansei_graph.CognitiveStructure,
                     conflict: kansei_graph.Conflict) -> str:
    def label(node_id: str) -> str:
        try:
            return structure.node(node_id).label
        except KeyError:
            return node_id

    parts = [f"conflict at '{conflict.delight_factor}' ({label(conflict.delight_factor)})"]
    if conflict.positive_features:
        parts.append("  improved by: " + ", ".join(conflict.positive_features))
    if conflict.negative_features:
        parts.append("  worsened by: " + ", ".join(conflict.negative_features))
    if conflict.limited:
        parts.append("  design-limited: " + ", ".join(conflict.limited))
    return "\n".join(parts)


def cmd_graph(args: argparse.Namespace) -> int:
    try:
        structure = _resolve_structure(args.structure)
    except (OSError, kansei_graph.StructureParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    violations = kansei_graph.validate(structure)
    if args.action == "validate":
        for v in violations:
            print(f"violation: {v}")
        if not violations:
            print("structure is well formed")
        return EXIT_OK if not violations else EXIT_INVALID

    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        print("error: structure failed validation", file=sys.stderr)
        return EXIT_INVALID

    if args.action == "dot":
        text = kansei_graph.to_dot(structure)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            print(text, end="")
        return EXIT_OK

    try:
        conflicts = kansei_graph.find_conflicts(structure, scene=args.scene)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.action == "conflicts":
        for conflict in conflicts:
            print(_format_conflict(structure, conflict))
        print(f"{len(conflicts)} conflict(s)")
        return EXIT_OK

    opportunities = kansei_graph.find_opportunities(structure, conflicts)
    for opp in opportunities:
        pair = "/".join(sorted(m.value for m in opp.modality_pair))
        print(
            f"opportunity at '{opp.conflict.delight_factor}': {pair}, "
            f"manipulate {opp.candidate_manipulated_modality.value}"
        )
        print(f"  {opp.rationale}")
    print(f"{len(opportunities)} opportunity(ies)")
    return EXIT_OK


def _grid_for(experiment: int, aud_peak: float, tac_peak: float):
    if experiment == 1:
        return stimulus.experiment1_grid(aud_peak, tac_peak)
    return stimulus.experiment2_grid(aud_peak, tac_peak)


def cmd_synth(args: argparse.Namespace) -> int:
    pairs, reference = _grid_for(args.experiment, args.amplitude_audio,
                                 args.amplitude_tactile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    encoding = "float32" if args.float32 else "int16"
    written = []
    for pair in [reference, *pairs]:
        rendered = stimulus.render_pair(pair, args.sample_rate, tail_ms=args.tail_ms)
        path = out / f"{pair.id}.wav"
        stimulus.write_wav(rendered, path, encoding)
        written.append(path.name)
    manifest = stimulus.manifest_text(pairs, reference)
    (out / "manifest.tsv").write_text(manifest, encoding="utf-8")
    print(f"wrote {len(written)} wave files and manifest.tsv to {out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    design = (session_mod.experiment1_design() if args.experiment == 1
              else session_mod.experiment2_design())
    model = observer_sim.ObserverModel(
        beta0=args.beta0,
        beta1=args.beta1,
        same_zone=args.same_zone,
        lapse_rate=args.lapse,
    )
    logs = observer_sim.run_panel(design, model, args.observers, args.seed)
    session_mod.save_logs(logs, args.out)
    total = sum(log.answered for log in logs)
    print(f"wrote {len(logs)} session(s), {total} responses, to {args.out}")
    return EXIT_OK


def _design_registry(designs_dir: str | None) -> dict[str, session_mod.ExperimentDesign]:
    designs = session_mod.builtin_designs()
    if designs_dir:
        for path in sorted(Path(designs_dir).glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            design = session_mod.design_from_dict(data)
            designs[design.id] = design
    return designs


def cmd_fit(args: argparse.Namespace) -> int:
    try:
        logs = session_mod.load_logs(args.log)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not logs:
        print("error: no sessions in log file", file=sys.stderr)
        return EXIT_USAGE
    designs = _design_registry(args.designs_dir)
    design_id = logs[0].design_id
    design = designs.get(design_id)
    if design is None:
        print(f"error: unknown design {design_id!r}", file=sys.stderr)
        return EXIT_USAGE

    rule = (psychometrics.CollapseRule.LOWER_VS_NOT_LOWER if args.collapse == "lower"
            else psychometrics.CollapseRule.HIGHER_VS_NOT_HIGHER)
    try:
        table = session_mod.tally(logs, design)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    points = psychometrics.collapse(table, rule)
    ridge = psychometrics.EXPLORATORY_RIDGE if args.ridge else 0.0
    try:
        fit = psychometrics.fit_logistic(points, collapse_rule=rule, ridge=ridge)
    except (psychometrics.SeparationError, psychometrics.DegenerateDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not fit.converged:
        print("error: fit did not converge", file=sys.stderr)
        return EXIT_DATA

    band = psychometrics.confidence_band(fit, [p.level for p in points],
                                         args.risk_ratio)
    report = psychometrics.fit_report(fit, points, band)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tally.tsv").write_text(
        session_mod.tally_text(table, design.judgment_labels), encoding="utf-8"
    )
    (out / "report.json").write_text(psychometrics.report_json(report), encoding="utf-8")
    xs = [p.level for p in points]
    dense = np.linspace(min(xs), max(xs), 201)
    dense_band = psychometrics.confidence_band(fit, dense, args.risk_ratio)
    (out / "curve.tsv").write_text(psychometrics.curve_table(fit, dense_band),
                                   encoding="utf-8")
    (out / "points.tsv").write_text(psychometrics.points_table(points, band),
                                    encoding="utf-8")
    svg = psychometrics.plot_svg(
        fit, points, args.risk_ratio,
        x_label=("length of tactile stimulus [ms]" if design_id == "exp1"
                 else "difference of presentation timings [ms]"),
        y_label=f"probability of '{design.judgment_labels[0] if rule is psychometrics.CollapseRule.LOWER_VS_NOT_LOWER else design.judgment_labels[2]}'",
    )
    (out / "fit.svg").write_text(svg, encoding="utf-8")

    se0, se1 = report["se_beta0"], report["se_beta1"]
    print(f"fit: beta0 = {fit.beta0:.4f} (se {se0:.4f}), "
          f"beta1 = {fit.beta1:.6f} (se {se1:.6f}) per ms")
    print(f"log-likelihood {fit.log_likelihood:.3f}, "
          f"{fit.iterations} iteration(s), pse {fit.pse:.1f} ms")
    outside = [str(entry['level']) for entry in report['levels'] if not entry['inside']]
    if outside:
        print("outside the confidence zone: " + ", ".join(outside) + " ms")
    else:
        print("all observed levels inside the confidence zone")
    if args.target_p is not None:
        rec = design_solver.recommend(
            fit, args.target_p, (min(xs), max(xs)), risk_ratio=args.risk_ratio
        )
        print(rec.summary)
        (out / "recommendation.json").write_text(
            json.dumps(design_solver.recommendation_report(rec), indent=2) + "\n",
            encoding="utf-8",
        )
    print(f"report written to {out}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    designs = _design_registry(args.designs_dir)
    svc = service_mod.SessionService(
        designs,
        sample_rate=args.sample_rate,
        encoding="float32" if args.float32 else "int16",
    )
    service_mod.serve_forever(svc, args.host, args.port, args.console_dir)
    return EXIT_OK


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="crossmodal",
        description="Audio-tactile cross-modal experience design toolkit",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="JSON file with per-command flag defaults, e.g. {\"synth\": {\"sample_rate\": 44100}}",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="analyze a cognitive structure file")
    graph.add_argument("action", choices=["validate", "conflicts", "opportunities", "dot"])
    graph.add_argument("structure", help="structure file path, or 'slr' for the bundled fixture")
    graph.add_argument("--scene", help="restrict conflicts to one scene id")
    graph.add_argument("--out", help="output path for 'dot'")
    graph.set_defaults(func=cmd_graph)

    synth = sub.add_parser("synth", help="render stimulus wave files and a manifest")
    synth.add_argument("--experiment", type=int, choices=[1, 2], required=True)
    synth.add_argument("--out", required=True)
    synth.add_argument("--sample-rate", type=int, default=stimulus.DEFAULT_SAMPLE_RATE)
    synth.add_argument("--amplitude-audio", type=float, default=stimulus.DEFAULT_PEAK)
    synth.add_argument("--amplitude-tactile", type=float, default=stimulus.DEFAULT_PEAK)
    synth.add_argument("--tail-ms", type=float, default=50.0)
    synth.add_argument("--float32", action="store_true",
                       help="write 32-bit float wave files instead of 16-bit PCM")
    synth.set_defaults(func=cmd_synth)

    simulate = sub.add_parser("simulate", help="run simulated observers, write a merged log")
    simulate.add_argument("--experiment", type=int, choices=[1, 2], required=True)
    simulate.add_argument("--observers", type=int, default=15)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--beta0", type=float, default=-3.0)
    simulate.add_argument("--beta1", type=float, default=0.025)
    simulate.add_argument("--same-zone", type=float, default=0.3)
    simulate.add_argument("--lapse", type=float, default=0.02)
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit the logistic model to a session log")
    fit.add_argument("log")
    fit.add_argument("--collapse", choices=["lower", "higher"], default="lower")
    fit.add_argument("--risk-ratio", type=float, default=psychometrics.DEFAULT_RISK_RATIO)
    fit.add_argument("--ridge", action="store_true",
                     help="tiny ridge penalty for exploratory fits on separated data")
    fit.add_argument("--target-p", type=float, default=None,
                     help="also solve for the level reaching this probability")
    fit.add_argument("--designs-dir", default=None)
    fit.add_argument("--out-dir", required=True)
    fit.set_defaults(func=cmd_fit)

    serve = sub.add_parser("serve", help="run the live session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--designs-dir", default=None)
    serve.add_argument("--console-dir", default=None)
    serve.add_argument("--sample-rate", type=int, default=stimulus.DEFAULT_SAMPLE_RATE)
    serve.add_argument("--float32", action="store_true")
    serve.set_defaults(func=cmd_serve)

    return parser, {"graph": graph, "synth": synth, "simulate": simulate,
                    "fit": fit, "serve": serve}


def _apply_config(path: str, subparsers: dict[str, argparse.ArgumentParser]) -> None:
    """Config file values become flag defaults; explicit flags still win."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    for command, overrides in data.items():
        target = subparsers.get(command)
        if target is None:
            raise ValueError(f"config names unknown command {command!r}")
        if not isinstance(overrides, dict):
            raise ValueError(f"config for {command!r} must be an object")
        target.set_defaults(**overrides)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, subparsers = build_parser()
    if "--config" in argv:
        at = argv.index("--config")
        try:
            _apply_config(argv[at + 1], subparsers)
        except (IndexError, OSError, ValueError) as exc:
            print(f"error: bad --config ({exc})", file=sys.stderr)
            return EXIT_USAGE
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
