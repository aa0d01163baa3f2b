"""Command line surface: simulate | train | evaluate | serve | report.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or input
errors.  Every run that produces files also writes a run manifest next
to them recording inputs, digests and options, so a run can be checked
for reproducibility later.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import secrets
import sys
import threading

import numpy as np

from .analytics.report import build_report, emit_report
from .api.app import TOKEN_ENV, ApiConfig, create_app
from .errors import (CorpusError, ScenarioError, TrainingDivergedError,
                     TrolleyWatchError, WeightsFormatError)
from .manifest import RunManifest
from .monitor.eventlog import EventLog, read_event_log
from .runtime import OBSERVE_MODES, POLICIES, SimRuntime
from .sim.scenario import load_scenario
from .vision.corpus import load_patch_corpus, synthesize_patch
from .vision.hog import HogLinearClassifier
from .vision.network import LABELS, demo_network, save_weights
from .vision.pipeline import load_classifier
from .vision.train import TrainConfig, normalize_patches, predict, train

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _parse_bind(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(
            f"bind address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _load_scenario_arg(path: str, seed: int | None):
    config = load_scenario(path)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------- simulate ----------

def cmd_simulate(args) -> int:
    config = _load_scenario_arg(args.scenario, args.seed)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "monitor.jsonl")
    sim_path = os.path.join(args.out, "sim_events.jsonl")
    analytics_path = os.path.join(args.out, "analytics.json")
    manifest_path = os.path.join(args.out, "manifest.json")

    manifest = RunManifest(command="simulate", seed=config.seed, options={
        "duration_s": args.duration, "observe": args.observe,
        "policy": args.policy, "patrol_period_s": args.patrol_period,
        "obs_log_every": args.obs_log_every, "speed": args.speed,
    })
    manifest.set_scenario(args.scenario)

    classifier = None
    if args.observe == "vision":
        if args.weights is None:
            raise ScenarioError("--observe vision requires --weights")
        classifier = load_classifier(args.weights)
        manifest.set_weights(args.weights)

    with open(sim_path, "w", encoding="utf-8") as sim_fh:
        def write_sim_event(doc: dict) -> None:
            sim_fh.write(json.dumps(doc, sort_keys=True,
                                    separators=(",", ":")) + "\n")

        with EventLog(log_path) as log:
            runtime = SimRuntime(
                config, observe=args.observe, classifier=classifier,
                policy=args.policy, patrol_period_s=args.patrol_period,
                log=log, obs_log_every=args.obs_log_every,
                sim_event_writer=write_sim_event)
            runtime.run(args.duration, speed=args.speed)
            report = build_report(list(log.records))

    with open(analytics_path, "w", encoding="utf-8") as fh:
        fh.write(emit_report(report, "json"))

    manifest.log_path = log_path
    manifest.add_output("monitor_log", log_path)
    manifest.add_output("sim_events", sim_path)
    manifest.add_output("analytics", analytics_path)
    manifest.finalize(manifest_path)
    if not args.quiet:
        print(f"simulated {args.duration:g}s -> {args.out}")
    return 0


# ---------- train ----------

def _synthesized_corpus(n: int, seed: int, patch: int):
    rng = np.random.default_rng(seed)
    patches = np.stack([synthesize_patch(rng, LABELS[i % 2], patch)
                        for i in range(n)])
    labels = np.array([i % 2 for i in range(n)], dtype=np.intp)
    return patches, labels


def _split_holdout(patches, labels, holdout: float, seed: int):
    n = patches.shape[0]
    order = np.random.default_rng(seed).permutation(n)
    n_eval = int(round(n * holdout))
    eval_idx, train_idx = order[:n_eval], order[n_eval:]
    return (patches[train_idx], labels[train_idx],
            patches[eval_idx], labels[eval_idx])


def _eval_accuracy(classifier_kind: str, model, patches, labels) -> float | None:
    if patches.shape[0] == 0:
        return None
    if classifier_kind == "hog":
        scores = model.predict_scores(patches)
        guesses = np.argmax(scores, axis=1)
    else:
        guesses = predict(model, normalize_patches(patches))
    return float(np.mean(guesses == labels))


def cmd_train(args) -> int:
    if args.corpus is not None:
        patches, labels = load_patch_corpus(args.corpus)
        patch = patches.shape[1]
        if patches.shape[1] != patches.shape[2]:
            raise CorpusError("training patches must be square")
    else:
        patch = args.patch_size
        patches, labels = _synthesized_corpus(args.synthesize, args.seed, patch)

    manifest = RunManifest(command="train", seed=args.seed, options={
        "features": args.features, "epochs": args.epochs,
        "learning_rate": args.lr, "batch_size": args.batch_size,
        "holdout": args.holdout, "corpus": args.corpus,
        "synthesize": None if args.corpus else args.synthesize,
    })

    tr_p, tr_l, ev_p, ev_l = _split_holdout(patches, labels, args.holdout,
                                            args.seed)
    if args.features == "hog":
        model = HogLinearClassifier.create(seed=args.seed, patch=patch)
        trace = model.fit(tr_p, tr_l, learning_rate=args.lr,
                          batch_size=args.batch_size, epochs=args.epochs,
                          seed=args.seed)
        model.save(args.out)
    else:
        model = demo_network(seed=args.seed, patch=patch)
        cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                          epochs=args.epochs, seed=args.seed)
        model, trace = train(model, normalize_patches(tr_p), tr_l, cfg)
        save_weights(model, args.out)

    for epoch, loss in enumerate(trace):
        print(f"epoch {epoch:3d}  loss {loss:.4f}")
    acc = _eval_accuracy(args.features, model, ev_p, ev_l)
    if acc is not None:
        print(f"held-out accuracy: {acc:.4f}  ({ev_p.shape[0]} samples)")

    manifest.add_output("weights", args.out)
    manifest.finalize(args.out + ".manifest.json")
    return 0


# ---------- evaluate ----------

def cmd_evaluate(args) -> int:
    config = _load_scenario_arg(args.scenario, args.seed)
    classifier = load_classifier(args.weights)
    runtime = SimRuntime(config, observe="vision", classifier=classifier,
                         collect_detections=True)

    errors_unoccluded: list[int] = []
    paused_frames = 0
    frames = 0
    alerts_while_paused = 0
    alerts_raised = 0

    def on_frame(sid, t, result, gt, true_count):
        nonlocal paused_frames, frames
        frames += 1
        if result.mode == "paused":
            paused_frames += 1
        if gt.coverage == 0.0:
            errors_unoccluded.append(abs(result.reported_count - gt.count))

    runtime.frame_hooks.append(on_frame)

    def watch_alerts(kind, doc):
        nonlocal alerts_raised, alerts_while_paused
        if kind == "alert_raised":
            alerts_raised += 1
            pipe = runtime.pipelines.get(doc["station"])
            if pipe is not None and pipe.state.mode == "paused":
                alerts_while_paused += 1

    runtime.service.add_sink(watch_alerts)
    runtime.run(args.duration)

    counters = runtime.counters
    errs = np.array(errors_unoccluded, dtype=np.intp)
    doc = {
        "frames": frames,
        "paused_frames": paused_frames,
        "alerts_raised": alerts_raised,
        "alerts_while_paused": alerts_while_paused,
        "detection": {
            "tfp": counters.tfp, "tfn": counters.tfn, "agt": counters.agt,
            "accuracy": None if counters.agt == 0
            else counters.tfp / counters.agt,
            "false_alarm": None if counters.tfp + counters.tfn == 0
            else counters.tfp / (counters.tfp + counters.tfn),
        },
        "count_error": {
            "frames_scored": int(errs.size),
            "within_one": None if errs.size == 0
            else float(np.mean(errs <= 1)),
            "mean": None if errs.size == 0 else float(errs.mean()),
            "max": None if errs.size == 0 else int(errs.max()),
            "series": errs.tolist(),
        },
    }
    if args.format == "json":
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        lines = [
            f"frames processed:      {doc['frames']}",
            f"paused frames:         {doc['paused_frames']}",
            f"alerts raised:         {doc['alerts_raised']}",
            f"alerts while paused:   {doc['alerts_while_paused']}",
            f"detection accuracy:    {doc['detection']['accuracy']}",
            f"detection false alarm: {doc['detection']['false_alarm']}",
            f"count error <=1:       {doc['count_error']['within_one']}",
            f"count error mean/max:  {doc['count_error']['mean']}"
            f" / {doc['count_error']['max']}",
        ]
        _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------- serve ----------

def cmd_serve(args) -> int:
    import uvicorn

    config = _load_scenario_arg(args.scenario, args.seed)
    classifier = None
    if args.observe == "vision":
        if args.weights is None:
            raise ScenarioError("--observe vision requires --weights")
        classifier = load_classifier(args.weights)

    token = args.token or os.environ.get(TOKEN_ENV)
    if not token:
        token = secrets.token_hex(16)
        print(f"generated API token: {token}")

    log = EventLog(args.log) if args.log else EventLog()
    runtime = SimRuntime(config, observe=args.observe, classifier=classifier,
                         policy=args.policy,
                         patrol_period_s=args.patrol_period, log=log,
                         obs_log_every=args.obs_log_every)
    api_cfg = ApiConfig(tokens=(token,), heartbeat_s=args.heartbeat,
                        cors_origins=tuple(args.cors or ()))
    app = create_app(runtime, api_cfg)

    duration = args.duration if args.duration is not None else math.inf
    sim_thread = threading.Thread(target=runtime.run,
                                  args=(duration, args.speed),
                                  name="sim-clock", daemon=True)
    sim_thread.start()

    host, port = args.bind
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        runtime.stop()
        sim_thread.join(timeout=10.0)
        runtime.broker.close()
        log.close()
        if args.log:
            manifest = RunManifest(command="serve", seed=config.seed, options={
                "observe": args.observe, "policy": args.policy,
                "speed": args.speed, "bind": f"{host}:{port}",
            })
            manifest.set_scenario(args.scenario)
            if args.weights:
                manifest.set_weights(args.weights)
            manifest.log_path = args.log
            manifest.add_output("monitor_log", args.log)
            manifest.finalize(args.log + ".manifest.json")
    return 0


# ---------- report ----------

def cmd_report(args) -> int:
    if args.window and args.window[1] < args.window[0]:
        print("error: window end before start", file=sys.stderr)
        return USAGE_ERROR
    records = read_event_log(args.log)
    window = tuple(args.window) if args.window else None
    report = build_report(records, window=window)
    _emit(emit_report(report, args.format), args.out)
    if args.out is not None:
        manifest = RunManifest(command="report", options={
            "format": args.format, "window": args.window,
        })
        manifest.log_path = args.log
        manifest.add_output("report", args.out)
        manifest.finalize(args.out + ".manifest.json")
    return 0


# ---------- parser ----------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trolleywatch",
        description="Trolley station monitoring: simulation, vision, "
                    "alerting, analytics and serving.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="headless run writing event logs")
    p.add_argument("--scenario", required=True)
    p.add_argument("--duration", type=float, required=True,
                   help="simulated seconds to run")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--observe", choices=OBSERVE_MODES, default="vision")
    p.add_argument("--weights", help="classifier weights (vision mode)")
    p.add_argument("--policy", choices=POLICIES, default="none")
    p.add_argument("--patrol-period", type=float, default=1800.0)
    p.add_argument("--obs-log-every", type=int, default=1,
                   help="log every Nth observation record")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.add_argument("--speed", type=float, default=0.0,
                   help="sim seconds per wall second; 0 = flat out")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a patch classifier")
    p.add_argument("--out", required=True, help="weights file to write")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--corpus", help="directory with patches + index.jsonl")
    src.add_argument("--synthesize", type=int, default=2000, metavar="N",
                     help="generate N synthetic patches instead")
    p.add_argument("--features", choices=("raw", "hog"), default="raw")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--holdout", type=float, default=0.2,
                   help="fraction held out for the printed accuracy")
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate",
                       help="score a detector against simulator ground truth")
    p.add_argument("--weights", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None, help="write instead of stdout")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the simulation with the HTTP API")
    p.add_argument("--scenario", required=True)
    p.add_argument("--bind", type=_parse_bind, default=("127.0.0.1", 8000),
                   help="host:port to listen on")
    p.add_argument("--observe", choices=OBSERVE_MODES, default="vision")
    p.add_argument("--weights")
    p.add_argument("--policy", choices=POLICIES, default="none")
    p.add_argument("--patrol-period", type=float, default=1800.0)
    p.add_argument("--obs-log-every", type=int, default=1)
    p.add_argument("--token", help=f"API token (default: ${TOKEN_ENV})")
    p.add_argument("--speed", type=float, default=1.0,
                   help="sim seconds per wall second")
    p.add_argument("--duration", type=float, default=None,
                   help="stop after this many simulated seconds")
    p.add_argument("--heartbeat", type=float, default=15.0)
    p.add_argument("--cors", action="append", metavar="ORIGIN")
    p.add_argument("--log", help="monitor event log path (JSONL)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="analytics report from an event log")
    p.add_argument("--log", required=True, help="monitor event log (JSONL)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="write instead of stdout")
    p.add_argument("--window", type=float, nargs=2, metavar=("START", "END"))
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, CorpusError, WeightsFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except (TrolleyWatchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
