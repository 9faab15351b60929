"""Operator and developer command line: run, replay, validate, analyze.

Exit codes: 0 ok, 1 data violations found, 2 usage or runtime error.
"""

import argparse
import sys
from pathlib import Path

from .analysis import (DEFAULT_PROXIMITY_THRESHOLD, analyze_tree, render_figure,
                       write_groups_csv, write_points_csv)
from .bus import Bus
from .clockutil import VirtualClock
from .recorder import EpisodeReadError, read_episode, validate_episode
from .replay import replay_episode
from .rig import RigError, default_rig, load_rig
from .simdev import LeaderScript
from .stack import Stack
from . import wire

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_ERROR = 2


def _load_rig(args):
    if getattr(args, "rig", None):
        return load_rig(args.rig, record_root=getattr(args, "root", None))
    return default_rig(record_root=getattr(args, "root", None))


def cmd_run(args):
    rig = _load_rig(args)
    script = None
    if args.mode == "scripted":
        if not args.script:
            print("scripted mode needs --script", file=sys.stderr)
            return EXIT_ERROR
        script = LeaderScript.from_json(args.script)

    labels = {"task": args.task, "location": args.location, "operator": args.operator}
    clock = VirtualClock() if args.virtual_clock else None
    stack = Stack(rig, script=script, seed=args.seed, clock=clock, labels=labels)

    server = None
    bridge = None
    if args.port:
        server = wire.serve(stack.bus, port=args.port)
        print("bus: tcp://%s:%d" % server.address)
    if args.ws_port:
        from .bridge import ConsoleBridge
        bridge = ConsoleBridge(stack, port=args.ws_port)
        bridge.start()
        print("console: http://127.0.0.1:%d/" % args.ws_port)
    print("record root: %s" % rig.record_root)

    duration = args.duration
    if duration is None and script is not None:
        duration = script.duration + 1.0
    try:
        if args.virtual_clock:
            if duration is None:
                print("live virtual-clock runs need --duration", file=sys.stderr)
                return EXIT_ERROR
            stack.run_virtual(duration)
        else:
            stack.run_realtime(duration)
    except KeyboardInterrupt:
        aborted = stack.abort()
        if aborted is not None:
            print("aborted in-flight episode: %s" % aborted)
    finally:
        if server is not None:
            server.close()
        if bridge is not None:
            bridge.stop()
    for path in stack.teleop.episodes_written:
        print("episode: %s" % path)
    return EXIT_OK


def cmd_replay(args):
    try:
        episode = read_episode(args.episode)
    except EpisodeReadError as exc:
        print("cannot read episode: %s" % exc, file=sys.stderr)
        return EXIT_ERROR
    violations = validate_episode(episode)
    if violations:
        for v in violations:
            print("%s at record %d: %s" % (v.kind, v.index, v.detail), file=sys.stderr)
        return EXIT_VIOLATIONS
    bus = Bus()
    server = None
    if args.port:
        server = wire.serve(bus, port=args.port)
        print("bus: tcp://%s:%d" % server.address)
    try:
        duration = replay_episode(bus, episode, speed=args.speed)
    finally:
        if server is not None:
            server.close()
    print("replayed %d records over %.2f s (speed %.2fx)"
          % (len(episode.records), duration, args.speed))
    return EXIT_OK


def cmd_validate(args):
    root = Path(args.path)
    rig = None
    try:
        if args.rig:
            rig = load_rig(args.rig)
    except RigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    dirs = sorted(p.parent for p in root.rglob("manifest.json")) if root.is_dir() else []
    if root.is_dir() and (root / "manifest.json").exists():
        dirs = [root]
    bad = 0
    for ep_dir in dirs:
        try:
            episode = read_episode(ep_dir)
        except EpisodeReadError as exc:
            print("%s: %s: %s" % (ep_dir, type(exc).__name__, exc))
            bad += 1
            continue
        violations = validate_episode(episode, rig)
        if violations:
            bad += 1
            for v in violations:
                print("%s: %s at record %d: %s" % (ep_dir, v.kind, v.index, v.detail))
        else:
            print("%s: ok (%d records)" % (ep_dir, len(episode.records)))
    print("%d episodes, %d with violations" % (len(dirs), bad))
    return EXIT_VIOLATIONS if bad else EXIT_OK


def cmd_analyze(args):
    try:
        rig = load_rig(args.rig) if args.rig else default_rig()
    except RigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    try:
        points, skipped, groups = analyze_tree(args.root, rig, args.threshold, args.group_by)
    except EpisodeReadError as exc:
        print("cannot read episode: %s" % exc, file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    points_csv = out / "interaction_points.csv"
    groups_csv = out / "interaction_groups.csv"
    write_points_csv(points, points_csv)
    write_groups_csv(groups, groups_csv)
    print("wrote %s (%d points), %s (%d groups)"
          % (points_csv, len(points), groups_csv, len(groups)))
    if points and not args.no_figure:
        figure = out / "interaction_points.png"
        render_figure(points, groups, figure)
        print("wrote %s" % figure)
    for ep_dir, reason in skipped:
        print("no interaction: %s (%s)" % (ep_dir, reason))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="puppetrig",
                                     description="Simulated dual-arm teleoperation rig")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="bring up the full stack")
    p.add_argument("--rig", help="rig description YAML (default: built-in rig)")
    p.add_argument("--root", help="episode record root (overrides rig file)")
    p.add_argument("--mode", choices=("live", "scripted"), default="live")
    p.add_argument("--script", help="leader script JSON for scripted mode")
    p.add_argument("--duration", type=float, help="run time in seconds")
    p.add_argument("--virtual-clock", action="store_true",
                   help="deterministic tick-driven run (scripted mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ws-port", type=int, help="serve the browser console")
    p.add_argument("--port", type=int, help="serve the bus over TCP")
    p.add_argument("--task", default="")
    p.add_argument("--location", default="")
    p.add_argument("--operator", default="")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("replay", help="republish a recorded episode")
    p.add_argument("episode", help="episode directory")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--port", type=int, help="serve the replay bus over TCP")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("validate", help="check episodes for violations")
    p.add_argument("path", help="episode directory or tree")
    p.add_argument("--rig", help="rig for joint-limit checks")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("analyze", help="interaction-point analysis")
    p.add_argument("root", help="episode tree")
    p.add_argument("--rig", help="rig description YAML (default: built-in rig)")
    p.add_argument("--threshold", type=float, default=DEFAULT_PROXIMITY_THRESHOLD)
    p.add_argument("--group-by", default="location",
                   choices=("task", "location", "operator"))
    p.add_argument("--out", default="analysis")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(fn=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
