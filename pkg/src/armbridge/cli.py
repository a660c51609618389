"""Command-line entry point for the bridge daemon and offline tools."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import BridgeConfig, DEFAULT_LISTEN, load_config
from .errors import ConnectError, NotFound
from .links import SIMULATOR_PORT
from .service import BridgeServer
from .store import TelemetryStore
from .survey import aggregate, default_questionnaire, render_table, responses_from_csv


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armbridge",
        description="Bridge a rehabilitation arm (or its simulator) to "
                    "pointer-driven web games.",
    )
    parser.add_argument("--listen", default=None, metavar="ADDR:PORT",
                        help=f"bind address (default {DEFAULT_LISTEN})")
    device = parser.add_mutually_exclusive_group()
    device.add_argument("--port", default=None, metavar="SERIAL",
                        help="serial port to open at startup")
    device.add_argument("--simulate", action="store_true",
                        help="open the built-in simulator at startup")
    parser.add_argument("--scenario", default=None, metavar="FILE",
                        help="scripted simulator inputs (requires --simulate)")
    parser.add_argument("--sim-speed", type=float, default=None, metavar="X",
                        help="simulated seconds per wall second (default 1.0)")
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="daemon configuration file")
    parser.add_argument("--data-dir", default=None, metavar="DIR",
                        help="session store root (default ./data)")
    parser.add_argument("--webroot", default=None, metavar="DIR",
                        help="serve this directory at / (the console UI build)")
    parser.add_argument("--export-session", default=None, metavar="ID",
                        help="print a stored session as CSV and exit")
    parser.add_argument("--export-kind", default="Telemetry",
                        help="record kind for --export-session (default Telemetry)")
    parser.add_argument("--survey-summary", default=None, metavar="CSV",
                        help="aggregate a responses CSV, print the category table, exit")
    return parser


def make_config(args) -> BridgeConfig:
    config = load_config(args.config) if args.config else BridgeConfig()
    if args.listen:
        config.listen = args.listen
    if args.data_dir:
        config.data_dir = Path(args.data_dir)
    if args.sim_speed is not None:
        config.sim_speed = args.sim_speed
    if args.webroot:
        config.webroot = Path(args.webroot)
    return config


def run_export_session(config: BridgeConfig, session_id: str, kind: str) -> int:
    store = TelemetryStore(config.data_dir)
    try:
        sys.stdout.write(store.export_csv(session_id, kind))
    except NotFound as exc:
        print(f"NotFound: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def run_survey_summary(config: BridgeConfig, csv_path: str) -> int:
    try:
        text = Path(csv_path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        responses = responses_from_csv(text)
        questionnaire = config.questionnaire or default_questionnaire()
        summaries = aggregate(responses, questionnaire)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(render_table(summaries))
    return 0


def main(argv=None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    if args.scenario and not args.simulate:
        parser.error("--scenario requires --simulate")

    config = make_config(args)

    if args.export_session:
        return run_export_session(config, args.export_session, args.export_kind)
    if args.survey_summary:
        return run_survey_summary(config, args.survey_summary)

    server = BridgeServer(config)
    if args.simulate or args.port:
        port = SIMULATOR_PORT if args.simulate else args.port
        try:
            server.bridge.connect(port, scenario_path=args.scenario)
        except ConnectError as exc:
            print(f"connect failed: {exc}", file=sys.stderr)
            return 1
    print(f"armbridge listening on http://{server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
