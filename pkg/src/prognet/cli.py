"""Command-line entry point.

Subcommands: convert (weights -> staged bundle), serve (throttled HTTP
server for a bundle), infer (stream stage predictions from a server),
bench (singleton vs progressive timing + stage accuracy), train-demo
(build the self-contained demo model/dataset) and control (JSON API for
the browser frontend).

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 network error,
4 verification (checksum/accuracy) failure. PROGRNET_LOG sets the log
level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import signal
import sys
import threading
import time
from pathlib import Path

from .bitcodec import BitSchedule
from .bundle import encode_bundle, plane_byte_length, read_bundle, write_bundle
from .core import read_portable, write_portable
from .engine import (DemoConfig, accuracy_by_stage, evaluate, load_datasets,
                     save_datasets, train_demo, write_accuracy_csv)
from .errors import (BundleError, ChecksumError, InferenceError, PrognetError,
                     ScheduleError, SessionStateError, TrainingError,
                     TransportError, ValidationError)
from .transport import (ControlServer, ProgressiveSession, ThrottleConfig,
                        serve_bundle, singleton_session)

log = logging.getLogger("prognet.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NETWORK = 3
EXIT_VERIFY = 4

_RATE_UNITS = {"": 1.0, "B": 1.0, "KB": 1e3, "MB": 1e6, "GB": 1e9}


class UsageError(Exception):
    pass


def parse_rate(text: str) -> float:
    """Accepts plain bytes/s or suffixed forms like '0.1MB/s' or '500KB'."""
    m = re.fullmatch(r"\s*([0-9.]+)\s*(B|KB|MB|GB)?(/s)?\s*", text,
                     flags=re.IGNORECASE)
    if not m:
        raise UsageError(f"cannot parse rate {text!r} "
                         "(expected e.g. '250000', '0.5MB/s')")
    try:
        value = float(m.group(1))
    except ValueError:
        raise UsageError(f"cannot parse rate {text!r}") from None
    unit = (m.group(2) or "").upper()
    return value * _RATE_UNITS[unit]


def parse_on_off(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered not in ("on", "off"):
        raise UsageError(f"expected 'on' or 'off', got {text!r}")
    return lowered == "on"


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; the contract says 1."""

    def error(self, message):
        raise UsageError(message)


class _Emitter:
    """Writes human lines or one JSON object per event."""

    def __init__(self, as_json: bool):
        self.as_json = as_json

    def event(self, kind: str, text: str, **fields) -> None:
        if self.as_json:
            print(json.dumps({"event": kind, **fields}), flush=True)
        else:
            print(text, flush=True)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_convert(args) -> int:
    out = _Emitter(args.json)
    spec, weights = read_portable(args.weights)
    schedule = BitSchedule.parse(args.schedule, args.bits) if args.schedule \
        else BitSchedule.default(args.bits)
    bundle = encode_bundle(spec, weights, bits=args.bits, schedule=schedule)
    out_dir = write_bundle(bundle, args.output)

    ideal = sum(plane_byte_length(t.numel, args.bits)
                for t in bundle.manifest.tensors)
    total = 0
    for record in bundle.manifest.stages:
        total += record.byte_length
        out.event("stage", f"stage {record.stage}: {record.byte_length} bytes",
                  stage=record.stage, bytes=record.byte_length)
    overhead_pct = (total - ideal) / ideal * 100.0
    out.event("summary",
              f"wrote {out_dir} ({total} bytes across "
              f"{len(bundle.manifest.stages)} stages, "
              f"{overhead_pct:+.4f}% vs single {args.bits}-bit file)",
              output=str(out_dir), total_bytes=total, ideal_bytes=ideal,
              overhead_pct=round(overhead_pct, 6))
    return EXIT_OK


def cmd_serve(args) -> int:
    out = _Emitter(args.json)
    server = serve_bundle(args.bundle, host=args.host, port=args.port,
                          rate=parse_rate(args.rate),
                          log_path=args.request_log)
    server.start()
    out.event("serving", f"serving {args.bundle} at {server.url} "
              f"(rate={args.rate})", url=server.url, bundle=str(args.bundle))
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    stop.wait()
    server.stop()
    out.event("stopped", "server stopped")
    return EXIT_OK


def _load_input(dataset_path, index: int):
    _, test = load_datasets(dataset_path)
    if not 0 <= index < len(test):
        raise UsageError(f"--index {index} out of range "
                         f"(dataset has {len(test)} test samples)")
    return test.sample(index)


def cmd_infer(args) -> int:
    out = _Emitter(args.json)
    x, true_label = _load_input(args.dataset, args.index)

    attempts = max(1, args.retries + 1)
    last_error = None
    for attempt in range(attempts):
        live: dict = {}

        def boundary_stop(stage, _live=live):
            # fires in the downloader thread before the next request, so
            # the server never sees a fetch past the stop point
            if args.stop_after > 0 and stage >= args.stop_after:
                _safe_stop(_live["session"])

        session = ProgressiveSession(
            args.url, x, concurrent=args.concurrent,
            infer_delay_s=args.infer_delay,
            on_stage_received=boundary_stop if args.stop_after > 0 else None)
        live["session"] = session
        signal.signal(signal.SIGINT, lambda *a: _safe_stop(session))
        session.start()
        try:
            n_emitted = 0
            for result in session.iter_results():
                state = session.state()
                out.event(
                    "result",
                    f"stage {result.stage}/{state.stages_total} "
                    f"bits={result.bits} class={result.prediction.class_index} "
                    f"confidence={result.prediction.confidence:.3f} "
                    f"elapsed={result.timing.infer_end:.3f}s",
                    stage=result.stage, bits=result.bits,
                    class_index=result.prediction.class_index,
                    confidence=round(result.prediction.confidence, 6),
                    elapsed_s=round(result.timing.infer_end, 6),
                    true_label=true_label)
                n_emitted += 1
            session.join(10)
            status = session.state().status
            out.event("done", f"session {status} after {n_emitted} result(s)",
                      status=status, results=n_emitted)
            return EXIT_OK
        except TransportError as exc:
            last_error = exc
            log.warning("attempt %d/%d failed: %s", attempt + 1, attempts,
                        exc)
            time.sleep(0.2)
    raise last_error


def _safe_stop(session: ProgressiveSession) -> None:
    try:
        session.stop()
    except SessionStateError:
        pass  # already finished


def cmd_bench(args) -> int:
    out = _Emitter(args.json)
    bundle = read_bundle(args.bundle)
    _, test = load_datasets(args.dataset)
    x, _ = test.sample(args.index)
    rate = parse_rate(args.rate)

    rows = accuracy_by_stage(bundle, test)
    final_acc = rows[-1].accuracy
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_accuracy_csv(rows, out_dir / "accuracy_by_stage.csv")

    with serve_bundle(bundle, port=args.port, rate=rate) as server:
        single = singleton_session(server.url, x,
                                   infer_delay_s=args.infer_delay)
        report = [("singleton", single.total_s, [], final_acc)]
        for concurrent in (True, False):
            session = ProgressiveSession(server.url, x, concurrent=concurrent,
                                         infer_delay_s=args.infer_delay)
            results = session.run()
            total = max(r.timing.infer_end for r in results)
            stage_times = [round(r.timing.infer_end, 3) for r in results]
            mode = "progressive+concurrent" if concurrent \
                else "progressive+serial"
            report.append((mode, total, stage_times, final_acc))

    header = f"{'mode':<24} {'total_s':>8}  {'accuracy':>8}  per-stage end times"
    out.event("header", header)
    if not args.json:
        print("-" * len(header))
    for mode, total, stage_times, acc in report:
        out.event("mode",
                  f"{mode:<24} {total:>8.3f}  {acc:>8.4f}  "
                  + (",".join(f"{t:.2f}" for t in stage_times) or "-"),
                  mode=mode, total_s=round(total, 6), accuracy=acc,
                  stage_end_times=stage_times)
    out.event("csv", f"stage accuracy written to {csv_path}",
              path=str(csv_path))
    return EXIT_OK


def cmd_train_demo(args) -> int:
    out = _Emitter(args.json)
    config = DemoConfig()
    spec, weights, train, test = train_demo(seed=args.seed, config=config)
    acc = evaluate(spec, weights, test)

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = write_portable(out_dir, spec, weights)
    dataset_path = save_datasets(out_dir / "dataset.npz", train, test)
    out.event("trained",
              f"held-out accuracy {acc:.4f} "
              f"({len(train)} train / {len(test)} test samples)",
              accuracy=acc, train_samples=len(train), test_samples=len(test))
    out.event("written", f"weights at {manifest_path}, dataset at "
              f"{dataset_path}", weights=str(manifest_path),
              dataset=str(dataset_path))
    return EXIT_OK


def cmd_control(args) -> int:
    out = _Emitter(args.json)
    server = ControlServer((args.host, args.port), seed=args.seed,
                           input_count=args.inputs)
    server.start()
    out.event("serving", f"control API at {server.url}", url=server.url)
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    stop.wait()
    server.stop()
    out.event("stopped", "control API stopped")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="prognet",
                     description="progressive model transmission toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, bits=False, rate=False, json_flag=True):
        if bits:
            p.add_argument("--bits", type=int, default=16,
                           help="quantization bit width (default 16)")
            p.add_argument("--schedule", default=None,
                           help="comma-separated cumulative bit positions "
                                "(default 2,4,...,16 ladder)")
        if rate:
            p.add_argument("--rate", default="0",
                           help="bandwidth cap, e.g. 250000 or 0.5MB/s "
                                "(0 = unlimited)")
        if json_flag:
            p.add_argument("--json", action="store_true",
                           help="emit one JSON object per event")

    p = sub.add_parser("convert", help="portable weights -> staged bundle")
    p.add_argument("weights", help="path to weights.json")
    p.add_argument("--output", default="bundle", help="bundle directory")
    common(p, bits=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("serve", help="serve a bundle over throttled HTTP")
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--request-log", default=None,
                   help="append one JSON line per request to this file")
    common(p, rate=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("infer", help="stream stage predictions from a server")
    p.add_argument("url", help="bundle server base URL")
    p.add_argument("--dataset", required=True, help="dataset .npz path")
    p.add_argument("--index", type=int, default=0,
                   help="test-sample index to classify")
    p.add_argument("--concurrent", type=parse_on_off, default=True,
                   metavar="on|off",
                   help="overlap inference with the next transfer (default on)")
    p.add_argument("--stop-after", type=int, default=0, metavar="M",
                   help="stop at the stage-M boundary (0 = run to completion)")
    p.add_argument("--infer-delay", type=float, default=0.0, metavar="S",
                   help="artificial seconds added to each inference")
    p.add_argument("--retries", type=int, default=2,
                   help="connection retry attempts (default 2)")
    common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("bench",
                       help="singleton vs progressive timing + accuracy")
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--dataset", required=True, help="dataset .npz path")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--port", type=int, default=0,
                   help="loopback port for the spawned server (0 = ephemeral)")
    p.add_argument("--infer-delay", type=float, default=0.0, metavar="S")
    p.add_argument("--output", default=".", help="directory for the CSV")
    common(p, rate=True)
    p.set_defaults(func=cmd_bench, rate="1MB/s")

    p = sub.add_parser("train-demo",
                       help="train the bundled demo classifier")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="demo",
                   help="directory for weights + dataset")
    common(p)
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser("control", help="run the UI control API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inputs", type=int, default=12,
                   help="demo gallery size")
    common(p)
    p.set_defaults(func=cmd_control)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("PROGRNET_LOG", "WARNING").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChecksumError, TrainingError, InferenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except (BundleError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PrognetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
