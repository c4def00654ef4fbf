"""Operator entry point: rescoring runs, WER evaluation, serving, benchmarks.

Exit codes: 0 success, 1 usage, 2 data error, 3 network error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FsPath

from . import arpa, client, fixtures, lattice, protocol, server
from .rescore import (RescoreError, WerCounts, best_path, oracle_path,
                      rescore as rescore_lattice, wer)
from .client import Connection, RemoteBackend, RemoteError, SessionState
from .lattice import LatticeFormatError, LatticeInvalidError
from .lm import ArpaBackend, CachedBackend
from .symbols import SymbolTable, SymbolTableError, parse_symbols

USAGE_ERROR = 1
DATA_ERROR = 2
NETWORK_ERROR = 3


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRecord:
    session_id: str
    utt_id: str
    lattice_path: str
    reference: tuple[str, ...] | None


def parse_manifest(text: str) -> list[ManifestRecord]:
    """`session_id<TAB>utt_id<TAB>lattice_path<TAB>reference words...` per line."""
    records = []
    seen_utts = set()
    session_done = set()
    last_session = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise ManifestError(f"line {lineno}: expected at least 3 tab-separated fields")
        session_id, utt_id, path = fields[0], fields[1], fields[2]
        reference = tuple(fields[3].split()) if len(fields) > 3 and fields[3].strip() else None
        if utt_id in seen_utts:
            raise ManifestError(f"line {lineno}: duplicate utt_id {utt_id!r}")
        seen_utts.add(utt_id)
        if session_id != last_session:
            if session_id in session_done:
                raise ManifestError(
                    f"line {lineno}: session {session_id!r} records are not contiguous")
            if last_session is not None:
                session_done.add(last_session)
            last_session = session_id
        records.append(ManifestRecord(session_id, utt_id, path, reference))
    return records


def _load_symbols(path: str) -> SymbolTable:
    return parse_symbols(FsPath(path).read_text(encoding="utf-8"))


def _load_lattice(path: str) -> lattice.Lattice:
    return lattice.parse_lattice(FsPath(path).read_text(encoding="utf-8"))


def _parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    return host or "127.0.0.1", int(port)


def _rescore_session(records, symbols, args, order):
    """Rescore one session's utterances in order; returns per-utt results."""
    results = []
    conn = None
    session = None
    local_backend = None
    if args.arpa:
        with open(args.arpa, encoding="utf-8") as f:
            model = arpa.parse_arpa(f.read())
        local_backend = ArpaBackend(model, symbols)
    else:
        host, port = _parse_address(args.remote)
        conn = Connection(host, port)
        session = SessionState(records[0].session_id) if args.mems else None
    try:
        for rec in records:
            lat = _load_lattice(rec.lattice_path)
            if local_backend is not None:
                backend = local_backend
            elif args.mode == "batch":
                cache = client.batch_prefetch(lat, order, conn, symbols, session,
                                              max_batch=args.max_batch)
                backend = CachedBackend(None, cache)
            else:
                backend = RemoteBackend(conn, symbols, session)
            rescored = rescore_lattice(lat, backend, order)
            best = best_path(rescored, args.lm_scale)
            if session is not None:
                client.session_commit(best, conn, symbols, session)
            results.append((rec, rescored, best))
    finally:
        if conn is not None:
            conn.close()
    return results


def cmd_rescore(args) -> int:
    symbols = _load_symbols(args.symbols)
    records = parse_manifest(FsPath(args.manifest).read_text(encoding="utf-8"))
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    sessions: list[list[ManifestRecord]] = []
    for rec in records:
        if sessions and sessions[-1][0].session_id == rec.session_id:
            sessions[-1].append(rec)
        else:
            sessions.append([rec])

    if args.jobs > 1 and len(sessions) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            per_session = list(pool.map(
                lambda s: _rescore_session(s, symbols, args, args.order), sessions))
    else:
        per_session = [_rescore_session(s, symbols, args, args.order) for s in sessions]

    by_utt = {rec.utt_id: (rec, rescored, best)
              for session in per_session for rec, rescored, best in session}
    transcript_lines = []
    summary_utts = []
    for rec in records:
        _, rescored, best = by_utt[rec.utt_id]
        (out / f"{rec.utt_id}.lat").write_text(lattice.write_lattice(rescored),
                                               encoding="utf-8")
        words = [symbols.symbol(w) for w in best.words]
        transcript_lines.append(f"{rec.utt_id} {' '.join(words)}".rstrip())
        summary_utts.append({
            "utt_id": rec.utt_id,
            "session_id": rec.session_id,
            "best_total": best.total(args.lm_scale),
            "best_lm": best.lm_cost,
            "best_ac": best.ac_cost,
            "words": words,
        })
    (out / "transcripts.txt").write_text("\n".join(transcript_lines) + "\n",
                                         encoding="utf-8")
    summary = {
        "order": args.order,
        "mode": "local" if args.arpa else args.mode,
        "lm_scale": args.lm_scale,
        "utterances": summary_utts,
        "timing_s": round(time.perf_counter() - started, 6),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    return 0


def _read_transcripts(path: str) -> dict[str, tuple[str, ...]]:
    out = {}
    for line in FsPath(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        fields = line.split()
        out[fields[0]] = tuple(fields[1:])
    return out


def cmd_wer(args) -> int:
    hyp = _read_transcripts(args.hyp)
    ref = _read_transcripts(args.ref)
    if set(hyp) != set(ref):
        raise ManifestError("hyp and ref utt_id sets differ")
    total = WerCounts(0, 0, 0, 0)
    for utt_id in sorted(hyp):
        counts = wer(hyp[utt_id], ref[utt_id])
        total = total + counts
        print(f"{utt_id} S={counts.substitutions} I={counts.insertions} "
              f"D={counts.deletions} N={counts.reference_length} "
              f"WER={100 * counts.rate:.2f}%")
    print(f"TOTAL S={total.substitutions} I={total.insertions} D={total.deletions} "
          f"N={total.reference_length} WER={100 * total.rate:.2f}%")
    return 0


def cmd_oracle(args) -> int:
    symbols = _load_symbols(args.symbols)
    records = parse_manifest(FsPath(args.manifest).read_text(encoding="utf-8"))
    oracle_total = WerCounts(0, 0, 0, 0)
    best_total = WerCounts(0, 0, 0, 0)
    for rec in records:
        if rec.reference is None:
            raise ManifestError(f"utterance {rec.utt_id} has no reference")
        lat = _load_lattice(rec.lattice_path)
        ref_ids = tuple(symbols.lookup(w) for w in rec.reference)
        _, oracle_counts = oracle_path(lat, ref_ids)
        best = best_path(lat, 1.0)
        best_counts = wer(best.words, ref_ids)
        oracle_total = oracle_total + oracle_counts
        best_total = best_total + best_counts
        print(f"{rec.utt_id} oracle={100 * oracle_counts.rate:.2f}% "
              f"best={100 * best_counts.rate:.2f}%")
    print(f"TOTAL oracle={100 * oracle_total.rate:.2f}% best={100 * best_total.rate:.2f}% "
          f"bound_ok={oracle_total.errors <= best_total.errors}")
    return 0


def cmd_serve(args) -> int:
    host, port = _parse_address(args.address)
    return server.serve(args.model, host, port, args.capacity, args.mem_len,
                        args.max_batch)


def bench_batch(address: str, context_len: int, batch_sizes: list[int],
                repetitions: int) -> list[dict]:
    """Median batch latency per size; incremental relative to the previous row."""
    host, port = _parse_address(address)
    conn = Connection(host, port)
    vocab = ["so", "does", "it", "sodas"]
    context = tuple(vocab[i % len(vocab)] for i in range(context_len))
    rows = []
    try:
        prev_total = None
        for size in batch_sizes:
            items = tuple((context, vocab[i % len(vocab)]) for i in range(size))
            latencies = []
            for _ in range(repetitions):
                req = protocol.BatchScoreRequest(conn.fresh_id(), items)
                t0 = time.perf_counter()
                conn.roundtrip(req)
                latencies.append((time.perf_counter() - t0) * 1e6)
            total = statistics.median(latencies)
            rows.append({
                "batch_size": size,
                "total_us": total,
                "incremental_us": None if prev_total is None else total - prev_total,
            })
            prev_total = total
    finally:
        conn.close()
    return rows


def _format_bench_csv(rows: list[dict], partial: bool = False) -> str:
    lines = ["batch_size,total_us,incremental_us"]
    for row in rows:
        inc = "" if row["incremental_us"] is None else f"{row['incremental_us']:.1f}"
        lines.append(f"{row['batch_size']},{row['total_us']:.1f},{inc}")
    if partial:
        lines.append("# PARTIAL: benchmark aborted early")
    return "\n".join(lines) + "\n"


def _parse_sizes(spec: str) -> list[int]:
    sizes = []
    for part in spec.split(","):
        if ":" in part:
            pieces = [int(x) for x in part.split(":")]
            lo, hi = pieces[0], pieces[1]
            step = pieces[2] if len(pieces) > 2 else 1
            sizes.extend(range(lo, hi + 1, step))
        else:
            sizes.append(int(part))
    return sizes


def cmd_bench_batch(args) -> int:
    sizes = _parse_sizes(args.batch_sizes)
    partial = False
    try:
        rows = bench_batch(args.address, args.context_len, sizes, args.repetitions)
    except RemoteError as e:
        print(f"benchmark aborted: {e}", file=sys.stderr)
        rows, partial = [], True
    csv_text = _format_bench_csv(rows, partial)
    if args.output:
        FsPath(args.output).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return NETWORK_ERROR if partial else 0


def cmd_make_fixtures(args) -> int:
    fixtures.make_fixtures(args.seed, args.out, count=args.count,
                           stamp_order=args.order)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latticelm")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rescore", help="rescore a manifest of lattices")
    p.add_argument("--manifest", required=True)
    p.add_argument("--symbols", required=True)
    p.add_argument("--order", type=int, default=3)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--arpa", help="local ARPA model path")
    group.add_argument("--remote", help="server address host:port")
    p.add_argument("--mode", choices=["sequential", "batch"], default="batch")
    p.add_argument("--lm-scale", type=float, default=1.0)
    p.add_argument("--mems", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--max-batch", type=int, default=protocol.DEFAULT_MAX_BATCH)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("wer", help="corpus WER of hyp vs ref transcripts")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("oracle", help="oracle WER over a manifest with references")
    p.add_argument("--manifest", required=True)
    p.add_argument("--symbols", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("serve", help="run the ARPA scoring server")
    p.add_argument("--model", required=True)
    p.add_argument("--address", default="127.0.0.1:9090")
    p.add_argument("--capacity", type=int, default=server.DEFAULT_CAPACITY)
    p.add_argument("--mem-len", type=int, default=server.DEFAULT_MEM_LEN)
    p.add_argument("--max-batch", type=int, default=protocol.DEFAULT_MAX_BATCH)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench-batch", help="batched scoring latency benchmark")
    p.add_argument("--address", required=True)
    p.add_argument("--context-len", type=int, default=8)
    p.add_argument("--batch-sizes", default="1,16:256:16")
    p.add_argument("--repetitions", type=int, default=9)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench_batch)

    p = sub.add_parser("make-fixtures", help="write the fixture corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=12)
    p.add_argument("--order", type=int, default=2)
    p.set_defaults(func=cmd_make_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_ERROR
    try:
        return args.func(args)
    except (LatticeFormatError, LatticeInvalidError, arpa.ArpaFormatError,
            SymbolTableError, ManifestError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return DATA_ERROR
    except (RemoteError, RescoreError, OSError) as e:
        print(f"network error: {e}", file=sys.stderr)
        return NETWORK_ERROR


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
