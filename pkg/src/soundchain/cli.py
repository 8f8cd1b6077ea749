"""Command-line entry point: ``soundchain <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 input/output error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from .config import load_config
from .errors import AudioIoError, ConfigError, DivergedError, ResumeError, SoundChainError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 1, 2, 3, 4


def _out(msg=""):
    print(msg, flush=True)


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_synth_corpus(args, cfg):
    from .corpus import build_corpus, write_corpus_dir
    from .corpus.store import MANIFEST_NAME

    changes = {k: getattr(args, k) for k in ("n_tv", "n_stv", "seed") if getattr(args, k) is not None}
    cfg = cfg.replace("corpus", **changes) if changes else cfg
    spec = cfg.corpus
    if spec.n_tv + spec.n_stv == 0:
        raise ConfigError("corpus must contain at least one clip (n_tv + n_stv > 0)")
    clips, _ = build_corpus(spec)
    write_corpus_dir(clips, args.out)
    n = len(clips)
    _out(f"wrote {n} clips to {args.out}")
    _out(f"#TV: {spec.n_tv}")
    _out(f"#sTV: {spec.n_stv}")
    _out(f"sTV: {100.0 * spec.n_stv / n:.1f}%")
    _out(f"manifest sha256: {_file_hash(Path(args.out) / MANIFEST_NAME)}")
    return EXIT_OK


def _require_wav_dir(path, what):
    path = Path(path)
    if not path.is_dir():
        raise AudioIoError(f"{what} {path} does not exist")
    if not any(path.glob("*.wav")):
        raise AudioIoError(f"{what} {path} holds no WAV files")
    return path


def cmd_run_lineage(args, cfg):
    from .corpus import load_corpus_dir
    from .lineage import run_lineage

    if args.generations is not None:
        if args.generations < 1:
            raise ConfigError("--generations must be >= 1")
        cfg = cfg.replace("lineage", n_generations=args.generations)
    if args.steps is not None:
        if args.steps < 0:
            raise ConfigError("--steps must be >= 0")
        cfg = cfg.replace("gan", total_steps=args.steps).replace("lineage", steps_per_generation=None)
    if args.seed is not None:
        cfg = cfg.replace("lineage", master_seed=args.seed)
    lcfg = cfg.lineage_config()
    corpus_dir = _require_wav_dir(args.corpus, "corpus directory")
    corpus = load_corpus_dir(corpus_dir, length=lcfg.gan.output_len)
    _out(f"corpus: {len(corpus)} clips from {corpus_dir}")
    t0 = time.perf_counter()

    def progress(gen_index, total, m):
        w = m.get("wasserstein_estimate")
        _out(f"gen{gen_index} step {m['step']}/{total} critic_loss {m['critic_loss']:.4f} "
             f"gen_loss {m['gen_loss']:.4f} W {w:.4f} ({time.perf_counter() - t0:.0f} s)")

    try:
        manifest = run_lineage(corpus, lcfg, args.out, corpus_dir=corpus_dir, run_config_hash=cfg.hash(),
                               resume=args.resume, progress=progress)
    except DivergedError as exc:
        print(f"error: training diverged at gen{exc.generation} (step {exc.step}): {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for entry in manifest["generations"]:
        _out(f"{entry['id']}: {entry['total_steps']} steps, {entry['epochs']} epochs, "
             f"{entry['n_training_items']} training items, {entry['n_generated']} generated")
    _out(f"lineage complete: {args.out}")
    return EXIT_OK


def cmd_analyze(args, cfg):
    from .pipeline import analyze_lineage

    cap = args.cap_tv if args.cap_tv is not None else cfg.stats.cap_tv
    threads = args.threads if args.threads is not None else cfg.stats.threads
    if cap is not None and cap < 0:
        raise ConfigError("--cap-tv must be >= 0")
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    meta = analyze_lineage(args.lineage, args.out, config=cfg.analyzer, cap_tv=cap, threads=threads,
                           corpus_dir=args.corpus, log=_out)
    _out(f"generations: {', '.join(meta['generations'])}")
    _out(f"analysis written to {args.out}")
    return EXIT_OK


def cmd_report(args, cfg):
    from .report import ReportOptions, build_report

    s = cfg.stats
    result = build_report(args.analysis, args.out, ReportOptions(s.kde_points, s.duration_bins, s.contrast_adjust))
    for note in result.notes:
        _out(f"note: {note}")
    _out(f"report written to {result.path}")
    return EXIT_OK


def cmd_verify(args, cfg):
    from .stats import verify_published

    t0 = time.perf_counter()
    checks = verify_published()
    elapsed = time.perf_counter() - t0
    failed = [c for c in checks if not c.passed]
    if args.json:
        _out(json.dumps([c.as_dict() for c in checks], indent=2))
    else:
        for c in checks:
            _out(c.line())
        _out(f"{len(checks) - len(failed)}/{len(checks)} PASS in {elapsed:.2f} s")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults for every field)")
    p = argparse.ArgumentParser(prog="soundchain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-corpus", parents=[common], help="synthesize a #TV/#sTV corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--n-tv", type=int)
    s.add_argument("--n-stv", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth_corpus)

    s = sub.add_parser("run-lineage", parents=[common], help="train a chain of GAN generations")
    s.add_argument("--corpus", required=True)
    s.add_argument("--generations", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--steps", type=int, help="training steps per generation")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--resume", action="store_true", help="continue an interrupted lineage in --out")
    s.set_defaults(func=cmd_run_lineage)

    s = sub.add_parser("analyze", parents=[common], help="annotate Gen0..GenK")
    s.add_argument("--lineage", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--cap-tv", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--corpus", help="source corpus, if it moved since the lineage was run")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("report", parents=[common], help="write report.md, SVG plots and tables")
    s.add_argument("--analysis", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("verify-paper-tables", parents=[common],
                       help="check the regression code against the published coefficient tables")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except DivergedError as exc:
        print(f"error: training diverged at gen{exc.generation}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ResumeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, SoundChainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
