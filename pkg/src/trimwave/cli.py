"""Command line entry point: ``trimwave run`` and ``trimwave validate``."""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import load_config, physics_diagnostics, validate
from .errors import ConfigurationError, TrimwaveError
from .experiments import SCHEMA_VERSION, dump_json, run_experiment

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_ERROR = 2


def write_atomic(path: Path, text: str) -> str:
    """Write ``text`` via a temporary file and rename; returns the sha256 of the bytes."""
    data = text.encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return hashlib.sha256(data).hexdigest()


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("TRIMWAVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"TRIMWAVE_THREADS must be an integer, got {env!r}") from None
    return 1


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run(config_path: str | Path, output: str | Path | None = None, threads: int | None = None) -> int:
    """Run one experiment and write its artifacts plus ``manifest.json``."""
    started = _now()
    try:
        cfg = load_config(config_path)
        problems = physics_diagnostics(cfg)
        if problems:
            raise ConfigurationError("\n".join(problems))
        n_threads = resolve_threads(threads)
        out_dir = Path(output or cfg.output or f"trimwave_{cfg.experiment}")
        result = run_experiment(cfg, n_threads)
    except (TrimwaveError, OSError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    artifacts = []
    try:
        for name in sorted(result.artifacts):
            digest = write_atomic(out_dir / name, result.artifacts[name])
            artifacts.append({"path": name, "sha256": digest})
        manifest = {
            "schema": SCHEMA_VERSION,
            "version": __version__,
            "experiment": cfg.experiment,
            "config_sha256": cfg.config_hash,
            "seed": cfg.seed,
            "threads": n_threads,
            "started": started,
            "finished": _now(),
            "artifacts": artifacts,
            "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail}
                           for a in result.assertions],
            "passed": result.passed,
        }
        write_atomic(out_dir / "manifest.json", dump_json(manifest))
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for a in result.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'} {a.name} {a.detail}".rstrip())
    print(f"wrote {len(artifacts) + 1} files to {out_dir}")
    return EXIT_OK if result.passed else EXIT_ASSERTION


def run_validate(config_path: str | Path) -> int:
    problems = validate(config_path)
    for msg in problems:
        print(msg, file=sys.stderr)
    if not problems:
        print("config is valid")
    return EXIT_ERROR if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trimwave", description="Trimmed random Schrodinger operator experiments")
    parser.add_argument("--version", action="version", version=f"trimwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--output", default=None)
    p_run.add_argument("--validate", action="store_true", help="only validate the config")
    p_val = sub.add_parser("validate", help="check a config without computing")
    p_val.add_argument("--config", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate" or args.validate:
        return run_validate(args.config)
    return run(args.config, args.output, args.threads)


if __name__ == "__main__":
    sys.exit(main())
