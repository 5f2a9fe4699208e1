"""
Config
======
Run-level configuration shared by the CLI commands: thread count
resolution, TOML run files and the JSON manifest written next to every
output file.

A manifest records the command and its fully resolved parameters, so
`condtau replay <out>.manifest.json` re-runs it with identical output.
"""

import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidParameter

_LOG = logging.getLogger(__name__)

# ── Configuration ─────────────────────────────────────────────────────────
THREADS_ENV = "CONDTAU_THREADS"
MANIFEST_SUFFIX = ".manifest.json"


def resolve_threads(requested=None):
    """--threads, else $CONDTAU_THREADS, else the machine's CPU count."""
    if requested is not None:
        threads = requested
    elif os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise InvalidParameter(f"{THREADS_ENV} must be an integer, got {os.environ[THREADS_ENV]!r}") from None
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise InvalidParameter(f"thread count must be at least 1, got {threads}")
    return threads


def load_toml(path):
    with open(path, "rb") as f:
        try:
            return tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidParameter(f"{path}: invalid TOML ({exc})") from None


def merge_settings(file_values, cli_values, defaults):
    """
    File values override defaults and explicit CLI flags override both.

    cli_values holds None for every flag the user did not pass.
    """
    merged = dict(defaults)
    unknown = sorted(set(file_values) - set(defaults))
    if unknown:
        raise InvalidParameter(f"unknown run-file key(s): {', '.join(unknown)}")
    merged.update(file_values)
    merged.update({key: value for key, value in cli_values.items() if value is not None})
    return merged


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    parameters: dict
    version: str
    seed: int = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    @classmethod
    def for_run(cls, command, parameters, seed=None):
        from . import __version__

        return cls(command=command, parameters=parameters, version=__version__, seed=seed)


def manifest_path(output_path):
    return f"{output_path}{MANIFEST_SUFFIX}"


def write_manifest(manifest, output_path):
    path = manifest_path(output_path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(asdict(manifest), f, indent=2, ensure_ascii=False)
        f.write("\n")
    _LOG.debug("manifest written to %s", path)
    return path


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"{path}: not a valid manifest ({exc})") from None
    missing = {"command", "parameters", "version"} - set(data)
    if missing:
        raise InvalidParameter(f"{path}: manifest lacks {', '.join(sorted(missing))}")
    return RunManifest(**data)
