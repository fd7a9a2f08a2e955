"""Run manifests: what was run, with which configuration, producing which bytes.

A manifest carries no timestamps or host details, so an identical rerun
writes an identical manifest.
"""

import hashlib
import json
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence

from patientcode import __version__

TRACKED_PACKAGES = ("numpy", "numba", "scikit-learn", "pandas")


def package_versions() -> Dict[str, str]:
    versions = {"patientcode": __version__, "python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not-installed"
    return versions


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def build_manifest(command: str, arguments: Mapping[str, Any], config: Mapping[str, Any], seed: int,
                   artifacts: Sequence[Path], root: Path) -> Dict[str, Any]:
    return {
        "command": command,
        "arguments": {key: (str(value) if isinstance(value, Path) else value) for key, value in sorted(arguments.items())},
        "seed": seed,
        "config": config,
        "versions": package_versions(),
        "artifacts": {
            Path(path).relative_to(root).as_posix() if Path(path).is_relative_to(root) else str(path): sha256_file(path)
            for path in sorted(artifacts)
        },
    }


def render_manifest(manifest: Mapping[str, Any]) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n"


def manifest_name(command: str) -> str:
    return f"manifest-{command}.json"
