"""Run manifests and output-directory locking."""

from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager

from . import __version__
from .errors import ContractError


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()


@contextmanager
def output_lock(outdir):
    """One run per output directory; a stale lock must be removed manually."""
    os.makedirs(outdir, exist_ok=True)
    lock_path = os.path.join(outdir, ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ContractError(f"output directory {outdir} is locked by another run "
                            f"(remove {lock_path} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            os.remove(lock_path)
        except FileNotFoundError:
            pass


class RunManifest:
    """Collects inputs/outputs during a run; written atomically at the end."""

    def __init__(self, outdir, config: dict, seed: int):
        self.outdir = outdir
        self.config_sha256 = config_digest(config)
        self.seed = seed
        self.inputs: list[dict] = []
        self.outputs: list[dict] = []
        self._start = time.monotonic()
        self._start_epoch = time.time()

    def add_input(self, path):
        self.inputs.append({"path": str(path), "sha256": file_digest(path)})

    def add_output(self, path):
        self.outputs.append({"path": os.path.relpath(path, self.outdir),
                             "sha256": file_digest(path)})

    def write(self):
        doc = {
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "package_version": __version__,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs, key=lambda o: o["path"]),
            "wall_clock_s": time.monotonic() - self._start,
            "started_epoch": self._start_epoch,
        }
        path = os.path.join(self.outdir, "manifest.json")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(tmp, path)
        return path
