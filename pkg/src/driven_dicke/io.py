"""Shared helpers for the '#'-prefixed metadata headers on CSV outputs."""
from __future__ import annotations

import json

from . import __version__


def write_metadata_header(fh, meta: dict) -> None:
    fh.write(f"# driven_dicke {__version__}\n")
    for key in sorted(meta):
        fh.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")


def read_metadata_header(path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if ": " in body:
                key, value = body.split(": ", 1)
                try:
                    meta[key] = json.loads(value)
                except json.JSONDecodeError:
                    meta[key] = value
    return meta
