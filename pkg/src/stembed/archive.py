"""Text archive of utterance- or speaker-keyed feature matrices.

Format (pinned, diffable):

    #!kind=sbe
    #!dim=80
    #!hash=0123abcd4567
    utt1 [
    1.23456789e-05 0.5 ...
    ]

Header lines are prefixed '#!'. Each entry is a key, an opening '[', one line
per row of space-separated floats at 9 significant digits, and a closing ']'.
Writing a read archive back reproduces the bytes exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np


class ArchiveError(Exception):
    pass


def config_hash(fields: dict) -> str:
    """12-hex-digit digest of the influencing configuration fields."""
    canon = "\n".join(f"{k}={fields[k]}" for k in sorted(fields))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _fmt(v):
    return format(float(v), ".9g")


def write_archive(path, entries: dict, kind: str, dim: int, cfg_hash: str):
    """Write an ordered key -> matrix/vector map; vectors become single rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#!kind={kind}\n#!dim={dim}\n#!hash={cfg_hash}\n")
        for key, mat in entries.items():
            mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
            if mat.shape[1] != dim:
                raise ArchiveError(f"{key}: row length {mat.shape[1]} != declared dim {dim}")
            fh.write(f"{key} [\n")
            for row in mat:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")
            fh.write("]\n")


def read_archive(path):
    """Returns (entries dict preserving order, header dict)."""
    header = {}
    entries = {}
    key = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#!"):
                k, _, v = line[2:].partition("=")
                header[k] = v
                continue
            if key is None:
                if not line.endswith(" ["):
                    raise ArchiveError(f"{path}:{lineno}: expected '<key> ['")
                key = line[:-2]
                if key in entries:
                    raise ArchiveError(f"{path}:{lineno}: duplicate key {key!r}")
                rows = []
            elif line == "]":
                entries[key] = np.array(rows, dtype=np.float64)
                key = None
            else:
                rows.append([float(tok) for tok in line.split()])
    if key is not None:
        raise ArchiveError(f"{path}: unterminated entry {key!r}")
    if "dim" in header:
        dim = int(header["dim"])
        for k, mat in entries.items():
            if mat.shape[1] != dim:
                raise ArchiveError(f"{path}: entry {k!r} has dim {mat.shape[1]} != {dim}")
    return entries, header
