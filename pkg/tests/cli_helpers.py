"""Run the command-line tool and compare its outputs with timing columns masked."""

import csv
from pathlib import Path

from truncgraph.cli import main

# columns holding wall-clock measurements, which legitimately differ between runs
TIMING_COLUMNS = {"micros_per_iter", "seconds"}


def masked_outputs(out):
    """Map each output file name to its contents, timing columns replaced by ``*``.

    Files without a timing column are returned as raw bytes, so comparing two
    results is a byte-level comparison everywhere except wall-clock fields.
    """
    result = {}
    for path in sorted(Path(out).iterdir()):
        if path.suffix != ".csv":
            result[path.name] = path.read_bytes()
            continue
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        masked = [i for i, name in enumerate(rows[0]) if name in TIMING_COLUMNS]
        if not masked:
            result[path.name] = path.read_bytes()
            continue
        for row in rows[1:]:
            for i in masked:
                row[i] = "*"
        result[path.name] = rows
    return result


def run_twice(tmp_path, argv):
    """Run ``argv`` into two fresh directories; return both exit codes and outputs."""
    codes, outputs = [], []
    for name in ("first", "second"):
        out = tmp_path / name
        codes.append(main(argv + ["--out", str(out)]))
        outputs.append(masked_outputs(out))
    return codes, outputs
