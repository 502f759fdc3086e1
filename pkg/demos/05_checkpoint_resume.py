"""Pause and resume an indefinite testing stream
===============================================

Real streams outlive processes: a data repository grows for years, a
platform trial adds arms on its own schedule.  The engine state therefore
serializes to a checksummed snapshot after every step, and resuming from
that snapshot continues the stream as if nothing had happened.  This
script proves it byte-for-byte, then shows the integrity check refusing a
tampered snapshot.
"""

import io
import json
import tempfile
from pathlib import Path

import numpy as np

from alphastream import PValueRecord, load_snapshot, make_procedure, run_stream
from alphastream.streamio import SnapshotError, next_level_preview

rng = np.random.default_rng(1234)
pvals = np.where(rng.random(40) < 0.3, rng.random(40) * 0.01, rng.random(40))
records = [PValueRecord(index=t, p=float(p)) for t, p in enumerate(pvals, 1)]

workdir = Path(tempfile.mkdtemp(prefix="alphastream-demo-"))
state = workdir / "state.json"

# one uninterrupted run, for reference
reference = io.StringIO()
run_stream(records, make_procedure("saffron", alpha=0.05), out=reference)

# the same stream split at step 17, with a process boundary in between
part1 = io.StringIO()
run_stream(records[:17], make_procedure("saffron", alpha=0.05),
           snapshot_path=state, out=part1)
print(f"processed 17 records, snapshot written to {state}")
print(f"level the resumed engine will assign next: {next_level_preview(state):.6f}")

part2 = io.StringIO()
run_stream(records[17:], load_snapshot(state), snapshot_path=state, out=part2)

identical = part1.getvalue() + part2.getvalue() == reference.getvalue()
print(f"resumed log equals the uninterrupted log byte-for-byte: {identical}")
assert identical

# integrity: flip one counter inside the file and try to load it
doc = json.loads(state.read_text())
doc["state"]["t"] = 999
state.write_text(json.dumps(doc))
try:
    load_snapshot(state)
except SnapshotError as exc:
    print(f"tampered snapshot refused: {exc}")
