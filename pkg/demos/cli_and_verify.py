"""Driving the package from the command line.

The same runs are available as ``afem-newton`` (or ``python3 -m afem_newton``).
This script calls the entry point in-process, reads back the output files and
then runs the property suite that ``afem-newton verify`` prints as JSON.
"""
import csv
import json
import tempfile
from pathlib import Path

from afem_newton.cli import main
from afem_newton.verify import run_verify

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "run"
    main(["--problem", "case1", "--p", "1", "--max-triangles", "2000", "--out", str(out)])
    rows = list(csv.DictReader(open(out / "history.csv")))
    print(f"history.csv: {len(rows)} rows, columns {list(rows[0])}")
    print("summary.json:", json.dumps(json.loads((out / "summary.json").read_text()), indent=1))
    print("meshes:", sorted(f.name for f in (out / "meshes").iterdir())[:4], "...")

# takes a few seconds: it includes two benchmark runs and a uniform comparison
for rep in run_verify(seed=0):
    print(f"{'ok  ' if rep.passed else 'FAIL'} {rep.name}: observed {rep.observed}, bound {rep.bound}")
