"""Drive the bvd command line on the shipped spec files.

Each spec is one batch run; outputs are byte-reproducible. Artifacts land
in demos/output/.
"""

import json
from pathlib import Path

from bvd.cli import main

HERE = Path(__file__).resolve().parent
OUT = HERE / "output"

for spec in sorted((HERE / "specs").glob("*.json")):
    command = json.loads(spec.read_text())["command"]
    print(f"\n$ bvd {command} --spec {spec.name} --out {OUT.name}/")
    rc = main([command, "--spec", str(spec), "--out", str(OUT)])
    print(f"exit status {rc}")

print("\nArtifacts:")
for path in sorted(OUT.iterdir()):
    print(" ", path.name, f"({path.stat().st_size} bytes)")
