"""Run every JSON-emitting subcommand and validate its output against docs/schemas."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

binary, schema_dir = sys.argv[1], Path(sys.argv[2])

runs = {
    "verify": ["verify"],
    "eos": ["eos", "--x", "0", "--y", "0", "--t", "2", "--format", "json"],
    "sweep": ["sweep", "--y", "-0.068", "--t", "1.3", "--x-samples", "11", "--format", "json"],
    "cusp": ["cusp", "--resolution", "9", "--format", "json"],
    "finite_n": ["finite-n", "--x", "0.3", "--y", "0.1", "--t", "0.5", "--N", "10", "100", "--format", "json"],
    "mc": ["mc", "--x", "0.1", "--y", "-0.2", "--t", "0.5", "--sweeps", "400", "--burn-in", "50", "--format", "json"],
}

failures = 0
for name, args in runs.items():
    schema = json.loads((schema_dir / f"{name}.schema.json").read_text())
    out = subprocess.run([binary, *args, "--threads", "1"], capture_output=True, text=True, check=True).stdout
    try:
        jsonschema.validate(json.loads(out), schema)
        print(f"PASS {name}")
    except jsonschema.ValidationError as e:
        failures += 1
        print(f"FAIL {name}: {e.message}")

with tempfile.TemporaryDirectory() as d:
    csv = Path(d) / "loci.csv"
    subprocess.run([binary, "cusp", "--resolution", "5", "--out", str(csv)], check=True)
    events = json.loads((Path(d) / "loci.events.json").read_text())
    try:
        jsonschema.validate(events, json.loads((schema_dir / "events.schema.json").read_text()))
        print("PASS events")
    except jsonschema.ValidationError as e:
        failures += 1
        print(f"FAIL events: {e.message}")

sys.exit(1 if failures else 0)
