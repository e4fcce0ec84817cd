"""Checks every shipped config against the published schema."""
import json
import pathlib
import sys

try:
    import jsonschema
except ImportError:
    print("jsonschema not installed; skipping")
    sys.exit(0)

schema = json.loads(pathlib.Path(sys.argv[1]).read_text())
configs = sorted(pathlib.Path(sys.argv[2]).glob("*.json"))
for path in configs:
    jsonschema.validate(json.loads(path.read_text()), schema)
    print("ok", path.name)
bad = {"scenario": "tail-product", "sampler": {"seed": 1}, "surprise": 1}
try:
    jsonschema.validate(bad, schema)
except jsonschema.ValidationError:
    print("unknown top-level key rejected")
else:
    sys.exit("schema accepted an unknown key")
if not configs:
    sys.exit("no configs found")
