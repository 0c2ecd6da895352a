"""Validates the bundled configs against docs/config.schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "docs" / "config.schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
for path in sorted((root / "configs").glob("*.json")):
    jsonschema.validate(json.loads(path.read_text()), schema)
    print(f"{path.name}: valid")
