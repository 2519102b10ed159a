#!/usr/bin/env python3
"""Check scenario files against docs/scenario.schema.json.

usage: check_schema.py SCHEMA VALID_DIR [INVALID_FILE ...]
Files in VALID_DIR must validate; each INVALID_FILE must not.
"""
import json
import sys
from pathlib import Path

import jsonschema

schema = json.loads(Path(sys.argv[1]).read_text())
validator = jsonschema.Draft202012Validator(schema)
bad = 0
for path in sorted(Path(sys.argv[2]).glob("*.json")):
    for err in validator.iter_errors(json.loads(path.read_text())):
        print(f"{path.name}: {err.message}")
        bad += 1
for name in sys.argv[3:]:
    if validator.is_valid(json.loads(Path(name).read_text())):
        print(f"{name}: accepted but should be rejected")
        bad += 1
sys.exit(1 if bad else 0)
