"""Validate emitted reports against the schemas shipped in schemas/."""

import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource

SCHEMA_FOR_PREFIX = {
    "smoke-": "smoke-report.schema.json",
    "matrix-": "matrix-report.schema.json",
    "scale-drill-": "scale-drill-report.schema.json",
    "transfer-": "transfer-report.schema.json",
    "endpoint-status": "endpoint-status.schema.json",
}


def load_registry(schema_dir):
    resources = []
    for path in schema_dir.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        resources.append((doc["$id"], Resource.from_contents(doc)))
        resources.append((path.name, Resource.from_contents(doc)))
    return Registry().with_resources(resources)


def validator(registry, schema_dir, name):
    schema = json.loads((schema_dir / name).read_text())
    return jsonschema.Draft202012Validator(schema, registry=registry)


def main():
    schema_dir, report_dir = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    registry = load_registry(schema_dir)
    failures = 0
    seen = set()
    for report in sorted(report_dir.glob("*.json")):
        schema = next((s for p, s in SCHEMA_FOR_PREFIX.items() if report.name.startswith(p)), None)
        if schema is None:
            continue
        seen.add(schema)
        doc = json.loads(report.read_text())
        v = validator(registry, schema_dir, schema)
        errors = list(v.iter_errors(doc))
        for e in errors:
            print(f"FAIL {report.name}: {e.json_path}: {e.message}")
        failures += bool(errors)
        if not errors:
            print(f"ok   {report.name} against {schema}")
        # The schema must also reject a report with its version stripped.
        broken = dict(doc)
        broken.pop("schema_version")
        if v.is_valid(broken):
            print(f"FAIL {schema} accepts a report without schema_version")
            failures += 1
    missing = set(SCHEMA_FOR_PREFIX.values()) - seen
    for name in sorted(missing):
        print(f"FAIL no report exercised {name}")
    return 1 if failures or missing else 0


if __name__ == "__main__":
    sys.exit(main())
