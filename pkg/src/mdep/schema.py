"""Access to the published report schema."""

from __future__ import annotations

import json
from importlib import resources


def report_schema() -> dict:
    return json.loads(resources.files("mdep").joinpath("schemas/report.schema.json").read_text())


def validate_report(report: dict) -> None:
    """Raise jsonschema.ValidationError if ``report`` does not match the schema."""
    import jsonschema

    jsonschema.validate(report, report_schema())
