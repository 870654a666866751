import json
from importlib import resources

import pytest

jsonschema = pytest.importorskip("jsonschema")
referencing = pytest.importorskip("referencing")

from hyperfrac import cli  # noqa: E402

NAMES = ("estimate_report", "inequality_report", "lq_classification", "report_bundle", "cache_entry")


@pytest.fixture(scope="module")
def schemas():
    root = resources.files("hyperfrac") / "schemas"
    return {name: json.loads((root / f"{name}.schema.json").read_text()) for name in NAMES}


@pytest.fixture(scope="module")
def registry(schemas):
    resources_ = [(s["$id"], referencing.Resource.from_contents(s)) for s in schemas.values()]
    return referencing.Registry().with_resources(resources_)


def validator(schemas, registry, name):
    cls = jsonschema.validators.validator_for(schemas[name])
    cls.check_schema(schemas[name])
    return cls(schemas[name], registry=registry)


@pytest.mark.parametrize("name", NAMES)
def test_schemas_are_valid(schemas, name):
    jsonschema.validators.validator_for(schemas[name]).check_schema(schemas[name])


def test_validate_bundle_conforms(capsys, tmp_path, monkeypatch, schemas, registry):
    monkeypatch.setenv(cli.CACHE_ENV, str(tmp_path))
    cli.main(["validate", "--checks", "estimates,heat,lq", "--family", "poisson", "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    validator(schemas, registry, "report_bundle").validate(data)


def test_inequality_bundle_conforms(capsys, tmp_path, monkeypatch, schemas, registry):
    monkeypatch.setenv(cli.CACHE_ENV, str(tmp_path))
    cli.main(["inequality", "--only", "isometry,pointwise", "--sigma", "0.25", "--format", "json"])
    data = json.loads(capsys.readouterr().out)
    validator(schemas, registry, "report_bundle").validate(data)


def test_cache_entry_conforms(capsys, tmp_path, monkeypatch, schemas, registry):
    monkeypatch.setenv(cli.CACHE_ENV, str(tmp_path))
    cli.main(["kernel", "--r", "0:0.1:0.05"])
    entry = json.loads(next(tmp_path.glob("*.json")).read_text())
    validator(schemas, registry, "cache_entry").validate(entry)


def test_bundle_rejects_missing_fields(schemas, registry):
    with pytest.raises(jsonschema.ValidationError):
        validator(schemas, registry, "report_bundle").validate({"schema_version": 1, "reports": []})
