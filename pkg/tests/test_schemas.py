import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from tconvex.defect import graph_defect_profile
from tconvex.estimate import reconstruct
from tconvex.manifolds import Circle, NoiseSpec, Torus
from tconvex.select import select_scale

DOCS = Path(__file__).resolve().parents[1] / "docs" / "schemas"
NAMES = ["complex", "manifest", "model", "profile", "selection", "tlambda"]


def _packaged(name):
    return resources.files("tconvex").joinpath("schemas", f"{name}.schema.json").read_text()


@pytest.mark.parametrize("name", NAMES)
def test_docs_copy_matches_package(name):
    assert (DOCS / f"{name}.schema.json").read_text() == _packaged(name)
    jsonschema.Draft202012Validator.check_schema(json.loads(_packaged(name)))


def test_library_documents_validate():
    x = Circle().sample(100, NoiseSpec("tubular", 0.1), 1).points
    jsonschema.validate(json.loads(graph_defect_profile(x, K=8).to_json()),
                        json.loads(_packaged("profile")))
    jsonschema.validate(json.loads(select_scale(x).to_json()), json.loads(_packaged("selection")))
    jsonschema.validate(json.loads(reconstruct(x, 0.2, 1).to_json()),
                        json.loads(_packaged("complex")))
    jsonschema.validate(Torus().to_config(10, NoiseSpec("ambient", 0.1), 3),
                        json.loads(_packaged("model")))


def test_profile_schema_rejects_non_numeric_values():
    doc = {"kind": "graph", "horizon": 1.0, "breakpoints": [0.5, 1.0], "values": [0.5, "x"]}
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, json.loads(_packaged("profile")))
    doc["values"] = [0.5, np.float64(0.5).item()]
    jsonschema.validate(doc, json.loads(_packaged("profile")))
