import json

import pytest

from regtile import dfg, tiling

TOY_DOC = {
    "name": "toy",
    "registers": 3,
    "unroll": 6,
    "max_width": 6,
    "nodes": [
        {"id": "S0", "comp": 3},
        {"id": "S1", "comp": 2},
        {"id": "S2", "comp": 3},
        {"id": "S3", "comp": 2},
    ],
    "self_edges": [
        {"node": "S0", "reg": 2, "distance": 1, "variable": "X"},
        {"node": "S1", "reg": 1, "distance": 1, "variable": "b"},
        {"node": "S2", "reg": 2, "distance": 1, "variable": "Y"},
    ],
    "edges": [
        {"id": "a", "src": "S0", "dst": "S1", "reg": 1, "distance": 0, "variable": "a"},
        {"id": "c", "src": "S1", "dst": "S3", "reg": 1, "distance": 0, "variable": "c"},
        {"id": "e", "src": "S2", "dst": "S3", "reg": 1, "distance": 0, "variable": "e"},
        {"id": "d", "src": "S0", "dst": "S2", "reg": 0, "distance": 0, "variable": "d"},
    ],
}

# The published tiling: order S0,S2,S1,S3; tiles {S0}w6, {S2}w6, {S1,S3}w3;
# states of S0,S1,S2 spilled; flow edges a,e spilled.  The ordering-only
# edge d also crosses a tile border, so the feasibility-complete version
# spills it too (at zero cost).
PAPER_TILING = {
    "order": ["S0", "S2", "S1", "S3"],
    "tile_points": [0, 1, 3],
    "tile_widths": [6, 6, 3],
    "spill_edges": ["a", "e", "d"],
    "spill_states": ["S0", "S1", "S2"],
}


def toy_document(**overrides) -> dict:
    doc = json.loads(json.dumps(TOY_DOC))
    doc.update(overrides)
    return doc


@pytest.fixture
def toy_doc() -> dict:
    return toy_document()


@pytest.fixture
def toy_instance() -> dfg.ProblemInstance:
    return dfg.instance_from_document(toy_document())


@pytest.fixture
def toy_instance_limit6() -> dfg.ProblemInstance:
    return dfg.instance_from_document(toy_document(), registers=6)


@pytest.fixture
def paper_tiling() -> tiling.TilingSolution:
    return tiling.TilingSolution.from_json_dict(PAPER_TILING)


@pytest.fixture
def toy_files(tmp_path, toy_doc):
    instance_path = tmp_path / "toy.json"
    instance_path.write_text(json.dumps(toy_doc))
    solution_path = tmp_path / "paper_tiling.json"
    solution_path.write_text(json.dumps(PAPER_TILING))
    return instance_path, solution_path
