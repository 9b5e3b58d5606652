"""Rebuild the archived run used by the re-scoring golden test.

Run from the repository root: ``python3 tests/data/archive/build_archive.py``.
The dataset is synthetic (25 items over four cell sizes); the audit log holds
canned model responses. The frozen report is what ``eval --audit`` printed
when the archive was made, so rerunning this script should change nothing.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parents[1]))

from helpers import synthetic_item  # noqa: E402

from gridgeoref.cli import cmd_eval  # noqa: E402
from gridgeoref.georeferencer import PromptTemplate, build_prompt  # noqa: E402
from gridgeoref.mapgen.grid import CellIndex, label_for_index  # noqa: E402
from gridgeoref.records import dump_dataset  # noqa: E402

SCALES = [0.45, 0.7, 1.25, 1.88]

# (truth cell, predicted offset or None for an unparseable answer, scale index)
PLAN = [
    # eight exact hits
    ((3, 4), (0, 0), 0), ((5, 5), (0, 0), 1), ((2, 7), (0, 0), 2), ((6, 2), (0, 0), 3),
    ((4, 4), (0, 0), 0), ((7, 3), (0, 0), 1), ((5, 8), (0, 0), 2), ((8, 6), (0, 0), 3),
    # seven neighbours closer than 1 km
    ((3, 3), (1, 0), 0), ((4, 6), (0, 1), 0), ((6, 6), (1, 1), 0), ((2, 2), (-1, 0), 1),
    ((5, 3), (0, -1), 1), ((7, 7), (-1, 1), 0), ((3, 8), (1, -1), 0),
    # ten further away
    ((4, 5), (1, 0), 2), ((6, 4), (0, 1), 3), ((3, 6), (2, 1), 1), ((5, 2), (-2, 0), 2),
    ((7, 5), (1, 1), 3), ((2, 5), (3, 2), 0), ((8, 8), (-2, -2), 2), ((6, 7), (0, 3), 1),
    ((4, 2), None, 3), ((5, 6), (-3, 1), 3),
]


def main() -> None:
    maps = HERE / "maps"
    shutil.rmtree(maps, ignore_errors=True)
    maps.mkdir()
    items, entries = [], []
    for i, (truth, offset, s) in enumerate(PLAN):
        item_id = f"item{i + 1:02d}"
        cell = CellIndex(*truth)
        item = synthetic_item(item_id, cell, SCALES[s], maps, lat=-41.0 - 0.3 * i, lon=172.0 + 0.2 * i)
        items.append(item)
        if offset is None:
            response = "The description is too vague to place on this map."
            cells = []
        else:
            pred = label_for_index(item.map_meta.grid, CellIndex(truth[0] + offset[0], truth[1] + offset[1]))
            response = f"The reserve lies south of the river mouth, so the location is in {pred}."
            cells = [pred]
        prompt = build_prompt(PromptTemplate.LOGICAL_COT_GRID, item.record.text, cell_km=item.scale_km)
        image_sha = hashlib.sha256(item.map_path.read_bytes()).hexdigest()
        fp = hashlib.sha256(f"{prompt}|{image_sha}".encode()).hexdigest()
        entries.append(
            {
                "item_id": item_id,
                "template": PromptTemplate.LOGICAL_COT_GRID.value,
                "model_id": "archived-model",
                "fingerprint": fp,
                "prompt": prompt,
                "image_sha256": image_sha,
                "response": response,
                "cells": cells,
                "timestamp": "2025-01-01T00:00:00+00:00",
            }
        )
    dump_dataset(items, HERE / "dataset.json")
    with (HERE / "audit.jsonl").open("w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n")
    cmd_eval(HERE, HERE / "dataset.json", audit=HERE / "audit.jsonl", out_dir=HERE / "expected")
    (HERE / "expected" / "scores.json").unlink()


if __name__ == "__main__":
    main()
