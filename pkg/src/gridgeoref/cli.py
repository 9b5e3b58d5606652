"""Command-line pipeline: parse -> resolve -> mapgen -> georef -> eval.

Every stage reads the previous stage's artifact from the work directory and
writes its own, so any stage can be re-run on its own. ``manifest.json``
records which items each stage completed, failed or skipped.

Exit codes: 0 success, 1 configuration error, 2 some items failed,
3 every item failed (or there was nothing to do).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .config import ConfigError, PipelineConfig, load_config
from .eval import aggregate_report, report_to_csv, report_to_json, scores_to_json
from .gazetteer import GazetteerError, GazetteerFeature, resolve_places
from .georeferencer import (
    BASELINES,
    AuditLog,
    CoordinatePrediction,
    Prediction,
    PromptTemplate,
    ProviderError,
    georeference,
    predictions_from_audit,
    text_only_georeference,
)
from .mapgen import (
    GridError,
    MapExcerpt,
    MapGenError,
    generate_map,
    label_for_index,
    point_to_cell,
)
from .parser import ParseResult, parse
from .parser.containment import check_acyclic, detect_containment
from .records import (
    CollectionRecord,
    DatasetFormatError,
    DatasetItem,
    convert_figshare,
    dump_dataset,
    filter_records,
    load_dataset,
    load_records,
)

log = logging.getLogger("gridgeoref")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3

PARSE_FILE = "parse.json"
RESOLVE_FILE = "resolve.json"
MAPS_DIR = "maps"
DATASET_FILE = "dataset.json"
PREDICTIONS_FILE = "predictions.json"
AUDIT_FILE = "audit.jsonl"
MANIFEST_FILE = "manifest.json"


class StageError(RuntimeError):
    """A stage cannot run at all (missing or malformed input artifact)."""


@dataclass
class StageResult:
    stage: str
    completed: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if not self.completed:
            return EXIT_FAILED
        return EXIT_PARTIAL if self.failed else EXIT_OK

    def to_dict(self) -> dict:
        return {"completed": self.completed, "failed": self.failed, "skipped": self.skipped}


# -- artifact helpers ----------------------------------------------------------


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    tmp.replace(path)


def _read_artifact(path: Path, stage: str) -> dict:
    if not path.exists():
        raise StageError(f"{path} not found; run the {stage} stage first")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise StageError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def _record_manifest(workdir: Path, result: StageResult) -> None:
    path = workdir / MANIFEST_FILE
    doc = {"schema_version": SCHEMA_VERSION, "stages": {}}
    if path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
    doc["stages"][result.stage] = result.to_dict()
    _write_json(path, doc)


def safe_name(item_id: str) -> str:
    return re.sub(r"[^\w.-]", "_", item_id)


def _run_items(fn: Callable, items: list, workers: int, key: Callable, result: StageResult) -> list:
    """Apply ``fn`` to every item concurrently, collecting per-item failures."""

    def guarded(item):
        try:
            return fn(item), None
        except Exception as exc:  # noqa: BLE001 - one bad item must not stop the batch
            if not isinstance(exc, (ValueError, RuntimeError, OSError, KeyError)):
                log.exception("unexpected error on %s", key(item))
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(guarded, items))
    out = []
    for item, (value, err) in zip(items, outcomes):
        if err is None:
            result.completed.append(key(item))
            out.append(value)
        else:
            log.warning("%s failed for %s: %s", result.stage, key(item), err)
            result.failed[key(item)] = err
    return out


# -- stages --------------------------------------------------------------------


def cmd_parse(cfg: PipelineConfig, records: list[CollectionRecord], workdir: Path) -> StageResult:
    result = StageResult("parse")
    kept = filter_records(records, cfg.min_length)
    kept_ids = {r.id for r in kept}
    for r in records:
        if r.id not in kept_ids:
            result.skipped[r.id] = f"description shorter than {cfg.min_length} characters"

    def one(rec: CollectionRecord) -> dict:
        annotation = None
        if cfg.annotations_dir is not None:
            path = cfg.annotations_dir / f"{safe_name(rec.id)}.json"
            if path.exists():
                annotation = json.loads(path.read_text(encoding="utf-8"))
        res = parse(rec.text, annotation)
        return {"record": rec.to_dict(), "parse": res.to_dict(), "annotated": annotation is not None}

    items = _run_items(one, kept, cfg.workers, lambda r: r.id, result)
    _write_json(workdir / PARSE_FILE, {"schema_version": SCHEMA_VERSION, "items": items})
    _record_manifest(workdir, result)
    return result


def _parse_items(workdir: Path) -> list[tuple[CollectionRecord, ParseResult]]:
    doc = _read_artifact(workdir / PARSE_FILE, "parse")
    return [
        (CollectionRecord.from_dict(d["record"]), ParseResult.from_dict(d["parse"]))
        for d in doc["items"]
    ]


def cmd_resolve(cfg: PipelineConfig, workdir: Path) -> StageResult:
    result = StageResult("resolve")
    parsed = _parse_items(workdir)
    sources = cfg.build_sources()
    cache = cfg.feature_cache()

    def one(pair) -> dict:
        rec, res = pair
        names = res.place_names()
        features, unresolved = ({}, []) if not names else resolve_places(
            names, rec.country, rec.region, sources, cache=cache, refresh=cfg.refresh_cache
        )
        pairs = detect_containment(res.mentions, features, rec.text) if features else []
        check_acyclic(pairs)
        return {
            "id": rec.id,
            "features": {n: f.to_geojson() for n, f in features.items()},
            "unresolved": unresolved,
            "containment": [[p.name, c.name] for p, c in pairs],
        }

    items = _run_items(one, parsed, cfg.workers, lambda p: p[0].id, result)
    _write_json(workdir / RESOLVE_FILE, {"schema_version": SCHEMA_VERSION, "items": items})
    _record_manifest(workdir, result)
    return result


def _resolved(workdir: Path) -> dict[str, dict]:
    doc = _read_artifact(workdir / RESOLVE_FILE, "resolve")
    return {d["id"]: d for d in doc["items"]}


def dataset_item(rec: CollectionRecord, excerpt: MapExcerpt, png: Path) -> DatasetItem | None:
    """Label the excerpt with the record's ground truth, when it has one inside the map."""
    if rec.ground_truth is None:
        return None
    try:
        cell = point_to_cell(excerpt.georef, rec.ground_truth)
    except GridError:
        log.warning("%s: ground truth lies outside its map excerpt", rec.id)
        return None
    grid = excerpt.georef.grid
    return DatasetItem(rec, png, excerpt.georef, label_for_index(grid, cell), grid.cell_km)


def cmd_mapgen(cfg: PipelineConfig, workdir: Path) -> StageResult:
    result = StageResult("mapgen")
    parsed = _parse_items(workdir)
    resolved = _resolved(workdir)
    style = cfg.load_style()
    basemap = cfg.build_basemap()
    maps_dir = workdir / MAPS_DIR
    todo = [(rec, res) for rec, res in parsed if rec.id in resolved]
    for rec, _ in parsed:
        if rec.id not in resolved:
            result.skipped[rec.id] = "not resolved"

    def one(pair) -> DatasetItem | None:
        rec, res = pair
        entry = resolved[rec.id]
        features = {n: GazetteerFeature.from_geojson(g) for n, g in entry["features"].items()}
        excerpt = generate_map(
            features,
            res.triples,
            [tuple(p) for p in entry["containment"]],
            entry["unresolved"],
            buffer_factor=cfg.buffer_factor,
            image_width_px=cfg.image_width_px,
            aspect_ratio=cfg.aspect_ratio,
            max_cells_per_axis=cfg.max_cells_per_axis,
            clip_lines=cfg.clip_lines,
            style=style,
            basemap=basemap,
        )
        png = maps_dir / f"{safe_name(rec.id)}.png"
        excerpt.save(png)
        return dataset_item(rec, excerpt, png)

    items = [it for it in _run_items(one, todo, cfg.workers, lambda p: p[0].id, result) if it]
    dump_dataset(items, workdir / DATASET_FILE)
    _record_manifest(workdir, result)
    return result


def cmd_georef(
    cfg: PipelineConfig,
    workdir: Path,
    template: PromptTemplate | None = None,
    provider_name: str | None = None,
) -> StageResult:
    result = StageResult("georef")
    template = PromptTemplate(template or cfg.template)
    provider = cfg.build_provider(provider_name)
    cache = None if cfg.refresh_cache else cfg.response_cache()
    audit_path = workdir / AUDIT_FILE
    audit_path.unlink(missing_ok=True)
    audit = AuditLog(audit_path)
    parsed = _parse_items(workdir)
    maps_dir = workdir / MAPS_DIR

    if template in BASELINES:
        todo = [rec for rec, _ in parsed]

        def one(rec):
            return text_only_georeference(
                rec.text, provider, template, rec.region, rec.country,
                item_id=rec.id, cache=cache, audit=audit,
            )
    else:
        todo = []
        for rec, _ in parsed:
            if (maps_dir / f"{safe_name(rec.id)}.png").exists():
                todo.append(rec)
            else:
                result.skipped[rec.id] = "no map excerpt"

        def one(rec):
            excerpt = MapExcerpt.load(maps_dir / f"{safe_name(rec.id)}.png")
            return georeference(rec.text, excerpt, provider, template, item_id=rec.id, cache=cache, audit=audit)

    preds = _run_items(one, todo, cfg.workers, lambda r: r.id, result)
    _write_json(
        workdir / PREDICTIONS_FILE,
        {
            "schema_version": SCHEMA_VERSION,
            "template": template.value,
            "model_id": provider.model_id,
            "items": [p.to_dict() for p in preds],
        },
    )
    _record_manifest(workdir, result)
    return result


def load_predictions(path: Path) -> tuple[dict, str]:
    doc = _read_artifact(path, "georef")
    template = PromptTemplate(doc["template"])
    cls = CoordinatePrediction if template in BASELINES else Prediction
    preds = {d["item_id"]: cls.from_dict(d) for d in doc["items"]}
    return preds, f"{doc.get('model_id', 'model')}:{template.value}"


def score(dataset_path: Path, predictions: dict, method: str, out_dir: Path, impute: str = "exclude") -> StageResult:
    """Write report.json, report.csv and scores.json for ``predictions``."""
    result = StageResult("eval")
    try:
        data = load_dataset(dataset_path)
    except DatasetFormatError as exc:
        raise StageError(str(exc)) from exc
    for item_id, problems in data.failures.items():
        result.skipped[item_id] = "invalid dataset item: " + "; ".join(problems)
    items = data.valid_items()
    if not items:
        raise StageError("no valid dataset items to score")
    coordinate = any(isinstance(p, CoordinatePrediction) for p in predictions.values())
    ids = {it.record.id for it in items}
    for extra in sorted(set(predictions) - ids):
        result.skipped[extra] = "prediction without a dataset item"
    preds = {}
    for it in items:
        p = predictions.get(it.record.id)
        if p is None:
            # a failed request counts as an unparseable prediction
            p = CoordinatePrediction(None, item_id=it.record.id) if coordinate else Prediction([], item_id=it.record.id, flagged=True)
            result.failed[it.record.id] = "no prediction"
        else:
            result.completed.append(it.record.id)
        preds[it.record.id] = p
    reports = aggregate_report(items, preds, method, impute=impute)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_to_json(reports), encoding="utf-8")
    (out_dir / "report.csv").write_text(report_to_csv(reports), encoding="utf-8")
    (out_dir / "scores.json").write_text(
        json.dumps(scores_to_json(reports), indent=2) + "\n", encoding="utf-8"
    )
    return result


def cmd_eval(
    workdir: Path,
    dataset: Path | None = None,
    predictions: Path | None = None,
    audit: Path | None = None,
    method: str | None = None,
    out_dir: Path | None = None,
    impute: str = "exclude",
    reparse: bool = False,
) -> StageResult:
    dataset = dataset or workdir / DATASET_FILE
    out_dir = out_dir or workdir
    if audit is not None:
        entries = AuditLog(audit).entries()
        if not entries:
            raise StageError(f"{audit}: empty audit log")
        grids = None
        if reparse:
            grids = {it.record.id: it.map_meta.grid for it in load_dataset(dataset, check_images=False).items}
        preds = predictions_from_audit(entries, grids)
        default_method = f"{entries[0].get('model_id', 'model')}:{entries[0]['template']}"
    else:
        preds, default_method = load_predictions(predictions or workdir / PREDICTIONS_FILE)
    result = score(dataset, preds, method or default_method, out_dir, impute)
    if out_dir == workdir:
        _record_manifest(workdir, result)
    return result


def cmd_run(
    cfg: PipelineConfig,
    records: list[CollectionRecord],
    workdir: Path,
    template: PromptTemplate | None = None,
    provider_name: str | None = None,
) -> int:
    """Every stage in order; stops once a stage completes nothing."""
    workdir.mkdir(parents=True, exist_ok=True)
    stages = [
        lambda: cmd_parse(cfg, records, workdir),
        lambda: cmd_resolve(cfg, workdir),
        lambda: cmd_mapgen(cfg, workdir),
        lambda: cmd_georef(cfg, workdir, template, provider_name),
    ]
    code = EXIT_OK
    for stage in stages:
        res = stage()
        log.info("%s: %d completed, %d failed", res.stage, len(res.completed), len(res.failed))
        if res.exit_code == EXIT_FAILED:
            return EXIT_FAILED
        code = max(code, res.exit_code)
    if _read_artifact(workdir / DATASET_FILE, "mapgen")["items"]:
        code = max(code, cmd_eval(workdir).exit_code)
    else:
        log.info("no labelled items; skipping evaluation")
    return code


# -- argument parsing ----------------------------------------------------------


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", type=Path, required=config_required, help="pipeline config (JSON)")
    p.add_argument("--workdir", type=Path, default=Path("work"), help="directory for stage artifacts")
    p.add_argument("--offline", action="store_true", default=None, help="no network: local sources, blank basemap")
    p.add_argument("--refresh-cache", action="store_true", default=None, help="ignore cached gazetteer and model responses")
    p.add_argument("--workers", type=int, help="concurrent items per stage")
    p.add_argument("--min-length", type=int, help="skip descriptions shorter than this")
    p.add_argument("--buffer-factor", type=float, help="relatum buffer multiplier")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--template", choices=[t.value for t in PromptTemplate], help="prompt template")
    p.add_argument("--provider", help="provider name from the config")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridgeoref", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="extract place names and spatial relations")
    _common(p)
    p.add_argument("--records", type=Path, required=True, help="records CSV or JSON")
    p = sub.add_parser("resolve", help="resolve place names against the gazetteers")
    _common(p)
    p = sub.add_parser("mapgen", help="render gridded map excerpts")
    _common(p)
    p = sub.add_parser("georef", help="ask the model for grid cells (or coordinates)")
    _common(p)
    _model_args(p)
    p = sub.add_parser("run", help="all stages end to end")
    _common(p)
    _model_args(p)
    p.add_argument("--records", type=Path, required=True, help="records CSV or JSON")

    p = sub.add_parser("eval", help="score predictions against a labelled dataset")
    p.add_argument("--workdir", type=Path, default=Path("work"))
    p.add_argument("--dataset", type=Path, help="dataset JSON (default: <workdir>/dataset.json)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--predictions", type=Path, help="predictions.json from the georef stage")
    src.add_argument("--audit", type=Path, help="re-score a recorded audit log")
    p.add_argument("--reparse", action="store_true", help="re-parse logged responses instead of using logged cells")
    p.add_argument("--method", help="method name for the report")
    p.add_argument("--out", type=Path, help="output directory (default: workdir)")
    p.add_argument("--impute", choices=["exclude", "worst"], default="exclude")

    p = sub.add_parser("convert-figshare", help="convert the published dataset table to dataset JSON")
    p.add_argument("source", type=Path, help="published CSV")
    p.add_argument("--maps", type=Path, help="directory holding the map images (default: next to the CSV)")
    p.add_argument("--out", type=Path, required=True)
    return ap


def _load_cfg(args) -> PipelineConfig:
    return load_config(
        args.config,
        offline=args.offline,
        refresh_cache=args.refresh_cache,
        workers=args.workers,
        min_length=args.min_length,
        buffer_factor=args.buffer_factor,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "convert-figshare":
            n = convert_figshare(args.source, args.out, maps_dir=args.maps)
            print(f"wrote {n} items to {args.out}")
            return EXIT_OK
        if args.command == "eval":
            res = cmd_eval(
                args.workdir, args.dataset, args.predictions, args.audit,
                args.method, args.out, args.impute, args.reparse,
            )
            return res.exit_code
        cfg = _load_cfg(args)
        workdir = args.workdir
        workdir.mkdir(parents=True, exist_ok=True)
        if args.command in ("parse", "run"):
            records = load_records(args.records)
        if args.command == "parse":
            return cmd_parse(cfg, records, workdir).exit_code
        if args.command == "resolve":
            return cmd_resolve(cfg, workdir).exit_code
        if args.command == "mapgen":
            res = cmd_mapgen(cfg, workdir)
            for item_id, reason in res.failed.items():
                print(f"{item_id}: {reason}", file=sys.stderr)
            return res.exit_code
        template = PromptTemplate(args.template) if args.template else None
        if args.command == "georef":
            return cmd_georef(cfg, workdir, template, args.provider).exit_code
        return cmd_run(cfg, records, workdir, template, args.provider)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, DatasetFormatError, GazetteerError, ProviderError, MapGenError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
