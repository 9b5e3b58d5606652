"""Collection records and evaluation dataset items: loading, filtering, validation."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .geo import GeoPoint
from .mapgen.grid import GridError, GridSpec, MapExtent, MapGeoreference, index_for_label, point_to_cell

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = ("id", "text", "country", "region", "lat", "lon")


class DatasetFormatError(ValueError):
    """The dataset file itself is malformed; loading cannot continue."""


@dataclass(frozen=True)
class CollectionRecord:
    id: str
    text: str
    country: str = ""
    region: str = ""
    ground_truth: GeoPoint | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.text or not self.text.strip():
            raise ValueError(f"record {self.id}: text must be non-empty")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "country": self.country,
            "region": self.region,
            "location": self.ground_truth.to_dict() if self.ground_truth else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CollectionRecord:
        loc = data.get("location")
        return cls(
            id=str(data["id"]),
            text=data["text"],
            country=data.get("country") or "",
            region=data.get("region") or "",
            ground_truth=GeoPoint.from_dict(loc) if loc else None,
        )


@dataclass(frozen=True)
class DatasetItem:
    record: CollectionRecord
    map_path: Path
    map_meta: MapGeoreference
    label: str
    scale_km: float

    def to_dict(self, base: Path | None = None) -> dict:
        d = self.record.to_dict()
        path = self.map_path
        if base is not None:
            try:
                path = path.resolve().relative_to(base)
            except ValueError:
                pass
        d.update(
            map_path=path.as_posix(),
            grid=self.map_meta.to_dict(),
            label=self.label,
            scale_km=self.scale_km,
        )
        return d


@dataclass
class LoadedDataset:
    """Items read from a dataset file plus per-item validation failures."""

    items: list[DatasetItem]
    failures: dict[str, list[str]] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def valid_items(self) -> list[DatasetItem]:
        return [it for it in self.items if it.record.id not in self.failures]


def text_length(text: str) -> int:
    """Unicode scalar values after trimming surrounding whitespace."""
    return len(text.strip())


def filter_records(records, min_length: int) -> list[CollectionRecord]:
    """Keep records whose description is at least ``min_length`` characters."""
    if min_length < 0:
        raise ValueError("min_length must be >= 0")
    return [r for r in records if text_length(r.text) >= min_length]


def validate_item(item: DatasetItem, check_image: bool = True) -> list[str]:
    """Return the list of violated invariants; empty means the item is valid."""
    problems: list[str] = []
    if not (item.scale_km > 0):
        problems.append("scale must be positive")
    truth = item.record.ground_truth
    if truth is None:
        problems.append("ground truth location missing")
    grid = item.map_meta.grid
    label_cell = None
    try:
        label_cell = index_for_label(grid, item.label)
    except GridError as exc:
        if "malformed" in str(exc):
            problems.append(f"label malformed: {item.label!r}")
        else:
            problems.append("label outside grid")
    if truth is not None:
        if not item.map_meta.extent.contains_point(truth):
            problems.append("location outside extent")
        elif label_cell is not None:
            cell = point_to_cell(item.map_meta, truth)
            if cell != label_cell:
                problems.append(f"label does not match location cell {cell}")
    if check_image:
        try:
            with Image.open(item.map_path) as im:
                im.verify()
            with Image.open(item.map_path) as im:
                size = im.size
            if size != (item.map_meta.image_width_px, item.map_meta.image_height_px):
                problems.append(f"map image size {size} does not match georeference")
        except (OSError, ValueError) as exc:
            problems.append(f"map image unreadable: {exc}")
    return problems


def _item_from_dict(data: dict, base: Path, index: int) -> DatasetItem:
    try:
        record = CollectionRecord.from_dict(data)
        meta = MapGeoreference.from_dict(data["grid"])
        map_path = Path(data["map_path"])
        return DatasetItem(
            record=record,
            map_path=map_path if map_path.is_absolute() else base / map_path,
            map_meta=meta,
            label=str(data["label"]),
            scale_km=float(data["scale_km"]),
        )
    except KeyError as exc:
        raise DatasetFormatError(f"item {index}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(f"item {index}: {exc}") from exc


def load_dataset(path, check_images: bool = True) -> LoadedDataset:
    """Read a dataset JSON file.

    Structural problems raise :class:`DatasetFormatError`; invariant
    violations are collected per item in ``failures``.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("items"), list):
        raise DatasetFormatError(f"{path}: expected an object with an 'items' array")
    base = path.parent
    items = [_item_from_dict(d, base, i) for i, d in enumerate(doc["items"])]
    failures = {}
    for it in items:
        problems = validate_item(it, check_image=check_images)
        if problems:
            log.warning("item %s invalid: %s", it.record.id, "; ".join(problems))
            failures[it.record.id] = problems
    return LoadedDataset(items, failures)


def dump_dataset(items, path) -> None:
    """Write items in the dataset JSON schema; map paths relative to the file."""
    path = Path(path)
    base = path.parent.resolve()
    doc = {
        "schema_version": SCHEMA_VERSION,
        "items": [it.to_dict(base) for it in items],
    }
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_records_csv(path) -> list[CollectionRecord]:
    """Raw records with header ``id,text,country,region,lat,lon``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DatasetFormatError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                lat, lon = row["lat"].strip(), row["lon"].strip()
                truth = GeoPoint(float(lat), float(lon)) if lat and lon else None
                out.append(
                    CollectionRecord(row["id"], row["text"], row["country"], row["region"], truth)
                )
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from exc
    return out


def load_records(path) -> list[CollectionRecord]:
    """Records from CSV, or from JSON (a list or an ``items`` object)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_records_csv(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    rows = doc["items"] if isinstance(doc, dict) else doc
    try:
        return [CollectionRecord.from_dict(r) for r in rows]
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc


# Column names assumed for the published table; alternatives are tried in order.
FIGSHARE_COLUMNS = {
    "id": ("id", "gbifID", "catalogNumber"),
    "text": ("text", "locality", "description"),
    "country": ("country",),
    "region": ("region", "stateProvince", "district"),
    "lat": ("latitude", "decimalLatitude", "lat"),
    "lon": ("longitude", "decimalLongitude", "lon"),
    "label": ("label", "grid_cell", "cell"),
    "scale": ("scale", "scale_km", "grid_size"),
    "map": ("map", "map_file", "image"),
    "west": ("west", "min_lon"),
    "south": ("south", "min_lat"),
    "east": ("east", "max_lon"),
    "north": ("north", "max_lat"),
    "cols": ("cols",),
    "rows": ("rows",),
}


def parse_scale_km(value: str) -> float:
    """``"1.88km"``, ``"450m"``, ``"0.7 km"`` or a bare number in km."""
    s = value.strip().lower().replace(" ", "")
    if s.endswith("km"):
        return float(s[:-2])
    if s.endswith("m"):
        return float(s[:-1]) / 1000.0
    return float(s)


def convert_figshare(source, out, maps_dir=None) -> int:
    """Convert the published dataset table (CSV) into dataset JSON.

    The table must give, per item, the map's bounding box and grid shape
    (``west,south,east,north,cols,rows``) besides the record fields, label,
    scale and map file name; the column names in :data:`FIGSHARE_COLUMNS`
    are assumed, not documented upstream. Returns the number of items.
    """
    source, out = Path(source), Path(out)
    maps_dir = Path(maps_dir) if maps_dir else source.parent
    with source.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = {h.strip().lower(): h for h in reader.fieldnames or ()}
        cols = {}
        for key, options in FIGSHARE_COLUMNS.items():
            found = next((header[o.lower()] for o in options if o.lower() in header), None)
            if found is None:
                raise DatasetFormatError(f"{source}: no column for {key} (tried {', '.join(options)})")
            cols[key] = found
        items = []
        for lineno, row in enumerate(reader, start=2):

            def get(key: str) -> str:
                return (row.get(cols[key]) or "").strip()

            try:
                record = CollectionRecord(
                    get("id"), get("text"), get("country"), get("region"),
                    GeoPoint(float(get("lat")), float(get("lon"))),
                )
                extent = MapExtent(float(get("south")), float(get("west")), float(get("north")), float(get("east")))
                scale = parse_scale_km(get("scale"))
                map_path = maps_dir / get("map")
                with Image.open(map_path) as img:
                    width, height = img.size
                meta = MapGeoreference(extent, GridSpec(int(get("cols")), int(get("rows")), scale), width, height)
            except (ValueError, OSError) as exc:
                raise DatasetFormatError(f"{source}: line {lineno}: {exc}") from exc
            items.append(DatasetItem(record, map_path, meta, get("label").upper(), scale))
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_dataset(items, out)
    return len(items)
