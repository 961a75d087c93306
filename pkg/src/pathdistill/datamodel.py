"""Core domain types and file I/O for cohorts.

File formats (all little-endian, UTF-8):

* feature file: one JSON header line ``{"n_patches": N, "dim": D, "dtype":
  "f32le", ...}`` followed by ``N * D`` 32-bit floats. Optional header keys:
  ``case_id``, ``slide_id``, ``coords`` (list of ``[x, y]`` integer pairs).
* expression file: one JSON header line ``{"case_id": ..., "n_genes": d,
  "dtype": "f32le", "gene_names": [...]}`` followed by ``d`` 32-bit floats.
* gene sets: GMT text, one set per line: name, tab, description, tab,
  tab-separated gene symbols.
* manifest: JSON document binding feature dim, gene universe, task
  descriptor, and per-case file references plus labels.

Loaders are pure functions of the file system and return immutable records,
so they are safe to call concurrently from multiple workers.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

FEATURE_DTYPE = "f32le"


def _canonical_json(obj) -> str:
    """Compact JSON with stable key order, used for byte-exact round trips."""
    return json.dumps(obj, separators=(",", ":"), sort_keys=False)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatchBag:
    """Patch-feature matrix for one slide of one case."""

    case_id: str
    slide_id: str
    features: np.ndarray  # (N, d_v) float32
    coords: Optional[np.ndarray] = None  # (N, 2) int64 pixel coordinates

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float32)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise DataError(f"patch bag {self.case_id}/{self.slide_id}: features must be a nonempty 2-D matrix")
        if not np.all(np.isfinite(feats)):
            raise DataError(f"patch bag {self.case_id}/{self.slide_id}: non-finite feature value")
        object.__setattr__(self, "features", feats)
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=np.int64)
            if coords.shape != (feats.shape[0], 2):
                raise DataError(f"patch bag {self.case_id}/{self.slide_id}: coords shape {coords.shape} != (N, 2)")
            object.__setattr__(self, "coords", coords)

    @property
    def n_patches(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ExpressionProfile:
    """Log-normalized expression vector with its gene names."""

    case_id: str
    values: np.ndarray  # (d,) float32
    gene_names: tuple[str, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise DataError(f"expression {self.case_id}: non-finite value")
        names = tuple(self.gene_names)
        if len(names) != vals.shape[0]:
            raise DataError(f"expression {self.case_id}: {len(names)} gene names for {vals.shape[0]} values")
        if len(set(names)) != len(names):
            raise DataError(f"expression {self.case_id}: duplicate gene names")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "gene_names", names)


@dataclass(frozen=True)
class GeneSet:
    name: str
    gene_indices: tuple[int, ...]  # indices into the bound gene universe

    @property
    def size(self) -> int:
        return len(self.gene_indices)


@dataclass(frozen=True)
class GeneSetCatalog:
    """Ordered pathway gene sets bound to a gene universe. Sets may overlap."""

    sets: tuple[GeneSet, ...]
    universe: tuple[str, ...]

    def __post_init__(self):
        if len(self.sets) < 1:
            raise DataError("gene set catalog must contain at least one set")
        n = len(self.universe)
        for gs in self.sets:
            if gs.size == 0:
                raise DataError(f"empty pathway: {gs.name}")
            for idx in gs.gene_indices:
                if not (0 <= idx < n):
                    raise DataError(f"pathway {gs.name}: gene index {idx} outside universe of size {n}")

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    @property
    def set_sizes(self) -> tuple[int, ...]:
        return tuple(gs.size for gs in self.sets)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(gs.name for gs in self.sets)


@dataclass(frozen=True)
class TaskLabel:
    """Either a class index or a (time, event) survival outcome."""

    kind: str  # "classification" | "survival"
    class_index: Optional[int] = None
    n_classes: Optional[int] = None
    time: Optional[float] = None
    event: Optional[bool] = None

    def __post_init__(self):
        if self.kind == "classification":
            if self.class_index is None or self.n_classes is None:
                raise DataError("classification label requires class_index and n_classes")
            if not (0 <= self.class_index < self.n_classes):
                raise DataError(f"class_index {self.class_index} out of range for {self.n_classes} classes")
        elif self.kind == "survival":
            if self.time is None or self.event is None:
                raise DataError("survival label requires time and event")
            if not (self.time > 0 and math.isfinite(self.time)):
                raise DataError(f"survival time must be a positive finite number, got {self.time}")
        else:
            raise DataError(f"unknown label kind: {self.kind}")


@dataclass(frozen=True)
class CaseRecord:
    """One patient: one or more patch bags, optional expression, and a label."""

    case_id: str
    bags: tuple[PatchBag, ...]
    label: TaskLabel
    expression: Optional[ExpressionProfile] = None

    def __post_init__(self):
        if len(self.bags) < 1:
            raise DataError(f"case {self.case_id}: needs at least one patch bag")
        dims = {b.dim for b in self.bags}
        if len(dims) != 1:
            raise DataError(f"case {self.case_id}: inconsistent feature dims {sorted(dims)}")

    def stacked_features(self) -> np.ndarray:
        """Patch rows concatenated across all of the case's slides."""
        if len(self.bags) == 1:
            return self.bags[0].features
        return np.concatenate([b.features for b in self.bags], axis=0)

    def patch_origins(self) -> list[tuple[str, int]]:
        """(slide_id, within-slide index) for each row of stacked_features()."""
        out = []
        for bag in self.bags:
            out.extend((bag.slide_id, j) for j in range(bag.n_patches))
        return out

    @property
    def n_patches(self) -> int:
        return sum(b.n_patches for b in self.bags)


@dataclass(frozen=True)
class CaseEntry:
    """File references for one case as listed in a manifest."""

    case_id: str
    slides: tuple[tuple[str, str], ...]  # (slide_id, relative feature path)
    expression_path: Optional[str]
    label: TaskLabel


@dataclass
class TaskDescriptor:
    kind: str  # "classification" | "survival"
    n_classes: Optional[int] = None

    def __post_init__(self):
        if self.kind == "classification":
            if not self.n_classes or self.n_classes < 2:
                raise DataError("classification task requires n_classes >= 2")
        elif self.kind != "survival":
            raise DataError(f"unknown task kind: {self.kind}")


@dataclass
class CohortManifest:
    """Validated cohort description with resolved file references."""

    root: Path
    feature_dim: int
    gene_universe: tuple[str, ...]
    task: TaskDescriptor
    cases: tuple[CaseEntry, ...]
    records: tuple[CaseRecord, ...] = field(default_factory=tuple)

    @property
    def case_ids(self) -> list[str]:
        return [c.case_id for c in self.cases]

    def record_by_id(self, case_id: str) -> CaseRecord:
        for rec in self.records:
            if rec.case_id == case_id:
                return rec
        raise DataError(f"unknown case id: {case_id}")


# ---------------------------------------------------------------------------
# Patch-feature files
# ---------------------------------------------------------------------------

def _read_header_line(fh, path) -> dict:
    raw = fh.readline()
    if not raw.endswith(b"\n"):
        raise DataError(f"{path}: missing header line")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad header: {exc}") from exc
    if not isinstance(header, dict):
        raise DataError(f"{path}: header must be a JSON object")
    return header


def load_patch_bag(path: str | os.PathLike) -> PatchBag:
    """Read a feature file; values round-trip the stored f32le bytes exactly."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, "rb") as fh:
        header = _read_header_line(fh, path)
        try:
            n = int(header["n_patches"])
            dim = int(header["dim"])
            dtype = header["dtype"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: header missing n_patches/dim/dtype: {exc}") from exc
        if dtype != FEATURE_DTYPE:
            raise DataError(f"{path}: unsupported dtype {dtype!r}")
        payload = fh.read()
    expected = n * dim * 4
    if len(payload) != expected:
        raise DataError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    feats = np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float32)
    coords = None
    if "coords" in header:
        coords = np.asarray(header["coords"], dtype=np.int64)
    return PatchBag(
        case_id=str(header.get("case_id", "")),
        slide_id=str(header.get("slide_id", "")),
        features=feats,
        coords=coords,
    )


def save_patch_bag(bag: PatchBag, path: str | os.PathLike) -> None:
    path = Path(path)
    header = {"n_patches": bag.n_patches, "dim": bag.dim, "dtype": FEATURE_DTYPE}
    if bag.case_id:
        header["case_id"] = bag.case_id
    if bag.slide_id:
        header["slide_id"] = bag.slide_id
    if bag.coords is not None:
        header["coords"] = bag.coords.tolist()
    payload = np.ascontiguousarray(bag.features, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_canonical_json(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


# ---------------------------------------------------------------------------
# Expression files
# ---------------------------------------------------------------------------

def load_expression(path: str | os.PathLike) -> ExpressionProfile:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, "rb") as fh:
        header = _read_header_line(fh, path)
        try:
            n = int(header["n_genes"])
            names = [str(g) for g in header["gene_names"]]
            dtype = header["dtype"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: header missing n_genes/gene_names/dtype: {exc}") from exc
        if dtype != FEATURE_DTYPE:
            raise DataError(f"{path}: unsupported dtype {dtype!r}")
        payload = fh.read()
    if len(payload) != n * 4:
        raise DataError(f"{path}: payload is {len(payload)} bytes, header implies {n * 4}")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    return ExpressionProfile(case_id=str(header.get("case_id", "")), values=values, gene_names=tuple(names))


def save_expression(profile: ExpressionProfile, path: str | os.PathLike) -> None:
    header = {
        "case_id": profile.case_id,
        "n_genes": int(profile.values.shape[0]),
        "dtype": FEATURE_DTYPE,
        "gene_names": list(profile.gene_names),
    }
    with open(path, "wb") as fh:
        fh.write(_canonical_json(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(profile.values, dtype="<f4").tobytes())


# ---------------------------------------------------------------------------
# Gene sets (GMT)
# ---------------------------------------------------------------------------

def load_gene_sets(path: str | os.PathLike, universe: Sequence[str]) -> tuple[GeneSetCatalog, int]:
    """Parse a GMT file against a gene universe.

    Genes absent from the universe are dropped; the count of dropped symbols
    is returned alongside the catalog. A set left empty after dropping is an
    error.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    index = {g: i for i, g in enumerate(universe)}
    sets: list[GeneSet] = []
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected name, description, and at least one gene")
            name = parts[0]
            genes = [g for g in parts[2:] if g]
            if not genes:
                raise DataError(f"{path}:{lineno}: no gene symbols")
            kept = [index[g] for g in genes if g in index]
            dropped += len(genes) - len(kept)
            if not kept:
                raise DataError(f"{path}:{lineno}: empty pathway {name!r} after restricting to the gene universe")
            sets.append(GeneSet(name=name, gene_indices=tuple(kept)))
    if not sets:
        raise DataError(f"{path}: no gene sets")
    return GeneSetCatalog(sets=tuple(sets), universe=tuple(universe)), dropped


def save_gene_sets(catalog: GeneSetCatalog, path: str | os.PathLike, description: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for gs in catalog.sets:
            genes = [catalog.universe[i] for i in gs.gene_indices]
            fh.write("\t".join([gs.name, description] + genes))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Expression partitioning
# ---------------------------------------------------------------------------

def partition_expression(profile: ExpressionProfile, catalog: GeneSetCatalog) -> list[np.ndarray]:
    """Gather each pathway's subvector. A gene in two sets appears in both."""
    if tuple(profile.gene_names) != tuple(catalog.universe):
        raise DataError(f"expression {profile.case_id}: gene names do not match the catalog universe")
    return [profile.values[np.asarray(gs.gene_indices, dtype=np.intp)] for gs in catalog.sets]


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def _parse_label(obj: dict, task: TaskDescriptor, case_id: str) -> TaskLabel:
    try:
        if task.kind == "classification":
            return TaskLabel(kind="classification", class_index=int(obj["class_index"]), n_classes=task.n_classes)
        return TaskLabel(kind="survival", time=float(obj["time"]), event=bool(obj["event"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"case {case_id}: bad label {obj!r}: {exc}") from exc


def load_manifest(path: str | os.PathLike) -> CohortManifest:
    """Load and fully validate a cohort manifest.

    Every referenced file is parsed; slides belonging to the same case are
    grouped into one record (patch rows concatenate across slides at model
    input time). Duplicate case ids, missing files, and dimension mismatches
    are errors.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: parse failure at line {exc.lineno}: {exc.msg}") from exc
    root = path.parent
    try:
        feature_dim = int(doc["feature_dim"])
        universe = tuple(str(g) for g in doc["gene_universe"])
        task_doc = doc["task"]
        cases_doc = doc["cases"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: missing or malformed field: {exc}") from exc
    task = TaskDescriptor(kind=str(task_doc.get("kind", "")), n_classes=task_doc.get("n_classes"))

    entries: list[CaseEntry] = []
    records: list[CaseRecord] = []
    seen: set[str] = set()
    for c in cases_doc:
        case_id = str(c.get("case_id", ""))
        if not case_id:
            raise DataError(f"{path}: case with empty case_id")
        if case_id in seen:
            raise DataError(f"{path}: duplicate case_id {case_id!r}")
        seen.add(case_id)
        slides_doc = c.get("slides")
        if not slides_doc:
            raise DataError(f"{path}: case {case_id}: no slides")
        slides = tuple((str(s["slide_id"]), str(s["features"])) for s in slides_doc)
        label = _parse_label(c.get("label", {}), task, case_id)
        expr_path = c.get("expression")
        entries.append(CaseEntry(case_id=case_id, slides=slides, expression_path=expr_path, label=label))

        bags = []
        for slide_id, rel in slides:
            bag = load_patch_bag(root / rel)
            if bag.dim != feature_dim:
                raise DataError(f"case {case_id} slide {slide_id}: feature dim {bag.dim} != manifest dim {feature_dim}")
            bags.append(PatchBag(case_id=case_id, slide_id=slide_id, features=bag.features, coords=bag.coords))
        expression = None
        if expr_path is not None:
            expression = load_expression(root / expr_path)
            if tuple(expression.gene_names) != universe:
                raise DataError(f"case {case_id}: expression gene names do not match the manifest gene universe")
            expression = ExpressionProfile(case_id=case_id, values=expression.values, gene_names=expression.gene_names)
        records.append(CaseRecord(case_id=case_id, bags=tuple(bags), label=label, expression=expression))

    return CohortManifest(
        root=root,
        feature_dim=feature_dim,
        gene_universe=universe,
        task=task,
        cases=tuple(entries),
        records=tuple(records),
    )


def manifest_to_dict(manifest: CohortManifest) -> dict:
    cases = []
    for entry in manifest.cases:
        label: dict
        if entry.label.kind == "classification":
            label = {"class_index": entry.label.class_index}
        else:
            label = {"time": entry.label.time, "event": entry.label.event}
        cases.append(
            {
                "case_id": entry.case_id,
                "slides": [{"slide_id": sid, "features": rel} for sid, rel in entry.slides],
                "expression": entry.expression_path,
                "label": label,
            }
        )
    task: dict = {"kind": manifest.task.kind}
    if manifest.task.kind == "classification":
        task["n_classes"] = manifest.task.n_classes
    return {
        "feature_dim": manifest.feature_dim,
        "gene_universe": list(manifest.gene_universe),
        "task": task,
        "cases": cases,
    }


def save_manifest(manifest: CohortManifest, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest_to_dict(manifest), fh, indent=1, sort_keys=False)
        fh.write("\n")
