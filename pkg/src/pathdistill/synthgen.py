"""Seeded synthetic cohorts with a shared latent pathway-activity driver.

Generative process per case:

* latent activity ``a`` in R^P drawn standard normal;
* expression subvector of pathway ``p`` equals ``a_p * direction_p`` plus
  ``noise_expr`` times standard normal noise (directions are fixed unit
  vectors per cohort);
* each patch picks one pathway ``c`` uniformly and reads
  ``base_c + a_c * axis_c + noise_patch * eps`` so the patch carries both a
  recognizable prototype and the pathway's activity;
* classification label is ``1`` iff the informative activities sum above 0;
  survival time is ``exp(-beta * sum + eps)`` with independent censoring.

Generation is single-threaded and byte-deterministic given the seed. The
provenance file records the config plus per-case ground truth (latents and
patch prototype assignments) so downstream attribution checks can compare
against the generator.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import (
    CaseEntry,
    CohortManifest,
    GeneSet,
    GeneSetCatalog,
    TaskDescriptor,
    TaskLabel,
    load_manifest,
    save_expression,
    save_gene_sets,
    save_manifest,
    save_patch_bag,
    ExpressionProfile,
    PatchBag,
)
from .errors import ConfigError

PATCH_PX = 512  # synthetic coordinate grid pitch


@dataclass
class SynthConfig:
    n_cases: int = 200
    patches_min: int = 16
    patches_max: int = 32
    feature_dim: int = 32
    n_pathways: int = 10
    genes_per_pathway: int = 20
    label_kind: str = "classification"  # or "survival"
    noise_patch: float = 1.0
    noise_expr: float = 0.1
    informative_pathways: tuple[int, ...] = (0,)
    beta: float = 1.5  # survival log-time coefficient
    censor_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_cases < 1:
            raise ConfigError("n_cases must be >= 1")
        if not (1 <= self.patches_min <= self.patches_max):
            raise ConfigError("need 1 <= patches_min <= patches_max")
        if self.label_kind not in ("classification", "survival"):
            raise ConfigError(f"unknown label_kind {self.label_kind!r}")
        if self.noise_patch < 0 or self.noise_expr < 0:
            raise ConfigError("noise levels must be >= 0")
        inf = tuple(int(p) for p in self.informative_pathways)
        if not inf:
            raise ConfigError("informative_pathways must be nonempty")
        for p in inf:
            if not (0 <= p < self.n_pathways):
                raise ConfigError(f"informative pathway {p} out of range")
        self.informative_pathways = inf

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate_cohort(cfg: SynthConfig, out_dir: str | Path) -> CohortManifest:
    """Write a full cohort (features, expression, gene sets, manifest,
    provenance) under ``out_dir`` and return the loaded manifest."""
    out = Path(out_dir)
    try:
        (out / "features").mkdir(parents=True, exist_ok=True)
        (out / "expression").mkdir(exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc

    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    P, d_v, g = cfg.n_pathways, cfg.feature_dim, cfg.genes_per_pathway

    universe = tuple(f"GENE{p:02d}_{k:03d}" for p in range(P) for k in range(g))
    catalog = GeneSetCatalog(
        sets=tuple(
            GeneSet(name=f"SET_{p:02d}", gene_indices=tuple(range(p * g, (p + 1) * g))) for p in range(P)
        ),
        universe=universe,
    )
    save_gene_sets(catalog, out / "genesets.gmt", description="synthetic")

    # Fixed cohort-level geometry: expression direction, patch prototype, and
    # patch activity axis per pathway.
    expr_dirs = [_unit(rng.standard_normal(g)) for _ in range(P)]
    bases = [rng.standard_normal(d_v) for _ in range(P)]
    axes = [_unit(rng.standard_normal(d_v)) for _ in range(P)]
    informative = np.asarray(cfg.informative_pathways, dtype=np.intp)

    if cfg.label_kind == "classification":
        task = TaskDescriptor(kind="classification", n_classes=2)
    else:
        task = TaskDescriptor(kind="survival")

    entries: list[CaseEntry] = []
    truth_cases: dict[str, dict] = {}
    for i in range(cfg.n_cases):
        case_id = f"case_{i:04d}"
        a = rng.standard_normal(P)
        n_patches = int(rng.integers(cfg.patches_min, cfg.patches_max + 1))
        protos = rng.integers(0, P, size=n_patches)
        feats = np.empty((n_patches, d_v), dtype=np.float64)
        for j, c in enumerate(protos):
            feats[j] = bases[c] + a[c] * axes[c] + cfg.noise_patch * rng.standard_normal(d_v)
        expr = np.empty(P * g, dtype=np.float64)
        for p in range(P):
            expr[p * g : (p + 1) * g] = a[p] * expr_dirs[p] + cfg.noise_expr * rng.standard_normal(g)

        score = float(a[informative].sum())
        if cfg.label_kind == "classification":
            label = TaskLabel(kind="classification", class_index=int(score > 0), n_classes=2)
        else:
            t = float(np.exp(-cfg.beta * score + rng.standard_normal()))
            if rng.random() < cfg.censor_rate:
                label = TaskLabel(kind="survival", time=max(t * float(rng.random()), 1e-6), event=False)
            else:
                label = TaskLabel(kind="survival", time=t, event=True)

        grid_w = max(1, int(np.ceil(np.sqrt(n_patches))))
        coords = np.stack(
            [np.arange(n_patches) % grid_w, np.arange(n_patches) // grid_w], axis=1
        ).astype(np.int64) * PATCH_PX
        slide_id = f"{case_id}_s0"
        bag = PatchBag(case_id=case_id, slide_id=slide_id, features=feats.astype(np.float32), coords=coords)
        feat_rel = f"features/{case_id}.fbin"
        save_patch_bag(bag, out / feat_rel)
        profile = ExpressionProfile(case_id=case_id, values=expr.astype(np.float32), gene_names=universe)
        expr_rel = f"expression/{case_id}.ebin"
        save_expression(profile, out / expr_rel)

        entries.append(
            CaseEntry(case_id=case_id, slides=((slide_id, feat_rel),), expression_path=expr_rel, label=label)
        )
        truth_cases[case_id] = {
            "latent": [float(x) for x in a],
            "patch_prototypes": [int(c) for c in protos],
            "informative_sum": score,
        }

    manifest = CohortManifest(
        root=out,
        feature_dim=d_v,
        gene_universe=universe,
        task=task,
        cases=tuple(entries),
    )
    save_manifest(manifest, out / "manifest.json")

    provenance = {
        "generator": "pathdistill.synthgen",
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "gene_sets": "genesets.gmt",
        "truth": truth_cases,
    }
    with open(out / "provenance.json", "w", encoding="utf-8") as fh:
        json.dump(provenance, fh, indent=1, sort_keys=True)
        fh.write("\n")

    return load_manifest(out / "manifest.json")


def load_provenance(cohort_dir: str | Path) -> dict:
    with open(Path(cohort_dir) / "provenance.json", "r", encoding="utf-8") as fh:
        return json.load(fh)
