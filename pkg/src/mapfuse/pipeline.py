"""End-to-end orchestration: load maps, fuse every requested way, assess.

A run plans its variants up front — a plurality-vote baseline, plain
unweighted fusion, confidence-weighted fusion, and one variant per
cluster group per method per k — writes a manifest of the outputs it
intends to produce, then fills it in. Variants are independent pure
tasks (they share only read-only inputs) and run on a thread pool;
everything derived from randomness is seeded, so re-running a config
reproduces every CSV byte for byte.

The baseline deserves a caveat: it is the per-pixel plurality label
across investigator hard maps, a fusion-free composite standing in for a
pooled-training baseline, and is labeled "plurality-baseline" in every
output to avoid implying more.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .accuracy import monte_carlo_assess, paired_t_test, write_mc_csv
from .clustering import (cluster_subsets, entropy_features, kmeans_cluster,
                         kmedoids_cluster, save_cluster_model)
from .fusion import FusionConfig, fuse, fused_label_map
from .grids import LabelRaster, hard_classify
from .io import (load_label_raster, load_probability_raster, save_label_raster,
                 save_probability_raster)
from .landscape import iji, write_iji_csv
from .weights import estimate_weights, save_weights_csv

MODES = ("unweighted", "weighted", "clustered")
METHODS = ("kmeans", "kmedoids")
BASELINE = "plurality-baseline"


@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str
    reference: str
    output_dir: str
    k_values: tuple = (2, 3, 4)
    methods: tuple = METHODS
    fusion_modes: tuple = MODES
    mc_iterations: int = 100
    per_class_samples: int = 300
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "fusion_modes", tuple(self.fusion_modes))
        for k in self.k_values:
            if k < 2:
                raise ValueError(f"k must be at least 2, got {k}")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown cluster methods {sorted(bad)}")
        bad = set(self.fusion_modes) - set(MODES)
        if bad:
            raise ValueError(f"unknown fusion modes {sorted(bad)}")
        if self.mc_iterations < 1:
            raise ValueError("mc_iterations must be >= 1")
        if self.per_class_samples < 1:
            raise ValueError("per_class_samples must be >= 1")


def load_pipeline_config(path) -> PipelineConfig:
    doc = json.loads(Path(path).read_text())
    known = {f for f in PipelineConfig.__dataclass_fields__}
    unknown = doc.keys() - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    missing = {"input_dir", "reference", "output_dir"} - doc.keys()
    if missing:
        raise ValueError(f"config missing {sorted(missing)}")
    return PipelineConfig(**doc)


def discover_investigators(input_dir):
    """Find investigator probability rasters in a directory.

    Prefers an index.json written by the simulator; otherwise takes every
    multi-band f32 raster whose name does not look like a reference.
    """
    d = Path(input_dir)
    if not d.is_dir():
        raise ValueError(f"input directory {d} does not exist")
    index = d / "index.json"
    if index.exists():
        names = json.loads(index.read_text())["investigators"]
        return [(n, d / n) for n in names]
    found = []
    for sidecar in sorted(d.glob("*.json")):
        payload = d / sidecar.stem
        if sidecar.name == "index.json" or not payload.exists():
            continue
        header = json.loads(sidecar.read_text())
        if (header.get("dtype") == "f32" and header.get("bands", 0) > 1
                and payload.stem not in ("truth", "reference")):
            found.append((payload.stem, payload))
    if not found:
        raise ValueError(f"no investigator rasters found in {d}")
    return found


def plurality_baseline(maps) -> LabelRaster:
    """Per-pixel plurality vote over investigator hard maps (ties: lowest class)."""
    if not maps:
        raise ValueError("no maps")
    shape = maps[0].shape
    votes = np.zeros((shape.height, shape.width, shape.n_classes), dtype=np.int64)
    hw = (np.arange(shape.height)[:, None], np.arange(shape.width)[None, :])
    for m in maps:
        votes[hw[0], hw[1], hard_classify(m).values] += 1
    return LabelRaster(shape, votes.argmax(axis=2))


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def run_pipeline(config: PipelineConfig) -> dict:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    ref_path = Path(config.reference)
    if not (ref_path.exists() and Path(str(ref_path) + ".json").exists()):
        raise ValueError(f"reference raster {ref_path} not found")
    reference = load_label_raster(ref_path)
    named = discover_investigators(config.input_dir)
    ids = [n for n, _ in named]
    maps = [load_probability_raster(p) for _, p in named]
    for n, m in zip(ids, maps):
        if m.shape != reference.shape:
            raise ValueError(f"map {n} shape {m.shape} != reference {reference.shape}")
    n_maps = len(maps)

    if "clustered" in config.fusion_modes:
        if n_maps < 2:
            raise ValueError("clustering requires at least 2 investigator maps")
        for k in config.k_values:
            if k > n_maps:
                raise ValueError(f"k={k} exceeds the {n_maps} investigator maps")

    # ---- plan ----------------------------------------------------------
    plan = [BASELINE]
    if "unweighted" in config.fusion_modes:
        plan.append("unweighted")
    if "weighted" in config.fusion_modes:
        plan.append("weighted")
    cluster_groups = {}        # variant id -> list of map indices
    if "clustered" in config.fusion_modes:
        feats = entropy_features(maps)
        for method in config.methods:
            fit = kmeans_cluster if method == "kmeans" else kmedoids_cluster
            for k in config.k_values:
                model = fit(feats, k, config.seed)
                save_cluster_model(model, out / f"cluster_{method}_k{k}.json")
                for g in range(k):
                    vid = f"{method}-k{k}g{g + 1}"
                    plan.append(vid)
                    cluster_groups[vid] = np.flatnonzero(model.assignment == g)

    def variant_files(vid):
        files = [f"{vid}_label", f"{vid}_label.json", f"{vid}_mc.csv"]
        if vid != BASELINE:
            files = [f"{vid}_prob", f"{vid}_prob.json"] + files
        return files

    manifest = {
        "config": {f: getattr(config, f) for f in PipelineConfig.__dataclass_fields__},
        "variants": [{"id": v, "files": variant_files(v), "status": "planned"}
                     for v in plan],
        "tables": ["summary.csv", "iji.csv", "ttests.csv"],
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str))

    # ---- per-variant work ----------------------------------------------
    # The weight fit is the longest single task, so it goes onto the pool
    # first and the weighted variant joins on its future; every other
    # variant proceeds underneath it (numpy releases the GIL in the kernels
    # that dominate both sides).
    fcfg = FusionConfig()

    with ThreadPoolExecutor(max_workers=min(8, len(plan) + 1)) as pool:
        weights_future = None
        if "weighted" in config.fusion_modes:
            weights_future = pool.submit(estimate_weights, maps,
                                         seed=config.seed)

        def run_variant(vid):
            if vid == BASELINE:
                label = plurality_baseline(maps)
            else:
                if vid == "unweighted":
                    subset, w = maps, None
                elif vid == "weighted":
                    est = weights_future.result()
                    save_weights_csv(est, out / "weights.csv", ids=ids)
                    subset, w = maps, est.kappa
                else:
                    subset = [maps[i] for i in cluster_groups[vid]]
                    w = None
                posterior = fuse(subset, weights=w, config=fcfg)
                save_probability_raster(posterior.mean, out / f"{vid}_prob")
                label = fused_label_map(posterior)
            save_label_raster(label, out / f"{vid}_label")
            mc = monte_carlo_assess(label, reference, config.mc_iterations,
                                    config.per_class_samples, config.seed)
            write_mc_csv(mc, reference.shape.class_names, out / f"{vid}_mc.csv")
            return vid, label, mc

        results = {vid: (label, mc)
                   for vid, label, mc in pool.map(run_variant, plan)}

    # ---- joins: IJI, t-tests, summary -----------------------------------
    write_iji_csv([("reference", reference)]
                  + [(vid, results[vid][0]) for vid in plan],
                  out / "iji.csv")

    base_oa = results[BASELINE][1].overall_series()
    tt_lines = ["variant,baseline,t,p,df"]
    for vid in plan:
        if vid == BASELINE:
            continue
        t, p, df = paired_t_test(results[vid][1].overall_series(), base_oa)
        tt_lines.append(f"{vid},{BASELINE},{repr(t)},{repr(p)},{df}")
    (out / "ttests.csv").write_text("\n".join(tt_lines) + "\n")

    names = reference.shape.class_names
    cols = ["variant", "oa"] + [f"ua_{n}" for n in names] \
        + [f"pa_{n}" for n in names] + ["iji"]
    rows = [",".join(cols)]
    summary = {}
    for vid in plan:
        label, mc = results[vid]
        oa = float(np.mean([r.overall for r in mc.per_iteration]))
        ua = np.nanmean([r.users for r in mc.per_iteration], axis=0)
        pa = np.nanmean([r.producers for r in mc.per_iteration], axis=0)
        j = iji(label)
        summary[vid] = {"oa": oa, "iji": j}
        cells = [vid, repr(oa)] + [_fmt(v) for v in ua] + [_fmt(v) for v in pa] \
            + [_fmt(j)]
        rows.append(",".join(cells))
    (out / "summary.csv").write_text("\n".join(rows) + "\n")

    for entry in manifest["variants"]:
        entry["status"] = "done"
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str))
    return {"output_dir": str(out), "variants": plan, "summary": summary,
            "manifest": str(manifest_path)}
