"""File formats: headered matrix CSVs, JSON documents, and run manifests.

Matrices use a one-line header `# rows=R cols=C name=NAME` followed by
comma-separated rows at round-trip precision, so fixtures stay diff-able
and language-neutral.  Nested structures (stats, configs, summaries,
reports) are JSON.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .mcmc import Hyperparameters, McmcConfig
from .model import Dimensions, DimensionMismatchError, SummaryStatistics

SAMPLE_FORMATS = ("npz", "csv", "none")


def write_matrix(path, matrix, name):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rows, cols = matrix.shape
    lines = [f"# rows={rows} cols={cols} name={name}"]
    for row in matrix:
        lines.append(",".join(format(v, ".17g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DimensionMismatchError(f"{path}: missing matrix header")
    fields = dict(part.split("=", 1) for part in lines[0][1:].split())
    rows, cols = int(fields["rows"]), int(fields["cols"])
    if cols == 0 or rows == 0:
        return np.zeros((rows, cols))
    data = [[float(v) for v in line.split(",")] for line in lines[1 : rows + 1]]
    matrix = np.asarray(data, dtype=float)
    if matrix.shape != (rows, cols):
        raise DimensionMismatchError(f"{path}: body shape {matrix.shape} != header ({rows}, {cols})")
    return matrix


def _jsonable(value):
    if isinstance(value, dict):
        return {key: _jsonable(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(val) for val in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def write_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def stats_to_dict(stats: SummaryStatistics):
    dims = stats.dims
    return {
        "n": dims.n,
        "p": dims.p,
        "k": dims.k,
        "l": dims.l,
        "s_yy": stats.s_yy.tolist(),
        "s_yx": stats.s_yx.tolist(),
        "s_yu": stats.s_yu.tolist(),
        "s_xx": stats.s_xx.tolist(),
        "s_xu": stats.s_xu.tolist(),
        "s_uu": stats.s_uu.tolist(),
    }


def stats_from_dict(doc) -> SummaryStatistics:
    expected = {"n", "p", "k", "l", "s_yy", "s_yx", "s_yu", "s_xx", "s_xu", "s_uu"}
    unknown = set(doc) - expected
    if unknown:
        raise ValueError(f"unknown keys in stats document: {sorted(unknown)}")
    missing = expected - set(doc)
    if missing:
        raise ValueError(f"missing keys in stats document: {sorted(missing)}")
    dims = Dimensions(p=doc["p"], k=doc["k"], l=doc["l"], n=doc["n"])

    def block(key, shape):
        arr = np.asarray(doc[key], dtype=float).reshape(shape)
        return arr

    return SummaryStatistics(
        s_yy=block("s_yy", (dims.p, dims.p)),
        s_yx=block("s_yx", (dims.p, dims.k)),
        s_yu=block("s_yu", (dims.p, dims.l)),
        s_xx=block("s_xx", (dims.k, dims.k)),
        s_xu=block("s_xu", (dims.k, dims.l)),
        s_uu=block("s_uu", (dims.l, dims.l)),
        dims=dims,
    ).validate()


_CONFIG_KEYS = {
    "iterations", "burn_in", "thin", "seed", "adapt_proposals",
    "fixed_b_support", "sample_format", "hyper",
}
_HYPER_KEYS = {f.name for f in dataclasses.fields(Hyperparameters)}


def config_from_dict(doc):
    """Parse a run configuration document; unknown keys are an error."""
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown keys in config document: {sorted(unknown)}")
    hyper_doc = doc.get("hyper", {})
    unknown_hyper = set(hyper_doc) - _HYPER_KEYS
    if unknown_hyper:
        raise ValueError(f"unknown keys in config hyper block: {sorted(unknown_hyper)}")
    hyper = Hyperparameters(**hyper_doc)
    support = doc.get("fixed_b_support")
    config = McmcConfig(
        iterations=int(doc.get("iterations", 50_000)),
        burn_in=int(doc.get("burn_in", 10_000)),
        thin=int(doc.get("thin", 10)),
        seed=int(doc.get("seed", 0)),
        hyper=hyper,
        fixed_b_support=None if support is None else np.asarray(support, dtype=int),
        adapt_proposals=bool(doc.get("adapt_proposals", True)),
    )
    sample_format = doc.get("sample_format", "npz")
    if sample_format not in SAMPLE_FORMATS:
        raise ValueError(f"sample_format must be one of {SAMPLE_FORMATS}")
    return config, sample_format


def config_to_dict(config: McmcConfig, sample_format="npz"):
    doc = {
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "seed": config.seed,
        "adapt_proposals": config.adapt_proposals,
        "sample_format": sample_format,
        "hyper": dataclasses.asdict(config.hyper),
    }
    if config.fixed_b_support is not None:
        doc["fixed_b_support"] = np.asarray(config.fixed_b_support).tolist()
    return doc


def summary_to_dict(fit):
    return {
        "instrument_mode": fit.instrument_mode,
        "thresholds": {"a": fit.threshold_a, "b": fit.threshold_b, "z": fit.threshold_z},
        "pip_a": fit.pip_a.tolist(),
        "pip_b": fit.pip_b.tolist(),
        "pip_z": fit.pip_z.tolist(),
        "mean_a": fit.mean_a.tolist(),
        "mean_b": fit.mean_b.tolist(),
        "mean_c": fit.mean_c.tolist(),
        "mean_sigma_star": fit.mean_sigma_star.tolist(),
        "sparse_a": fit.sparse_a.tolist(),
        "sparse_b": fit.sparse_b.tolist(),
        "sparse_sigma_star": fit.sparse_sigma_star.tolist(),
        "ci_a": fit.ci_a.tolist(),
        "ci_b": fit.ci_b.tolist(),
        "ci_c": fit.ci_c.tolist(),
        "ci_sigma_star": fit.ci_sigma_star.tolist(),
    }


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command, config_snapshot, seed, duration_s, inputs, outputs):
    """One manifest per output directory, with digests of inputs and outputs."""
    from . import __version__

    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config_snapshot,
        "seed": seed,
        "version": __version__,
        "duration_s": duration_s,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {
            str(Path(p).relative_to(out_dir)): sha256_file(p) for p in outputs
        },
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    return path
