"""Checkpoint and loss-curve persistence.

Checkpoints are a single self-describing JSON document: a format-version
field, the full config, and every matrix with its explicit shape. The layout
is documented in the README and stable across releases.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import MopConfig, MopParams, ProjectorParams, RouterParams

CHECKPOINT_FORMAT_VERSION = 1


def _encode_matrix(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode_matrix(obj: dict) -> np.ndarray:
    data = np.asarray(obj["data"], dtype=np.float64)
    return data.reshape(obj["shape"])


def save_checkpoint(path: str | Path, cfg: MopConfig, params: MopParams) -> None:
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": {
            "n_projectors": cfg.n_projectors,
            "top_k": cfg.top_k,
            "c_in": cfg.c_in,
            "hidden": cfg.hidden,
            "c_out": cfg.c_out,
            "router_hidden": cfg.router_hidden,
            "noise_sigma": cfg.noise_sigma,
            "mode": cfg.mode,
        },
        "router": {
            "wr1": _encode_matrix(params.router.wr1),
            "br1": _encode_matrix(params.router.br1),
            "wr2": _encode_matrix(params.router.wr2),
            "br2": _encode_matrix(params.router.br2),
        },
        "projectors": [
            {
                "w1": _encode_matrix(p.w1),
                "b1": _encode_matrix(p.b1),
                "w2": _encode_matrix(p.w2),
                "b2": _encode_matrix(p.b2),
            }
            for p in params.projectors
        ],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[MopConfig, MopParams]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version!r}")
    cfg = MopConfig(**doc["config"])
    router = RouterParams(
        wr1=_decode_matrix(doc["router"]["wr1"]),
        br1=_decode_matrix(doc["router"]["br1"]),
        wr2=_decode_matrix(doc["router"]["wr2"]),
        br2=_decode_matrix(doc["router"]["br2"]),
    )
    projectors = [
        ProjectorParams(
            w1=_decode_matrix(p["w1"]),
            b1=_decode_matrix(p["b1"]),
            w2=_decode_matrix(p["w2"]),
            b2=_decode_matrix(p["b2"]),
        )
        for p in doc["projectors"]
    ]
    if len(projectors) != cfg.n_projectors:
        raise ValueError(
            f"checkpoint holds {len(projectors)} projectors, "
            f"config says {cfg.n_projectors}"
        )
    return cfg, MopParams(projectors=projectors, router=router)


def write_loss_curve(path: str | Path, curve) -> None:
    """CSV with header ``step,loss``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(curve):
            writer.writerow([step, repr(float(loss))])
