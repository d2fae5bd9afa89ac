"""Versioned JSON checkpoints: named flat parameter arrays plus a config echo."""

from __future__ import annotations

import json

import numpy as np

from .autodiff import Tensor

SCHEMA_VERSION = 1


def params_to_doc(params: dict, config: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "params": {
            name: {"shape": list(t.shape), "values": t.data.reshape(-1).tolist()}
            for name, t in sorted(params.items())
        },
    }


def params_from_doc(doc: dict) -> tuple[dict, dict]:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema_version {doc.get('schema_version')!r}")
    params = {}
    for name, rec in doc["params"].items():
        arr = np.asarray(rec["values"], dtype=np.float64).reshape(rec["shape"])
        params[name] = Tensor(arr, requires_grad=True)
    return params, doc.get("config", {})


def save_checkpoint(path, params: dict, config: dict) -> None:
    with open(path, "w") as f:
        json.dump(params_to_doc(params, config), f)
        f.write("\n")


def load_checkpoint(path) -> tuple[dict, dict]:
    with open(path) as f:
        return params_from_doc(json.load(f))
