"""JSON documents for fitted models (``format: 1``)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cox import CoxFit
from .glm import GlmFit
from .stacking import TimeEncoding

FORMAT = 1


def model_to_dict(model: GlmFit | CoxFit) -> dict:
    if isinstance(model, GlmFit):
        return {
            "format": FORMAT,
            "kind": "glm",
            "family": model.family,
            "encoding": {"kind": model.encoding.kind, "degree": model.encoding.degree,
                         "interactions": list(model.encoding.interactions)},
            "covariate_names": list(model.covariate_names),
            "time_index": model.time_index.tolist(),
            "coefficients": [[n, float(v)] for n, v in zip(model.names, model.coefficients)],
            "std_errors": model.std_errors.tolist(),
            "converged": model.converged,
            "iterations": model.iterations,
            "final_gradient_norm": model.final_gradient_norm,
            "loglik": model.loglik,
            "ridge": model.ridge,
            "separation": model.separation,
            "messages": list(model.messages),
        }
    return {
        "format": FORMAT,
        "kind": "cox",
        "covariate_names": list(model.covariate_names),
        "beta": model.beta.tolist(),
        "std_errors": model.std_errors.tolist(),
        "baseline": [[float(t), float(h)] for t, h in zip(model.baseline_times, model.baseline_hazard)],
        "partial_loglik": model.partial_loglik,
        "converged": model.converged,
        "iterations": model.iterations,
        "final_gradient_norm": model.final_gradient_norm,
        "messages": list(model.messages),
    }


def model_from_dict(doc: dict) -> GlmFit | CoxFit:
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported model document format {doc.get('format')!r}")
    kind = doc.get("kind")
    if kind == "glm":
        enc = doc["encoding"]
        return GlmFit(
            family=doc["family"],
            coefficients=np.array([v for _, v in doc["coefficients"]], dtype=float),
            names=tuple(n for n, _ in doc["coefficients"]),
            encoding=TimeEncoding(enc["kind"], enc["degree"], tuple(enc["interactions"])),
            time_index=np.array(doc["time_index"], dtype=float),
            covariate_names=tuple(doc["covariate_names"]),
            converged=doc["converged"],
            iterations=doc["iterations"],
            final_gradient_norm=doc["final_gradient_norm"],
            std_errors=np.array(doc["std_errors"], dtype=float),
            loglik=doc["loglik"],
            ridge=doc.get("ridge", 0.0),
            separation=doc.get("separation", False),
            messages=tuple(doc.get("messages", ())),
        )
    if kind == "cox":
        base = np.array(doc["baseline"], dtype=float).reshape(-1, 2)
        return CoxFit(
            beta=np.array(doc["beta"], dtype=float),
            baseline_times=base[:, 0].copy(),
            baseline_hazard=base[:, 1].copy(),
            partial_loglik=doc["partial_loglik"],
            converged=doc["converged"],
            std_errors=np.array(doc["std_errors"], dtype=float),
            covariate_names=tuple(doc["covariate_names"]),
            iterations=doc.get("iterations", 0),
            final_gradient_norm=doc.get("final_gradient_norm", 0.0),
            messages=tuple(doc.get("messages", ())),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: GlmFit | CoxFit, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> GlmFit | CoxFit:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
