"""Versioned model artifact: fitted preprocessing, selected features, network
weights, and the per-package verdict path."""

from __future__ import annotations

import base64
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import explain, featsel
from . import neuralnet as nn
from .dataset import FeatureManifest, TraceDataset
from .errors import CorruptArtifact, MissingFeature, VersionMismatch
from .preprocess import Preprocessor

ARTIFACT_VERSION = 1


def _encode(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).copy()


@dataclass
class ModelArtifact:
    manifest: FeatureManifest
    preprocessor: Preprocessor
    selected: tuple[str, ...]
    selector_provenance: dict  # method, p_j, d_j, objective, alpha
    params: nn.NetworkParams
    threshold: float = 0.5
    fingerprint: dict = field(default_factory=dict)  # seed, train config, dataset hash
    background: np.ndarray | None = None  # projected training rows for explanations

    def to_dict(self) -> dict:
        return {
            "version": ARTIFACT_VERSION,
            "manifest": self.manifest.to_dict(),
            "preprocessor": self.preprocessor.to_dict(),
            "selected": list(self.selected),
            "selector_provenance": self.selector_provenance,
            "network": {
                "spec": self.params.spec.to_dict(),
                "weights": [_encode(w) for w in self.params.weights],
                "biases": [_encode(b) for b in self.params.biases],
            },
            "threshold": self.threshold,
            "fingerprint": self.fingerprint,
            "background": _encode(self.background) if self.background is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArtifact":
        if d.get("version") != ARTIFACT_VERSION:
            raise VersionMismatch(f"unsupported artifact version: {d.get('version')!r}")
        spec = nn.NetworkSpec.from_dict(d["network"]["spec"])
        params = nn.NetworkParams(
            spec,
            [_decode(w) for w in d["network"]["weights"]],
            [_decode(b) for b in d["network"]["biases"]],
        )
        return cls(
            manifest=FeatureManifest.from_dict(d["manifest"]),
            preprocessor=Preprocessor.from_dict(d["preprocessor"]),
            selected=tuple(d["selected"]),
            selector_provenance=d["selector_provenance"],
            params=params,
            threshold=d["threshold"],
            fingerprint=d["fingerprint"],
            background=_decode(d["background"]) if d.get("background") else None,
        )


def dataset_hash(ds: TraceDataset) -> str:
    h = hashlib.sha256()
    for pkg, row, label in zip(ds.ids, ds.rows, ds.labels):
        h.update(pkg.encode())
        h.update(str(label).encode())
        for name in ds.manifest.feature_names():
            h.update(repr(row[name]).encode())
    return h.hexdigest()


def save_artifact(artifact: ModelArtifact, path) -> None:
    payload = json.dumps(artifact.to_dict(), sort_keys=True, separators=(",", ":"))
    checksum = hashlib.sha256(payload.encode()).hexdigest()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"checksum": checksum, "payload": payload}, fh)
        fh.write("\n")


def load_artifact(path) -> ModelArtifact:
    try:
        with open(path, encoding="utf-8") as fh:
            wrapper = json.load(fh)
        payload = wrapper["payload"]
        checksum = wrapper["checksum"]
    except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise CorruptArtifact(f"unreadable artifact file: {exc}")
    if hashlib.sha256(payload.encode()).hexdigest() != checksum:
        raise CorruptArtifact("checksum mismatch")
    return ModelArtifact.from_dict(json.loads(payload))


@dataclass(frozen=True)
class VerdictReport:
    package: str
    probability: float
    verdict: str  # "benign" | "malicious"
    attributions: list | None
    latency_ms: float

    def to_dict(self) -> dict:
        return {
            "package": self.package,
            "probability": self.probability,
            "verdict": self.verdict,
            "attributions": self.attributions,
            "latency_ms": self.latency_ms,
        }


def _record_to_dataset(artifact: ModelArtifact, package: str, record: dict) -> TraceDataset:
    cells = {}
    for col in artifact.manifest.columns:
        if col.name not in record:
            raise MissingFeature(col.name)
        value = record[col.name]
        cells[col.name] = float(value) if col.kind == "numeric" else str(value)
    return TraceDataset(artifact.manifest, (package,), (cells,), (0,))


def predict_package(
    artifact: ModelArtifact,
    record: dict,
    package: str = "package",
    explain_verdict: bool = False,
    top_k: int = 5,
) -> VerdictReport:
    """Transform, project, score, threshold; optionally attach SHAP attributions."""
    started = time.perf_counter()
    ds = _record_to_dataset(artifact, package, record)
    pm = artifact.preprocessor.transform(ds)
    projected = featsel.project(pm, artifact.selected)
    probability = float(nn.predict_proba(artifact.params, projected.X)[0])
    verdict = "malicious" if probability >= artifact.threshold else "benign"

    attributions = None
    if explain_verdict:
        if artifact.background is None:
            raise ValueError("artifact carries no background sample for explanations")
        groups = explain.feature_groups(projected)
        d = len(groups)
        budget = "exact" if d <= explain.KERNEL_ENUM_LIMIT else 2048
        attr = explain.kernel_shap(
            lambda rows: nn.predict_proba(artifact.params, rows),
            projected.X[0],
            artifact.background,
            groups,
            budget=budget,
        )
        attributions = [
            {"feature": f, "phi": p} for f, p in attr.ranked()[:top_k]
        ]
    latency_ms = (time.perf_counter() - started) * 1000.0
    return VerdictReport(package, probability, verdict, attributions, latency_ms)
