"""Model files and CSV datasets.

Model files are JSON with every float array encoded as base64 of its
little-endian 64-bit bytes, so save/load round-trips are bitwise exact.
CSV datasets carry numeric feature columns plus one label column whose
class names map to indices in order of first appearance.
"""

import base64
import csv
import json
from dataclasses import dataclass

import numpy as np

from . import regression
from .classifier import ClassStats, LdrrFModel, LdrrModel
from .errors import (
    CsvParseError,
    MissingLabelColumnError,
    ModelFileError,
    NonNumericFeatureError,
    VersionMismatchError,
)
from .regression import LabeledDataset, RegressionFit

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# array and penalty encoding


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def decode_array(obj: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(obj["data"].encode("ascii"), validate=True)
        arr = np.frombuffer(raw, dtype="<f8").reshape(obj["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"bad array encoding: {exc}") from exc
    return arr.astype(np.float64, copy=True)


_PENALTY_KINDS = {
    regression.NoPenalty: "none",
    regression.Lasso: "lasso",
    regression.ElasticNet: "enet",
    regression.Ridge: "ridge",
    regression.GroupLassoRidge: "grplasso",
    regression.ReducedRank: "rr",
    regression.ReducedRankRidge: "rr-ridge",
    regression.FixedRank: "fixed-rank",
}


def penalty_to_dict(penalty: regression.Penalty) -> dict:
    kind = _PENALTY_KINDS.get(type(penalty))
    if kind is None:
        raise TypeError(f"unknown penalty {penalty!r}")
    out = {"kind": kind}
    for name in ("lam", "alpha", "rank", "ridge"):
        if hasattr(penalty, name):
            out[name] = getattr(penalty, name)
    return out


def penalty_from_dict(obj: dict) -> regression.Penalty:
    kinds = {v: k for k, v in _PENALTY_KINDS.items()}
    try:
        cls = kinds[obj["kind"]]
    except KeyError as exc:
        raise ModelFileError(f"unknown penalty kind in model file: {obj!r}") from exc
    args = {k: v for k, v in obj.items() if k != "kind"}
    try:
        return cls(**args)
    except TypeError as exc:
        raise ModelFileError(f"bad penalty fields {obj!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# model files


@dataclass
class LoadedModel:
    model: "LdrrModel | LdrrFModel"
    class_names: list[str]
    feature_names: list[str] | None
    meta: dict


def _stats_to_dict(stats: ClassStats) -> dict:
    return {
        "means": encode_array(stats.means),
        "priors": encode_array(stats.priors),
        "counts": [int(c) for c in stats.counts],
    }


def _stats_from_dict(obj: dict) -> ClassStats:
    return ClassStats(
        means=decode_array(obj["means"]),
        priors=decode_array(obj["priors"]),
        counts=np.array(obj["counts"], dtype=int),
    )


def _fit_to_dict(fit: RegressionFit) -> dict:
    return {
        "objective": fit.objective,
        "n_sweeps": fit.n_sweeps,
        "converged": fit.converged,
        "selected_rank": fit.selected_rank,
    }


def save_model(model: "LdrrModel | LdrrFModel", path: str,
               class_names: list[str] | None = None,
               feature_names: list[str] | None = None,
               meta: dict | None = None) -> None:
    """Write a fitted model to a JSON file; arrays round-trip bitwise."""
    if class_names is None:
        class_names = [str(i) for i in range(model.n_classes)]
    if len(class_names) != model.n_classes:
        raise ValueError("class_names length does not match the model")
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "subspace" if isinstance(model, LdrrFModel) else "linear",
        "penalty": penalty_to_dict(model.penalty),
        "class_names": list(class_names),
        "feature_names": list(feature_names) if feature_names is not None else None,
        "center": encode_array(model.center),
        "scale": None if model.scale is None else encode_array(model.scale),
        "stats": _stats_to_dict(model.stats),
        "fit": _fit_to_dict(model.fit),
        "meta": meta or {},
    }
    if isinstance(model, LdrrFModel):
        doc["arrays"] = {
            "coefs": encode_array(model.coefs),
            "between": encode_array(model.between),
            "within": encode_array(model.within),
            "directions": encode_array(model.directions),
            "eigenvalues": encode_array(model.eigenvalues),
        }
        doc["k"] = model.k
    else:
        doc["arrays"] = {
            "coefs": encode_array(model.coefs),
            "link": encode_array(model.link),
            "discriminant": encode_array(model.discriminant),
            "link_singular_values": encode_array(model.link_singular_values),
        }
    text = json.dumps(doc, indent=2, sort_keys=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text + "\n")


def load_model(path: str) -> LoadedModel:
    """Read a model file back; raises typed errors on any defect."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"model file {path} is not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model file has format_version {version!r}, this build reads {FORMAT_VERSION}"
        )
    try:
        penalty = penalty_from_dict(doc["penalty"])
        stats = _stats_from_dict(doc["stats"])
        center = decode_array(doc["center"])
        scale = None if doc["scale"] is None else decode_array(doc["scale"])
        arrays = {k: decode_array(v) for k, v in doc["arrays"].items()}
        fit_info = doc["fit"]
        kind = doc["kind"]
        class_names = [str(s) for s in doc["class_names"]]
        feature_names = doc["feature_names"]
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"model file {path} is missing fields: {exc}") from exc
    fit = RegressionFit(
        coefs=arrays["coefs"], penalty=penalty,
        objective=float(fit_info["objective"]),
        n_sweeps=int(fit_info["n_sweeps"]),
        converged=bool(fit_info["converged"]),
        selected_rank=fit_info["selected_rank"],
    )
    if kind == "linear":
        model: LdrrModel | LdrrFModel = LdrrModel(
            coefs=arrays["coefs"],
            link=arrays["link"],
            discriminant=arrays["discriminant"],
            stats=stats,
            penalty=penalty,
            center=center,
            scale=scale,
            link_singular_values=arrays["link_singular_values"],
            fit=fit,
        )
    elif kind == "subspace":
        model = LdrrFModel(
            coefs=arrays["coefs"],
            between=arrays["between"],
            within=arrays["within"],
            directions=arrays["directions"],
            eigenvalues=arrays["eigenvalues"],
            k=int(doc["k"]),
            stats=stats,
            penalty=penalty,
            center=center,
            scale=scale,
            fit=fit,
        )
    else:
        raise ModelFileError(f"unknown model kind {kind!r}")
    return LoadedModel(
        model=model, class_names=class_names,
        feature_names=feature_names, meta=doc.get("meta", {}),
    )


# ---------------------------------------------------------------------------
# CSV datasets


@dataclass
class CsvData:
    """Parsed CSV: numeric features plus an optional label column."""

    features: np.ndarray
    feature_names: list[str]
    labels: np.ndarray | None       # int indices into class_names
    class_names: list[str] | None

    def to_dataset(self) -> LabeledDataset:
        if self.labels is None:
            raise MissingLabelColumnError("dataset has no labels")
        return LabeledDataset.from_labels(
            self.features, self.labels, n_classes=len(self.class_names)
        )


def load_csv_dataset(path: str, label_column: str = "label",
                     class_names: list[str] | None = None,
                     require_label: bool = True) -> CsvData:
    """Read a CSV with numeric feature columns and one label column.

    Unknown class names extend the mapping in first-appearance order
    unless class_names is given, in which case unseen names are errors.
    Without a label column the file is accepted when require_label is
    false (prediction inputs).
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CsvParseError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise CsvParseError(f"{path} is not text: {exc}") from exc
    if not rows:
        raise CsvParseError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CsvParseError(f"{path} has duplicate column names")
    if label_column in header:
        label_pos = header.index(label_column)
    elif require_label:
        raise MissingLabelColumnError(
            f"{path} has no column named {label_column!r}"
        )
    else:
        label_pos = None
    feature_names = [h for i, h in enumerate(header) if i != label_pos]

    fixed_classes = class_names is not None
    names: list[str] = list(class_names) if fixed_classes else []
    index = {c: i for i, c in enumerate(names)}
    features = []
    labels: list[int] = []
    for r, row in enumerate(rows[1:], start=2):  # row numbers count the header
        if len(row) != len(header):
            raise CsvParseError(
                f"{path} row {r}: expected {len(header)} cells, got {len(row)}"
            )
        vals = []
        for i, cell in enumerate(row):
            if i == label_pos:
                name = cell.strip()
                if name not in index:
                    if fixed_classes:
                        raise CsvParseError(
                            f"{path} row {r}: unknown class {name!r}"
                        )
                    index[name] = len(names)
                    names.append(name)
                labels.append(index[name])
            else:
                try:
                    vals.append(float(cell))
                except ValueError as exc:
                    raise NonNumericFeatureError(
                        f"{path} row {r}, column {header[i]!r}: "
                        f"cannot parse {cell!r}"
                    ) from exc
        features.append(vals)
    if not features:
        raise CsvParseError(f"{path} has a header but no data rows")
    return CsvData(
        features=np.array(features, dtype=float),
        feature_names=feature_names,
        labels=np.array(labels, dtype=int) if label_pos is not None else None,
        class_names=names if label_pos is not None or fixed_classes else None,
    )
