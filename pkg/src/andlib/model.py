"""Pair sampling, pairwise classifiers, and the two-member ensemble.

The production classifier averages two boosted-tree models: one trained on
the full feature vector and a "nameless" twin trained with every
focal-author name feature blanked. The nameless twin exists to stop the
ensemble from over-trusting name similarity when richer metadata disagrees.

A linear baseline trained on median-imputed features is provided for
ablation runs, behind the same prediction interface.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import blocking
from .corpus import Dataset, NameCountsTable, Signature
from .errors import ConfigError, ParseError, SchemaMismatchError
from .features import (
    FeatureSchema,
    FeatureSpec,
    featurize_pairs,
    featurize_pair,
    mask_nameless,
)
from .gbt import (
    HyperParams,
    P_EPS,
    TreeEnsembleModel,
    Tree,
    fit_boosted_trees,
    sample_hyperparams,
    sigmoid,
)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LabeledPair:
    sig_a: str
    sig_b: str
    label: int
    features: np.ndarray


def sample_pairs(
    dataset: Dataset,
    split: str,
    cap: int,
    seed: int,
    counts: NameCountsTable,
    schema: FeatureSchema,
    source: Dataset | None = None,
) -> list[LabeledPair]:
    """Sample labeled within-block pairs from one split, uniformly without
    replacement, truncated to ``cap``.

    ``source`` lets the caller featurize against a degraded copy of the
    corpus (knockout augmentation) while keeping pair identities and labels
    from the clean one.
    """
    if dataset.splits is None:
        raise ConfigError("dataset has no block splits; run split_blocks first")
    if dataset.gold is None:
        raise ConfigError("pair sampling requires a gold partition")
    if split not in ("train", "val", "test"):
        raise ConfigError(f"unknown split {split!r}")
    blocks = [
        b for b in blocking.build_blocks(dataset) if dataset.splits.get(b.key) == split
    ]
    if not blocks:
        raise ConfigError(f"split {split!r} contains no blocks")
    candidates: list[tuple[str, str]] = []
    for block in blocks:
        members = block.members
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                candidates.append((members[i], members[j]))
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(candidates))
    chosen = [candidates[i] for i in order[: max(cap, 0)]]

    feat_ds = source if source is not None else dataset
    sig_pairs = [
        (feat_ds.signatures[a], feat_ds.signatures[b]) for a, b in chosen
    ]
    X = featurize_pairs(sig_pairs, feat_ds, counts, schema)
    gold = dataset.gold.assignment
    return [
        LabeledPair(a, b, int(gold[a] == gold[b]), X[i])
        for i, (a, b) in enumerate(chosen)
    ]


def pairs_to_arrays(pairs: Sequence[LabeledPair]) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise ConfigError("empty pair list")
    X = np.stack([p.features for p in pairs])
    y = np.array([p.label for p in pairs], dtype=np.float64)
    return X, y


# ---------------------------------------------------------------------------
# classifiers
# ---------------------------------------------------------------------------


def train_gbt(
    pairs: Sequence[LabeledPair],
    hp: HyperParams,
    constraints: Sequence[int],
    seed: int,
    schema: FeatureSchema,
) -> TreeEnsembleModel:
    """Train the boosted-tree pairwise classifier on labeled pairs."""
    X, y = pairs_to_arrays(pairs)
    if X.shape[1] != len(schema):
        raise SchemaMismatchError(
            f"pair vectors have {X.shape[1]} slots, schema has {len(schema)}"
        )
    return fit_boosted_trees(
        X, y, hp, constraints, seed, schema_hash=schema.schema_hash
    )


@dataclass
class LinearModel:
    """Logistic-regression baseline over median-imputed features."""

    weights: np.ndarray
    bias: float
    medians: np.ndarray
    schema_hash: str

    def raw_score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        filled = np.where(np.isnan(X), self.medians, X)
        return filled @ self.weights + self.bias

    def predict_proba(self, v: np.ndarray) -> float | np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        single = v.ndim == 1
        p = np.clip(sigmoid(self.raw_score(v)), P_EPS, 1.0 - P_EPS)
        return float(p[0]) if single else p


def train_linear(
    pairs: Sequence[LabeledPair],
    regularization: float = 1e-3,
    seed: int = 0,
    schema: FeatureSchema | None = None,
) -> LinearModel:
    """Fit the logistic baseline by Newton iteration (deterministic)."""
    X, y = pairs_to_arrays(pairs)
    pos = y.sum()
    if pos == 0 or pos == y.size:
        raise ConfigError("training set contains a single class")
    medians = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        present = col[~np.isnan(col)]
        medians[j] = float(np.median(present)) if present.size else 0.0
    Xf = np.where(np.isnan(X), medians, X)
    # standardize internally for conditioning; fold back into weight space
    mu = Xf.mean(axis=0)
    sd = Xf.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (Xf - mu) / sd
    n, d = Z.shape
    w = np.zeros(d)
    b = float(np.log((pos / n) / (1 - pos / n)))
    Za = np.concatenate([Z, np.ones((n, 1))], axis=1)
    # mean logistic loss with per-sample L2, so replicating the data leaves
    # the optimum unchanged
    for _ in range(50):
        raw = Z @ w + b
        p = np.clip(sigmoid(raw), P_EPS, 1.0 - P_EPS)
        grad_w = Z.T @ (p - y) / n + regularization * w
        grad_b = float(np.mean(p - y))
        if max(np.abs(grad_w).max(), abs(grad_b)) < 1e-10:
            break
        r = p * (1 - p)
        hess = (Za * r[:, None]).T @ Za / n
        hess[:d, :d] += regularization * np.eye(d)
        hess += 1e-12 * np.eye(d + 1)
        step = np.linalg.solve(hess, np.concatenate([grad_w, [grad_b]]))
        w -= step[:d]
        b -= float(step[d])
    weights = w / sd
    bias = b - float(np.dot(weights, mu))
    return LinearModel(
        weights=weights,
        bias=bias,
        medians=medians,
        schema_hash=schema.schema_hash if schema is not None else "",
    )


def predict_proba(model, v: np.ndarray) -> float | np.ndarray:
    """Same-author probability from either classifier kind."""
    return model.predict_proba(v)


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------


@dataclass
class EnsembleClassifier:
    """Mean of the full model and its nameless twin.

    ``nameless_model`` may be None (the "no nameless classifier" ablation),
    in which case the full model's probability is used alone.
    """

    full_model: TreeEnsembleModel | LinearModel
    nameless_model: TreeEnsembleModel | LinearModel | None
    schema: FeatureSchema

    @property
    def schema_hash(self) -> str:
        return self.schema.schema_hash

    def predict_from_features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        p_full = self.full_model.predict_proba(X)
        if self.nameless_model is None:
            return p_full
        p_nameless = self.nameless_model.predict_proba(mask_nameless(X, self.schema))
        return (p_full + p_nameless) / 2.0

    def check_hash(self, schema: FeatureSchema) -> None:
        if schema.schema_hash != self.schema.schema_hash:
            raise SchemaMismatchError(
                "model was trained on a different feature schema"
            )


def predict_ensemble(
    ens: EnsembleClassifier,
    s1: Signature,
    s2: Signature,
    dataset: Dataset,
    counts: NameCountsTable,
    schema: FeatureSchema,
) -> float:
    """Same-author probability for one signature pair."""
    ens.check_hash(schema)
    v = featurize_pair(s1, s2, dataset, counts, schema)
    return float(ens.predict_from_features(v)[0])


# ---------------------------------------------------------------------------
# hyperparameter search
# ---------------------------------------------------------------------------


def tune_hyperparameters(
    train_pairs: Sequence[LabeledPair],
    val_pairs: Sequence[LabeledPair],
    budget: int,
    seed: int,
    constraints: Sequence[int],
    schema: FeatureSchema,
    overrides: dict | None = None,
) -> tuple[HyperParams, float]:
    """Seeded random search maximizing validation AUROC."""
    from .metrics import auroc

    if budget < 1:
        raise ConfigError("tuning budget must be >= 1")
    if not val_pairs:
        raise ConfigError("empty validation pair set")
    Xv, yv = pairs_to_arrays(val_pairs)
    rng = np.random.Generator(np.random.PCG64(seed))
    best_hp: HyperParams | None = None
    best_score = -np.inf
    for trial in range(budget):
        hp = sample_hyperparams(rng, overrides)
        model = train_gbt(train_pairs, hp, constraints, seed, schema)
        score = auroc(model.predict_proba(Xv), yv.astype(int))
        if score > best_score:
            best_score = score
            best_hp = hp
    return best_hp, float(best_score)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _member_to_doc(model) -> dict:
    if isinstance(model, TreeEnsembleModel):
        return {
            "kind": "gbt",
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "constraints": list(model.constraints),
            "trees": [t.to_doc() for t in model.trees],
        }
    if isinstance(model, LinearModel):
        return {
            "kind": "linear",
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "medians": model.medians.tolist(),
        }
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def _member_from_doc(doc: dict, schema_hash: str):
    kind = doc.get("kind")
    if kind == "gbt":
        return TreeEnsembleModel(
            trees=[Tree.from_doc(t) for t in doc["trees"]],
            learning_rate=float(doc["learning_rate"]),
            base_score=float(doc["base_score"]),
            schema_hash=schema_hash,
            constraints=tuple(int(c) for c in doc["constraints"]),
        )
    if kind == "linear":
        return LinearModel(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            medians=np.asarray(doc["medians"], dtype=np.float64),
            schema_hash=schema_hash,
        )
    raise ParseError(f"unknown model kind {kind!r}")


def save_ensemble(
    path: str | os.PathLike,
    ens: EnsembleClassifier,
    hyperparams: HyperParams | None,
    seed: int,
    cluster_params: dict | None = None,
) -> None:
    """Write the self-describing model container."""
    schema = ens.schema
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "schema": {
            "features": [
                [f.name, f.group, f.monotone, f.nameless] for f in schema.features
            ],
            "hash": schema.schema_hash,
        },
        "hyperparams": hyperparams.to_doc() if hyperparams is not None else None,
        "seed": seed,
        "cluster_params": cluster_params,
        "full": _member_to_doc(ens.full_model),
        "nameless": (
            _member_to_doc(ens.nameless_model)
            if ens.nameless_model is not None
            else None
        ),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_ensemble(
    path: str | os.PathLike,
    expected_schema: FeatureSchema | None = None,
) -> tuple[EnsembleClassifier, dict]:
    """Load a model container, refusing on any schema-hash mismatch."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ParseError(
            f"{path}: unsupported model format {doc.get('format_version')!r}"
        )
    schema = FeatureSchema(
        tuple(
            FeatureSpec(name, group, int(mono), bool(nameless))
            for name, group, mono, nameless in doc["schema"]["features"]
        )
    )
    if schema.schema_hash != doc["schema"]["hash"]:
        raise SchemaMismatchError(
            f"{path}: stored schema hash does not match its feature list"
        )
    if expected_schema is not None and expected_schema.schema_hash != schema.schema_hash:
        raise SchemaMismatchError(
            f"{path}: model schema does not match the requested feature schema"
        )
    full = _member_from_doc(doc["full"], schema.schema_hash)
    nameless = (
        _member_from_doc(doc["nameless"], schema.schema_hash)
        if doc.get("nameless") is not None
        else None
    )
    ens = EnsembleClassifier(full_model=full, nameless_model=nameless, schema=schema)
    meta = {
        "hyperparams": doc.get("hyperparams"),
        "seed": doc.get("seed"),
        "cluster_params": doc.get("cluster_params"),
    }
    return ens, meta
