# metrics.py
"""Evaluation: ground-truth test sets, error metrics, convergence curves,
and the embedding analytics (2-d principal components, ridge probes).

Ground truth comes from exact enumeration, so test sets are restricted to
networks small enough to enumerate. Evidence values are read off a forward
sample of the network restricted to the chosen nodes, which guarantees the
evidence has positive probability.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .bn import BayesNet
from .exact import enumerate_posterior
from .infer import InferenceResult, run_method
from .net import NetParams


@dataclass(frozen=True)
class EvalCase:
    evidence: dict[int, int]
    truth: np.ndarray            # exact marginals, float64 (n,)
    provenance: dict


def make_testset(net: BayesNet, n_cases: int,
                 evidence_size_range: tuple[int, int],
                 rng: np.random.Generator) -> list[EvalCase]:
    """Evidence nodes chosen uniformly without replacement, values taken
    from a fresh forward sample, truth by enumeration."""
    lo, hi = evidence_size_range
    if not 0 <= lo <= hi <= net.n:
        raise ValueError("evidence size range must satisfy 0 <= lo <= hi <= n")
    c = net.compiled
    from .kernels import ancestral_batch
    cases = []
    for _ in range(n_cases):
        k = int(rng.integers(lo, hi + 1))
        chosen = np.sort(rng.choice(net.n, size=k, replace=False))
        u = rng.random((1, net.n))
        sample = ancestral_batch(c.parent_flat, c.parent_off, c.cpt_flat, c.cpt_off, u)[0]
        evidence = {int(i): int(sample[i]) for i in chosen}
        truth = enumerate_posterior(net, evidence)
        cases.append(EvalCase(evidence, truth, {"kind": "enumeration"}))
    return cases


def save_testset(cases: list[EvalCase], path, net_name: str = "") -> None:
    doc = {
        "net_name": net_name,
        "cases": [
            {
                "evidence": {str(i): int(v) for i, v in c.evidence.items()},
                "truth": [float(p) for p in c.truth],
                "provenance": c.provenance,
            }
            for c in cases
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_testset(path) -> list[EvalCase]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    cases = []
    for c in doc["cases"]:
        cases.append(EvalCase(
            evidence={int(i): int(v) for i, v in c["evidence"].items()},
            truth=np.asarray(c["truth"], dtype=np.float64),
            provenance=dict(c.get("provenance", {})),
        ))
    return cases


def _unobserved_mask(n: int, evidence: dict[int, int]) -> np.ndarray:
    mask = np.ones(n, dtype=np.bool_)
    for i in evidence:
        mask[i] = False
    return mask


def mae(pred: np.ndarray, truth: np.ndarray, evidence: dict[int, int]) -> float:
    """Mean absolute error over unobserved nodes only."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth must have equal length")
    mask = _unobserved_mask(pred.shape[0], evidence)
    if not mask.any():
        return 0.0
    return float(np.mean(np.abs(pred[mask] - truth[mask])))


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    if a.size < 2:
        return None
    ac = a - a.mean()
    bc = b - b.mean()
    ssa = float(ac @ ac)
    ssb = float(bc @ bc)
    if ssa == 0.0 or ssb == 0.0:
        return None
    r = float(ac @ bc) / np.sqrt(ssa * ssb)
    return float(min(max(r, -1.0), 1.0))


def pcc(pred: np.ndarray, truth: np.ndarray, evidence: dict[int, int]) -> float | None:
    """Pearson correlation over the unobserved entries; None when either
    side has zero variance or fewer than two entries remain."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth must have equal length")
    mask = _unobserved_mask(pred.shape[0], evidence)
    return _pearson(pred[mask], truth[mask])


def pooled_pcc(preds: list[np.ndarray], cases: list[EvalCase]) -> float | None:
    """One correlation over the concatenated unobserved entries of every
    case."""
    xs, ys = [], []
    for pred, case in zip(preds, cases):
        mask = _unobserved_mask(len(case.truth), case.evidence)
        xs.append(np.asarray(pred, dtype=np.float64)[mask])
        ys.append(case.truth[mask])
    if not xs:
        return None
    return _pearson(np.concatenate(xs), np.concatenate(ys))


def mean_case_pcc(preds: list[np.ndarray], cases: list[EvalCase]) -> float | None:
    """Average of the per-case correlations, skipping undefined cases."""
    vals = [pcc(p, c.truth, c.evidence) for p, c in zip(preds, cases)]
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass(frozen=True)
class CurvePoint:
    m: int
    mae: float
    pcc: float | None          # pooled across cases
    pcc_case_mean: float | None
    ess: float | None          # mean across cases; None for method "um"
    seed: int


def evaluate_method(net: BayesNet, params: NetParams | None, method: str,
                    cases: list[EvalCase], m: int, seed: int,
                    beta: float = 0.0) -> tuple[list[InferenceResult], CurvePoint]:
    """Run one method at one sample budget over a whole test set."""
    results = [run_method(net, params, method, c.evidence, m, seed, beta=beta)
               for c in cases]
    preds = [r.marginals for r in results]
    maes = [mae(p, c.truth, c.evidence) for p, c in zip(preds, cases)]
    esses = [r.ess for r in results if r.ess is not None]
    point = CurvePoint(
        m=m,
        mae=float(np.mean(maes)) if maes else 0.0,
        pcc=pooled_pcc(preds, cases),
        pcc_case_mean=mean_case_pcc(preds, cases),
        ess=float(np.mean(esses)) if esses else None,
        seed=seed,
    )
    return results, point


def convergence_curve(net: BayesNet, params: NetParams | None, method: str,
                      cases: list[EvalCase], m_grid: list[int],
                      base_seed: int, beta: float = 0.0) -> list[CurvePoint]:
    """One fresh run per grid point; the per-point seed is recorded so any
    row can be reproduced on its own."""
    rows = []
    for k, m in enumerate(m_grid):
        seed = base_seed + k
        _, point = evaluate_method(net, params, method, cases, m, seed, beta=beta)
        rows.append(point)
    return rows


def write_curve_csv(rows: list[CurvePoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "mae", "pcc", "ess", "seed"])
        for r in rows:
            w.writerow([
                r.m,
                repr(r.mae),
                "" if r.pcc is None else repr(r.pcc),
                "" if r.ess is None else repr(r.ess),
                r.seed,
            ])


# ---------------------------------------------------------------------------
# Embedding analytics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PCA2:
    mean: np.ndarray          # (d,)
    components: np.ndarray    # (2, d), rows unit-norm
    explained: np.ndarray     # (2,) eigenvalues, descending

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(X) - self.mean) @ self.components.T


def fit_pca2(X: np.ndarray) -> PCA2:
    """Top-2 principal axes via the symmetric eigen-solver; deterministic
    sign convention: first nonzero loading of each axis is positive."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two vectors")
    if X.shape[1] < 2:
        raise ValueError("need at least two dimensions")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:2]
    comps = vecs[:, order].T.copy()
    for r in range(2):
        nz = np.flatnonzero(np.abs(comps[r]) > 1e-12)
        if nz.size and comps[r, nz[0]] < 0:
            comps[r] = -comps[r]
    return PCA2(mean, comps, np.maximum(vals[order], 0.0))


def pca_2d(embeddings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates in the top-2 principal plane plus the explained-variance
    pair."""
    model = fit_pca2(np.asarray(embeddings, dtype=np.float64))
    return model.transform(embeddings), model.explained


@dataclass(frozen=True)
class RidgeModel:
    mean: np.ndarray       # feature means (d,)
    weights: np.ndarray    # (d, n_labels)
    intercept: np.ndarray  # (n_labels,)
    lam: float


def ridge_fit(features: np.ndarray, labels: np.ndarray, lam: float) -> RidgeModel:
    """Closed-form ridge per label column; features centred, intercept left
    unpenalised."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    X = np.asarray(features, dtype=np.float64)
    Y = np.atleast_2d(np.asarray(labels, dtype=np.float64).T).T
    mean = X.mean(axis=0)
    Xc = X - mean
    ybar = Y.mean(axis=0)
    A = Xc.T @ Xc + lam * np.eye(X.shape[1])
    W = np.linalg.solve(A, Xc.T @ (Y - ybar))
    return RidgeModel(mean, W, ybar, float(lam))


def ridge_predict(model: RidgeModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores and 0.5-thresholded labels."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    scores = (X - model.mean) @ model.weights + model.intercept
    return (scores >= 0.5).astype(np.uint8), scores


def classification_report(pred: np.ndarray, truth: np.ndarray) -> dict[str, float]:
    """Micro-averaged F1, precision, recall, accuracy over all label
    entries."""
    p = np.asarray(pred).astype(bool).ravel()
    t = np.asarray(truth).astype(bool).ravel()
    if p.shape != t.shape:
        raise ValueError("pred and truth must have equal shape")
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    tn = int(np.sum(~p & ~t))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (tp + tn) / p.size if p.size else 0.0
    return {"f1": f1, "precision": precision, "recall": recall, "accuracy": accuracy}


def kfold_indices(n: int, k: int, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold split of range(n)."""
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n")
    perm = rng.permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i in range(k):
        test = folds[i]
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        out.append((train, test))
    return out


def cv_f1(features: np.ndarray, labels: np.ndarray, lam: float, k: int,
          rng: np.random.Generator) -> float:
    """Mean out-of-fold micro F1 of the ridge probe."""
    X = np.asarray(features, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    scores = []
    for train, test in kfold_indices(X.shape[0], k, rng):
        model = ridge_fit(X[train], Y[train], lam)
        pred, _ = ridge_predict(model, X[test])
        scores.append(classification_report(pred, Y[test])["f1"])
    return float(np.mean(scores))


def write_embeddings_csv(embeddings: np.ndarray, path) -> None:
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id"] + [f"dim_{d}" for d in range(emb.shape[1])])
        for i, row in enumerate(emb):
            w.writerow([i] + [repr(float(v)) for v in row])


def write_projection_csv(coords: np.ndarray, path) -> None:
    pts = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "pc_0", "pc_1"])
        for i, (x, y) in enumerate(pts):
            w.writerow([i, repr(float(x)), repr(float(y))])
