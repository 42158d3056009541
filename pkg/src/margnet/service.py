# service.py
"""HTTP inference service consumed by the explorer UI.

Endpoints:
  GET  /api/graph   structure (id, name, parents, depth_type per node)
  POST /api/infer   {"evidence": {id: bool}, "method", "beta", "m", "seed"}
  POST /api/embed   {"evidence": {id: bool}} -> embedding + 2-d projection
  GET  /api/health  version and artifact digests

Error codes: 400 malformed evidence or unknown node, 409 zero-weight
evidence, 422 method or parameter validation.

The service holds only immutable artifacts (network, parameters, a
projection basis fitted once at startup), and every request with a seed is
answered with a byte-identical body on repeat; wall time travels in the
X-Wall-Time-S response header so it never perturbs the body.
"""
from __future__ import annotations

import time

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from . import __version__
from .bn import BayesNet
from .encoding import encode, mask_samples
from .infer import METHODS, ZeroWeightError, run_method
from .metrics import fit_pca2
from .net import NetParams, extract_embedding, forward, make_rng

PCA_REFERENCE_CASES = 256
PCA_REFERENCE_SEED = 0


def _reference_projection(net: BayesNet, params: NetParams):
    """Projection basis from a fixed cloud of masked forward samples, so
    every embedding lands in one stable 2-d frame."""
    from .kernels import ancestral_batch
    c = net.compiled
    rng = make_rng(PCA_REFERENCE_SEED)
    u = rng.random((PCA_REFERENCE_CASES, net.n))
    samples = ancestral_batch(c.parent_flat, c.parent_off, c.cpt_flat, c.cpt_off, u)
    enc = mask_samples(samples, rng)
    emb = forward(params, enc, mode="eval").embed_post
    return fit_pca2(emb)


def create_app(net: BayesNet, params: NetParams, net_digest: str = "",
               ckpt_digest: str = "", m_cap: int = 10 ** 6,
               static_dir=None) -> FastAPI:
    if params.config.embedding_dim < 2:
        raise ValueError("serving needs an embedding dimension of at least 2")
    app = FastAPI(title="margnet", version=__version__)
    pca = _reference_projection(net, params)

    graph_doc = {
        "name": net.name,
        "nodes": [
            {
                "id": nd.id,
                "name": nd.name,
                "parents": list(nd.parents),
                "depth_type": nd.depth_type,
            }
            for nd in net.nodes
        ],
    }

    def _evidence_from_body(body) -> dict[int, int]:
        from .cli import parse_evidence
        if not isinstance(body, dict):
            raise HTTPException(400, "request body must be a JSON object")
        try:
            return parse_evidence(body.get("evidence", {}), net.n)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc

    @app.get("/api/graph")
    def graph():
        return graph_doc

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "net_digest": net_digest,
            "ckpt_digest": ckpt_digest,
            "n_nodes": net.n,
        }

    @app.post("/api/infer")
    async def infer(request: Request):
        try:
            body = await request.json()
        except Exception as exc:
            raise HTTPException(400, "request body is not valid JSON") from exc
        evidence = _evidence_from_body(body)
        method = body.get("method", "um")
        beta = body.get("beta", 0.0)
        m = body.get("m", 1000)
        seed = body.get("seed", 0)
        if method not in METHODS:
            raise HTTPException(422, f"unknown method {method!r}; expected one of {list(METHODS)}")
        if not isinstance(beta, (int, float)) or isinstance(beta, bool) or not 0.0 <= beta <= 1.0:
            raise HTTPException(422, "beta must be a number in [0, 1]")
        if not isinstance(m, int) or isinstance(m, bool) or m < 1:
            raise HTTPException(422, "m must be a positive integer")
        if m > m_cap:
            raise HTTPException(422, f"m exceeds the service cap of {m_cap}")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise HTTPException(422, "seed must be an integer")
        t0 = time.perf_counter()
        try:
            result = run_method(net, params, method, evidence, m, seed, beta=float(beta))
        except ZeroWeightError as exc:
            raise HTTPException(409, str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return JSONResponse(result.to_json_dict(),
                            headers={"X-Wall-Time-S": f"{time.perf_counter() - t0:.6f}"})

    @app.post("/api/embed")
    async def embed(request: Request):
        try:
            body = await request.json()
        except Exception as exc:
            raise HTTPException(400, "request body is not valid JSON") from exc
        evidence = _evidence_from_body(body)
        t0 = time.perf_counter()
        emb = extract_embedding(params, encode(evidence, net.n))
        proj = pca.transform(emb)[0]
        return JSONResponse({
            "embedding": [float(v) for v in emb],
            "projection": [float(proj[0]), float(proj[1])],
        }, headers={"X-Wall-Time-S": f"{time.perf_counter() - t0:.6f}"})

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
