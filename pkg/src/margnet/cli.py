# cli.py
"""Command-line entry points.

Every run that writes files also writes a manifest next to its primary
output (sha256 digests of inputs and outputs, the resolved options, seeds,
tool version, wall time), so any artifact can be traced back to the exact
invocation that produced it and reruns can be checked byte for byte.

Exit codes: 0 success, 1 usage, 2 validation failure (bad files, bad
config, incompatible checkpoint), 3 runtime failure (zero-weight evidence
and similar).
"""
from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bn import BayesNet, BNError, load_network, save_network
from .exact import ImpossibleEvidenceError, NetworkTooLargeError
from .graphgen import GenSpec, generate, preset, preset_names
from .infer import METHODS, ZeroWeightError, run_method
from .metrics import (convergence_curve, load_testset, make_testset,
                      pca_2d, save_testset, write_curve_csv,
                      write_embeddings_csv, write_projection_csv)
from .net import (CheckpointError, NetConfig, check_compatible,
                  extract_embedding, load_params, make_rng, save_params,
                  train_stream)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_evidence(doc, n: int) -> dict[int, int]:
    """Evidence maps node ids to booleans (or 0/1). Keys may be ints or
    decimal strings; anything else is rejected."""
    if not isinstance(doc, dict):
        raise ValueError("evidence must be a JSON object of id -> bool")
    out: dict[int, int] = {}
    for key, val in doc.items():
        try:
            i = int(key)
        except (TypeError, ValueError):
            raise ValueError(f"evidence key {key!r} is not a node id") from None
        if not 0 <= i < n:
            raise ValueError(f"evidence node {i} outside [0, {n})")
        if i in out:
            raise ValueError(f"evidence node {i} given twice")
        if isinstance(val, bool):
            out[i] = int(val)
        elif val in (0, 1):
            out[i] = int(val)
        else:
            raise ValueError(f"evidence value for node {i} must be a boolean")
    return out


def _load_evidence_file(path, n: int) -> dict[int, int]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return parse_evidence(doc, n)


def _write_manifest(command: str, options: dict, seeds: dict,
                    inputs: list, outputs: list, t0: float,
                    manifest_path) -> None:
    doc = {
        "command": command,
        "options": options,
        "seeds": seeds,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
@click.version_option(__version__, prog_name="margnet")
def cli():
    """Binary-network generation, training, inference, and serving."""


@cli.command()
@click.option("--preset", "preset_name", type=click.Choice(preset_names()),
              default=None, help="Named graph preset; overrides the size flags.")
@click.option("--layers", type=int, default=3, show_default=True)
@click.option("--nodes-per-layer", type=int, default=8, show_default=True)
@click.option("--max-parents", type=int, default=3, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True,
              help="Beta(alpha, alpha) concentration for CPT entries.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--type-cap", type=int, default=3, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def gen(preset_name, layers, nodes_per_layer, max_parents, alpha, seed, type_cap, out_path):
    """Generate a layered random network and write it as JSON."""
    t0 = time.perf_counter()
    if preset_name is not None:
        spec = preset(preset_name)
    else:
        spec = GenSpec(seed=seed, layers=layers, nodes_per_layer=nodes_per_layer,
                       max_parents=max_parents, cpt_concentration=alpha)
    net = generate(spec, type_cap=type_cap)
    save_network(net, out_path)
    _write_manifest("gen", {
        "preset": preset_name, "layers": spec.layers,
        "nodes_per_layer": spec.nodes_per_layer, "max_parents": spec.max_parents,
        "alpha": spec.cpt_concentration, "type_cap": type_cap,
    }, {"seed": spec.seed}, [], [out_path], t0, str(out_path) + ".manifest.json")
    click.echo(f"wrote {out_path} ({net.n} nodes)")


@cli.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--steps", type=int, required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Network/optimizer config JSON; defaults apply if omitted.")
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--loss-csv", "loss_path", type=click.Path(dir_okay=False), default=None,
              help="Loss curve CSV path; defaults to <out>.loss.csv.")
def train(net_path, steps, config_path, seed, out_path, loss_path):
    """Train the marginaliser on a network and write a checkpoint."""
    t0 = time.perf_counter()
    if steps < 1:
        raise ValueError("--steps must be >= 1")
    net = load_network(net_path)
    inputs = [net_path]
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        raw.setdefault("n_nodes", net.n)
        config = NetConfig.from_dict(raw)
        inputs.append(config_path)
    else:
        config = NetConfig(n_nodes=net.n)
    if config.n_nodes != net.n:
        raise ValueError(f"config n_nodes {config.n_nodes} != network size {net.n}")
    if seed is not None:
        config = replace(config, seed=seed)
    config.check()
    result = train_stream(net, config, steps)
    save_params(result.params, out_path)
    if loss_path is None:
        loss_path = str(out_path) + ".loss.csv"
    with open(loss_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,loss\n")
        for s, raw_l in enumerate(result.losses):
            fh.write(f"{s},{float(raw_l)!r}\n")
    _write_manifest("train", {
        "steps": steps, "config": config.to_dict(),
    }, {"seed": config.seed}, inputs, [out_path, loss_path], t0,
        str(out_path) + ".manifest.json")
    click.echo(f"wrote {out_path} (final loss {result.smoothed[-1]:.4f})")


@cli.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--evidence", "evidence_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(METHODS), default="um-seq", show_default=True)
@click.option("--beta", type=float, default=0.0, show_default=True)
@click.option("--m", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def infer(net_path, ckpt_path, evidence_path, method, beta, m, seed, out_path):
    """Estimate posterior marginals for one evidence set."""
    t0 = time.perf_counter()
    net = load_network(net_path)
    inputs = [net_path, evidence_path]
    params = None
    if ckpt_path is not None:
        params = load_params(ckpt_path)
        check_compatible(params, net)
        inputs.append(ckpt_path)
    evidence = _load_evidence_file(evidence_path, net.n)
    result = run_method(net, params, method, evidence, m, seed, beta=beta)
    with open(out_path, "w", encoding="utf-8") as fh:
        # to_json_dict already carries the documented field order
        json.dump(result.to_json_dict(), fh, indent=2)
        fh.write("\n")
    _write_manifest("infer", {
        "method": method, "beta": beta, "m": m,
    }, {"seed": seed}, inputs, [out_path], t0, str(out_path) + ".manifest.json")
    click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cases", type=int, required=True)
@click.option("--ev-min", type=int, default=1, show_default=True)
@click.option("--ev-max", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def testset(net_path, cases, ev_min, ev_max, seed, out_path):
    """Build a ground-truth test set by exact enumeration."""
    t0 = time.perf_counter()
    net = load_network(net_path)
    rng = make_rng(seed)
    ts = make_testset(net, cases, (ev_min, ev_max), rng)
    save_testset(ts, out_path, net_name=net.name)
    _write_manifest("testset", {
        "cases": cases, "ev_min": ev_min, "ev_max": ev_max,
    }, {"seed": seed}, [net_path], [out_path], t0, str(out_path) + ".manifest.json")
    click.echo(f"wrote {out_path} ({len(ts)} cases)")


@cli.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--testset", "testset_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--methods", default="prior,um-seq", show_default=True,
              help="Comma-separated subset of " + ",".join(METHODS) + ".")
@click.option("--m-grid", default="1000,10000,100000", show_default=True,
              help="Comma-separated sample counts.")
@click.option("--beta", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", "out_dir", required=True, type=click.Path(file_okay=False))
def bench(net_path, ckpt_path, testset_path, methods, m_grid, beta, seed, out_dir):
    """Convergence curves per method over a sample-count grid."""
    t0 = time.perf_counter()
    net = load_network(net_path)
    inputs = [net_path, testset_path]
    params = None
    if ckpt_path is not None:
        params = load_params(ckpt_path)
        check_compatible(params, net)
        inputs.append(ckpt_path)
    cases = load_testset(testset_path)
    method_list = [s.strip() for s in methods.split(",") if s.strip()]
    for meth in method_list:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}; expected one of {METHODS}")
    grid = [int(s) for s in m_grid.split(",") if s.strip()]
    if not grid or any(m < 1 for m in grid):
        raise ValueError("--m-grid must list positive integers")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for meth in method_list:
        rows = convergence_curve(net, params, meth, cases, grid, seed, beta=beta)
        path = out / f"curve_{meth}.csv"
        write_curve_csv(rows, path)
        written.append(path)
        click.echo(f"wrote {path}")
    _write_manifest("bench", {
        "methods": method_list, "m_grid": grid, "beta": beta,
    }, {"seed": seed}, inputs, written, t0, out / "manifest.json")


@cli.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--evidence-dir", "evidence_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--pca", "pca_path", type=click.Path(dir_okay=False), default=None,
              help="Also write a 2-d projection CSV of the embeddings.")
def embed(ckpt_path, evidence_dir, out_path, pca_path):
    """Embed every evidence file in a directory (sorted by file name)."""
    t0 = time.perf_counter()
    params = load_params(ckpt_path)
    n = params.config.n_nodes
    files = sorted(p for p in Path(evidence_dir).iterdir()
                   if p.is_file() and p.suffix == ".json")
    if not files:
        raise ValueError(f"no .json evidence files in {evidence_dir}")
    from .encoding import encode
    rows = []
    for p in files:
        evidence = _load_evidence_file(p, n)
        rows.append(extract_embedding(params, encode(evidence, n)))
    emb = np.stack(rows)
    write_embeddings_csv(emb, out_path)
    outputs = [out_path]
    if pca_path is not None:
        coords, _ = pca_2d(emb)
        write_projection_csv(coords, pca_path)
        outputs.append(pca_path)
    _write_manifest("embed", {
        "evidence_files": [str(p) for p in files],
    }, {}, [ckpt_path] + files, outputs, t0, str(out_path) + ".manifest.json")
    click.echo(f"wrote {out_path} ({len(files)} cases)")


@cli.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--m-cap", type=int, default=10 ** 6, show_default=True,
              help="Largest sample count a single request may ask for.")
@click.option("--static-dir", type=click.Path(file_okay=False), default=None,
              help="Optional directory of UI files to serve at /.")
def serve(net_path, ckpt_path, host, port, m_cap, static_dir):
    """Run the HTTP inference service."""
    import uvicorn

    from .service import create_app
    net = load_network(net_path)
    params = load_params(ckpt_path)
    check_compatible(params, net)
    app = create_app(net, params, net_digest=_sha256(net_path),
                     ckpt_digest=_sha256(ckpt_path), m_cap=m_cap,
                     static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (BNError, CheckpointError, NetworkTooLargeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (ZeroWeightError, ImpossibleEvidenceError, FloatingPointError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
