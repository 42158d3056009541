/** DOM rendering for the explorer.  No numbers are computed here; every
 * probability, ESS and coordinate on screen comes out of a service reply
 * held by the controller. */

import type { HealthDoc } from "./api.js";
import { METHODS } from "./api.js";
import type { InferController } from "./controller.js";
import type { EvidenceStore, Tri } from "./store.js";

const TRI_LABEL: Record<Tri, string> = { unset: "?", true: "T", false: "F" };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function bar(value: number | null, cls: string): HTMLElement {
  const outer = el("div", "bar");
  const inner = el("div", `bar-fill ${cls}`);
  if (value !== null) inner.style.width = `${(value * 100).toFixed(1)}%`;
  outer.appendChild(inner);
  return outer;
}

function fmt(value: number | null | undefined): string {
  if (value === null || value === undefined) return "-";
  return value.toFixed(3);
}

export class ExplorerView {
  constructor(
    private root: HTMLElement,
    private store: EvidenceStore,
    private controller: InferController,
    private health: HealthDoc,
  ) {}

  render(): void {
    this.root.replaceChildren(
      this.renderHeader(),
      this.renderControls(),
      this.renderError(),
      this.renderPanel(),
      this.renderCompare(),
      this.renderEmbedding(),
    );
  }

  private renderHeader(): HTMLElement {
    const c = this.controller;
    const head = el("header");
    head.appendChild(el("h1", undefined, this.store.graph.name || "evidence explorer"));
    const meta = el("div", "meta");
    meta.appendChild(
      el("span", undefined,
         `v${this.health.version} | ${this.health.n_nodes} nodes | net ${this.health.net_digest.slice(0, 8)}`),
    );
    if (c.pending) meta.appendChild(el("span", "pending", "updating..."));
    head.appendChild(meta);
    return head;
  }

  private renderControls(): HTMLElement {
    const s = this.store;
    const c = this.controller;
    const row = el("div", "controls");

    const method = el("select");
    for (const name of METHODS) {
      const opt = el("option", undefined, name);
      opt.value = name;
      if (name === s.method) opt.selected = true;
      method.appendChild(opt);
    }
    method.addEventListener("change", () => s.setMethod(method.value));
    row.appendChild(labelled("method", method));

    row.appendChild(labelled("beta", numberInput(s.beta, 0.05, (v) => s.setBeta(v))));
    row.appendChild(labelled("m", numberInput(s.m, 1000, (v) => s.setM(v))));
    row.appendChild(labelled("seed", numberInput(s.seed, 1, (v) => s.setSeed(v))));

    const refine = el("button", undefined, "refine with sampling");
    refine.addEventListener("click", () => c.refine());
    row.appendChild(refine);

    const clear = el("button", undefined, "clear evidence");
    clear.addEventListener("click", () => s.clearAll());
    row.appendChild(clear);

    if (c.result && c.result.ess !== null) {
      row.appendChild(el("span", "ess", `ESS ${c.result.ess.toFixed(1)} / ${c.result.m}`));
    }
    return row;
  }

  private renderError(): HTMLElement {
    const strip = el("div", "error");
    if (this.controller.error !== null) strip.textContent = this.controller.error;
    else strip.style.display = "none";
    return strip;
  }

  private renderPanel(): HTMLElement {
    const s = this.store;
    const c = this.controller;
    const panel = el("div", "panel");
    const depths = [...new Set(s.graph.nodes.map((nd) => nd.depth_type))].sort((a, b) => a - b);
    for (const depth of depths) {
      const group = el("fieldset", "group");
      group.appendChild(el("legend", undefined, `layer ${depth}`));
      for (const nd of s.graph.nodes.filter((n) => n.depth_type === depth)) {
        const line = el("div", "node");
        const toggle = el("button", `tri tri-${s.state(nd.id)}`, TRI_LABEL[s.state(nd.id)]);
        toggle.title = "cycle evidence: unset, true, false";
        toggle.addEventListener("click", () => s.cycle(nd.id));
        line.appendChild(toggle);
        line.appendChild(el("span", "name", nd.name));
        const marginal = c.result ? c.result.marginals[nd.id] : null;
        line.appendChild(bar(marginal, "fill-current"));
        line.appendChild(el("span", "value", fmt(marginal)));
        group.appendChild(line);
      }
      panel.appendChild(group);
    }
    return panel;
  }

  private renderCompare(): HTMLElement {
    const c = this.controller;
    const box = el("div", "compare");
    const head = el("div", "compare-head");
    head.appendChild(el("h2", undefined, "what-if"));
    const pin = el("button", undefined, c.baseline ? "re-pin baseline" : "pin baseline");
    pin.disabled = c.result === null;
    pin.addEventListener("click", () => c.pinBaseline());
    head.appendChild(pin);
    if (c.baseline) {
      const drop = el("button", undefined, "unpin");
      drop.addEventListener("click", () => c.clearBaseline());
      head.appendChild(drop);
    }
    box.appendChild(head);
    for (const row of c.compare()) {
      const line = el("div", "node");
      line.appendChild(el("span", "name", row.name));
      line.appendChild(bar(row.baseline, "fill-baseline"));
      line.appendChild(bar(row.current, "fill-current"));
      const sign = row.delta >= 0 ? "+" : "";
      line.appendChild(el("span", "value", `${sign}${row.delta.toFixed(3)}`));
      box.appendChild(line);
    }
    return box;
  }

  private renderEmbedding(): HTMLElement {
    const c = this.controller;
    const box = el("div", "embedding");
    const head = el("div", "compare-head");
    head.appendChild(el("h2", undefined, "evidence map"));
    const save = el("button", undefined, "save current");
    save.addEventListener("click", () => void c.saveCurrent());
    head.appendChild(save);
    const locate = el("button", undefined, "locate current");
    locate.addEventListener("click", () => void c.locateCurrent());
    head.appendChild(locate);
    box.appendChild(head);

    const points = c.saved.map((p) => p.projection);
    if (c.current) points.push(c.current);
    if (points.length === 0) {
      box.appendChild(el("div", "hint", "save evidence sets to map them"));
      return box;
    }
    const xs = points.map((p) => p[0]);
    const ys = points.map((p) => p[1]);
    const span = (vals: number[]) => {
      const lo = Math.min(...vals);
      const hi = Math.max(...vals);
      return hi > lo ? [lo, hi] : [lo - 1, hi + 1];
    };
    const [x0, x1] = span(xs);
    const [y0, y1] = span(ys);
    const sx = (x: number) => 10 + (180 * (x - x0)) / (x1 - x0);
    const sy = (y: number) => 190 - (180 * (y - y0)) / (y1 - y0);

    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", "0 0 200 200");
    svg.setAttribute("class", "scatter");
    for (const p of c.saved) {
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", sx(p.projection[0]).toFixed(2));
      dot.setAttribute("cy", sy(p.projection[1]).toFixed(2));
      dot.setAttribute("r", "3");
      dot.setAttribute("class", "dot");
      const tip = document.createElementNS("http://www.w3.org/2000/svg", "title");
      tip.textContent = p.label;
      dot.appendChild(tip);
      svg.appendChild(dot);
    }
    if (c.current) {
      const ring = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      ring.setAttribute("cx", sx(c.current[0]).toFixed(2));
      ring.setAttribute("cy", sy(c.current[1]).toFixed(2));
      ring.setAttribute("r", "5");
      ring.setAttribute("class", "dot-current");
      svg.appendChild(ring);
    }
    box.appendChild(svg);
    return box;
  }
}

function labelled(text: string, control: HTMLElement): HTMLElement {
  const wrap = el("label", "field");
  wrap.appendChild(el("span", undefined, text));
  wrap.appendChild(control);
  return wrap;
}

function numberInput(value: number, step: number, commit: (v: number) => void): HTMLInputElement {
  const input = el("input");
  input.type = "number";
  input.step = String(step);
  input.value = String(value);
  input.addEventListener("change", () => commit(Number(input.value)));
  return input;
}
