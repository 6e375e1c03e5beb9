/**
 * The labeling console: cluster cards, centroid projection, label
 * assignment, and a classify spot-check panel.
 *
 * Rendering is deliberately dumb. Every number on screen is copied from
 * the most recent confirmed service response; nothing is recomputed,
 * smoothed, or updated optimistically. A label PUT only changes the page
 * via the full refresh that follows it.
 */

import { ApiError, ConsoleApi, ServiceUnreachableError } from "./api.js";
import {
  formatConfidence,
  formatDb,
  isUnmapped,
  parseSweep,
  polylinePoints,
  scatterPoints,
  sortClusters,
  sumCounts,
  valueRange,
} from "./core.js";
import type { ClassifyResult, ClusterRow, ClustersPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const CARD_CHART_W = 512;
const CARD_CHART_H = 120;
const OVERLAY_W = 640;
const OVERLAY_H = 200;
const SCATTER_SIZE = 240;
const SCATTER_INSET = 14;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function svg(tag: string): SVGElement {
  return document.createElementNS(SVG_NS, tag);
}

/**
 * A sweep chart: y axis in dB, x axis bin index 0..1023, one polyline
 * vertex per bin.
 */
export function renderSweepChart(
  values: number[],
  width = CARD_CHART_W,
  height = CARD_CHART_H,
): SVGElement {
  const range = valueRange([values]);
  const chart = svg("svg");
  chart.setAttribute("class", "sweep-chart");
  chart.setAttribute("viewBox", `-44 -8 ${width + 56} ${height + 28}`);
  chart.setAttribute("preserveAspectRatio", "none");

  const line = svg("polyline");
  line.setAttribute("class", "sweep-line");
  line.setAttribute("points", polylinePoints(values, width, height, range));
  chart.appendChild(line);

  const yMax = svg("text");
  yMax.setAttribute("class", "tick");
  yMax.setAttribute("x", "-42");
  yMax.setAttribute("y", "8");
  yMax.textContent = formatDb(range.max);
  const yMin = svg("text");
  yMin.setAttribute("class", "tick");
  yMin.setAttribute("x", "-42");
  yMin.setAttribute("y", String(height));
  yMin.textContent = formatDb(range.min);
  const x0 = svg("text");
  x0.setAttribute("class", "tick");
  x0.setAttribute("x", "0");
  x0.setAttribute("y", String(height + 14));
  x0.textContent = "bin 0";
  const x1 = svg("text");
  x1.setAttribute("class", "tick");
  x1.setAttribute("x", String(width - 48));
  x1.setAttribute("y", String(height + 14));
  x1.textContent = "1023";
  chart.append(yMax, yMin, x0, x1);
  return chart;
}

/** Sweep overlaid on its cluster's average, shared dB scale. */
export function renderOverlayChart(sweep: number[], average: number[]): SVGElement {
  const range = valueRange([sweep, average]);
  const chart = svg("svg");
  chart.setAttribute("class", "sweep-chart overlay-chart");
  chart.setAttribute("viewBox", `-44 -8 ${OVERLAY_W + 56} ${OVERLAY_H + 28}`);
  chart.setAttribute("preserveAspectRatio", "none");

  const avgLine = svg("polyline");
  avgLine.setAttribute("class", "average-line");
  avgLine.setAttribute("points", polylinePoints(average, OVERLAY_W, OVERLAY_H, range));
  const sweepLine = svg("polyline");
  sweepLine.setAttribute("class", "sweep-line");
  sweepLine.setAttribute("points", polylinePoints(sweep, OVERLAY_W, OVERLAY_H, range));
  chart.append(avgLine, sweepLine);

  const yMax = svg("text");
  yMax.setAttribute("class", "tick");
  yMax.setAttribute("x", "-42");
  yMax.setAttribute("y", "8");
  yMax.textContent = formatDb(range.max);
  const yMin = svg("text");
  yMin.setAttribute("class", "tick");
  yMin.setAttribute("x", "-42");
  yMin.setAttribute("y", String(OVERLAY_H));
  yMin.textContent = formatDb(range.min);
  chart.append(yMax, yMin);
  return chart;
}

/** 2-D centroid projection; unmapped clusters render hollow. */
export function renderScatter(rows: ClusterRow[]): SVGElement {
  const plot = svg("svg");
  plot.setAttribute("class", "centroid-scatter");
  plot.setAttribute("viewBox", `0 0 ${SCATTER_SIZE} ${SCATTER_SIZE}`);
  const span = SCATTER_SIZE - 2 * SCATTER_INSET;
  for (const point of scatterPoints(rows)) {
    const dot = svg("circle");
    dot.setAttribute("cx", String(SCATTER_INSET + point.x * span));
    // flip so larger second component plots higher
    dot.setAttribute("cy", String(SCATTER_INSET + (1 - point.y) * span));
    dot.setAttribute("r", "6");
    dot.setAttribute("class", isUnmapped(point.label) ? "dot unmapped" : "dot");
    const title = svg("title");
    title.textContent = `cluster ${point.id}${point.label ? `: ${point.label}` : " (unmapped)"}`;
    dot.appendChild(title);
    plot.appendChild(dot);
  }
  return plot;
}

export interface CardHandlers {
  assignLabel(clusterId: number, label: string, card: HTMLElement): void;
}

/** One cluster card. Count, label state, average-sweep chart, label form. */
export function renderClusterCard(row: ClusterRow, handlers: CardHandlers): HTMLElement {
  const card = el("section", "cluster-card");
  card.dataset.clusterId = String(row.id);

  const head = el("header");
  head.appendChild(el("h3", undefined, `cluster ${row.id}`));
  head.appendChild(el("span", "count", `${row.count} sweeps`));
  card.appendChild(head);

  if (isUnmapped(row.label)) {
    card.classList.add("unmapped");
    card.appendChild(el("span", "label-badge unmapped-badge", "unmapped"));
  } else {
    card.appendChild(el("span", "label-badge", row.label as string));
  }

  if (row.average !== null) {
    card.appendChild(renderSweepChart(row.average));
  } else {
    card.appendChild(el("p", "empty-note", "no member sweeps"));
  }

  const form = el("div", "label-form");
  const input = el("input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "label, e.g. LTE";
  input.className = "label-input";
  const button = el("button", "assign-button", "assign label");
  button.disabled = true;
  input.addEventListener("input", () => {
    button.disabled = input.value.trim() === "";
  });
  button.addEventListener("click", () => {
    const label = input.value.trim();
    if (label) handlers.assignLabel(row.id, label, card);
  });
  form.append(input, button);
  card.appendChild(form);
  card.appendChild(el("p", "card-error"));
  return card;
}

export class App {
  readonly api: ConsoleApi;

  private root!: HTMLElement;
  private banner!: HTMLElement;
  private notice!: HTMLElement;
  private infoLine!: HTMLElement;
  private revisionBadge!: HTMLElement;
  private grid!: HTMLElement;
  private scatterPanel!: HTMLElement;
  private classifyInput!: HTMLTextAreaElement;
  private classifyError!: HTMLElement;
  private classifyResult!: HTMLElement;

  /** Last confirmed /v1/clusters response; the only cluster state held. */
  private payload: ClustersPayload | null = null;

  constructor(api: ConsoleApi) {
    this.api = api;
  }

  mount(root: HTMLElement): void {
    this.root = root;
    root.textContent = "";

    const header = el("header", "console-header");
    header.appendChild(el("h1", undefined, "cluster labeling console"));
    this.infoLine = el("p", "model-info");
    this.revisionBadge = el("span", "revision-badge");
    header.append(this.infoLine, this.revisionBadge);
    root.appendChild(header);

    this.banner = el("div", "banner hidden");
    root.appendChild(this.banner);
    this.notice = el("p", "notice hidden");
    root.appendChild(this.notice);

    this.grid = el("div", "cluster-grid");
    root.appendChild(this.grid);

    this.scatterPanel = el("section", "scatter-panel");
    root.appendChild(this.scatterPanel);

    root.appendChild(this.buildClassifyPanel());
    void this.refresh();
  }

  /** Re-pull everything from the service and re-render. */
  async refresh(): Promise<void> {
    let payload: ClustersPayload;
    try {
      const info = await this.api.modelInfo();
      payload = await this.api.clusters();
      this.infoLine.textContent =
        `${info.arch} | k=${info.k} | ${info.params.toLocaleString()} params` +
        ` | ${info.gflops.toFixed(4)} GFLOPs`;
    } catch (err) {
      // either flavor of a broken service ends up in the retry banner
      if (err instanceof ServiceUnreachableError || err instanceof ApiError) {
        this.showBanner(err.message);
        return;
      }
      throw err;
    }
    this.hideBanner();
    this.payload = payload;
    this.revisionBadge.textContent = `labelmap revision ${payload.revision}`;
    this.renderClusters(payload);
  }

  private renderClusters(payload: ClustersPayload): void {
    this.grid.textContent = "";
    const handlers: CardHandlers = {
      assignLabel: (id, label, card) => void this.assignLabel(id, label, card),
    };
    for (const row of sortClusters(payload.clusters)) {
      this.grid.appendChild(renderClusterCard(row, handlers));
    }
    const total = sumCounts(payload.clusters);
    this.scatterPanel.textContent = "";
    this.scatterPanel.appendChild(el("h2", undefined, "centroid projection"));
    this.scatterPanel.appendChild(
      el("p", "scatter-caption", `${payload.k} clusters, ${total} training sweeps`),
    );
    this.scatterPanel.appendChild(renderScatter(payload.clusters));
  }

  private async assignLabel(clusterId: number, label: string, card: HTMLElement): Promise<void> {
    const errorLine = card.querySelector(".card-error") as HTMLElement;
    errorLine.textContent = "";
    const before = this.payload?.revision ?? 0;
    let result;
    try {
      result = await this.api.setLabel(clusterId, label);
    } catch (err) {
      if (err instanceof ApiError) {
        errorLine.textContent = err.message;
        return;
      }
      if (err instanceof ServiceUnreachableError) {
        this.showBanner(err.message);
        return;
      }
      throw err;
    }
    if (result.revision !== before + 1) {
      this.showNotice(
        `labels changed elsewhere (revision ${before} -> ${result.revision}), view refreshed`,
      );
    }
    // the card only changes through this confirmed re-read
    await this.refresh();
  }

  private buildClassifyPanel(): HTMLElement {
    const panel = el("section", "classify-panel");
    panel.appendChild(el("h2", undefined, "test a sweep"));
    panel.appendChild(
      el("p", "hint", "paste 1024 dB values (JSON array or whitespace separated)"),
    );
    this.classifyInput = el("textarea", "classify-input") as HTMLTextAreaElement;
    this.classifyInput.rows = 4;
    panel.appendChild(this.classifyInput);

    const file = el("input", "classify-file") as HTMLInputElement;
    file.type = "file";
    file.accept = ".txt,.json,.csv";
    file.addEventListener("change", () => {
      const chosen = file.files?.[0];
      if (chosen) void this.loadSweepFile(chosen);
    });
    panel.appendChild(file);

    const run = el("button", "classify-button", "classify");
    run.addEventListener("click", () => void this.runClassify());
    panel.appendChild(run);

    this.classifyError = el("p", "classify-error");
    this.classifyResult = el("div", "classify-result");
    panel.append(this.classifyError, this.classifyResult);
    return panel;
  }

  /** An uploaded file lands in the textarea so the user can eyeball it. */
  async loadSweepFile(file: File): Promise<void> {
    this.classifyInput.value = await file.text();
  }

  async runClassify(): Promise<void> {
    this.classifyError.textContent = "";
    this.classifyResult.textContent = "";
    const parsed = parseSweep(this.classifyInput.value);
    if (!parsed.ok) {
      // invalid input never reaches the service
      this.classifyError.textContent = parsed.error;
      return;
    }
    let result: ClassifyResult;
    try {
      result = await this.api.classify(parsed.values);
    } catch (err) {
      if (err instanceof ApiError) {
        this.classifyError.textContent = err.message;
        return;
      }
      if (err instanceof ServiceUnreachableError) {
        this.showBanner(err.message);
        return;
      }
      throw err;
    }
    this.renderClassifyResult(parsed.values, result);
  }

  private renderClassifyResult(sweep: number[], result: ClassifyResult): void {
    const box = this.classifyResult;
    box.textContent = "";
    const line = el("p", "classify-verdict");
    line.appendChild(el("span", "cluster-id", `cluster ${result.cluster_id}`));
    if (isUnmapped(result.label)) {
      line.appendChild(el("span", "label-badge unmapped-badge", "unmapped"));
      line.appendChild(
        el("span", "label-prompt", ` assign a label to cluster ${result.cluster_id} above`),
      );
    } else {
      line.appendChild(el("span", "label-badge", result.label));
    }
    line.appendChild(el("span", "confidence", formatConfidence(result.confidence)));
    box.appendChild(line);

    const average = this.payload?.clusters.find((r) => r.id === result.cluster_id)?.average;
    if (average) {
      box.appendChild(el("p", "overlay-caption", "sweep (solid) vs cluster average"));
      box.appendChild(renderOverlayChart(sweep, average));
    }
  }

  private showBanner(message: string): void {
    this.banner.textContent = "";
    this.banner.className = "banner";
    this.banner.appendChild(el("span", undefined, message));
    const retry = el("button", "retry-button", "retry");
    retry.addEventListener("click", () => void this.refresh());
    this.banner.appendChild(retry);
  }

  private hideBanner(): void {
    this.banner.className = "banner hidden";
    this.banner.textContent = "";
  }

  private showNotice(message: string): void {
    this.notice.textContent = message;
    this.notice.className = "notice";
  }
}
