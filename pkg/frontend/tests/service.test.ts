// @vitest-environment happy-dom
/**
 * Integration against a live service process: the console renders what the
 * API serves, a label assignment persists through a restart, and a medoid
 * sweep classifies back to its labeled cluster.
 */

import { mkdtempSync } from "node:fs";
import os from "node:os";
import path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConsoleApi, type ResponseLogEntry } from "../src/api.js";
import { App } from "../src/app.js";
import { polylinePoints, sortClusters, sumCounts, valueRange } from "../src/core.js";
import type { ClustersPayload } from "../src/types.js";
import { loadFixture, startService, type Fixture, type LiveService } from "./live.js";

let fixture: Fixture;
let service: LiveService;
let labelmapPath: string;

beforeAll(async () => {
  fixture = loadFixture();
  // fresh labelmap per run so the assignment tests start unmapped
  labelmapPath = path.join(mkdtempSync(path.join(os.tmpdir(), "labels-")), "labels.json");
  service = await startService(fixture.artifact, labelmapPath);
});

afterAll(async () => {
  await service.stop();
});

async function waitFor(check: () => boolean, timeoutMs = 15_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!check()) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}

function mountApp(baseUrl: string): { app: App; root: HTMLElement; log: ResponseLogEntry[] } {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const api = new ConsoleApi(baseUrl);
  const log: ResponseLogEntry[] = [];
  api.onResponse = (entry) => log.push(entry);
  const app = new App(api);
  app.mount(root);
  return { app, root, log };
}

/** The cluster the label tests target: largest, so its medoid is meaningful. */
function targetCluster(): number {
  let best = 0;
  for (let i = 1; i < fixture.counts.length; i++) {
    if (fixture.counts[i] > fixture.counts[best]) best = i;
  }
  return best;
}

describe("console against a live service", () => {
  it("renders one card per cluster; counts and averages equal the payload", async () => {
    const { root, log } = mountApp(service.baseUrl);
    await waitFor(() => root.querySelectorAll(".cluster-card").length === fixture.k);

    // what the service actually said, captured from the console's own traffic
    const payload = log.find((e) => e.path === "/v1/clusters")!.payload as ClustersPayload;
    expect(payload.clusters).toHaveLength(fixture.k);
    expect(sumCounts(payload.clusters)).toBe(120); // 3 classes x 40 sweeps

    const cards = [...root.querySelectorAll(".cluster-card")] as HTMLElement[];
    const expectedOrder = sortClusters(payload.clusters).map((r) => String(r.id));
    expect(cards.map((c) => c.dataset.clusterId)).toEqual(expectedOrder);

    for (const row of payload.clusters) {
      const card = root.querySelector(`[data-cluster-id="${row.id}"]`)!;
      expect(card.querySelector(".count")!.textContent).toBe(`${row.count} sweeps`);
      if (row.average !== null) {
        const points = card.querySelector("polyline.sweep-line")!.getAttribute("points")!;
        expect(points).toBe(polylinePoints(row.average, 512, 120, valueRange([row.average])));
      } else {
        expect(card.querySelector("polyline")).toBeNull();
      }
      expect(card.querySelector(".unmapped-badge")).not.toBeNull();
    }
    expect(root.querySelectorAll(".centroid-scatter circle")).toHaveLength(fixture.k);
  });

  it("assigns a label through the card and sees it after a service restart", async () => {
    const target = targetCluster();
    const { root } = mountApp(service.baseUrl);
    await waitFor(() => root.querySelectorAll(".cluster-card").length === fixture.k);

    const card = root.querySelector(`[data-cluster-id="${target}"]`) as HTMLElement;
    const input = card.querySelector("input") as HTMLInputElement;
    input.value = "LTE";
    input.dispatchEvent(new Event("input"));
    (card.querySelector("button") as HTMLButtonElement).click();

    await waitFor(() => {
      const refreshed = root.querySelector(`[data-cluster-id="${target}"]`);
      return refreshed?.querySelector(".label-badge")?.textContent === "LTE";
    });
    expect(root.querySelector(".revision-badge")!.textContent).toBe("labelmap revision 1");

    await service.stop();
    service = await startService(fixture.artifact, labelmapPath);

    const fresh = mountApp(service.baseUrl);
    await waitFor(() => fresh.root.querySelectorAll(".cluster-card").length === fixture.k);
    const persisted = fresh.root.querySelector(`[data-cluster-id="${target}"]`)!;
    expect(persisted.querySelector(".label-badge")!.textContent).toBe("LTE");
    expect(persisted.classList.contains("unmapped")).toBe(false);
  });

  it("classifies the labeled cluster's medoid back to its labeled class", async () => {
    const target = targetCluster();
    const medoid = fixture.medoids[String(target)];
    expect(medoid).toBeDefined();

    const { root } = mountApp(service.baseUrl);
    await waitFor(() => root.querySelectorAll(".cluster-card").length === fixture.k);

    const textarea = root.querySelector(".classify-input") as HTMLTextAreaElement;
    textarea.value = JSON.stringify(medoid);
    (root.querySelector(".classify-button") as HTMLButtonElement).click();

    await waitFor(() => root.querySelector(".classify-result .cluster-id") !== null);
    const result = root.querySelector(".classify-result")!;
    expect(result.querySelector(".cluster-id")!.textContent).toBe(`cluster ${target}`);
    expect(result.querySelector(".label-badge")!.textContent).toBe("LTE");
    expect(result.querySelector(".unmapped-badge")).toBeNull();
    // sweep overlaid on the cluster average for visual sanity
    expect(result.querySelectorAll("polyline")).toHaveLength(2);
  });

  it("shows the unreachable banner once the service is gone", async () => {
    const gonePort = service.port;
    await service.stop();
    try {
      const { root } = mountApp(`http://127.0.0.1:${gonePort}`);
      const banner = root.querySelector(".banner")!;
      await waitFor(() => !banner.classList.contains("hidden"));
      expect(banner.textContent).toContain("unreachable");
      expect(banner.querySelector(".retry-button")).not.toBeNull();
    } finally {
      service = await startService(fixture.artifact, labelmapPath);
    }
  });
});
