/** Metrics panel: renders /evaluate output to four decimals. */

import type { MetricsPayload } from "./types.js";

export function formatScore(value: number): string {
  return value.toFixed(4);
}

export function renderMetrics(
  container: HTMLElement,
  metrics: MetricsPayload,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const title = doc.createElement("div");
  title.className = "metrics-title";
  title.textContent = `${metrics.pred_layer} vs ${metrics.gold_layer} (${metrics.mode})`;
  container.appendChild(title);
  const table = doc.createElement("table");
  const header = doc.createElement("tr");
  for (const caption of ["", "precision", "recall", "f1"]) {
    const th = doc.createElement("th");
    th.textContent = caption;
    header.appendChild(th);
  }
  table.appendChild(header);
  for (const scope of ["macro", "micro"] as const) {
    const row = doc.createElement("tr");
    row.dataset.scope = scope;
    const name = doc.createElement("td");
    name.textContent = scope;
    row.appendChild(name);
    for (const key of ["precision", "recall", "f1"] as const) {
      const cell = doc.createElement("td");
      cell.dataset.metric = key;
      cell.textContent = formatScore(metrics[scope][key]);
      row.appendChild(cell);
    }
    table.appendChild(row);
  }
  container.appendChild(table);
}

export function displayedRecall(container: HTMLElement): string | null {
  const cell = container.querySelector(
    'tr[data-scope="macro"] td[data-metric="recall"]',
  );
  return cell?.textContent ?? null;
}
