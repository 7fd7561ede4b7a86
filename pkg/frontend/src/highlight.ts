/** Inline span highlighting.
 *
 * The text is cut at every span boundary; each segment becomes one element
 * carrying the set of (layer, annotation) pairs covering it, so overlapping
 * layers stack visually and the covering sets are recoverable from the DOM.
 */

import { layerBorderColor } from "./colors.js";
import type { AnnotationJson } from "./types.js";

export interface LayerView {
  name: string;
  color: string;
  annotations: AnnotationJson[];
}

export interface Covering {
  layer: string;
  annotation: AnnotationJson;
}

export interface Segment {
  start: number;
  end: number;
  covering: Covering[];
}

export class RenderError extends Error {
  constructor(public problems: string[]) {
    super(`refusing to render: ${problems.join("; ")}`);
  }
}

export function checkBounds(text: string, layers: LayerView[]): string[] {
  const problems: string[] = [];
  for (const layer of layers) {
    for (const ann of layer.annotations) {
      if (
        !(
          Number.isInteger(ann.start) &&
          Number.isInteger(ann.end) &&
          ann.start >= 0 &&
          ann.start < ann.end &&
          ann.end <= text.length
        )
      ) {
        problems.push(
          `${layer.name}/${ann.id}: span ${ann.start}..${ann.end} outside text ` +
            `of length ${text.length}`,
        );
      }
    }
  }
  return problems;
}

/** Cut the text at every annotation boundary. */
export function segmentText(text: string, layers: LayerView[]): Segment[] {
  const bounds = new Set<number>([0, text.length]);
  for (const layer of layers) {
    for (const ann of layer.annotations) {
      bounds.add(ann.start);
      bounds.add(ann.end);
    }
  }
  const cuts = Array.from(bounds).sort((a, b) => a - b);
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < cuts.length; i++) {
    const [start, end] = [cuts[i], cuts[i + 1]];
    const covering: Covering[] = [];
    for (const layer of layers) {
      for (const ann of layer.annotations) {
        if (ann.start <= start && end <= ann.end) {
          covering.push({ layer: layer.name, annotation: ann });
        }
      }
    }
    segments.push({ start, end, covering });
  }
  return segments;
}

export type SpanClickHandler = (layer: string, annotation: AnnotationJson) => void;

/** Render the document into `container`; returns the created segments.
 *
 * Refuses (and reports every offender) if any span fails the bounds check;
 * the document is never partially rendered with bad offsets.
 */
export function renderDocument(
  container: HTMLElement,
  text: string,
  layers: LayerView[],
  onSpanClick?: SpanClickHandler,
): Segment[] {
  const problems = checkBounds(text, layers);
  if (problems.length > 0) {
    container.textContent = "";
    const alert = container.ownerDocument.createElement("div");
    alert.className = "render-error";
    alert.textContent = `cannot render: ${problems.join("; ")}`;
    container.appendChild(alert);
    throw new RenderError(problems);
  }
  const doc = container.ownerDocument;
  container.textContent = "";
  const segments = segmentText(text, layers);
  for (const segment of segments) {
    const el = doc.createElement("span");
    el.textContent = text.slice(segment.start, segment.end);
    el.dataset.start = String(segment.start);
    el.dataset.end = String(segment.end);
    if (segment.covering.length > 0) {
      el.className = "hl";
      el.dataset.ann = segment.covering
        .map((c) => `${c.layer}:${c.annotation.id}`)
        .join(" ");
      const top = segment.covering[segment.covering.length - 1];
      el.style.backgroundColor =
        layers.find((l) => l.name === top.layer)?.color ?? "";
      if (segment.covering.length > 1) {
        el.style.textDecoration = "underline";
      }
      if (onSpanClick) {
        el.addEventListener("click", () =>
          onSpanClick(top.layer, top.annotation),
        );
      }
    }
    container.appendChild(el);
    for (const c of segment.covering) {
      if (c.annotation.start === segment.start) {
        const badge = doc.createElement("sup");
        badge.className = "badge";
        badge.textContent = c.annotation.label;
        badge.dataset.layer = c.layer;
        badge.dataset.annId = c.annotation.id;
        badge.style.color = layerBorderColor(c.layer);
        el.insertBefore(badge, el.firstChild);
      }
    }
  }
  return segments;
}

/** DOM-extraction oracle used by tests and the accept flow: concatenated
 * text of the segments covered by one annotation. Badges live outside the
 * text nodes' offsets, so they are excluded. */
export function extractAnnotationText(
  container: HTMLElement,
  layer: string,
  annId: string,
): string {
  const key = `${layer}:${annId}`;
  let out = "";
  container.querySelectorAll("span.hl").forEach((el) => {
    const keys = (el as HTMLElement).dataset.ann?.split(" ") ?? [];
    if (keys.includes(key)) {
      el.childNodes.forEach((node) => {
        if (node.nodeType === 3) {
          out += node.textContent ?? "";
        }
      });
    }
  });
  return out;
}
