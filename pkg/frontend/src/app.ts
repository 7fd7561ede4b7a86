/** Single-page annotation app.
 *
 * The page talks only to the annotation server's JSON API; every span on
 * screen originated from a server response. Mutations are serialized: one
 * in-flight write at a time, guarded by `busy`.
 */

import { acceptAll } from "./accept.js";
import { ApiClient, ApiError } from "./api.js";
import { layerColor } from "./colors.js";
import {
  clearFieldErrors,
  renderSourceForm,
  showFieldError,
  sourceBodyFromForm,
  SOURCE_KINDS,
} from "./forms.js";
import { renderDocument, type LayerView } from "./highlight.js";
import { pollJob } from "./jobs.js";
import { displayedRecall, renderMetrics } from "./metrics.js";
import { selectionToOffsets } from "./selection.js";
import type { AnnotationJson, DocListing, ProjectInfo } from "./types.js";

const LAST_DOC_KEY = "weaklab:last-doc";

interface ViewState {
  project: ProjectInfo | null;
  docs: DocListing[];
  currentDoc: string | null;
  text: string;
  visibleLayers: Set<string>;
  versions: Map<string, number>;
  annotations: Map<string, AnnotationJson[]>;
  previewLayer: LayerView | null;
  busy: boolean;
}

const state: ViewState = {
  project: null,
  docs: [],
  currentDoc: null,
  text: "",
  visibleLayers: new Set(["gold", "manual"]),
  versions: new Map(),
  annotations: new Map(),
  previewLayer: null,
  busy: false,
};

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function setStatus(message: string, isError = false): void {
  const status = el<HTMLElement>("status");
  status.textContent = message;
  status.classList.toggle("error", isError);
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  if (state.busy) {
    setStatus("another change is still in flight", true);
    return undefined;
  }
  state.busy = true;
  document.body.classList.add("busy");
  try {
    return await work();
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      setStatus("someone else changed this layer; reloading", true);
      await openDoc(state.currentDoc!);
    } else {
      setStatus(String(error), true);
    }
    return undefined;
  } finally {
    state.busy = false;
    document.body.classList.remove("busy");
  }
}

function knownLayers(): string[] {
  const listing = state.docs.find((d) => d.id === state.currentDoc);
  const names = new Set<string>(listing?.layers ?? []);
  names.add("gold");
  names.add("manual");
  return Array.from(names).sort();
}

async function fetchLayers(): Promise<void> {
  state.versions.clear();
  state.annotations.clear();
  for (const layer of knownLayers()) {
    const payload = await api.layer(state.currentDoc!, layer);
    state.versions.set(layer, payload.version);
    state.annotations.set(layer, payload.annotations);
  }
}

function layerViews(): LayerView[] {
  const views: LayerView[] = [];
  for (const layer of knownLayers()) {
    if (!state.visibleLayers.has(layer)) {
      continue;
    }
    views.push({
      name: layer,
      color: layerColor(layer),
      annotations: state.annotations.get(layer) ?? [],
    });
  }
  if (state.previewLayer) {
    views.push(state.previewLayer);
  }
  return views;
}

function renderText(): void {
  const container = el<HTMLElement>("text-panel");
  try {
    renderDocument(container, state.text, layerViews(), onSpanClick);
  } catch (error) {
    setStatus(String(error), true);
  }
}

function renderLayerToggles(): void {
  const box = el<HTMLElement>("layer-toggles");
  box.textContent = "";
  for (const layer of knownLayers()) {
    const row = document.createElement("label");
    row.className = "layer-toggle";
    const checkbox = document.createElement("input");
    checkbox.type = "checkbox";
    checkbox.checked = state.visibleLayers.has(layer);
    checkbox.addEventListener("change", () => {
      if (checkbox.checked) {
        state.visibleLayers.add(layer);
      } else {
        state.visibleLayers.delete(layer);
      }
      renderText();
    });
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = layerColor(layer);
    row.append(checkbox, swatch, document.createTextNode(layer));
    box.appendChild(row);

    if (layer !== "gold" && layer !== "manual") {
      const accept = document.createElement("button");
      accept.textContent = "accept all";
      accept.className = "accept-all";
      accept.addEventListener("click", () =>
        guard(async () => {
          await acceptAll(api, state.currentDoc!, layer);
          await openDoc(state.currentDoc!);
          setStatus(`accepted ${layer} into manual`);
        }),
      );
      box.appendChild(accept);
    }
  }
}

function renderLabelPicker(): void {
  const picker = el<HTMLSelectElement>("label-picker");
  picker.textContent = "";
  const labels = [
    ...(state.project?.labels ?? []),
    ...(state.project?.model_labels ?? []),
  ];
  for (const label of labels) {
    const option = document.createElement("option");
    option.value = label;
    option.textContent = label;
    picker.appendChild(option);
  }
}

function onSpanClick(layer: string, annotation: AnnotationJson): void {
  if (layer === "manual") {
    void guard(async () => {
      const current = await api.layer(state.currentDoc!, "manual");
      const kept = current.annotations.filter(
        (a) =>
          !(
            a.start === annotation.start &&
            a.end === annotation.end &&
            a.label === annotation.label
          ),
      );
      await api.putLayer(state.currentDoc!, "manual", current.version, kept);
      await openDoc(state.currentDoc!);
      setStatus(`deleted ${annotation.label} ${annotation.start}..${annotation.end}`);
    });
    return;
  }
  void guard(async () => {
    const { acceptSpans } = await import("./accept.js");
    await acceptSpans(api, state.currentDoc!, [annotation]);
    await openDoc(state.currentDoc!);
    setStatus(`accepted ${annotation.label} from ${layer} into manual`);
  });
}

function onTextMouseUp(): void {
  const offsets = selectionToOffsets(el("text-panel"), window);
  if (!offsets) {
    return;
  }
  const label = el<HTMLSelectElement>("label-picker").value;
  if (!label) {
    setStatus("no label selected", true);
    return;
  }
  void guard(async () => {
    const current = await api.layer(state.currentDoc!, "manual");
    const ann: AnnotationJson = {
      id: `T${current.annotations.length + 1}`,
      label,
      start: offsets.start,
      end: offsets.end,
      surface: state.text.slice(offsets.start, offsets.end),
      provenance: "manual",
    };
    const merged = [...current.annotations, ann]
      .sort((a, b) => a.start - b.start || a.end - b.end)
      .map((a, i) => ({ ...a, id: `T${i + 1}` }));
    await api.putLayer(state.currentDoc!, "manual", current.version, merged);
    window.getSelection()?.removeAllRanges();
    await openDoc(state.currentDoc!);
    setStatus(`annotated ${label} at ${offsets.start}..${offsets.end}`);
  });
}

function renderSourcePanel(): void {
  const kindPicker = el<HTMLSelectElement>("source-kind");
  if (!kindPicker.options.length) {
    for (const kind of SOURCE_KINDS) {
      const option = document.createElement("option");
      option.value = kind;
      option.textContent = kind;
      kindPicker.appendChild(option);
    }
    kindPicker.addEventListener("change", renderSourcePanel);
  }
  const host = el<HTMLElement>("source-form-host");
  host.textContent = "";
  const labels = [
    ...(state.project?.labels ?? []),
    ...(state.project?.model_labels ?? []),
  ];
  const form = renderSourceForm(document, kindPicker.value, labels);
  host.appendChild(form);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const body = sourceBodyFromForm(form);
    if (!body) {
      return; // required-field errors already shown; no request sent
    }
    void guard(async () => {
      try {
        await api.createSource(body);
      } catch (error) {
        if (error instanceof ApiError && error.status === 400) {
          const field =
            error.detail.error === "PatternSyntax" ? "pattern" : "id";
          showFieldError(form, field, error.detail.message);
          return;
        }
        throw error;
      }
      setStatus(`created source ${body.id}`);
      await refreshSources();
    });
  });

  const preview = form.querySelector("button.preview") as HTMLButtonElement;
  preview.addEventListener("click", () => {
    const body = sourceBodyFromForm(form);
    if (!body || !state.currentDoc) {
      return;
    }
    void guard(async () => {
      clearFieldErrors(form);
      try {
        await api.createSource(body).catch((error) => {
          if (!(error instanceof ApiError && error.status === 400)) {
            throw error;
          }
          if (error.detail.error !== "DuplicateSource") {
            throw error;
          }
        });
        const result = await api.applySource(body.id, state.currentDoc!);
        state.previewLayer = {
          name: `preview:${body.id}`,
          color: layerColor(body.id),
          annotations: result.annotations,
        };
        renderText();
        setStatus(
          `preview: ${result.annotations.length} span(s) from ${body.id}`,
        );
      } catch (error) {
        if (error instanceof ApiError && error.detail.error === "PatternSyntax") {
          showFieldError(form, "pattern", error.detail.message);
          return;
        }
        throw error;
      }
    });
  });
}

async function refreshSources(): Promise<void> {
  const sources = await api.sources();
  const listing = el<HTMLElement>("source-list");
  listing.textContent = "";
  for (const source of sources) {
    const row = document.createElement("div");
    row.className = "source-row";
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = layerColor(source.id);
    row.append(swatch, document.createTextNode(`${source.id} (${source.kind}) `));
    const apply = document.createElement("button");
    apply.textContent = "apply to all";
    apply.addEventListener("click", () =>
      guard(async () => {
        const job = await api.applySourceAll(source.id);
        setStatus(`applying ${source.id}...`);
        await pollJob(api, job.id, {
          onTick: (j) => setStatus(`apply ${source.id}: ${j.status}`),
        });
        await boot(state.currentDoc ?? undefined);
      }),
    );
    const remove = document.createElement("button");
    remove.textContent = "delete";
    remove.addEventListener("click", () =>
      guard(async () => {
        await api.deleteSource(source.id);
        await refreshSources();
      }),
    );
    row.append(apply, remove);
    listing.appendChild(row);
  }
  const denoiseButton = el<HTMLButtonElement>("denoise-button");
  denoiseButton.disabled = sources.length === 0;
  denoiseButton.dataset.sources = sources.map((s) => s.id).join(",");
}

function wireDenoise(): void {
  el<HTMLButtonElement>("denoise-button").addEventListener("click", () =>
    guard(async () => {
      const ids =
        el<HTMLButtonElement>("denoise-button").dataset.sources?.split(",") ?? [];
      const job = await api.denoise(ids.filter((s) => s.length > 0));
      const final = await pollJob(api, job.id, {
        onTick: (j) => setStatus(`denoise: ${j.status}`),
      });
      if (final.status !== "done") {
        setStatus(`denoise ${final.status}: ${final.error?.message ?? ""}`, true);
        return;
      }
      state.visibleLayers.add("denoised");
      await boot(state.currentDoc ?? undefined);
      setStatus("denoised layer ready");
    }),
  );
}

function wireMetrics(): void {
  el<HTMLButtonElement>("metrics-button").addEventListener("click", () =>
    guard(async () => {
      const pred = el<HTMLSelectElement>("metrics-layer").value;
      const metrics = await api.evaluate(pred, "gold", "exact");
      renderMetrics(el("metrics-panel"), metrics);
      setStatus(`recall ${displayedRecall(el("metrics-panel")) ?? "?"}`);
    }),
  );
}

function renderMetricsLayerPicker(): void {
  const picker = el<HTMLSelectElement>("metrics-layer");
  picker.textContent = "";
  for (const layer of knownLayers()) {
    const option = document.createElement("option");
    option.value = layer;
    option.textContent = layer;
    picker.appendChild(option);
  }
}

async function openDoc(docId: string): Promise<void> {
  state.currentDoc = docId;
  window.localStorage?.setItem(LAST_DOC_KEY, docId);
  const payload = await api.doc(docId);
  state.text = payload.text;
  state.previewLayer = null;
  await fetchLayers();
  renderLayerToggles();
  renderMetricsLayerPicker();
  renderText();
  el<HTMLElement>("doc-title").textContent = docId;
}

async function boot(preferredDoc?: string): Promise<void> {
  const projects = await api.projects();
  state.project = projects[0] ?? null;
  if (!state.project) {
    setStatus("no project", true);
    return;
  }
  el<HTMLElement>("project-name").textContent = state.project.name;
  state.docs = await api.docs(state.project.name);
  renderLabelPicker();

  const docList = el<HTMLElement>("doc-list");
  docList.textContent = "";
  for (const doc of state.docs) {
    const button = document.createElement("button");
    button.className = "doc-link";
    button.textContent = doc.id;
    button.addEventListener("click", () => void openDoc(doc.id));
    docList.appendChild(button);
  }

  const remembered =
    preferredDoc ?? window.localStorage?.getItem(LAST_DOC_KEY) ?? undefined;
  const target =
    state.docs.find((d) => d.id === remembered)?.id ?? state.docs[0]?.id;
  if (target) {
    await openDoc(target);
  }
  await refreshSources();
}

export function start(): void {
  el<HTMLElement>("text-panel").addEventListener("mouseup", onTextMouseUp);
  el<HTMLAnchorElement>("export-link").href = api.exportUrl();
  renderSourcePanel();
  wireDenoise();
  wireMetrics();
  void boot().catch((error) => setStatus(String(error), true));
}

if (typeof document !== "undefined" && document.getElementById("text-panel")) {
  start();
}
