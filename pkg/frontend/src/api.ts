/** Typed fetch client for the annotation server.
 *
 * Every span the UI displays comes back from one of these calls; the
 * client performs no labeling logic of its own.
 */

import type {
  AnnotationJson,
  ApplyResult,
  DocListing,
  DocPayload,
  ErrorDetail,
  JobPayload,
  LayerPayload,
  MetricsPayload,
  ProjectInfo,
  SourceBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: ErrorDetail,
  ) {
    super(`${detail.error}: ${detail.message}`);
  }
}

async function decodeError(response: Response): Promise<ApiError> {
  let detail: ErrorDetail = { error: "HttpError", message: response.statusText };
  try {
    const body = await response.json();
    if (body && typeof body === "object" && "detail" in body) {
      detail = body.detail as ErrorDetail;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(public base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await decodeError(response);
    }
    return (await response.json()) as T;
  }

  projects(): Promise<ProjectInfo[]> {
    return this.request("/projects");
  }

  docs(project: string): Promise<DocListing[]> {
    return this.request(`/projects/${encodeURIComponent(project)}/docs`);
  }

  doc(docId: string): Promise<DocPayload> {
    return this.request(`/docs/${encodeURIComponent(docId)}`);
  }

  layer(docId: string, layer: string): Promise<LayerPayload> {
    return this.request(
      `/docs/${encodeURIComponent(docId)}/annotations/${encodeURIComponent(layer)}`,
    );
  }

  putLayer(
    docId: string,
    layer: string,
    version: number,
    annotations: AnnotationJson[],
  ): Promise<{ doc: string; layer: string; version: number }> {
    return this.request(
      `/docs/${encodeURIComponent(docId)}/annotations/${encodeURIComponent(layer)}`,
      { method: "PUT", body: JSON.stringify({ version, annotations }) },
    );
  }

  sources(): Promise<SourceBody[]> {
    return this.request("/sources");
  }

  createSource(body: SourceBody): Promise<{ id: string }> {
    return this.request("/sources", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  deleteSource(id: string): Promise<{ id: string }> {
    return this.request(`/sources/${encodeURIComponent(id)}`, {
      method: "DELETE",
    });
  }

  applySource(id: string, docId: string): Promise<ApplyResult> {
    return this.request(
      `/sources/${encodeURIComponent(id)}/apply?doc=${encodeURIComponent(docId)}`,
      { method: "POST" },
    );
  }

  applySourceAll(id: string): Promise<JobPayload> {
    return this.request(`/sources/${encodeURIComponent(id)}/apply`, {
      method: "POST",
    });
  }

  denoise(sources: string[], seed = 0): Promise<JobPayload> {
    return this.request("/denoise", {
      method: "POST",
      body: JSON.stringify({ sources, seed }),
    });
  }

  job(id: string): Promise<JobPayload> {
    return this.request(`/jobs/${encodeURIComponent(id)}`);
  }

  cancelJob(id: string): Promise<JobPayload> {
    return this.request(`/jobs/${encodeURIComponent(id)}`, { method: "DELETE" });
  }

  evaluate(pred: string, gold = "gold", mode = "exact"): Promise<MetricsPayload> {
    return this.request("/evaluate", {
      method: "POST",
      body: JSON.stringify({ pred, gold, mode }),
    });
  }

  exportUrl(): string {
    return `${this.base}/export`;
  }
}
