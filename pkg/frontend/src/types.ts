/** Payload types for the annotation server's JSON API. */

export interface AnnotationJson {
  id: string;
  label: string;
  start: number;
  end: number;
  surface: string;
  provenance: string;
}

export interface TokenJson {
  start: number;
  end: number;
  surface: string;
}

export interface DocPayload {
  id: string;
  text: string;
  tokens: TokenJson[];
}

export interface DocListing {
  id: string;
  layers: string[];
}

export interface ProjectInfo {
  name: string;
  labels: string[];
  model_labels: string[];
  n_docs: number;
}

export interface LayerPayload {
  doc: string;
  layer: string;
  version: number;
  annotations: AnnotationJson[];
}

export interface SourceBody {
  id: string;
  kind: string;
  priority: number;
  payload: Record<string, unknown>;
}

export interface ApplyResult {
  doc: string;
  layer: string;
  version: number;
  annotations: AnnotationJson[];
}

export interface JobPayload {
  id: string;
  kind: string;
  status: "pending" | "running" | "done" | "failed" | "cancelled";
  result: Record<string, unknown> | null;
  error: { error: string; message: string } | null;
}

export interface MetricScores {
  precision: number;
  recall: number;
  f1: number;
}

export interface MetricsPayload {
  mode: string;
  pred_layer: string;
  gold_layer: string;
  macro: MetricScores;
  micro: MetricScores & { tp: number; fp: number; fn: number };
  per_doc: Record<string, MetricScores>;
}

export interface ErrorDetail {
  error: string;
  message: string;
  violations?: Array<Record<string, string>>;
}
