/** Weak-source creation forms.
 *
 * One form per source kind, mirroring the sources.json payload schemas.
 * Validation here is required-field only; pattern syntax and label checks
 * belong to the server, whose 400 details render inline at the field.
 */

import type { SourceBody } from "./types.js";

export const SOURCE_KINDS = ["text_match", "regex_match", "rule", "dictionary"] as const;

interface FieldSpec {
  name: string;
  label: string;
  kind: "text" | "number" | "checkbox" | "select";
  required?: boolean;
  options?: string[];
  placeholder?: string;
}

function fieldsFor(kind: string, labels: string[]): FieldSpec[] {
  const labelField = (name: string, text: string, required = true): FieldSpec => ({
    name,
    label: text,
    kind: "select",
    required,
    options: labels,
  });
  switch (kind) {
    case "text_match":
      return [
        { name: "id", label: "Source id", kind: "text", required: true },
        { name: "query", label: "Query", kind: "text", required: true },
        labelField("label", "Label"),
        { name: "case_sensitive", label: "Case sensitive", kind: "checkbox" },
        { name: "priority", label: "Priority", kind: "number" },
      ];
    case "regex_match":
      return [
        { name: "id", label: "Source id", kind: "text", required: true },
        {
          name: "pattern",
          label: "Pattern",
          kind: "text",
          required: true,
          placeholder: "[0-9]+(\\.[0-9]+)?%",
        },
        labelField("label", "Label"),
        { name: "priority", label: "Priority", kind: "number" },
      ];
    case "rule":
      return [
        { name: "id", label: "Source id", kind: "text", required: true },
        { name: "trigger", label: "Trigger token", kind: "text", required: true },
        { name: "trigger_is_regex", label: "Trigger is regex", kind: "checkbox" },
        { name: "window", label: "Window (tokens)", kind: "number", required: true },
        {
          name: "positive_cues",
          label: "Positive cues (comma separated)",
          kind: "text",
        },
        {
          name: "negative_cues",
          label: "Negative cues (comma separated)",
          kind: "text",
        },
        labelField("label_if_cue", "Label if cue present"),
        labelField("label_otherwise", "Label otherwise (empty = abstain)", false),
        { name: "priority", label: "Priority", kind: "number" },
      ];
    case "dictionary":
      return [
        { name: "id", label: "Source id", kind: "text", required: true },
        {
          name: "docs",
          label: "Harvest from docs (comma separated, empty = all)",
          kind: "text",
        },
        { name: "case_sensitive", label: "Case sensitive", kind: "checkbox" },
        { name: "priority", label: "Priority", kind: "number" },
      ];
    default:
      throw new Error(`unknown source kind ${kind}`);
  }
}

export function renderSourceForm(
  doc: Document,
  kind: string,
  labels: string[],
): HTMLFormElement {
  const form = doc.createElement("form");
  form.className = "source-form";
  form.dataset.kind = kind;
  for (const spec of fieldsFor(kind, labels)) {
    const row = doc.createElement("label");
    row.className = "field";
    row.dataset.field = spec.name;
    const caption = doc.createElement("span");
    caption.textContent = spec.label;
    row.appendChild(caption);
    let input: HTMLElement;
    if (spec.kind === "select") {
      const select = doc.createElement("select");
      select.name = spec.name;
      if (!spec.required) {
        select.appendChild(doc.createElement("option"));
      }
      for (const option of spec.options ?? []) {
        const el = doc.createElement("option");
        el.value = option;
        el.textContent = option;
        select.appendChild(el);
      }
      input = select;
    } else {
      const el = doc.createElement("input");
      el.name = spec.name;
      el.type = spec.kind === "checkbox" ? "checkbox" : spec.kind;
      if (spec.placeholder) {
        el.placeholder = spec.placeholder;
      }
      input = el;
    }
    if (spec.required) {
      input.dataset.required = "1";
    }
    row.appendChild(input);
    const error = doc.createElement("span");
    error.className = "field-error";
    row.appendChild(error);
    form.appendChild(row);
  }
  const preview = doc.createElement("button");
  preview.type = "button";
  preview.className = "preview";
  preview.textContent = "Preview on current doc";
  form.appendChild(preview);
  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.textContent = "Create source";
  form.appendChild(submit);
  return form;
}

function fieldValue(form: HTMLFormElement, name: string): string {
  const el = form.querySelector(`[name="${name}"]`) as
    | HTMLInputElement
    | HTMLSelectElement
    | null;
  if (!el) {
    return "";
  }
  if ((el as HTMLInputElement).type === "checkbox") {
    return (el as HTMLInputElement).checked ? "on" : "";
  }
  return el.value.trim();
}

export function clearFieldErrors(form: HTMLFormElement): void {
  form.querySelectorAll(".field-error").forEach((el) => {
    el.textContent = "";
  });
}

export function showFieldError(
  form: HTMLFormElement,
  field: string,
  message: string,
): void {
  const row = form.querySelector(`[data-field="${field}"] .field-error`);
  if (row) {
    row.textContent = message;
  }
}

/** Collect the form into a POST /sources body.
 *
 * Returns null (after marking the offending fields) when a required field
 * is empty; in that case no request must be sent.
 */
export function sourceBodyFromForm(form: HTMLFormElement): SourceBody | null {
  clearFieldErrors(form);
  let valid = true;
  form.querySelectorAll("[data-required]").forEach((el) => {
    const input = el as HTMLInputElement;
    if (!input.value.trim()) {
      valid = false;
      showFieldError(form, input.name, "required");
    }
  });
  if (!valid) {
    return null;
  }
  const kind = form.dataset.kind ?? "";
  const id = fieldValue(form, "id");
  const priority = Number(fieldValue(form, "priority") || "0");
  const cues = (name: string) =>
    fieldValue(form, name)
      .split(",")
      .map((c) => c.trim().toLowerCase())
      .filter((c) => c.length > 0);
  let payload: Record<string, unknown>;
  switch (kind) {
    case "text_match":
      payload = {
        query: fieldValue(form, "query"),
        label: fieldValue(form, "label"),
        case_sensitive: fieldValue(form, "case_sensitive") === "on",
      };
      break;
    case "regex_match":
      payload = {
        pattern: fieldValue(form, "pattern"),
        label: fieldValue(form, "label"),
      };
      break;
    case "rule":
      payload = {
        trigger: fieldValue(form, "trigger"),
        trigger_is_regex: fieldValue(form, "trigger_is_regex") === "on",
        window: Number(fieldValue(form, "window") || "0"),
        positive_cues: cues("positive_cues"),
        negative_cues: cues("negative_cues"),
        label_if_cue: fieldValue(form, "label_if_cue"),
        label_otherwise: fieldValue(form, "label_otherwise") || null,
      };
      break;
    case "dictionary":
      payload = {
        entries: [],
        case_sensitive: fieldValue(form, "case_sensitive") === "on",
      };
      break;
    default:
      throw new Error(`unknown source kind ${kind}`);
  }
  return { id, kind, priority, payload };
}
