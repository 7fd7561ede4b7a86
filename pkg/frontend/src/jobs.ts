/** Background job polling at 1 Hz (configurable for tests). */

import type { ApiClient } from "./api.js";
import type { JobPayload } from "./types.js";

const FINAL = new Set(["done", "failed", "cancelled"]);

export async function pollJob(
  api: ApiClient,
  jobId: string,
  options: {
    intervalMs?: number;
    timeoutMs?: number;
    onTick?: (job: JobPayload) => void;
  } = {},
): Promise<JobPayload> {
  const interval = options.intervalMs ?? 1000;
  const deadline = Date.now() + (options.timeoutMs ?? 120_000);
  for (;;) {
    const job = await api.job(jobId);
    options.onTick?.(job);
    if (FINAL.has(job.status)) {
      return job;
    }
    if (Date.now() > deadline) {
      throw new Error(`job ${jobId} did not finish before the deadline`);
    }
    await new Promise((resolve) => setTimeout(resolve, interval));
  }
}
