/**
 * Poll a segmentation job until it terminates.
 *
 * Interval starts at 500 ms and backs off gently on every poll; polling
 * stops on done/error and on fetch failures (rejected promise). The
 * sleep function is injectable so tests run instantly.
 */

import type { ApiClient, JobRecord } from "./api.js";

export interface PollOptions {
  intervalMs?: number;
  backoff?: number;
  maxIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (job: JobRecord) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export async function pollJob(
  api: ApiClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobRecord> {
  const {
    intervalMs = 500,
    backoff = 1.5,
    maxIntervalMs = 5000,
    sleep = defaultSleep,
    onUpdate,
  } = options;

  let wait = intervalMs;
  for (;;) {
    const job = await api.getJob(jobId);
    onUpdate?.(job);
    if (job.state === "done") return job;
    if (job.state === "error") throw new Error(job.error ?? "segmentation failed");
    await sleep(wait);
    wait = Math.min(wait * backoff, maxIntervalMs);
  }
}
