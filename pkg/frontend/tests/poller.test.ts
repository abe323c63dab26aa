import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { pollJob } from "../src/poller.js";
import { makeStub } from "./stub_service.js";

describe("job polling", () => {
  it("polls until done and then stops", async () => {
    const stub = makeStub({ jobStates: ["queued", "queued", "running", "done"] });
    const api = new ApiClient("", stub.fetchFn);
    const job = await pollJob(api, "job-1", { sleep: async () => {} });
    expect(job.state).toBe("done");
    expect(stub.jobPolls).toBe(4); // no polls after the terminal state
  });

  it("rejects with the job error message on failed jobs", async () => {
    const stub = makeStub({ jobStates: ["queued", "error"], jobError: "bad weights" });
    const api = new ApiClient("", stub.fetchFn);
    await expect(pollJob(api, "job-1", { sleep: async () => {} })).rejects.toThrow("bad weights");
    expect(stub.jobPolls).toBe(2);
  });

  it("backs off from 500 ms and caps the interval", async () => {
    const stub = makeStub({
      jobStates: ["queued", "queued", "queued", "queued", "queued", "done"],
    });
    const api = new ApiClient("", stub.fetchFn);
    const sleeps: number[] = [];
    await pollJob(api, "job-1", {
      sleep: async (ms) => {
        sleeps.push(ms);
      },
      maxIntervalMs: 1200,
    });
    expect(sleeps[0]).toBe(500);
    expect(sleeps[1]).toBe(750);
    expect(sleeps[sleeps.length - 1]).toBe(1200); // capped
    for (let i = 1; i < sleeps.length; i++) expect(sleeps[i]).toBeGreaterThanOrEqual(sleeps[i - 1]);
  });

  it("propagates fetch failures", async () => {
    const stub = makeStub({ failJobFetch: true });
    const api = new ApiClient("", stub.fetchFn);
    await expect(pollJob(api, "job-1", { sleep: async () => {} })).rejects.toThrow(
      "service unavailable",
    );
  });
});
