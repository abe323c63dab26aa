/**
 * Typed client for the volseg HTTP service.
 *
 * The fetch implementation is injectable so tests can run against a
 * stubbed service without any network.
 */

export type Axis = "x" | "y" | "z";
export type Modality = "T1" | "T2";

export interface VolumeInfo {
  volume_id: string;
  dims: [number, number, number];
  spacing: [number, number, number];
}

export interface JobRecord {
  job_id: string;
  kind: string;
  state: "queued" | "running" | "done" | "error";
  result: { mask_id: string; foreground_voxels: number } | null;
  error: string | null;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function toError(response: Response): Promise<ApiError> {
  let detail = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body; keep the status text */
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async json<T>(url: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + url, init);
    if (!response.ok) throw await toError(response);
    return (await response.json()) as T;
  }

  uploadVolume(bytes: ArrayBuffer | Uint8Array): Promise<VolumeInfo> {
    return this.json<VolumeInfo>("/volumes", {
      method: "POST",
      headers: { "content-type": "application/octet-stream" },
      body: bytes as BodyInit,
    });
  }

  startSegmentation(volumeId: string, modality: Modality): Promise<{ job_id: string }> {
    return this.json<{ job_id: string }>("/segment", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ volume_id: volumeId, modality }),
    });
  }

  getJob(jobId: string): Promise<JobRecord> {
    return this.json<JobRecord>(`/jobs/${jobId}`);
  }

  volumeMl(maskId: string): Promise<{ ml: number }> {
    return this.json<{ ml: number }>(`/masks/${maskId}/volume-ml`);
  }

  sliceUrl(volumeId: string, axis: Axis, index: number, overlayMaskId?: string): string {
    const overlay = overlayMaskId ? `?overlay=${encodeURIComponent(overlayMaskId)}` : "";
    return `${this.baseUrl}/volumes/${volumeId}/slices/${axis}/${index}${overlay}`;
  }

  async fetchSlice(
    volumeId: string,
    axis: Axis,
    index: number,
    overlayMaskId?: string,
  ): Promise<Blob> {
    const response = await this.fetchFn(this.sliceUrl(volumeId, axis, index, overlayMaskId));
    if (!response.ok) throw await toError(response);
    return response.blob();
  }

  async downloadMask(maskId: string): Promise<Blob> {
    const response = await this.fetchFn(`${this.baseUrl}/masks/${maskId}/download`);
    if (!response.ok) throw await toError(response);
    return response.blob();
  }
}
