/**
 * Viewer controller: orchestrates the load -> segment -> inspect -> save
 * workflow against the HTTP API, keeping all DOM work behind a small
 * View interface so the logic is testable with a stubbed service.
 */

import { ApiClient, type Axis, type Modality } from "./api.js";
import { pollJob, type PollOptions } from "./poller.js";
import * as st from "./state.js";

export interface View {
  /** Re-render controls/readouts from the state snapshot. */
  render(state: st.ViewerState): void;
  /** Display a slice image, optionally compositing the mask overlay. */
  showSlice(gray: Blob, overlay: Blob | null, opacity: number): void;
  /** Hand a downloaded file to the user. */
  saveFile(data: Blob, filename: string): void;
}

export class ViewerController {
  state: st.ViewerState = st.initialState();
  private sliceSeq = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly view: View,
    private readonly pollOptions: PollOptions = {},
  ) {}

  private update(next: st.ViewerState): void {
    this.state = next;
    this.view.render(next);
  }

  private fail(message: string): void {
    // non-blocking banner; phase "error" re-enables every control
    this.update(st.jobFailed(this.state, message));
  }

  async loadVolume(bytes: ArrayBuffer | Uint8Array): Promise<void> {
    if (!st.canLoad(this.state)) return;
    try {
      const info = await this.api.uploadVolume(bytes);
      this.update(st.volumeLoaded(this.state, info.volume_id, info.dims));
      await this.refreshSlice();
    } catch (err) {
      this.fail(`load failed: ${(err as Error).message}`);
    }
  }

  async segment(): Promise<void> {
    if (!st.canSegment(this.state)) return;
    const volumeId = this.state.volumeId!;
    this.update(st.jobStarted(this.state));
    try {
      const { job_id } = await this.api.startSegmentation(volumeId, this.state.modality);
      const job = await pollJob(this.api, job_id, {
        ...this.pollOptions,
        onUpdate: (j) => {
          if (j.state === "running" && this.state.jobPhase === "queued") {
            this.update(st.jobRunning(this.state));
          }
          this.pollOptions.onUpdate?.(j);
        },
      });
      this.update(st.jobDone(this.state, job.result!.mask_id));
      const { ml } = await this.api.volumeMl(job.result!.mask_id);
      this.update(st.volumeMlReceived(this.state, ml));
      await this.refreshSlice();
    } catch (err) {
      this.fail(`segmentation failed: ${(err as Error).message}`);
    }
  }

  async save(): Promise<void> {
    if (!st.canSave(this.state)) return;
    try {
      const data = await this.api.downloadMask(this.state.maskId!);
      this.view.saveFile(data, `${this.state.maskId}.nii.gz`);
    } catch (err) {
      this.fail(`save failed: ${(err as Error).message}`);
    }
  }

  async setAxis(axis: Axis): Promise<void> {
    this.update(st.setAxis(this.state, axis));
    await this.refreshSlice();
  }

  async setSliceIndex(index: number): Promise<void> {
    const next = st.setSliceIndex(this.state, index);
    if (next.sliceIndex === this.state.sliceIndex) {
      this.update(next);
      return;
    }
    this.update(next);
    await this.refreshSlice();
  }

  async stepSlice(delta: number): Promise<void> {
    await this.setSliceIndex(this.state.sliceIndex + delta);
  }

  async setOpacity(opacity: number): Promise<void> {
    this.update(st.setOpacity(this.state, opacity));
    await this.refreshSlice();
  }

  async toggleOverlay(visible?: boolean): Promise<void> {
    this.update(st.toggleOverlay(this.state, visible));
    await this.refreshSlice();
  }

  setModality(modality: Modality): void {
    this.update(st.setModality(this.state, modality));
  }

  dismissBanner(): void {
    this.update(st.bannerDismissed(this.state));
  }

  /**
   * Fetch the current slice (and overlay when a mask is shown); stale
   * responses are dropped via a sequence number so rapid scrolling can
   * never paint an older slice over a newer one.
   */
  async refreshSlice(): Promise<void> {
    const { volumeId, axis, sliceIndex, maskId, overlayVisible, overlayOpacity } = this.state;
    if (volumeId === null) return;
    const seq = ++this.sliceSeq;
    try {
      const withOverlay = maskId !== null && overlayVisible;
      const [gray, overlay] = await Promise.all([
        this.api.fetchSlice(volumeId, axis, sliceIndex),
        withOverlay
          ? this.api.fetchSlice(volumeId, axis, sliceIndex, maskId!)
          : Promise.resolve(null),
      ]);
      if (seq !== this.sliceSeq) return; // a newer request superseded this one
      this.view.showSlice(gray, overlay, overlayOpacity);
    } catch (err) {
      if (seq !== this.sliceSeq) return;
      this.fail(`slice fetch failed: ${(err as Error).message}`);
    }
  }
}
