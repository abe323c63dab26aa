/**
 * Viewer state and pure transition functions.
 *
 * Invariants maintained here (and relied on by the controller):
 *  - sliceIndex always stays inside the loaded volume's extent for the
 *    current axis, so no out-of-range slice request can ever be issued;
 *  - volumeMlText is set only from a /volume-ml response (rendered to
 *    two decimals, never recomputed client-side) and only while a mask
 *    exists;
 *  - segmentation controls are disabled while a job is queued/running.
 */

import type { Axis, Modality } from "./api.js";

export type JobPhase = "idle" | "queued" | "running" | "done" | "error";

export interface ViewerState {
  volumeId: string | null;
  dims: [number, number, number] | null;
  maskId: string | null;
  axis: Axis;
  sliceIndex: number;
  overlayVisible: boolean;
  overlayOpacity: number;
  modality: Modality;
  jobPhase: JobPhase;
  volumeMlText: string | null;
  banner: string | null;
}

const AXIS_INDEX: Record<Axis, 0 | 1 | 2> = { x: 0, y: 1, z: 2 };

export function initialState(): ViewerState {
  return {
    volumeId: null,
    dims: null,
    maskId: null,
    axis: "z",
    sliceIndex: 0,
    overlayVisible: true,
    overlayOpacity: 0.5,
    modality: "T2",
    jobPhase: "idle",
    volumeMlText: null,
    banner: null,
  };
}

export function axisExtent(dims: [number, number, number] | null, axis: Axis): number {
  return dims ? dims[AXIS_INDEX[axis]] : 0;
}

export function clampIndex(state: ViewerState, index: number): number {
  const extent = axisExtent(state.dims, state.axis);
  if (extent <= 0) return 0;
  return Math.min(Math.max(Math.trunc(index), 0), extent - 1);
}

export function volumeLoaded(
  state: ViewerState,
  volumeId: string,
  dims: [number, number, number],
): ViewerState {
  // fresh volume: drop any previous mask/volume readout, show middle axial slice
  return {
    ...state,
    volumeId,
    dims,
    maskId: null,
    axis: "z",
    sliceIndex: Math.floor(dims[2] / 2),
    jobPhase: "idle",
    volumeMlText: null,
    banner: null,
  };
}

export function setAxis(state: ViewerState, axis: Axis): ViewerState {
  const next = { ...state, axis };
  return { ...next, sliceIndex: clampIndex(next, state.sliceIndex) };
}

export function setSliceIndex(state: ViewerState, index: number): ViewerState {
  return { ...state, sliceIndex: clampIndex(state, index) };
}

export function stepSlice(state: ViewerState, delta: number): ViewerState {
  return setSliceIndex(state, state.sliceIndex + delta);
}

export function setOpacity(state: ViewerState, opacity: number): ViewerState {
  return { ...state, overlayOpacity: Math.min(Math.max(opacity, 0), 1) };
}

export function toggleOverlay(state: ViewerState, visible?: boolean): ViewerState {
  return { ...state, overlayVisible: visible ?? !state.overlayVisible };
}

export function setModality(state: ViewerState, modality: Modality): ViewerState {
  return { ...state, modality };
}

export function jobStarted(state: ViewerState): ViewerState {
  return { ...state, jobPhase: "queued", banner: null };
}

export function jobRunning(state: ViewerState): ViewerState {
  return { ...state, jobPhase: "running" };
}

export function jobDone(state: ViewerState, maskId: string): ViewerState {
  return { ...state, jobPhase: "done", maskId };
}

export function jobFailed(state: ViewerState, message: string): ViewerState {
  return { ...state, jobPhase: "error", banner: message };
}

/** Render a /volume-ml response; the only producer of volumeMlText. */
export function volumeMlReceived(state: ViewerState, ml: number): ViewerState {
  if (state.maskId === null) return state; // no mask, no readout
  return { ...state, volumeMlText: ml.toFixed(2) };
}

export function bannerDismissed(state: ViewerState): ViewerState {
  return { ...state, banner: null };
}

export function canLoad(state: ViewerState): boolean {
  return state.jobPhase !== "queued" && state.jobPhase !== "running";
}

export function canSegment(state: ViewerState): boolean {
  return state.volumeId !== null && canLoad(state);
}

export function canSave(state: ViewerState): boolean {
  return state.maskId !== null && state.jobPhase !== "queued" && state.jobPhase !== "running";
}

export function volumeIndicator(state: ViewerState): string {
  return state.maskId !== null && state.volumeMlText !== null
    ? `${state.volumeMlText} mL`
    : "–";
}
