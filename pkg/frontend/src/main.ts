/**
 * Browser bootstrap: binds the controller to the DOM, renders slices to
 * a canvas, and wires keyboard + pointer controls.
 */

import { ApiClient, type Axis, type Modality } from "./api.js";
import { ViewerController, type View } from "./app.js";
import { tintMask } from "./compositing.js";
import * as st from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class CanvasView implements View {
  private canvas = el<HTMLCanvasElement>("slice-canvas");

  render(state: st.ViewerState): void {
    el<HTMLSpanElement>("volume-indicator").textContent = st.volumeIndicator(state);
    el<HTMLSpanElement>("job-status").textContent = state.jobPhase;
    el<HTMLSpanElement>("slice-label").textContent = String(state.sliceIndex);

    const slider = el<HTMLInputElement>("slice-slider");
    const extent = st.axisExtent(state.dims, state.axis);
    slider.max = String(Math.max(extent - 1, 0));
    slider.value = String(state.sliceIndex);
    slider.disabled = state.dims === null;

    el<HTMLButtonElement>("segment-button").disabled = !st.canSegment(state);
    el<HTMLButtonElement>("save-button").disabled = !st.canSave(state);
    el<HTMLInputElement>("load-input").disabled = !st.canLoad(state);
    (el<HTMLSelectElement>("modality-select")).value = state.modality;
    el<HTMLInputElement>("overlay-toggle").checked = state.overlayVisible;

    const banner = el<HTMLDivElement>("error-banner");
    banner.hidden = state.banner === null;
    el<HTMLSpanElement>("error-text").textContent = state.banner ?? "";

    for (const axis of ["x", "y", "z"] as Axis[]) {
      el<HTMLButtonElement>(`axis-${axis}`).classList.toggle("active", state.axis === axis);
    }
  }

  showSlice(gray: Blob, overlay: Blob | null, opacity: number): void {
    void this.draw(gray, overlay, opacity);
  }

  private async draw(gray: Blob, overlay: Blob | null, opacity: number): Promise<void> {
    const image = await createImageBitmap(gray);
    this.canvas.width = image.width;
    this.canvas.height = image.height;
    const ctx = this.canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(image, 0, 0);
    if (overlay) {
      const maskImage = await createImageBitmap(overlay);
      const scratch = document.createElement("canvas");
      scratch.width = maskImage.width;
      scratch.height = maskImage.height;
      const sctx = scratch.getContext("2d")!;
      sctx.drawImage(maskImage, 0, 0);
      const pixels = sctx.getImageData(0, 0, scratch.width, scratch.height);
      sctx.putImageData(
        new ImageData(tintMask(pixels.data, opacity), scratch.width, scratch.height),
        0,
        0,
      );
      ctx.drawImage(scratch, 0, 0);
    }
  }

  saveFile(data: Blob, filename: string): void {
    const anchor = document.createElement("a");
    anchor.href = URL.createObjectURL(data);
    anchor.download = filename;
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  }
}

function wire(): void {
  const api = new ApiClient("");
  const controller = new ViewerController(api, new CanvasView());
  controller.dismissBanner(); // initial render

  el<HTMLInputElement>("load-input").addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) await controller.loadVolume(await file.arrayBuffer());
  });
  el<HTMLButtonElement>("segment-button").addEventListener("click", () => {
    void controller.segment();
  });
  el<HTMLButtonElement>("save-button").addEventListener("click", () => {
    void controller.save();
  });
  el<HTMLSelectElement>("modality-select").addEventListener("change", (event) => {
    controller.setModality((event.target as HTMLSelectElement).value as Modality);
  });
  el<HTMLInputElement>("slice-slider").addEventListener("input", (event) => {
    void controller.setSliceIndex(Number((event.target as HTMLInputElement).value));
  });
  el<HTMLInputElement>("opacity-slider").addEventListener("input", (event) => {
    void controller.setOpacity(Number((event.target as HTMLInputElement).value) / 100);
  });
  el<HTMLInputElement>("overlay-toggle").addEventListener("change", (event) => {
    void controller.toggleOverlay((event.target as HTMLInputElement).checked);
  });
  el<HTMLButtonElement>("dismiss-banner").addEventListener("click", () => {
    controller.dismissBanner();
  });
  for (const axis of ["x", "y", "z"] as Axis[]) {
    el<HTMLButtonElement>(`axis-${axis}`).addEventListener("click", () => {
      void controller.setAxis(axis);
    });
  }

  // keyboard: arrows scroll slices, x/y/z switch axes, o toggles overlay
  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement && event.target.type === "text") return;
    switch (event.key) {
      case "ArrowUp":
      case "ArrowRight":
        void controller.stepSlice(1);
        event.preventDefault();
        break;
      case "ArrowDown":
      case "ArrowLeft":
        void controller.stepSlice(-1);
        event.preventDefault();
        break;
      case "x":
      case "y":
      case "z":
        void controller.setAxis(event.key as Axis);
        break;
      case "o":
        void controller.toggleOverlay();
        break;
    }
  });
}

wire();
