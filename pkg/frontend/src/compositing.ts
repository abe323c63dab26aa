/**
 * Pure pixel math for overlay compositing (kept canvas-free so it can
 * be unit-tested): the service ships the mask slice as a 0/255
 * grayscale image and the client tints and alpha-blends it.
 */

export const OVERLAY_TINT: [number, number, number] = [255, 80, 40];

/**
 * Turn a grayscale mask slice (RGBA pixels, foreground where the red
 * channel > 127) into a tinted RGBA overlay with the given opacity.
 */
export function tintMask(maskRgba: Uint8ClampedArray, opacity: number): Uint8ClampedArray {
  const out = new Uint8ClampedArray(maskRgba.length);
  const alpha = Math.round(Math.min(Math.max(opacity, 0), 1) * 255);
  for (let i = 0; i < maskRgba.length; i += 4) {
    if (maskRgba[i] > 127) {
      out[i] = OVERLAY_TINT[0];
      out[i + 1] = OVERLAY_TINT[1];
      out[i + 2] = OVERLAY_TINT[2];
      out[i + 3] = alpha;
    }
  }
  return out;
}
