/** Mask overlay model: dimension checks and opacity, independent of the DOM. */

export interface OverlayState {
  runId: string;
  maskWidth: number;
  maskHeight: number;
  imageWidth: number;
  imageHeight: number;
  opacity: number;
  visible: boolean;
}

export function createOverlay(
  runId: string,
  maskDims: { width: number; height: number },
  imageDims: { width: number; height: number },
  opacity = 0.5,
): OverlayState {
  return {
    runId,
    maskWidth: maskDims.width,
    maskHeight: maskDims.height,
    imageWidth: imageDims.width,
    imageHeight: imageDims.height,
    opacity,
    visible: true,
  };
}

/** The served mask must match the uploaded image pixel-for-pixel. */
export function overlayDimensionsMatch(o: OverlayState): boolean {
  return o.maskWidth === o.imageWidth && o.maskHeight === o.imageHeight;
}

export function withOpacity(o: OverlayState, opacity: number): OverlayState {
  return { ...o, opacity: Math.min(1, Math.max(0, opacity)) };
}

const PNG_MAGIC = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

/** Read width/height from a PNG's IHDR chunk (bytes 16..24). */
export function pngDimensions(bytes: Uint8Array): { width: number; height: number } {
  if (bytes.length < 24 || PNG_MAGIC.some((b, i) => bytes[i] !== b)) {
    throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  return { width: view.getUint32(16), height: view.getUint32(20) };
}
