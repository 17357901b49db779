// Heatmap rendering: score grid -> RGBA buffer (pure, testable) + canvas glue.

export interface RgbaBuffer {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>; // RGBA rows
}

/** Waste-likelihood colormap: transparent below the floor, then yellow to red. */
export function heatmapRgba(scores: number[][], opacity: number, floor = 0.05): RgbaBuffer {
  const height = scores.length;
  const width = height ? scores[0].length : 0;
  const data = new Uint8ClampedArray(width * height * 4);
  const alphaScale = Math.max(0, Math.min(1, opacity));
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const s = Math.max(0, Math.min(1, scores[y][x]));
      const o = (y * width + x) * 4;
      if (s < floor) continue; // leave fully transparent
      data[o] = 255;
      data[o + 1] = Math.round(255 * (1 - s)); // high score -> red, low -> yellow
      data[o + 2] = 0;
      data[o + 3] = Math.round(255 * alphaScale * s);
    }
  }
  return { width, height, data };
}

export function drawHeatmap(
  canvas: HTMLCanvasElement,
  scores: number[][],
  opacity: number,
  scale = 6,
): void {
  const buf = heatmapRgba(scores, opacity);
  canvas.width = buf.width * scale;
  canvas.height = buf.height * scale;
  const ctx = canvas.getContext("2d");
  if (!ctx || buf.width === 0) return;
  const off = new OffscreenCanvas(buf.width, buf.height);
  const octx = off.getContext("2d")!;
  octx.putImageData(new ImageData(buf.data, buf.width, buf.height), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}
