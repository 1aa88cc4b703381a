/** Painting document: base layer, stroke layer, derived mask, linear undo.
 *
 * Pure pixel-buffer logic with no DOM dependency; the page wires it to a
 * <canvas>. The brush is hard-edged so the derived mask stays binary: the
 * mask is exactly the set of stroke-touched pixels, or all ones when painting
 * from scratch (no base image).
 */

import { encodeNetpbm, type RasterImage } from "./netpbm.js";

export type Rgb = [number, number, number];

export interface ExportedGuide {
  guide: RasterImage;
  mask: RasterImage; // P5, 0 or 255
  guideBytes: Uint8Array;
  maskBytes: Uint8Array;
}

export class CanvasDocument {
  readonly width: number;
  readonly height: number;
  base: Uint8Array | null = null;
  strokes: Uint8Array;
  touched: Uint8Array;
  brushColor: Rgb = [230, 60, 40];
  brushRadius = 2;
  private undoStack: Array<{ strokes: Uint8Array; touched: Uint8Array }> = [];

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) throw new Error("canvas dimensions must be >= 1");
    this.width = width;
    this.height = height;
    this.strokes = new Uint8Array(width * height * 3);
    this.touched = new Uint8Array(width * height);
  }

  setBase(img: RasterImage): void {
    if (img.width !== this.width || img.height !== this.height) {
      throw new Error(
        `base image is ${img.width}x${img.height}, canvas ${this.width}x${this.height}`,
      );
    }
    const rgb = new Uint8Array(this.width * this.height * 3);
    if (img.channels === 3) {
      rgb.set(img.data);
    } else {
      for (let i = 0; i < img.data.length; i++) {
        rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = img.data[i];
      }
    }
    this.base = rgb;
  }

  isEmpty(): boolean {
    return this.base === null && !this.touched.some((v) => v !== 0);
  }

  checkpoint(): void {
    this.undoStack.push({
      strokes: this.strokes.slice(),
      touched: this.touched.slice(),
    });
    if (this.undoStack.length > 32) this.undoStack.shift();
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.strokes = prev.strokes;
    this.touched = prev.touched;
    return true;
  }

  paintDot(cx: number, cy: number): void {
    const r = this.brushRadius;
    const r2 = r * r;
    const [cr, cg, cb] = this.brushColor;
    for (let y = Math.max(0, cy - r); y <= Math.min(this.height - 1, cy + r); y++) {
      for (let x = Math.max(0, cx - r); x <= Math.min(this.width - 1, cx + r); x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy > r2) continue;
        const p = y * this.width + x;
        this.touched[p] = 1;
        this.strokes[3 * p] = cr;
        this.strokes[3 * p + 1] = cg;
        this.strokes[3 * p + 2] = cb;
      }
    }
  }

  paintLine(x0: number, y0: number, x1: number, y1: number): void {
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0), 1);
    for (let s = 0; s <= steps; s++) {
      this.paintDot(
        Math.round(x0 + ((x1 - x0) * s) / steps),
        Math.round(y0 + ((y1 - y0) * s) / steps),
      );
    }
  }

  /** Flattened composite: strokes over the base (white background if none). */
  composite(): RasterImage {
    const n = this.width * this.height;
    const out = new Uint8Array(n * 3);
    if (this.base) {
      out.set(this.base);
    } else {
      out.fill(255);
    }
    for (let p = 0; p < n; p++) {
      if (this.touched[p]) {
        out[3 * p] = this.strokes[3 * p];
        out[3 * p + 1] = this.strokes[3 * p + 1];
        out[3 * p + 2] = this.strokes[3 * p + 2];
      }
    }
    return { width: this.width, height: this.height, channels: 3, data: out };
  }

  /** Editable-region mask: stroke pixels, or everything in from-scratch mode. */
  maskImage(): RasterImage {
    const n = this.width * this.height;
    const data = new Uint8Array(n);
    if (this.base === null) {
      data.fill(255);
    } else {
      for (let p = 0; p < n; p++) data[p] = this.touched[p] ? 255 : 0;
    }
    return { width: this.width, height: this.height, channels: 1, data };
  }

  export(): ExportedGuide {
    if (this.isEmpty()) throw new Error("nothing to export: paint or load an image first");
    const guide = this.composite();
    const mask = this.maskImage();
    return {
      guide,
      mask,
      guideBytes: encodeNetpbm(guide),
      maskBytes: encodeNetpbm(mask),
    };
  }
}
