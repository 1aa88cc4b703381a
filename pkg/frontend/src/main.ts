/** DOM wiring for the editing studio. All logic lives in the other modules. */

import { ApiError, EditServiceClient } from "./api.js";
import { CanvasDocument, type Rgb } from "./canvas.js";
import { decodeNetpbm, type RasterImage } from "./netpbm.js";
import { StudioSession } from "./session.js";
import type { PresetInfo, Verdict } from "./types.js";

const SCALE_TARGET = 320; // on-screen canvas edge, pixels

const SWATCHES: Rgb[] = [
  [230, 60, 40], [40, 120, 220], [50, 170, 80], [240, 200, 60],
  [140, 90, 50], [240, 240, 240], [30, 30, 30],
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function toast(message: string, kind: "info" | "error" = "info"): void {
  const box = document.getElementById("toasts")!;
  const note = el("div", { class: `toast ${kind}` }, message);
  box.appendChild(note);
  setTimeout(() => note.remove(), 4000);
}

function drawRaster(canvas: HTMLCanvasElement, img: RasterImage): void {
  canvas.width = img.width;
  canvas.height = img.height;
  const ctx = canvas.getContext("2d")!;
  const data = ctx.createImageData(img.width, img.height);
  for (let p = 0; p < img.width * img.height; p++) {
    const [r, g, b] = img.channels === 3
      ? [img.data[3 * p], img.data[3 * p + 1], img.data[3 * p + 2]]
      : [img.data[p], img.data[p], img.data[p]];
    data.data[4 * p] = r;
    data.data[4 * p + 1] = g;
    data.data[4 * p + 2] = b;
    data.data[4 * p + 3] = 255;
  }
  ctx.putImageData(data, 0, 0);
}

class App {
  private client = new EditServiceClient("");
  private session: StudioSession | null = null;
  private doc: CanvasDocument | null = null;
  private painting = false;
  private last: [number, number] | null = null;
  private busy = false;

  private canvas = document.getElementById("paint") as HTMLCanvasElement;
  private maskOverlay = document.getElementById("mask-overlay") as HTMLCanvasElement;
  private presetSelect = document.getElementById("preset") as HTMLSelectElement;
  private probeLabel = document.getElementById("probe")!;
  private gallery = document.getElementById("gallery")!;

  async start(): Promise<void> {
    let presets: PresetInfo[];
    try {
      presets = await this.client.listPresets();
    } catch (err) {
      toast(`cannot reach the service: ${String(err)}`, "error");
      return;
    }
    for (const preset of presets.filter((p) => p.shape.length >= 2)) {
      this.presetSelect.appendChild(
        el("option", { value: preset.name }, `${preset.name} (${preset.shape.join("x")})`),
      );
    }
    this.buildSwatches();
    this.bindCanvas();
    this.bindButtons();
    await this.newSession();
  }

  private buildSwatches(): void {
    const bar = document.getElementById("swatches")!;
    for (const color of SWATCHES) {
      const b = el("button", {
        class: "swatch",
        style: `background: rgb(${color.join(",")})`,
        title: `rgb(${color.join(",")})`,
      });
      b.onclick = () => {
        if (this.doc) this.doc.brushColor = color;
      };
      bar.appendChild(b);
    }
    const radius = document.getElementById("radius") as HTMLInputElement;
    radius.oninput = () => {
      if (this.doc) this.doc.brushRadius = parseInt(radius.value, 10);
    };
  }

  private pixelFromEvent(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = Math.floor(((ev.clientX - rect.left) / rect.width) * this.doc!.width);
    const y = Math.floor(((ev.clientY - rect.top) / rect.height) * this.doc!.height);
    return [x, y];
  }

  private bindCanvas(): void {
    this.canvas.addEventListener("pointerdown", (ev) => {
      if (!this.doc) return;
      this.doc.checkpoint();
      this.painting = true;
      const [x, y] = this.pixelFromEvent(ev);
      this.doc.paintDot(x, y);
      this.last = [x, y];
      this.redraw();
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!this.painting || !this.doc || !this.last) return;
      const [x, y] = this.pixelFromEvent(ev);
      this.doc.paintLine(this.last[0], this.last[1], x, y);
      this.last = [x, y];
      this.redraw();
    });
    window.addEventListener("pointerup", () => {
      this.painting = false;
      this.last = null;
    });
  }

  private bindButtons(): void {
    (document.getElementById("new-session") as HTMLButtonElement).onclick = () =>
      void this.newSession();
    (document.getElementById("undo") as HTMLButtonElement).onclick = () => {
      if (this.doc?.undo()) this.redraw();
    };
    (document.getElementById("clear") as HTMLButtonElement).onclick = () =>
      void this.resetDocument();
    (document.getElementById("generate") as HTMLButtonElement).onclick = () =>
      void this.generate();
    for (const verdict of ["more_realistic", "more_faithful", "accept"] as Verdict[]) {
      (document.getElementById(verdict) as HTMLButtonElement).onclick = () =>
        void this.feedback(verdict);
    }
    const upload = document.getElementById("upload") as HTMLInputElement;
    upload.onchange = () => void this.loadBase(upload.files?.[0] ?? undefined);
  }

  private async newSession(): Promise<void> {
    const name = this.presetSelect.value;
    if (!name) return;
    try {
      this.session = await StudioSession.open(this.client, name);
    } catch (err) {
      toast(String(err), "error");
      return;
    }
    await this.resetDocument();
    this.gallery.replaceChildren();
    this.updateProbe();
    toast(`session ${this.session.sessionId.slice(0, 8)}… on ${name}`);
  }

  private async resetDocument(): Promise<void> {
    if (!this.session) return;
    const [h, w] = this.session.preset.shape;
    this.doc = new CanvasDocument(w, h);
    const scale = Math.max(1, Math.round(SCALE_TARGET / Math.max(w, h)));
    this.canvas.style.width = `${w * scale}px`;
    this.canvas.style.height = `${h * scale}px`;
    this.maskOverlay.style.width = this.canvas.style.width;
    this.maskOverlay.style.height = this.canvas.style.height;
    this.redraw();
  }

  private async loadBase(file: File | undefined): Promise<void> {
    if (!file || !this.doc) return;
    const bytes = new Uint8Array(await file.arrayBuffer());
    try {
      if (file.name.endsWith(".ppm") || file.name.endsWith(".pgm")) {
        this.doc.setBase(decodeNetpbm(bytes));
      } else {
        this.doc.setBase(await this.rasterizeBrowserImage(file));
      }
      this.redraw();
    } catch (err) {
      toast(String(err), "error");
    }
  }

  private async rasterizeBrowserImage(file: File): Promise<RasterImage> {
    const bitmap = await createImageBitmap(file);
    const { width, height } = this.doc!;
    const off = document.createElement("canvas");
    off.width = width;
    off.height = height;
    const ctx = off.getContext("2d")!;
    ctx.drawImage(bitmap, 0, 0, width, height);
    const rgba = ctx.getImageData(0, 0, width, height).data;
    const data = new Uint8Array(width * height * 3);
    for (let p = 0; p < width * height; p++) {
      data[3 * p] = rgba[4 * p];
      data[3 * p + 1] = rgba[4 * p + 1];
      data[3 * p + 2] = rgba[4 * p + 2];
    }
    return { width, height, channels: 3, data };
  }

  private redraw(): void {
    if (!this.doc) return;
    drawRaster(this.canvas, this.doc.composite());
    const mask = this.doc.maskImage();
    this.maskOverlay.width = mask.width;
    this.maskOverlay.height = mask.height;
    const ctx = this.maskOverlay.getContext("2d")!;
    const overlay = ctx.createImageData(mask.width, mask.height);
    for (let p = 0; p < mask.data.length; p++) {
      overlay.data[4 * p] = 80;
      overlay.data[4 * p + 1] = 200;
      overlay.data[4 * p + 2] = 255;
      overlay.data[4 * p + 3] = mask.data[p] ? 70 : 0;
    }
    ctx.putImageData(overlay, 0, 0);
  }

  private updateProbe(): void {
    if (!this.session) return;
    const locked = this.session.accepted ? " (locked)" : "";
    this.probeLabel.textContent = `t0 = ${this.session.probeT0.toFixed(4)}${locked}`;
    this.probeLabel.classList.toggle("locked", this.session.accepted);
  }

  private async generate(): Promise<void> {
    if (!this.session || !this.doc || this.busy) return;
    this.busy = true;
    try {
      await this.session.submitDocument(this.doc);
      const candidate = await this.session.generate({ nSteps: 400 });
      const item = el("figure", { class: "candidate" });
      const thumb = el("canvas", { class: "thumb" });
      drawRaster(thumb, decodeNetpbm(candidate.payload));
      item.appendChild(thumb);
      item.appendChild(el(
        "figcaption", {},
        `t0=${candidate.t0.toFixed(3)} L2²=${candidate.l2Squared.toFixed(1)} ` +
        `guide:${candidate.guideHash.slice(0, 8)}`,
      ));
      this.gallery.prepend(item);
    } catch (err) {
      if (err instanceof ApiError && err.code === "busy") {
        toast("server busy; try again in a moment", "error");
      } else {
        toast(String(err), "error");
      }
    } finally {
      this.busy = false;
      this.updateProbe();
    }
  }

  private async feedback(verdict: Verdict): Promise<void> {
    if (!this.session) return;
    try {
      await this.session.sendFeedback(verdict);
      this.updateProbe();
      if (verdict !== "accept") toast(`next probe t0 = ${this.session.probeT0.toFixed(4)}`);
      else toast(`t0 locked at ${this.session.probeT0.toFixed(4)}`);
    } catch (err) {
      if (err instanceof ApiError) toast(`${err.code}: ${err.message}`, "error");
      else toast(String(err), "error");
    }
  }
}

void new App().start();
