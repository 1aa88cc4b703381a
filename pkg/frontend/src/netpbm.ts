/** Binary netpbm (P5/P6) encode/decode plus base64 helpers.
 *
 * The wire format for image payloads is base64-encoded netpbm bytes, so the
 * studio and the service round-trip pixels bit-exactly.
 */

export interface RasterImage {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major bytes, channels interleaved; length = w*h*channels. */
  data: Uint8Array;
}

export function encodeNetpbm(img: RasterImage): Uint8Array {
  const magic = img.channels === 3 ? "P6" : "P5";
  const header = new TextEncoder().encode(`${magic}\n${img.width} ${img.height}\n255\n`);
  const expected = img.width * img.height * img.channels;
  if (img.data.length !== expected) {
    throw new Error(`raster has ${img.data.length} bytes, expected ${expected}`);
  }
  const out = new Uint8Array(header.length + img.data.length);
  out.set(header, 0);
  out.set(img.data, header.length);
  return out;
}

const WHITESPACE = new Set([32, 9, 10, 13, 11, 12]);

function readToken(bytes: Uint8Array, pos: number): [string, number] {
  let i = pos;
  let token = "";
  for (;;) {
    if (i >= bytes.length) throw new Error("truncated netpbm header");
    const c = bytes[i];
    if (c === 35 /* # */) {
      while (i < bytes.length && bytes[i] !== 10) i++;
      continue;
    }
    if (WHITESPACE.has(c)) {
      i++;
      if (token) return [token, i];
      continue;
    }
    token += String.fromCharCode(c);
    i++;
  }
}

export function decodeNetpbm(bytes: Uint8Array): RasterImage {
  let pos = 0;
  let magic: string;
  [magic, pos] = readToken(bytes, pos);
  if (magic !== "P5" && magic !== "P6") {
    throw new Error(`unsupported netpbm magic ${magic}`);
  }
  let tok: string;
  [tok, pos] = readToken(bytes, pos);
  const width = parseInt(tok, 10);
  [tok, pos] = readToken(bytes, pos);
  const height = parseInt(tok, 10);
  [tok, pos] = readToken(bytes, pos);
  const maxval = parseInt(tok, 10);
  if (!(maxval > 0 && maxval <= 255)) throw new Error(`unsupported maxval ${maxval}`);
  const channels = magic === "P6" ? 3 : 1;
  const count = width * height * channels;
  const data = bytes.slice(pos, pos + count);
  if (data.length !== count) {
    throw new Error(`raster truncated: expected ${count} bytes, got ${data.length}`);
  }
  return { width, height, channels: channels as 1 | 3, data };
}

export function toBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export function fromBase64(text: string): Uint8Array {
  const binary = atob(text);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
