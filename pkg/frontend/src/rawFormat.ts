/**
 * Reader/writer for the evaluation toolkit's raw volume format:
 * `<name>.json` header ({dims, spacing, dtype}) + `<name>.bin`
 * little-endian row-major payload.
 */

import { readFileSync, writeFileSync } from "node:fs";

import type { Shape3 } from "./components.js";

export type RawDtype = "u8" | "i16" | "i32" | "f32" | "f64";

export interface RawVolume {
  dims: Shape3;
  spacing: readonly [number, number, number];
  dtype: RawDtype;
  data: Uint8Array | Int16Array | Int32Array | Float32Array | Float64Array;
}

function payloadPath(headerPath: string): string {
  return headerPath.replace(/\.json$/, ".bin");
}

export function readRaw(headerPathStr: string): RawVolume {
  const header = JSON.parse(readFileSync(headerPathStr, "utf8"));
  const dims = header.dims as Shape3;
  const buf = readFileSync(payloadPath(headerPathStr));
  const bytes = new Uint8Array(buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength));
  const dtype = header.dtype as RawDtype;
  let data: RawVolume["data"];
  switch (dtype) {
    case "u8":
      data = bytes;
      break;
    case "i16":
      data = new Int16Array(bytes.buffer);
      break;
    case "i32":
      data = new Int32Array(bytes.buffer);
      break;
    case "f32":
      data = new Float32Array(bytes.buffer);
      break;
    case "f64":
      data = new Float64Array(bytes.buffer);
      break;
    default:
      throw new RangeError(`unsupported raw dtype ${dtype}`);
  }
  return { dims, spacing: header.spacing, dtype, data };
}

export function writeRaw(headerPathStr: string, vol: RawVolume): void {
  const header = {
    dims: [...vol.dims],
    dtype: vol.dtype,
    spacing: [...vol.spacing],
  };
  writeFileSync(headerPathStr, JSON.stringify(header) + "\n");
  writeFileSync(payloadPath(headerPathStr), new Uint8Array(vol.data.buffer, vol.data.byteOffset, vol.data.byteLength));
}
