/**
 * HMM1 container writer/reader.
 *
 * Layout: 8 magic bytes, uint64 LE header length, UTF-8 JSON header
 * ({layers, heads, tensors, metadata}), then float32 LE row-major payloads
 * at 64-byte-aligned offsets relative to the payload start.  Writes are
 * deterministic: keys are sorted and the same content yields identical bytes.
 */

export const MAGIC = Uint8Array.from([0x48, 0x4d, 0x4d, 0x31, 0x00, 0x00, 0x00, 0x01]);
export const ALIGN = 64;

export interface LayerHeader {
  kind: string;
  in_dim: number;
  out_dim: number;
  activation: string;
}

export interface HeadHeader {
  task: string;
  labels: number[];
}

export interface TensorSpec {
  name: string;
  shape: number[];
  dtype: string;
  offset: number;
}

export interface ContainerHeader {
  layers: LayerHeader[];
  heads: HeadHeader[];
  tensors: TensorSpec[];
  metadata: Record<string, unknown>;
}

export interface NamedTensor {
  name: string;
  shape: number[];
  data: Float32Array;
}

/** JSON with recursively sorted object keys, matching the primary tool. */
export function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
    return "{" + entries.join(",") + "}";
  }
  return JSON.stringify(value);
}

export function writeContainer(
  tensors: NamedTensor[],
  layers: LayerHeader[] = [],
  heads: HeadHeader[] = [],
  metadata: Record<string, unknown> = {},
): Uint8Array {
  const specs: TensorSpec[] = [];
  let offset = 0;
  const segments: { offset: number; data: Float32Array }[] = [];
  for (const t of tensors) {
    offset += (ALIGN - (offset % ALIGN)) % ALIGN;
    specs.push({ name: t.name, shape: t.shape, dtype: "f32", offset });
    segments.push({ offset, data: t.data });
    offset += t.data.length * 4;
  }

  const header: ContainerHeader = { layers, heads, tensors: specs, metadata };
  let headerJson = new TextEncoder().encode(canonicalJson(header));
  const pad = (ALIGN - ((MAGIC.length + 8 + headerJson.length) % ALIGN)) % ALIGN;
  if (pad > 0) {
    const padded = new Uint8Array(headerJson.length + pad);
    padded.set(headerJson);
    padded.fill(0x20, headerJson.length);
    headerJson = padded;
  }

  const out = new Uint8Array(MAGIC.length + 8 + headerJson.length + offset);
  out.set(MAGIC, 0);
  new DataView(out.buffer).setBigUint64(MAGIC.length, BigInt(headerJson.length), true);
  out.set(headerJson, MAGIC.length + 8);

  const payloadStart = MAGIC.length + 8 + headerJson.length;
  const view = new DataView(out.buffer);
  for (const seg of segments) {
    let pos = payloadStart + seg.offset;
    for (let i = 0; i < seg.data.length; i++, pos += 4) {
      view.setFloat32(pos, seg.data[i], true);
    }
  }
  return out;
}

export function readContainer(bytes: Uint8Array): {
  header: ContainerHeader;
  tensors: Map<string, NamedTensor>;
} {
  for (let i = 0; i < MAGIC.length; i++) {
    if (bytes[i] !== MAGIC[i]) {
      throw new Error(`bad magic at byte ${i}`);
    }
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const headerLen = Number(view.getBigUint64(MAGIC.length, true));
  const headerText = new TextDecoder().decode(
    bytes.subarray(MAGIC.length + 8, MAGIC.length + 8 + headerLen),
  );
  const header = JSON.parse(headerText) as ContainerHeader;
  const payloadStart = MAGIC.length + 8 + headerLen;

  const tensors = new Map<string, NamedTensor>();
  for (const spec of header.tensors) {
    const count = spec.shape.reduce((a, b) => a * b, 1);
    const data = new Float32Array(count);
    let pos = payloadStart + spec.offset;
    for (let i = 0; i < count; i++, pos += 4) {
      data[i] = view.getFloat32(pos, true);
    }
    tensors.set(spec.name, { name: spec.name, shape: spec.shape, data });
  }
  return { header, tensors };
}
