/**
 * Reader for TensorFlow.js LayersModel artifacts on disk: a model.json whose
 * weightsManifest names the weight binaries, plus the .bin shards.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface CheckpointTensor {
  shape: number[];
  data: Float32Array;
}

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

export function loadCheckpoint(modelJsonPath: string): Map<string, CheckpointTensor> {
  if (!fs.existsSync(modelJsonPath)) {
    throw new Error(`checkpoint not found: ${modelJsonPath}`);
  }
  const doc = JSON.parse(fs.readFileSync(modelJsonPath, "utf-8"));
  const manifest = doc.weightsManifest as ManifestGroup[] | undefined;
  if (!manifest || !Array.isArray(manifest)) {
    throw new Error(`${modelJsonPath}: missing weightsManifest`);
  }
  const dir = path.dirname(modelJsonPath);
  const tensors = new Map<string, CheckpointTensor>();
  for (const group of manifest) {
    const buffers = group.paths.map((p) => fs.readFileSync(path.join(dir, p)));
    const blob = Buffer.concat(buffers);
    const view = new DataView(blob.buffer, blob.byteOffset, blob.byteLength);
    let offset = 0;
    for (const spec of group.weights) {
      const count = spec.shape.reduce((a, b) => a * b, 1);
      if (spec.dtype !== "float32") {
        throw new Error(`unsupported dtype ${spec.dtype} for parameter ${spec.name}`);
      }
      const data = new Float32Array(count);
      for (let i = 0; i < count; i++, offset += 4) {
        data[i] = view.getFloat32(offset, true);
      }
      tensors.set(spec.name, { shape: spec.shape, data });
    }
  }
  return tensors;
}
