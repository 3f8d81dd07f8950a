/**
 * Architecture descriptor: an ordered mapping from framework parameter names
 * to HMM1 layer/head slots, with activation annotations.
 *
 * Framework dense kernels are stored (in, out); HMM1 stores weights
 * (out, in), so entries transpose by default (set "transpose": false for
 * parameters already in out-by-in order).
 */

export interface LayerEntry {
  kind: "Dense" | "ResidualDense";
  activation: "ReLU" | "Linear";
  weight: string;
  bias: string;
  transpose?: boolean;
}

export interface HeadEntry {
  task: string;
  labels: number[];
  weight: string;
  bias: string;
  transpose?: boolean;
}

export interface ArchDescriptor {
  layers: LayerEntry[];
  heads: HeadEntry[];
  metadata?: Record<string, unknown>;
}

export class DescriptorError extends Error {}

export function parseDescriptor(doc: unknown): ArchDescriptor {
  const d = doc as Partial<ArchDescriptor>;
  if (!d || !Array.isArray(d.layers) || d.layers.length === 0) {
    throw new DescriptorError("descriptor needs a non-empty layers list");
  }
  if (!Array.isArray(d.heads) || d.heads.length === 0) {
    throw new DescriptorError("descriptor needs at least one head");
  }
  for (const [i, layer] of d.layers.entries()) {
    if (layer.kind !== "Dense" && layer.kind !== "ResidualDense") {
      throw new DescriptorError(`layer ${i}: unsupported kind ${JSON.stringify(layer.kind)}`);
    }
    if (layer.activation !== "ReLU" && layer.activation !== "Linear") {
      throw new DescriptorError(
        `layer ${i}: unsupported activation ${JSON.stringify(layer.activation)}`,
      );
    }
    if (!layer.weight || !layer.bias) {
      throw new DescriptorError(`layer ${i}: weight and bias parameter names are required`);
    }
  }
  const seen = new Set<string>();
  for (const head of d.heads) {
    if (!head.task || !head.weight || !head.bias || !Array.isArray(head.labels)) {
      throw new DescriptorError("every head needs task, labels, weight, and bias");
    }
    if (seen.has(head.task)) {
      throw new DescriptorError(`duplicate head task ${JSON.stringify(head.task)}`);
    }
    seen.add(head.task);
  }
  return d as ArchDescriptor;
}
