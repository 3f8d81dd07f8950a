/**
 * Convert a framework checkpoint into an HMM1 model container following an
 * architecture descriptor.  Only sequential dense/residual stacks are
 * exportable; anything else is rejected with the offending parameter named.
 */

import * as fs from "node:fs";

import { CheckpointTensor, loadCheckpoint } from "./checkpoint.js";
import { ArchDescriptor, DescriptorError, parseDescriptor } from "./descriptor.js";
import { HeadHeader, LayerHeader, NamedTensor, writeContainer } from "./hmm1.js";

export class ExportError extends Error {}

function take(
  tensors: Map<string, CheckpointTensor>,
  name: string,
  what: string,
): CheckpointTensor {
  const t = tensors.get(name);
  if (!t) {
    throw new ExportError(`missing parameter ${JSON.stringify(name)} (${what})`);
  }
  return t;
}

function transpose2d(t: CheckpointTensor): CheckpointTensor {
  const [rows, cols] = t.shape;
  const out = new Float32Array(t.data.length);
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) {
      out[j * rows + i] = t.data[i * cols + j];
    }
  }
  return { shape: [cols, rows], data: out };
}

function asWeight(
  tensors: Map<string, CheckpointTensor>,
  name: string,
  what: string,
  transpose: boolean,
): CheckpointTensor {
  const raw = take(tensors, name, what);
  if (raw.shape.length !== 2) {
    throw new ExportError(
      `parameter ${JSON.stringify(name)} has rank ${raw.shape.length}; only rank-2 ` +
        `weights are exportable (${what})`,
    );
  }
  return transpose ? transpose2d(raw) : raw;
}

function asBias(
  tensors: Map<string, CheckpointTensor>,
  name: string,
  what: string,
  outDim: number,
): CheckpointTensor {
  const raw = take(tensors, name, what);
  if (raw.shape.length !== 1 || raw.shape[0] !== outDim) {
    throw new ExportError(
      `parameter ${JSON.stringify(name)} has shape [${raw.shape}], expected [${outDim}] (${what})`,
    );
  }
  return raw;
}

export function exportCheckpoint(
  checkpointPath: string,
  descriptor: ArchDescriptor,
  outPath: string,
): void {
  const bytes = buildContainer(loadCheckpoint(checkpointPath), descriptor);
  fs.writeFileSync(outPath, bytes);
}

export function buildContainer(
  tensors: Map<string, CheckpointTensor>,
  descriptor: ArchDescriptor,
): Uint8Array {
  const layers: LayerHeader[] = [];
  const heads: HeadHeader[] = [];
  const payload: NamedTensor[] = [];

  let prevOut: number | null = null;
  descriptor.layers.forEach((entry, i) => {
    const what = `layer ${i} of kind ${entry.kind}`;
    const w = asWeight(tensors, entry.weight, what, entry.transpose ?? true);
    const [outDim, inDim] = w.shape;
    if (entry.kind === "ResidualDense" && inDim !== outDim) {
      throw new ExportError(
        `parameter ${JSON.stringify(entry.weight)}: residual layers need square ` +
          `weights, got ${outDim}x${inDim}`,
      );
    }
    if (prevOut !== null && inDim !== prevOut) {
      throw new ExportError(
        `parameter ${JSON.stringify(entry.weight)}: in_dim ${inDim} does not chain ` +
          `with previous out_dim ${prevOut}`,
      );
    }
    prevOut = outDim;
    const b = asBias(tensors, entry.bias, what, outDim);
    layers.push({ kind: entry.kind, in_dim: inDim, out_dim: outDim, activation: entry.activation });
    payload.push({ name: `layer${i}.weight`, shape: w.shape, data: w.data });
    payload.push({ name: `layer${i}.bias`, shape: b.shape, data: b.data });
  });

  for (const entry of descriptor.heads) {
    const what = `head ${entry.task}`;
    const w = asWeight(tensors, entry.weight, what, entry.transpose ?? true);
    const [labels, inDim] = w.shape;
    if (inDim !== prevOut) {
      throw new ExportError(
        `parameter ${JSON.stringify(entry.weight)}: head in_dim ${inDim} does not ` +
          `match final hidden dim ${prevOut}`,
      );
    }
    if (labels !== entry.labels.length) {
      throw new ExportError(
        `parameter ${JSON.stringify(entry.weight)}: ${labels} output rows but ` +
          `${entry.labels.length} labels declared`,
      );
    }
    const b = asBias(tensors, entry.bias, what, labels);
    heads.push({ task: entry.task, labels: entry.labels });
    payload.push({ name: `head${entry.task}.weight`, shape: w.shape, data: w.data });
    payload.push({ name: `head${entry.task}.bias`, shape: b.shape, data: b.data });
  }

  const metadata = {
    ...(descriptor.metadata ?? {}),
    exported_by: "hmm1-export-bridge",
  };
  return writeContainer(payload, layers, heads, metadata);
}

export function loadDescriptorFile(path: string): ArchDescriptor {
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(path, "utf-8"));
  } catch (e) {
    throw new DescriptorError(`cannot read descriptor ${path}: ${(e as Error).message}`);
  }
  return parseDescriptor(doc);
}
