/**
 * Reference forward pass over an HMM1 model container, used to verify that
 * exported bytes reproduce the framework's outputs.  Dense layers compute
 * act(x W^T + b); residual layers add the input back before the activation.
 */

import { ContainerHeader, NamedTensor, readContainer } from "./hmm1.js";

export interface Hmm1Model {
  header: ContainerHeader;
  tensors: Map<string, NamedTensor>;
}

export function loadModel(bytes: Uint8Array): Hmm1Model {
  const { header, tensors } = readContainer(bytes);
  if (!header.layers.length || !header.heads.length) {
    throw new Error("container is not a model (needs layers and heads)");
  }
  return { header, tensors };
}

function affine(x: number[][], w: NamedTensor, b: NamedTensor): number[][] {
  const [outDim, inDim] = w.shape;
  return x.map((row) => {
    const out = new Array<number>(outDim);
    for (let o = 0; o < outDim; o++) {
      let acc = b.data[o];
      for (let i = 0; i < inDim; i++) {
        acc += row[i] * w.data[o * inDim + i];
      }
      out[o] = acc;
    }
    return out;
  });
}

/** Logits over the heads, concatenated in header order. */
export function forward(model: Hmm1Model, batch: number[][]): number[][] {
  let x = batch;
  model.header.layers.forEach((spec, i) => {
    const w = model.tensors.get(`layer${i}.weight`)!;
    const b = model.tensors.get(`layer${i}.bias`)!;
    let z = affine(x, w, b);
    if (spec.kind === "ResidualDense") {
      z = z.map((row, r) => row.map((v, c) => v + x[r][c]));
    }
    x = spec.activation === "ReLU" ? z.map((row) => row.map((v) => Math.max(v, 0))) : z;
  });
  return batch.map((_, r) => {
    const parts: number[] = [];
    for (const head of model.header.heads) {
      const w = model.tensors.get(`head${head.task}.weight`)!;
      const b = model.tensors.get(`head${head.task}.bias`)!;
      parts.push(...affine([x[r]], w, b)[0]);
    }
    return parts;
  });
}
