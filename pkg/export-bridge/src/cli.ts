#!/usr/bin/env node
/**
 * Usage: hmm1-export export --ckpt <model.json> --desc <descriptor.json> --out <file.hmm1>
 *
 * Exit codes: 0 success, 2 validation/usage error, 1 internal error.
 */

import { DescriptorError } from "./descriptor.js";
import { ExportError, exportCheckpoint, loadDescriptorFile } from "./export.js";

const USAGE = "usage: hmm1-export export --ckpt <model.json> --desc <descriptor.json> --out <file.hmm1>";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new ExportError(`malformed arguments near ${JSON.stringify(key)}`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

export function run(argv: string[]): number {
  try {
    if (argv[0] !== "export") {
      console.error(USAGE);
      return 2;
    }
    const flags = parseFlags(argv.slice(1));
    for (const required of ["ckpt", "desc", "out"]) {
      if (!flags.has(required)) {
        console.error(`missing --${required}\n${USAGE}`);
        return 2;
      }
    }
    const descriptor = loadDescriptorFile(flags.get("desc")!);
    exportCheckpoint(flags.get("ckpt")!, descriptor, flags.get("out")!);
    console.log(`exported ${flags.get("ckpt")} -> ${flags.get("out")}`);
    return 0;
  } catch (e) {
    if (e instanceof ExportError || e instanceof DescriptorError) {
      console.error(`error: ${(e as Error).message}`);
      return 2;
    }
    console.error(e);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
