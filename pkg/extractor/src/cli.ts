#!/usr/bin/env node
/**
 * extract --model <dir> --layer <name> --images <dir> --out <dir> --split train|test
 *
 * Emits exchange-format feature files plus a manifest that the analysis
 * pipeline consumes directly.
 */

import { extract } from './extract';

function usage(): never {
  console.error(
    'usage: infex-extract --model <dir> [--layer <name>] --images <dir> ' +
      '--out <dir> --split train|test',
  );
  process.exit(64);
}

function parseArgs(argv: string[]): Record<string, string> {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith('--') || value === undefined) usage();
    args[flag.slice(2)] = value;
  }
  return args;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const { model, images, out, split, layer } = args;
  if (!model || !images || !out || (split !== 'train' && split !== 'test')) usage();
  const unknown = Object.keys(args).filter(
    key => !['model', 'images', 'out', 'split', 'layer'].includes(key),
  );
  if (unknown.length > 0) usage();

  const result = await extract({
    modelDir: model,
    imagesDir: images,
    outDir: out,
    split,
    layerName: layer,
  });
  console.log(
    `extracted ${result.records.length} feature file(s), ` +
      `${result.featureHeight}x${result.featureWidth}x${result.channels}, ` +
      `skipped ${result.skipped.length}; manifest: ${result.manifestPath}`,
  );
}

main().catch(err => {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(2);
});
