/**
 * Standalone renderer: node dist/cli.js --kind <kind> --in <file> [--in ...]
 * --out <figure.svg> [--title <text>]
 *
 * Inputs are the solver CLI's CSV/JSON outputs plus the run's
 * manifest.json; the manifest hash is embedded in the figure.
 */

import { writeFileSync } from 'fs';
import { FigureKind, FigureSpec, render } from './figures.js';

const KINDS: FigureKind[] = ['mode_map', 'field_map', 'line_cut',
                             'envelope_curve', 'comparison'];

function parseArgs(argv: string[]): FigureSpec {
  let kind: FigureKind | undefined;
  let output: string | undefined;
  let title: string | undefined;
  const inputs: string[] = [];
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case '--kind':
        kind = argv[++i] as FigureKind;
        break;
      case '--in':
        inputs.push(argv[++i]);
        break;
      case '--out':
        output = argv[++i];
        break;
      case '--title':
        title = argv[++i];
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!kind || !KINDS.includes(kind)) {
    throw new Error(`--kind must be one of ${KINDS.join(', ')}`);
  }
  if (!output) throw new Error('--out is required');
  if (inputs.length === 0) throw new Error('at least one --in is required');
  return { kind, inputs, output, title };
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    writeFileSync(spec.output, render(spec));
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
