/** CLI: render one experiment CSV into one SVG figure.
 *
 *   node dist/render.js --csv out/regret_sweep.csv --kind regret --out regret.svg
 *   node dist/render.js --csv out/estimation_sweep.csv --kind estimation --rho 0.1 --out est01.svg
 *
 * Exits 0 on success; prints `FIGURES-ERROR {json}` to stderr and exits
 * nonzero on any failure (missing file, missing column, bad kind).
 */

import { writeFileSync } from 'node:fs';

import { readResults } from './csv.js';
import { buildFigure, FigureKind } from './figures.js';
import { renderSvg } from './svg.js';

const KINDS: FigureKind[] = ['regret', 'estimation', 'benchmark', 'qubo_compare'];

interface Args {
  csv: string;
  kind: FigureKind;
  out: string;
  rho?: number;
}

export function parseArgs(argv: string[]): Args {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got '${flag}'`);
    }
    values.set(flag.slice(2), argv[i + 1]);
  }
  const csv = values.get('csv');
  const kind = values.get('kind');
  const out = values.get('out');
  if (!csv || !kind || !out) {
    throw new Error('required: --csv <file> --kind <kind> --out <file>');
  }
  if (!KINDS.includes(kind as FigureKind)) {
    throw new Error(`kind must be one of ${KINDS.join(', ')}`);
  }
  const rhoText = values.get('rho');
  return {
    csv,
    kind: kind as FigureKind,
    out,
    rho: rhoText === undefined ? undefined : Number(rhoText),
  };
}

export function renderFile(args: Args): void {
  const table = readResults(args.csv);
  const model = buildFigure(table, args.kind, { rho: args.rho });
  writeFileSync(args.out, renderSvg(model));
}

function main(): number {
  try {
    renderFile(parseArgs(process.argv.slice(2)));
    return 0;
  } catch (err) {
    const payload = {
      error: err instanceof Error ? err.message : String(err),
      type: err instanceof Error ? err.constructor.name : 'unknown',
    };
    process.stderr.write(`FIGURES-ERROR ${JSON.stringify(payload)}\n`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith('render.js')) {
  process.exit(main());
}
