/**
 * Figure rendering from real solver outputs: all five kinds render, every
 * numeric annotation round-trips to its CSV/JSON source, the manifest
 * hash is embedded, and schema mismatches abort with a column diff.
 */

import { mkdtempSync, readFileSync, writeFileSync } from 'fs';
import { tmpdir } from 'os';
import { join } from 'path';
import { describe, expect, it } from 'vitest';

import { readJson, readCsv, SchemaMismatchError } from '../src/csv.js';
import { FigureKind, FigureSpec, render } from '../src/figures.js';

const FIELD_RUN = join(__dirname, 'fixtures', 'field_run');
const COMPARE_RUN = join(__dirname, 'fixtures', 'compare_run');

function fieldInputs(): string[] {
  return ['field.csv', 'field.json', 'field_line.csv', 'manifest.json']
    .map((f) => join(FIELD_RUN, f));
}

function compareInputs(): string[] {
  return ['compare.json', 'envelope_honeycomb.csv', 'envelope_honeycomb.json',
          'envelope_square.csv', 'manifest.json']
    .map((f) => join(COMPARE_RUN, f));
}

function envelopeInputs(): string[] {
  // the honeycomb half of the compare run doubles as an envelope run
  const dir = mkdtempSync(join(tmpdir(), 'envfix-'));
  writeFileSync(join(dir, 'envelope.csv'),
                readFileSync(join(COMPARE_RUN, 'envelope_honeycomb.csv')));
  writeFileSync(join(dir, 'envelope.json'),
                readFileSync(join(COMPARE_RUN, 'envelope_honeycomb.json')));
  writeFileSync(join(dir, 'manifest.json'),
                readFileSync(join(COMPARE_RUN, 'manifest.json')));
  return ['envelope.csv', 'envelope.json', 'manifest.json']
    .map((f) => join(dir, f));
}

function specFor(kind: FigureKind): FigureSpec {
  const inputs = kind === 'comparison' ? compareInputs()
    : kind === 'envelope_curve' ? envelopeInputs()
    : fieldInputs();
  return { kind, inputs, output: '/dev/null' };
}

function annotations(svg: string): Map<string, string> {
  const out = new Map<string, string>();
  const re = /class="annotation" data-key="([^"]+)" data-value="([^"]*)"/g;
  for (const m of svg.matchAll(re)) out.set(m[1], m[2]);
  return out;
}

describe('all five figure kinds render from golden-run outputs', () => {
  for (const kind of ['mode_map', 'field_map', 'line_cut', 'envelope_curve',
                      'comparison'] as FigureKind[]) {
    it(`renders ${kind}`, () => {
      const svg = render(specFor(kind));
      expect(svg.startsWith('<svg')).toBe(true);
      expect(svg.trimEnd().endsWith('</svg>')).toBe(true);
    });
  }
});

describe('numeric annotations round-trip to their sources', () => {
  it('mode_map and field_map carry the field report values', () => {
    const report = readJson(join(FIELD_RUN, 'field.json'));
    for (const kind of ['mode_map', 'field_map'] as FigureKind[]) {
      const ann = annotations(render(specFor(kind)));
      expect(ann.get('omega')).toBe(String(report.omega));
      if (kind === 'mode_map') {
        expect(ann.get('epsilon')).toBe(String(report.epsilon));
      } else {
        expect(ann.get('band')).toBe(String(report.band));
      }
    }
  });

  it('envelope_curve carries the fit record verbatim', () => {
    const spec = specFor('envelope_curve');
    const report = readJson(spec.inputs[1]);
    const ann = annotations(render(spec));
    expect(ann.get('fit_model')).toBe(String(report.fit_model));
    expect(ann.get('fit_coefficient')).toBe(String(report.fit_coefficient));
    expect(ann.get('fit_r2')).toBe(String(report.fit_r2));
    expect(ann.get('omega_star')).toBe(String(report.omega_star));
    expect(ann.get('slope_formula')).toBe(String(report.slope_formula));
    // and the values parse back to the exact JSON numbers
    expect(Number(ann.get('fit_coefficient'))).toBe(report.fit_coefficient);
  });

  it('comparison carries the mutual-exclusion record verbatim', () => {
    const compare = readJson(join(COMPARE_RUN, 'compare.json'));
    const ann = annotations(render(specFor('comparison')));
    const me = compare.mutual_exclusion;
    expect(ann.get('honeycomb_linear_spread'))
      .toBe(String(me.honeycomb_linear_spread));
    expect(ann.get('square_sqrt_spread')).toBe(String(me.square_sqrt_spread));
    expect(ann.get('exclusive')).toBe(String(me.exclusive));
    expect(me.exclusive).toBe(true);
  });
});

describe('manifest hash embedding', () => {
  it('every figure embeds its source manifest hash', () => {
    for (const kind of ['mode_map', 'field_map', 'line_cut', 'envelope_curve',
                        'comparison'] as FigureKind[]) {
      const spec = specFor(kind);
      const manifest = readJson(
        spec.inputs.find((p) => p.endsWith('manifest.json'))!);
      const svg = render(spec);
      expect(svg).toContain(
        `<metadata id="source-manifest">${manifest.config_sha256}</metadata>`);
      expect(svg).toContain(`source manifest ${manifest.config_sha256}`);
    }
  });
});

describe('determinism and schema guards', () => {
  it('rendering is deterministic for fixed inputs', () => {
    const spec = specFor('line_cut');
    expect(render(spec)).toBe(render(spec));
  });

  it('schema mismatch aborts with a column diff', () => {
    const dir = mkdtempSync(join(tmpdir(), 'badcsv-'));
    const bad = join(dir, 'field.csv');
    writeFileSync(bad, 'x,y,re,inside\n0,0,1,0\n');
    expect(() => readCsv(bad, ['x', 'y', 're_u', 'im_u', 'inside']))
      .toThrowError(SchemaMismatchError);
    try {
      readCsv(bad, ['x', 'y', 're_u', 'im_u', 'inside']);
    } catch (err) {
      const msg = String((err as Error).message);
      expect(msg).toContain('expected: x, y, re_u, im_u, inside');
      expect(msg).toContain('missing:  re_u, im_u');
      expect(msg).toContain('extra:    re');
    }
  });

  it('csv reader parses the solver number format', () => {
    const table = readCsv(join(FIELD_RUN, 'field_line.csv'),
                          ['x', 're_u', 'im_u', 'inside']);
    expect(table.rows.length).toBeGreaterThan(100);
    expect(Number.isFinite(table.rows[0][0])).toBe(true);
  });
});
